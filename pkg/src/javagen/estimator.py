"""scikit-learn style text-to-code generator."""

from __future__ import annotations

from typing import Dict, Optional

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from javagen.metrics import exact_match
from javagen.tokenizer import Vocabulary, train_vocab
from javagen.train import TrainingRunConfig, finetune, generate, model_from_checkpoint
from javagen.validation import check_paired_texts, check_texts


class Text2CodeGenerator(BaseEstimator):
    """Fine-tunes a seq2seq transformer on (nl, code) pairs.

    ``fit(X, y)`` takes descriptions ``X`` and code ``y``; ``predict`` returns
    greedy-decoded code and ``score`` returns exact match in percent. A
    vocabulary is trained on ``X + y`` unless one is passed in.
    """

    def __init__(
        self,
        vocab_size: int = 512,
        steps: int = 500,
        batch_size: int = 16,
        input_len: int = 64,
        target_len: int = 128,
        learning_rate: float = 3e-3,
        model_preset: str = "toy",
        model_overrides: Optional[Dict[str, int]] = None,
        init_checkpoint: Optional[str] = None,
        vocabulary: Optional[Vocabulary] = None,
        seed: int = 0,
    ):
        self.vocab_size = vocab_size
        self.steps = steps
        self.batch_size = batch_size
        self.input_len = input_len
        self.target_len = target_len
        self.learning_rate = learning_rate
        self.model_preset = model_preset
        self.model_overrides = model_overrides
        self.init_checkpoint = init_checkpoint
        self.vocabulary = vocabulary
        self.seed = seed

    def _run_config(self) -> TrainingRunConfig:
        return TrainingRunConfig(
            mode="finetune",
            steps=self.steps,
            batch_size=self.batch_size,
            input_len=self.input_len,
            target_len=self.target_len,
            learning_rate=self.learning_rate,
            model_preset=self.model_preset,
            model_overrides=dict(self.model_overrides or {}),
            init_checkpoint=self.init_checkpoint,
            seed=self.seed,
        )

    def fit(self, X, y):
        X, y = check_paired_texts(X, y)
        if not X:
            raise ValueError("cannot fit on zero samples")
        config = self._run_config()
        self.vocab_ = self.vocabulary if self.vocabulary is not None else train_vocab(X + y, self.vocab_size)
        result = finetune(config, self.vocab_, list(zip(X, y)))
        self.checkpoint_ = result.checkpoint
        self.loss_curve_ = result.losses
        self.samples_truncated_ = result.samples_truncated
        self.model_ = model_from_checkpoint(result.checkpoint)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_texts(X)
        return generate(self.model_, self.vocab_, X, self.input_len, self.target_len)

    def score(self, X, y) -> float:
        X, y = check_paired_texts(X, y)
        return exact_match(self.predict(X), y)
