"""Text-to-Java generation workbench: corpus tools, BPE, span corruption,
a small T5-style encoder-decoder, training loops, and BLEU/EM/CodeBLEU."""

__version__ = "0.1.0"
