"""anymesh: a desk-scale any-to-any multimodal model over two synthetic modalities."""

__version__ = "0.1.0"
