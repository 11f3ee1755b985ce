"""Group-theoretic tools and a synthetic benchmark for testing whether learned
spatial embeddings compose like the transformations that produced them."""

__version__ = "0.1.0"
