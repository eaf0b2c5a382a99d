"""Training-set insertion attacks against k-nearest-neighbor classification."""

__version__ = "0.1.0"
