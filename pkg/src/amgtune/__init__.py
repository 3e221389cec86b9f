"""amgtune: classical AMG whose strong threshold is picked per matrix by a
small convolutional regressor fed with a pooled image of the matrix."""

__version__ = "0.1.0"
