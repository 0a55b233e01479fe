# Null-vector and spectral-vector phase retrieval initializers with Monte Carlo validation

__version__ = "1.0.0"
