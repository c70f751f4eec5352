"""Out-domain examples for generative models: latent search attack and defender gate."""

__version__ = "0.1.0"
