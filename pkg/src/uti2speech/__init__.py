"""Ultrasound tongue images to speech: autoencoder features, a feed-forward
MGC-LSP estimator and an MGLSA vocoder, plus a synthetic parallel corpus."""

__version__ = "0.1.0"
