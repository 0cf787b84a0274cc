"""Real/bogus transient classification on DIA postage stamps.

Self-contained pipeline: synthetic DIA-set generation, FITS I/O,
preprocessing, a from-scratch differentiable CNN engine, training,
metrics, and gradient-saliency analysis.
"""

__version__ = "0.1.0"
