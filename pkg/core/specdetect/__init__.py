"""specdetect: label-free analyte detection in time-resolved spectral matrices."""

__version__ = "0.1.0"
