"""Direction-splitting artificial-compressibility solver on Yin-Yang shells."""

__version__ = "0.1.0"
