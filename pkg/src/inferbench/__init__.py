"""inferbench: a desk-scale nine-test CNN inference benchmark harness."""

__version__ = "0.1.0"
