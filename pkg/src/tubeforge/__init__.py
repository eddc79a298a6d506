"""Turn surveillance video plus person detections into labeled action tubes."""

__version__ = "0.1.0"
