"""halgen: detect, regenerate, and validate missing HAL elements in embedded C projects."""

__version__ = "0.1.0"
