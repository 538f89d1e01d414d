"""Shared exception base class."""


class HalgenError(Exception):
    """Base class for every error raised by this package."""
