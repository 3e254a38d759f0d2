"""Software twin of an island-style eFPGA and its digital periphery."""

__version__ = "0.1.0"
