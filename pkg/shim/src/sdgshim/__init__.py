"""Reference adapter for the synthaudit external-generator protocol."""

__version__ = "0.1.0"
