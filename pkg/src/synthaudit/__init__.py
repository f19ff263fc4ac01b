"""Privacy and quality audits for synthetic tabular data generators."""

__version__ = "0.1.0"
