"""Attribution methods and relevance analysis for 12-lead ECG classifiers."""

__version__ = "0.1.0"
