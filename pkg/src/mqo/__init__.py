"""Multi-query optimization over an AND-OR DAG."""

__version__ = "0.1.0"
