"""Workflow engine and job broker for hybrid quantum-classical optimization pipelines."""

__version__ = "0.1.0"
