"""Stateless job handlers and the worker harness that runs them."""
