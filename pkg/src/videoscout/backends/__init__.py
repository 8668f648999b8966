"""Backends: simulated and HTTP implementations of the model interfaces."""
