"""Heterogeneous distributed SGD simulation addon for opentaskpy."""
