"""Federated DDQN simulator for RAN slice PRB allocation."""

__version__ = "0.1.0"
