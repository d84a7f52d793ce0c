"""Dual-resource-constrained flexible job-shop scheduling: simulation-based
decoding, memetic search and a PPO dispatching agent."""

__version__ = "0.1.0"
