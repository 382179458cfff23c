"""Experiment configuration, orchestration, persistence and plots."""
