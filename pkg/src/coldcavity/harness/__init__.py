"""Experiment runner: config files, CSV tables, parameter sweeps and the CLI."""
