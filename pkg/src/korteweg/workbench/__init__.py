"""Experiment runner: configs, run directories, sweeps and comparisons."""
