"""Experiment pipelines wiring the modules together for the command-line tool."""
