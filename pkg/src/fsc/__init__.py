"""Finite-state controllers."""
