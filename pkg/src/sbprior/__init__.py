"""Stick-breaking priors and variational posteriors."""
