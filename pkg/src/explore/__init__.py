"""Exploration and exploitation behavior policies."""
