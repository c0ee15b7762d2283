"""Zentrale Konstanten des Air-Writing Translaters."""
