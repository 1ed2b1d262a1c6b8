"""Analyses over resolved programs: contracts, verifier, interpreter."""
