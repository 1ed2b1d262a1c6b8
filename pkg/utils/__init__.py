"""Utility modules for the copyless verifier."""
