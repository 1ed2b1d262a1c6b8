"""Tests package for the copyless verifier."""
