"""Test package for sparsepr."""
