"""Bounded point derivations on analytic VMO spaces: criterion, contents and witnesses."""
__version__ = "0.1.0"
