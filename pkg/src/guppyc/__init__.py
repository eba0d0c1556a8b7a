"""A standalone compiler and reference executor for a Guppy-dialect language."""
