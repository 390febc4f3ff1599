"""Higher-order expansions of roots of score functions."""
