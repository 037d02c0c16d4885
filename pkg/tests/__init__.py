"""switching-game test suite."""
