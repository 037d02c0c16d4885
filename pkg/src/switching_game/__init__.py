"""switching-game."""
