"""Test switching-game."""

import switching_game


def test_import() -> None:
    """Test that the package can be imported."""
    assert isinstance(switching_game.__name__, str)
