import pytest


@pytest.fixture
def announce(capsys):
    """Print one uncaptured pass/fail line for an acceptance criterion."""

    def _announce(num, name, ok):
        with capsys.disabled():
            print(f"\n[criterion {num:02d}] {name}: {'PASS' if ok else 'FAIL'}")

    return _announce
