import pytest


@pytest.fixture
def announce(capsys):
    """Print a per-criterion verdict line on the real terminal."""

    def _announce(criterion, ok, detail=""):
        tail = f" - {detail}" if detail else ""
        with capsys.disabled():
            print(f"[ACCEPTANCE {criterion}] {'PASS' if ok else 'FAIL'}{tail}", flush=True)

    return _announce
