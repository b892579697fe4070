import pytest


@pytest.fixture(autouse=True)
def _isolate_seed_env(monkeypatch):
    # keep an ambient LSL_SEED from leaking into CLI tests
    monkeypatch.delenv("LSL_SEED", raising=False)
