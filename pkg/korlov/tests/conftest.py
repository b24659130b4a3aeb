import sys
import pathlib

import pytest

# Ensure the repository root is importable so `import korlov` works
ROOT = pathlib.Path(__file__).resolve().parents[2]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

# Prevent pydantic-settings from reading a developer's .env during tests;
# a stray KORLOV_FIELD there would change every computed table.
try:
    import pydantic_settings.sources as _psources
    _psources.DotEnvSettingsSource._read_env_files = lambda self, case_sensitive: {}
except Exception:
    # If pydantic-settings internals change, don't fail tests at import time.
    pass


@pytest.fixture(autouse=True)
def _clean_settings(monkeypatch):
    from korlov.core.config import settings

    monkeypatch.setattr(settings, "FIELD", None)
    monkeypatch.setattr(settings, "STABILIZATION_WINDOW", 3)
    monkeypatch.setattr(settings, "CERTIFICATION_TAIL", 3)
    monkeypatch.setattr(settings, "THREADS", 1)
    yield


@pytest.fixture
def qq():
    from korlov.services.exactlin import Field

    return Field.rationals()


@pytest.fixture
def fp():
    from korlov.services.exactlin import Field

    return Field.prime(32003)
