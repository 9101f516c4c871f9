import shutil
from pathlib import Path

import pytest


@pytest.fixture(autouse=True)
def no_env_outdir(monkeypatch):
    """Output paths in tests come from ``out`` or the settings, never the environment."""
    monkeypatch.delenv("FLOWSCHED_OUT", raising=False)


@pytest.fixture
def datadir(tmp_path: Path, request) -> Path:
    """
    A scratch directory holding the shared instance files of ``tests/common/``
    and, where present, the folder named after the test module.
    """
    module = Path(request.module.__file__)
    for src in (module.parent / "common", module.with_suffix("")):
        if src.is_dir():
            shutil.copytree(src, tmp_path, dirs_exist_ok=True)
    print(f"{tmp_path=}")
    return tmp_path
