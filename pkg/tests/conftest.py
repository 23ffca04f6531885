"""Shared fixtures: repository paths and optional real datasets."""
from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent
DATA = REPO / "data"


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO


@pytest.fixture(scope="session")
def iris_csv() -> Path:
    path = DATA / "iris.csv"
    if not path.exists():
        pytest.fail("data/iris.csv is missing; it ships with the repository")
    return path


@pytest.fixture(scope="session")
def abalone_data() -> Path:
    """The raw UCI abalone file; not redistributable, so optional."""
    path = DATA / "abalone.data"
    if not path.exists():
        pytest.skip(
            "data/abalone.data not present; fetch the UCI abalone dataset "
            "into data/ to enable this test (see README, Datasets)"
        )
    return path


@pytest.fixture(scope="session")
def arcene_csvs() -> tuple[Path, Path]:
    """Converted arcene train/validation CSVs, built from the raw files if needed."""
    train, valid = DATA / "arcene_train.csv", DATA / "arcene_valid.csv"
    if not (train.exists() and valid.exists()):
        raw = [
            DATA / f"arcene_{part}.{ext}"
            for part in ("train", "valid")
            for ext in ("data", "labels")
        ]
        if all(p.exists() for p in raw):
            subprocess.run(
                [sys.executable, str(REPO / "scripts" / "convert_arcene.py")],
                check=True,
                cwd=REPO,
            )
        else:
            pytest.skip(
                "arcene files not present; place the four raw UCI arcene files "
                "(arcene_train.data/.labels, arcene_valid.data/.labels) in data/ "
                "and they are converted automatically (see README, Datasets)"
            )
    return train, valid
