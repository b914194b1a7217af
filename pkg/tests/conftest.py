from __future__ import annotations

from pathlib import Path

import pytest

from pulsestack.caldb import CalibrationStore, seed_store
from pulsestack.channels import builtin_registry as builtin_channels
from pulsestack.stdlib import builtin_registry
from pulsestack.xml_io import parse_experiment

CORPUS = Path(__file__).parent / "corpus"


@pytest.fixture(scope="session")
def store() -> CalibrationStore:
    return seed_store()


@pytest.fixture(scope="session")
def snapshot(store):
    return store.snapshot()


@pytest.fixture(scope="session")
def registry():
    return builtin_registry()


@pytest.fixture(scope="session")
def channels():
    return builtin_channels()


@pytest.fixture(scope="session")
def ising_ast():
    return parse_experiment((CORPUS / "ising_ramp.xml").read_text())


@pytest.fixture(scope="session")
def five_qubit_ast():
    return parse_experiment((CORPUS / "five_qubit_code.xml").read_text())


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS
