"""
Shared fixtures: the example corpus and a loader for inline programs.
"""

from pathlib import Path
from typing import Callable

import pytest

from lang.resolver import ResolvedProgram
from tools.reports import load_program
from utils.settings import Settings

CORPUS_DIR = Path(__file__).resolve().parent.parent / "corpus"


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS_DIR


@pytest.fixture
def corpus_source() -> Callable[[str], str]:
    def read(name: str) -> str:
        return (CORPUS_DIR / name).read_text(encoding="utf-8")

    return read


@pytest.fixture
def load_corpus(corpus_source) -> Callable[[str], ResolvedProgram]:
    def load(name: str) -> ResolvedProgram:
        return load_program(corpus_source(name))

    return load


@pytest.fixture
def settings() -> Settings:
    """Defaults, independent of the caller's environment."""
    return Settings()
