import subprocess
import sys
from pathlib import Path

import pytest

from islandq import load_resources

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

GRAMMAR = FIXTURES / "phonebook.grammar"
SCHEMA = FIXTURES / "phonebook.schema.json"
KB = FIXTURES / "phonebook.kb"
TABLE = FIXTURES / "phonebook.tsv"
GOLD = FIXTURES / "gold.jsonl"


@pytest.fixture(scope="session")
def resources():
    return load_resources(GRAMMAR, SCHEMA, KB, TABLE)


@pytest.fixture(scope="session")
def grammar(resources):
    return resources.grammar


@pytest.fixture(scope="session")
def gold_text():
    return GOLD.read_text(encoding="utf-8")


def run_cli(args, stdin: str | None = None):
    """Run the installed CLI in a fresh interpreter; returns the completed
    process with captured bytes."""
    return subprocess.run(
        [sys.executable, "-m", "islandq.cli", *args],
        input=stdin.encode("utf-8") if stdin is not None else None,
        capture_output=True,
    )


@pytest.fixture(scope="session")
def cli():
    return run_cli
