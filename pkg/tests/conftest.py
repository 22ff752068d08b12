from __future__ import annotations

import csv
import sys
from pathlib import Path

import pytest

from ragmark.corpus import Document, DocumentType

TESTS_DIR = Path(__file__).resolve().parent
REPO_ROOT = TESTS_DIR.parent

# make naive_reference importable as a plain module from any test
if str(TESTS_DIR) not in sys.path:
    sys.path.insert(0, str(TESTS_DIR))


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return TESTS_DIR / "data"


@pytest.fixture(scope="session")
def demo_dir() -> Path:
    return REPO_ROOT / "demo"


@pytest.fixture(scope="session")
def golden_pairs(data_dir) -> list[tuple[str, str]]:
    with open(data_dir / "golden_pairs.csv", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        assert header == ["candidate", "reference"]
        pairs = [(row[0], row[1]) for row in reader]
    assert len(pairs) == 50
    return pairs


def make_doc(text: str, doc_id: str = "doc", doc_type=DocumentType.ARTICLE) -> Document:
    return Document(
        id=doc_id, doc_type=doc_type, title=doc_id, text=text, source_path="<memory>"
    )
