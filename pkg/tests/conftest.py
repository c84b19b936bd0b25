"""Shared fixtures: hand-built micro corpora and cached synthetic corpora."""

import json

import pytest

from miarec import corpus as corpus_mod
from miarec import hetnet


def make_paper(pid, authors, references=(), year=2020, venue="V", keywords=(), title="t", abstract=None, orgs=None):
    orgs = orgs or {}
    obj = {
        "id": pid,
        "title": title,
        "year": year,
        "venue": venue,
        "keywords": list(keywords),
        "authors": [
            {"id": a, "name": f"Name {a}", **({"org": orgs[a]} if a in orgs else {})}
            for a in authors
        ],
        "references": list(references),
    }
    if abstract is not None:
        obj["abstract"] = abstract
    return obj


def corpus_from(records):
    return corpus_mod.parse_jsonl(json.dumps(r) for r in records)


@pytest.fixture
def two_paper_corpus():
    # B cites A; A authored solely by s1
    return corpus_from(
        [
            make_paper("A", ["s1"], year=2018, keywords=["x", "y"]),
            make_paper("B", ["s2"], references=["A"], year=2019, keywords=["y", "z"]),
        ]
    )


@pytest.fixture(scope="session")
def small_synthetic():
    return corpus_mod.generate_synthetic(2, 8, 4, 0.9, 3)


@pytest.fixture(scope="session")
def small_network(small_synthetic):
    return hetnet.build_network(small_synthetic)


@pytest.fixture(scope="session")
def medium_synthetic():
    return corpus_mod.generate_synthetic(3, 12, 5, 0.85, 5)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
