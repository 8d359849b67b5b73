"""Shared helpers for the test suite."""

from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np
import pytest

from meetmine.corpus import (
    Alphabet,
    Corpus,
    DialogueAct,
    Meeting,
    Suggestion,
)
from meetmine.wordstats import SuggestionMatrix


def build_matrix(row_defs) -> SuggestionMatrix:
    """SuggestionMatrix from (word set, accepted bool) pairs."""
    vocab = tuple(sorted(set().union(*(w for w, _ in row_defs))))
    idx = {w: j for j, w in enumerate(vocab)}
    rows = np.zeros((len(row_defs), len(vocab)), dtype=np.int8)
    labels = np.empty(len(row_defs), dtype=np.int64)
    for i, (words, acc) in enumerate(row_defs):
        labels[i] = 1 if acc else -1
        for w in words:
            rows[i, idx[w]] = 1
    return SuggestionMatrix(vocab, rows, labels)


DECISION_LABELS = (
    "act-directive", "offer", "accept", "reject", "info-request", "information",
)

_SUGGESTION_TEXTS = [
    ("maybe we could use a rubber case for the remote", True),
    ("yeah I think the rubber grip works", True),
    ("how about a titanium shell instead", False),
    ("we should just drop the LCD screen", False),
    ("yeah let us keep the scroll wheel", True),
    ("perhaps a solar cell on the back", False),
    ("I suggest bright fruity colors for the casing", True),
    ("yeah the speech recognition chip fits the budget", True),
    ("what if we add a beep locator feature", True),
    ("we might skip the docking station", False),
]


def suggestion_corpus(n_meetings: int = 3, seed: int = 9) -> Corpus:
    """Small corpus whose suggestions carry text, for word statistics."""
    rng = random.Random(seed)
    meetings = []
    for mid in range(n_meetings):
        acts = []
        suggestions = []
        for i in range(40):
            label = rng.choice(DECISION_LABELS)
            text = None
            if i % 4 == 1:
                text, acc = _SUGGESTION_TEXTS[(mid * 10 + i // 4) % 10]
                suggestions.append(Suggestion(i, acc))
            acts.append(DialogueAct(float(i), f"p{i % 4}", label, text=text))
        meetings.append(
            Meeting(
                id=f"fix-{mid}",
                acts=tuple(acts),
                decision_windows=((5.0, 20.0),),
                suggestions=tuple(suggestions),
            )
        )
    return Corpus(alphabet=Alphabet(DECISION_LABELS), meetings=tuple(meetings))


@pytest.fixture()
def suggestion_corpus_file(tmp_path):
    from meetmine.corpus import save_corpus

    path = tmp_path / "sugg.jsonl"
    save_corpus(suggestion_corpus(), path)
    return path


@pytest.fixture()
def lexicon_file(tmp_path):
    path = tmp_path / "lex.txt"
    path.write_text("rubber\nyeah\nscroll\nfruity\n", encoding="utf-8")
    return path


def manifest_outputs(manifest_path) -> list[Path]:
    with open(manifest_path, encoding="utf-8") as fh:
        return [Path(p) for p in json.load(fh)["outputs"]]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One verdict line per release-gate criterion."""
    import re

    rows = {}
    for status, verdict in (("passed", "PASS"), ("failed", "FAIL"),
                            ("error", "FAIL")):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            match = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)",
                              nodeid)
            if match:
                rows[int(match.group(1))] = (verdict, match.group(2))
    if rows:
        terminalreporter.write_line("")
        for number in sorted(rows):
            verdict, slug = rows[number]
            terminalreporter.write_line(
                f"ACCEPTANCE {number:02d} {verdict} {slug}")
