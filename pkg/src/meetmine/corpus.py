"""Corpus data model, JSONL serialization, and synthetic generators.

A corpus file is JSON Lines: the first line declares the alphabet,

    {"alphabet": ["SP", "SN", "AP", "AN"]}

and every following line is one meeting,

    {"id": "m01",
     "acts": [{"t": 0.0, "spk": "p0", "act": "SP", "text": "hi"}, ...],
     "decision_windows": [[120.0, 410.5]],
     "suggestions": [{"i": 7, "accepted": true}]}

``t`` is seconds from meeting start, nondecreasing and nonnegative.  The
``text`` field and the two annotation lists are optional.  Synthetic corpora
space acts one second apart so that count windows and time windows coincide.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Collection, Iterator, Sequence

from .templates import Template, successors

__all__ = [
    "DECISION_ACTS",
    "TEMPLATE_ACTS",
    "Alphabet",
    "DialogueAct",
    "Suggestion",
    "Meeting",
    "Corpus",
    "CorpusFormatError",
    "parse_corpus",
    "serialize_corpus",
    "load_corpus",
    "save_corpus",
    "project_sequence",
    "synth_template_corpus",
    "synth_decision_corpus",
]

# canonical decision-relevant dialogue acts, in feature-vector order
DECISION_ACTS: tuple[str, ...] = (
    "act-directive",
    "offer",
    "accept",
    "reject",
    "info-request",
    "information",
)

# canonical coarse acts used for structure mining: social/assessment x polarity
TEMPLATE_ACTS: tuple[str, ...] = ("SP", "SN", "AP", "AN")


class CorpusFormatError(ValueError):
    """Raised for malformed corpus files; message names the offending line."""


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of act labels."""

    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        labels = tuple(str(x) for x in self.labels)
        if not labels:
            raise ValueError("alphabet must contain at least one label")
        if any(not lab for lab in labels):
            raise ValueError("alphabet labels must be nonempty strings")
        if len(set(labels)) != len(labels):
            raise ValueError("alphabet labels must be unique")
        object.__setattr__(self, "labels", labels)

    def __iter__(self) -> Iterator[str]:
        return iter(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class DialogueAct:
    time: float
    speaker: str
    label: str
    text: str | None = None

    def __post_init__(self) -> None:
        if self.time < 0:
            raise ValueError(f"negative timestamp {self.time}")


@dataclass(frozen=True)
class Suggestion:
    act_index: int
    accepted: bool


@dataclass(frozen=True)
class Meeting:
    id: str
    acts: tuple[DialogueAct, ...]
    decision_windows: tuple[tuple[float, float], ...] = ()
    suggestions: tuple[Suggestion, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "acts", tuple(self.acts))
        object.__setattr__(
            self,
            "decision_windows",
            tuple((float(a), float(b)) for a, b in self.decision_windows),
        )
        object.__setattr__(self, "suggestions", tuple(self.suggestions))
        for prev, cur in zip(self.acts, self.acts[1:]):
            if cur.time < prev.time:
                raise ValueError(
                    f"meeting {self.id!r}: timestamps must be nondecreasing"
                )
        for t0, t1 in self.decision_windows:
            if t0 < 0 or t1 < t0:
                raise ValueError(
                    f"meeting {self.id!r}: invalid decision window ({t0}, {t1})"
                )
        for sug in self.suggestions:
            if not 0 <= sug.act_index < len(self.acts):
                raise ValueError(
                    f"meeting {self.id!r}: suggestion index {sug.act_index} "
                    f"out of range for {len(self.acts)} acts"
                )

    def labels(self) -> list[str]:
        return [a.label for a in self.acts]


@dataclass(frozen=True)
class Corpus:
    alphabet: Alphabet
    meetings: tuple[Meeting, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "meetings", tuple(self.meetings))
        if not self.meetings:
            raise ValueError("corpus must contain at least one meeting")
        for meeting in self.meetings:
            for act in meeting.acts:
                if act.label not in self.alphabet:
                    raise ValueError(
                        f"meeting {meeting.id!r}: label {act.label!r} "
                        "not in corpus alphabet"
                    )

    def __len__(self) -> int:
        return len(self.meetings)


# ---------------------------------------------------------------------------
# JSONL parse / serialize


def _parse_meeting(record: dict, lineno: int, alphabet: Alphabet) -> Meeting:
    try:
        mid = str(record["id"])
        raw_acts = record["acts"]
    except (KeyError, TypeError) as exc:
        raise CorpusFormatError(f"line {lineno}: meeting record missing {exc}") from exc
    if not isinstance(raw_acts, list):
        raise CorpusFormatError(f"line {lineno}: 'acts' must be a list")
    acts = []
    for k, raw in enumerate(raw_acts):
        try:
            t = float(raw["t"])
            spk = str(raw["spk"])
            label = str(raw["act"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(f"line {lineno}: act {k} malformed: {exc}") from exc
        if label not in alphabet:
            raise CorpusFormatError(
                f"line {lineno}: act {k} has label {label!r} not in alphabet"
            )
        if t < 0:
            raise CorpusFormatError(f"line {lineno}: act {k} has negative timestamp")
        text = raw.get("text")
        acts.append(DialogueAct(time=t, speaker=spk, label=label,
                                text=None if text is None else str(text)))
    windows = []
    for k, raw in enumerate(record.get("decision_windows", [])):
        try:
            t0, t1 = float(raw[0]), float(raw[1])
        except (TypeError, ValueError, IndexError) as exc:
            raise CorpusFormatError(
                f"line {lineno}: decision window {k} malformed: {exc}"
            ) from exc
        windows.append((t0, t1))
    suggestions = []
    for k, raw in enumerate(record.get("suggestions", [])):
        try:
            idx = int(raw["i"])
            accepted = bool(raw["accepted"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(
                f"line {lineno}: suggestion {k} malformed: {exc}"
            ) from exc
        suggestions.append(Suggestion(act_index=idx, accepted=accepted))
    try:
        return Meeting(id=mid, acts=tuple(acts), decision_windows=tuple(windows),
                       suggestions=tuple(suggestions))
    except ValueError as exc:
        raise CorpusFormatError(f"line {lineno}: {exc}") from exc


def parse_corpus(text: str) -> Corpus:
    """Parse JSONL corpus text; errors name the offending 1-based line."""
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        raise CorpusFormatError("empty corpus: no header line")
    header_line = lines[0]
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"line 1: invalid JSON: {exc}") from exc
    if not isinstance(header, dict) or "alphabet" not in header:
        raise CorpusFormatError("line 1: header must be an object with 'alphabet'")
    try:
        alphabet = Alphabet(tuple(header["alphabet"]))
    except (TypeError, ValueError) as exc:
        raise CorpusFormatError(f"line 1: bad alphabet: {exc}") from exc

    meetings = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise CorpusFormatError(f"line {lineno}: meeting must be a JSON object")
        meetings.append(_parse_meeting(record, lineno, alphabet))
    if not meetings:
        raise CorpusFormatError("empty corpus: no meeting lines")
    return Corpus(alphabet=alphabet, meetings=tuple(meetings))


def serialize_corpus(corpus: Corpus) -> str:
    """Inverse of :func:`parse_corpus`; stable key order, one line per meeting."""
    out = [json.dumps({"alphabet": list(corpus.alphabet)}, sort_keys=True)]
    for meeting in corpus.meetings:
        record: dict = {"id": meeting.id, "acts": []}
        for act in meeting.acts:
            raw = {"t": act.time, "spk": act.speaker, "act": act.label}
            if act.text is not None:
                raw["text"] = act.text
            record["acts"].append(raw)
        if meeting.decision_windows:
            record["decision_windows"] = [list(w) for w in meeting.decision_windows]
        if meeting.suggestions:
            record["suggestions"] = [
                {"i": s.act_index, "accepted": s.accepted} for s in meeting.suggestions
            ]
        out.append(json.dumps(record, sort_keys=True))
    return "\n".join(out) + "\n"


def load_corpus(path) -> Corpus:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_corpus(fh.read())


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_corpus(corpus))


# ---------------------------------------------------------------------------
# projection


def project_sequence(
    meeting: Meeting,
    keep: Collection[str] | None = None,
    collapse_same_speaker_repeats: bool = False,
) -> list[str]:
    """Label sequence of a meeting, optionally filtered and run-collapsed.

    ``keep`` restricts to a label subset.  Collapsing merges contiguous runs
    of acts that share both speaker and label (applied after filtering), so
    the operation is idempotent.
    """
    acts = [a for a in meeting.acts if keep is None or a.label in keep]
    if not collapse_same_speaker_repeats:
        return [a.label for a in acts]
    out: list[str] = []
    prev_key: tuple[str, str] | None = None
    for act in acts:
        key = (act.speaker, act.label)
        if key != prev_key:
            out.append(act.label)
        prev_key = key
    return out


# ---------------------------------------------------------------------------
# synthetic generators


def _sample_walk(template: Template, length: int, rng: random.Random) -> list[int]:
    """Uniform sample among all template walks of exactly ``length`` nodes."""
    n = len(template.nodes)
    succ = [successors(template, i) for i in range(n)]
    # counts[r][v] = number of walks of length r starting at v (exact big ints)
    counts = [[0] * n for _ in range(length + 1)]
    for v in range(n):
        counts[1][v] = 1
    for r in range(2, length + 1):
        for v in range(n):
            counts[r][v] = sum(counts[r - 1][s] for s in succ[v])
    total = sum(counts[length][v] for v in range(n))
    if total == 0:
        raise ValueError(
            f"template admits no instantiation of length {length}"
        )
    pick = rng.randrange(total)
    walk = []
    options = list(range(n))
    remaining = length
    while remaining > 0:
        weights = [counts[remaining][v] for v in options]
        acc = 0
        for v, w in zip(options, weights):
            acc += w
            if pick < acc:
                chosen = v
                break
            # fall through keeps scanning
        else:  # pragma: no cover - unreachable given total bookkeeping
            raise AssertionError("walk sampling overflow")
        pick -= acc - counts[remaining][chosen]
        walk.append(chosen)
        remaining -= 1
        options = list(succ[chosen])
    return walk


def _apply_noise(
    labels: list[str], alphabet: Sequence[str], noise_rate: float, rng: random.Random
) -> list[str]:
    out: list[str] = []
    for lab in labels:
        if rng.random() >= noise_rate:
            out.append(lab)
            continue
        op = rng.choice(("substitute", "insert", "delete"))
        if op == "substitute":
            others = [x for x in alphabet if x != lab]
            out.append(rng.choice(others) if others else lab)
        elif op == "insert":
            out.append(lab)
            out.append(rng.choice(list(alphabet)))
        # delete: emit nothing
    return out


def _acts_from_labels(labels: Sequence[str]) -> tuple[DialogueAct, ...]:
    # one second apart, four speakers round robin
    return tuple(
        DialogueAct(time=float(i), speaker=f"p{i % 4}", label=lab)
        for i, lab in enumerate(labels)
    )


def synth_template_corpus(
    template: Template,
    m: int,
    target_len: int,
    noise_rate: float,
    seed: int,
    alphabet: Alphabet | None = None,
) -> Corpus:
    """Corpus of ``m`` noisy instantiations of ``template``.

    Each meeting is a uniformly sampled instantiation of exactly
    ``target_len`` nodes; then each position is independently hit with
    probability ``noise_rate`` by a uniformly chosen substitution (to a
    different label), insertion, or deletion.  ``noise_rate=0`` reproduces
    instantiations verbatim, so their template loss is zero.
    """
    if m < 1:
        raise ValueError("empty corpus: m must be at least 1")
    if target_len < 1:
        raise ValueError("target_len must be at least 1")
    if not 0.0 <= noise_rate <= 1.0:
        raise ValueError("noise_rate must lie in [0, 1]")
    if alphabet is None:
        seen: list[str] = []
        for lab in template.nodes:
            if lab not in seen:
                seen.append(lab)
        alphabet = Alphabet(tuple(seen))
    else:
        for lab in template.nodes:
            if lab not in alphabet:
                raise ValueError(f"template label {lab!r} not in alphabet")
    rng = random.Random(seed)
    meetings = []
    for k in range(m):
        walk = _sample_walk(template, target_len, rng)
        labels = [template.nodes[i] for i in walk]
        noisy = _apply_noise(labels, tuple(alphabet), noise_rate, rng)
        if not noisy:
            noisy = [rng.choice(tuple(alphabet))]  # noise deleted everything
        meetings.append(Meeting(id=f"synth-{k:03d}", acts=_acts_from_labels(noisy)))
    return Corpus(alphabet=alphabet, meetings=tuple(meetings))


def _validate_rates(name: str, rates: Sequence[float]) -> list[float]:
    rates = [float(r) for r in rates]
    if len(rates) != len(DECISION_ACTS):
        raise ValueError(
            f"{name} must have {len(DECISION_ACTS)} entries, one per decision act"
        )
    if any(r < 0 for r in rates):
        raise ValueError(f"{name} must be nonnegative")
    if abs(sum(rates) - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1 (got {sum(rates)!r})")
    return rates


def synth_decision_corpus(
    m: int,
    window_size: int,
    inside_rates: Sequence[float],
    outside_rates: Sequence[float],
    seed: int,
    windows_per_meeting: int = 4,
) -> Corpus:
    """Decision-act corpus with one planted decision window per meeting.

    Each meeting consists of ``windows_per_meeting`` blocks of
    ``window_size`` acts; one block, chosen uniformly, is the decision
    window and draws its acts from ``inside_rates``, the rest from
    ``outside_rates``.  The default of four blocks yields the 3:1
    negative-to-positive window imbalance seen in real meeting data.
    """
    if m < 1:
        raise ValueError("empty corpus: m must be at least 1")
    if window_size < 1:
        raise ValueError("window_size must be at least 1")
    if windows_per_meeting < 2:
        raise ValueError("need at least 2 windows per meeting")
    inside = _validate_rates("inside_rates", inside_rates)
    outside = _validate_rates("outside_rates", outside_rates)
    rng = random.Random(seed)
    meetings = []
    for k in range(m):
        pos = rng.randrange(windows_per_meeting)
        labels: list[str] = []
        for w in range(windows_per_meeting):
            rates = inside if w == pos else outside
            labels.extend(rng.choices(DECISION_ACTS, weights=rates, k=window_size))
        acts = _acts_from_labels(labels)
        t0 = acts[pos * window_size].time
        t1 = acts[(pos + 1) * window_size - 1].time
        meetings.append(
            Meeting(
                id=f"synth-decision-{k:03d}",
                acts=acts,
                decision_windows=((t0, t1),),
            )
        )
    return Corpus(alphabet=Alphabet(DECISION_ACTS), meetings=tuple(meetings))
