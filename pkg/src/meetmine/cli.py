"""Command-line entry point.

One subcommand per analysis; every run resolves its settings from flags,
then an optional JSON config file, then built-in defaults (flags win), and
writes a manifest describing the resolved configuration, the corpus digest,
and every output file.  Re-running a subcommand with the same corpus and
the same resolved config reproduces the output files byte for byte: all
randomness flows from --seed and floats are formatted with a fixed %.12g.

Exit codes: 0 success, 2 usage, 3 missing file, 4 corpus format error,
5 validation error, 1 unexpected failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .annealing import AnnealConfig, multi_start, trace_to_csv
from .baselines import (
    consensus_string,
    fit_markov,
    fit_profile_hmm,
    markov_matrix_csv,
    markov_to_dot,
    top_transitions,
)
from .bounds import BoundInputs, log_count_templates, risk_bound
from .corpus import (
    CorpusFormatError,
    load_corpus,
    project_sequence,
    save_corpus,
    synth_decision_corpus,
    synth_template_corpus,
)
from .detection import (
    MODEL_KINDS,
    corpus_windows,
    cross_validate,
    metrics_csv,
    rank_features,
)
from .detection import ranking_csv as feature_ranking_csv
from .templates import ObjectiveParams, Template, template_to_dot, template_to_json
from .wordstats import (
    aggregate_lexicon_test,
    load_lexicon,
    screen_csv,
    svm_word_ranking,
    tokenize_suggestions,
    word_screen,
)
from .wordstats import ranking_csv as word_ranking_csv
from .wrapup import extract_points, fit_csv, fit_piecewise, model_to_json, points_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_CORPUS_FORMAT = 4
EXIT_VALIDATION = 5
EXIT_UNEXPECTED = 1

DEFAULT_INSIDE_RATES = (0.05, 0.05, 0.02, 0.02, 0.36, 0.50)
DEFAULT_OUTSIDE_RATES = (0.15, 0.15, 0.25, 0.15, 0.10, 0.20)


class _Resolver:
    """Flag > config file > default, tracking the resolved values."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        self.config = config
        self.resolved: dict = {}

    def get(self, name: str, default=None, cast=None):
        flag = getattr(self.args, name.replace("-", "_"), None)
        if flag is not None:
            value = flag
        elif name in self.config:
            value = self.config[name]
            if cast is not None:
                value = cast(value)
        else:
            value = default
        self.resolved[name] = value
        return value


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    # a previously written manifest can be replayed directly
    if "config" in data and "subcommand" in data:
        data = data["config"]
    return {str(k): v for k, v in data.items()}


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_text(path: str, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_manifest(
    manifest_path: str,
    subcommand: str,
    resolved: dict,
    outputs: list[str],
    corpus_path: str | None,
    seed: int | None,
) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": {k: v for k, v in sorted(resolved.items())},
        "corpus_sha256": _sha256(corpus_path) if corpus_path else None,
        "seed": seed,
        "version": __version__,
        "outputs": sorted(outputs),
    }
    _write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _parse_labels(text: str) -> tuple[str, ...]:
    labels = tuple(part.strip() for part in text.split(",") if part.strip())
    if not labels:
        raise ValueError("expected a comma-separated label list")
    return labels


def _parse_edges(text: str) -> frozenset[tuple[int, int]]:
    edges = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            frm, to = part.split(":")
            edges.add((int(frm), int(to)))
        except ValueError as exc:
            raise ValueError(f"bad back edge {part!r}; expected from:to") from exc
    return frozenset(edges)


def _parse_rates(value) -> tuple[float, ...]:
    if isinstance(value, str):
        parts = [p for p in value.split(",") if p.strip()]
        rates = tuple(float(p) for p in parts)
    else:
        rates = tuple(float(p) for p in value)
    return rates


def _sequences(corpus, keep, collapse):
    keep_set = set(_parse_labels(keep)) if keep else None
    return [
        project_sequence(m, keep=keep_set, collapse_same_speaker_repeats=collapse)
        for m in corpus.meetings
    ]


def _manifest_path(res: _Resolver, default: str) -> str:
    return res.get("manifest", default)


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_synth_template(res: _Resolver) -> list[str]:
    out = res.get("out", "template_corpus.jsonl")
    nodes = _parse_labels(res.get("nodes", "SP,AP,AN"))
    edges = _parse_edges(res.get("back-edges", ""))
    meetings = int(res.get("meetings", 30))
    target_len = int(res.get("target-len", 100))
    noise = float(res.get("noise", 0.1))
    alphabet = res.get("alphabet")
    seed = int(res.get("seed", 0))
    template = Template(nodes=nodes, back_edges=edges)
    corpus = synth_template_corpus(
        template,
        m=meetings,
        target_len=target_len,
        noise_rate=noise,
        seed=seed,
        alphabet=_parse_labels(alphabet) if alphabet else None,
    )
    save_corpus(corpus, out)
    return [out]


def _cmd_synth_decision(res: _Resolver) -> list[str]:
    out = res.get("out", "decision_corpus.jsonl")
    meetings = int(res.get("meetings", 250))
    window = int(res.get("window-size", 70))
    inside = _parse_rates(res.get("inside-rates", DEFAULT_INSIDE_RATES))
    outside = _parse_rates(res.get("outside-rates", DEFAULT_OUTSIDE_RATES))
    per_meeting = int(res.get("windows-per-meeting", 4))
    seed = int(res.get("seed", 0))
    corpus = synth_decision_corpus(
        m=meetings,
        window_size=window,
        inside_rates=inside,
        outside_rates=outside,
        seed=seed,
        windows_per_meeting=per_meeting,
    )
    save_corpus(corpus, out)
    return [out]


def _cmd_mine(res: _Resolver) -> list[str]:
    corpus_path = res.get("corpus")
    if not corpus_path:
        raise ValueError("mine requires --corpus")
    prefix = res.get("out-prefix", "mine")
    keep = res.get("keep")
    collapse = bool(res.get("collapse-repeats", False))
    restarts = res.get("restarts", 10)
    seed = int(res.get("seed", 0))
    config = AnnealConfig(
        t0=float(res.get("t0", 1000.0)),
        cooling=float(res.get("cooling", 0.95)),
        restart_period=int(res.get("restart-period", 800)),
        max_accepted=int(res.get("max-accepted", 4000)),
        max_proposals=(
            int(res.get("max-proposals")) if res.get("max-proposals") else None
        ),
        l_max=int(res.get("l-max", 20)),
        b_max=int(res.get("b-max", 5)),
        params=ObjectiveParams(
            c1=float(res.get("c1", 1.0)), c2=float(res.get("c2", 0.1))
        ),
        mode=res.get("mode", "exact"),
        delta=float(res.get("delta", 0.1)),
        seed=seed,
    )
    corpus = load_corpus(corpus_path)
    sequences = _sequences(corpus, keep, collapse)
    n_starts = None if restarts == "per-meeting" else int(restarts)
    result = multi_start(sequences, config, n_starts=n_starts)
    best = result.best
    outputs = []
    tpl_path = f"{prefix}.template.json"
    payload = json.loads(template_to_json(best.template))
    payload["objective"] = best.f
    payload["start_id"] = best.start_id
    _write_text(tpl_path, json.dumps(payload, sort_keys=True) + "\n")
    outputs.append(tpl_path)
    dot_path = f"{prefix}.template.dot"
    _write_text(dot_path, template_to_dot(best.template))
    outputs.append(dot_path)
    cons_path = f"{prefix}.consensus.json"
    run_f = {r.start_id: r.f for r in result.runs}
    groups = [
        {
            "size": g.size,
            "start_ids": list(g.start_ids),
            "objective": min(run_f[i] for i in g.start_ids),
            "template": json.loads(template_to_json(g.representative)),
        }
        for g in result.consensus.groups
    ]
    _write_text(
        cons_path,
        json.dumps(
            {
                "groups": groups,
                "modal_fraction": result.consensus.modal_fraction,
                "n_starts": len(result.runs),
            },
            sort_keys=True,
        )
        + "\n",
    )
    outputs.append(cons_path)
    trace_path = f"{prefix}.trace.csv"
    _write_text(trace_path, trace_to_csv(result.traces[best.start_id]))
    outputs.append(trace_path)
    return outputs


def _cmd_bound(res: _Resolver) -> list[str]:
    out = res.get("out", "bound.json")
    inputs = BoundInputs(
        emp_risk=float(res.get("remp", 0.0)),
        m=int(res.get("m", 1)),
        l_max=int(res.get("L", 20)),
        b_max=int(res.get("B", 5)),
        alphabet_size=int(res.get("alphabet", 4)),
        delta=float(res.get("delta", 0.05)),
    )
    loss_scale = float(res.get("loss-scale", 1.0))
    value = risk_bound(inputs, loss_scale=loss_scale)
    payload = {
        "empirical_risk": inputs.emp_risk,
        "m": inputs.m,
        "l_max": inputs.l_max,
        "b_max": inputs.b_max,
        "alphabet_size": inputs.alphabet_size,
        "delta": inputs.delta,
        "loss_scale": loss_scale,
        "log_template_count": log_count_templates(
            inputs.l_max, inputs.b_max, inputs.alphabet_size
        ),
        "bound": value,
    }
    _write_text(out, json.dumps(payload, sort_keys=True) + "\n")
    return [out]


def _cmd_detect(res: _Resolver) -> list[str]:
    corpus_path = res.get("corpus")
    if not corpus_path:
        raise ValueError("detect requires --corpus")
    out = res.get("out", "metrics.csv")
    window = int(res.get("window-size", 70))
    folds = int(res.get("folds", 15))
    seed = int(res.get("seed", 0))
    models = res.get("models", ",".join(MODEL_KINDS))
    kinds = _parse_labels(models)
    for kind in kinds:
        if kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind: {kind!r}")
    corpus = load_corpus(corpus_path)
    examples = corpus_windows(corpus.meetings, window_size=window)
    rows = [
        (kind, cross_validate(examples, kind, folds=folds, seed=seed))
        for kind in kinds
    ]
    _write_text(out, metrics_csv(rows))
    return [out]


def _cmd_rank_features(res: _Resolver) -> list[str]:
    corpus_path = res.get("corpus")
    if not corpus_path:
        raise ValueError("rank-features requires --corpus")
    out = res.get("out", "feature_ranking.csv")
    window = int(res.get("window-size", 70))
    folds = int(res.get("folds", 15))
    seed = int(res.get("seed", 0))
    corpus = load_corpus(corpus_path)
    examples = corpus_windows(corpus.meetings, window_size=window)
    ranked = rank_features(examples, folds=folds, seed=seed)
    _write_text(out, feature_ranking_csv(ranked))
    return [out]


def _cmd_markov(res: _Resolver) -> list[str]:
    corpus_path = res.get("corpus")
    if not corpus_path:
        raise ValueError("markov requires --corpus")
    prefix = res.get("out-prefix", "markov")
    keep = res.get("keep")
    collapse = bool(res.get("collapse-repeats", False))
    top = int(res.get("top", 4))
    corpus = load_corpus(corpus_path)
    chain = fit_markov(_sequences(corpus, keep, collapse))
    outputs = []
    csv_path = f"{prefix}.csv"
    _write_text(csv_path, markov_matrix_csv(chain))
    outputs.append(csv_path)
    dot_path = f"{prefix}.dot"
    _write_text(dot_path, markov_to_dot(chain))
    outputs.append(dot_path)
    ranked, short = top_transitions(chain, top)
    top_path = f"{prefix}.top.json"
    _write_text(
        top_path,
        json.dumps(
            {
                "transitions": [
                    {"from": a, "to": b, "prob": p} for a, b, p in ranked
                ],
                "requested": top,
                "shortfall": short,
            },
            sort_keys=True,
        )
        + "\n",
    )
    outputs.append(top_path)
    return outputs


def _cmd_phmm(res: _Resolver) -> list[str]:
    corpus_path = res.get("corpus")
    if not corpus_path:
        raise ValueError("phmm requires --corpus")
    length = res.get("length")
    if length is None:
        raise ValueError("phmm requires --length")
    out = res.get("out", "phmm.json")
    keep = res.get("keep")
    collapse = bool(res.get("collapse-repeats", False))
    pseudocount = float(res.get("pseudocount", 0.1))
    iterations = int(res.get("iterations", 20))
    seed = int(res.get("seed", 0))
    corpus = load_corpus(corpus_path)
    sequences = [s for s in _sequences(corpus, keep, collapse) if s]
    model = fit_profile_hmm(
        sequences,
        length=int(length),
        pseudocount=pseudocount,
        iterations=iterations,
        seed=seed,
    )
    payload = {
        "length": model.length,
        "alphabet": list(model.labels),
        "consensus": consensus_string(model),
        "match_emissions": [
            [float(v) for v in row] for row in model.em[1:]
        ],
        "log_likelihood_history": list(model.ll_history),
    }
    _write_text(out, json.dumps(payload, sort_keys=True) + "\n")
    return [out]


def _cmd_wrapup(res: _Resolver) -> list[str]:
    corpus_path = res.get("corpus")
    if not corpus_path:
        raise ValueError("wrapup requires --corpus")
    prefix = res.get("out-prefix", "wrapup")
    corpus = load_corpus(corpus_path)
    points = extract_points(corpus)
    model = fit_piecewise(points)
    outputs = []
    pts_path = f"{prefix}.points.csv"
    _write_text(pts_path, points_csv(points))
    outputs.append(pts_path)
    model_path = f"{prefix}.model.json"
    _write_text(model_path, model_to_json(model) + "\n")
    outputs.append(model_path)
    fit_path = f"{prefix}.fit.csv"
    _write_text(fit_path, fit_csv(points, model))
    outputs.append(fit_path)
    return outputs


def _cmd_persuade(res: _Resolver) -> list[str]:
    corpus_path = res.get("corpus")
    if not corpus_path:
        raise ValueError("persuade requires --corpus")
    lexicon_path = res.get("lexicon")
    if not lexicon_path:
        raise ValueError("persuade requires --lexicon")
    out = res.get("out", "persuade.json")
    corpus = load_corpus(corpus_path)
    matrix = tokenize_suggestions(corpus)
    lexicon = load_lexicon(lexicon_path)
    table, result = aggregate_lexicon_test(matrix, lexicon)
    payload = {
        "table": {"a": table.a, "b": table.b, "c": table.c, "d": table.d},
        "p_two_sided": result.p_two_sided,
        "p_one_sided": result.p_one_sided,
        "degenerate": result.degenerate,
        "lexicon_size": len(lexicon),
        "n_suggestions": int(len(matrix.labels)),
    }
    _write_text(out, json.dumps(payload, sort_keys=True) + "\n")
    return [out]


def _cmd_screen_words(res: _Resolver) -> list[str]:
    corpus_path = res.get("corpus")
    if not corpus_path:
        raise ValueError("screen-words requires --corpus")
    alpha = float(res.get("alpha", 0.05))
    folds = int(res.get("folds", 5))
    seed = int(res.get("seed", 0))
    screen_out = res.get("out", "screen.csv")
    ranking_out = res.get("ranking-out")
    corpus = load_corpus(corpus_path)
    matrix = tokenize_suggestions(corpus)
    rows = word_screen(matrix, alpha)
    _write_text(screen_out, screen_csv(rows))
    outputs = [screen_out]
    if ranking_out:
        restricted = res.get("screen-alpha")
        result = svm_word_ranking(
            matrix,
            folds=folds,
            seed=seed,
            screen_alpha=float(restricted) if restricted is not None else None,
        )
        header = (
            f"# held-out accuracy {result.accuracy_mean:.12g}"
            f" +- {result.accuracy_std:.12g}\n"
        )
        _write_text(ranking_out, header + word_ranking_csv(result))
        outputs.append(ranking_out)
    return outputs


_HANDLERS = {
    "synth-template": (_cmd_synth_template, False),
    "synth-decision": (_cmd_synth_decision, False),
    "mine": (_cmd_mine, True),
    "bound": (_cmd_bound, False),
    "detect": (_cmd_detect, True),
    "rank-features": (_cmd_rank_features, True),
    "markov": (_cmd_markov, True),
    "phmm": (_cmd_phmm, True),
    "wrapup": (_cmd_wrapup, True),
    "persuade": (_cmd_persuade, True),
    "screen-words": (_cmd_screen_words, True),
}

_FLAG_SPECS: dict[str, list[tuple[str, dict]]] = {
    "synth-template": [
        ("--out", {}),
        ("--nodes", {"help": "comma-separated node labels"}),
        ("--back-edges", {"help": "comma-separated from:to pairs"}),
        ("--meetings", {"type": int}),
        ("--target-len", {"type": int}),
        ("--noise", {"type": float}),
        ("--alphabet", {"help": "comma-separated alphabet (default: node labels)"}),
    ],
    "synth-decision": [
        ("--out", {}),
        ("--meetings", {"type": int}),
        ("--window-size", {"type": int}),
        ("--inside-rates", {"help": "six comma-separated probabilities"}),
        ("--outside-rates", {"help": "six comma-separated probabilities"}),
        ("--windows-per-meeting", {"type": int}),
    ],
    "mine": [
        ("--corpus", {}),
        ("--out-prefix", {}),
        ("--keep", {"help": "restrict to these labels before mining"}),
        ("--collapse-repeats", {"action": "store_const", "const": True}),
        ("--restarts", {"help": "integer or 'per-meeting'"}),
        ("--c1", {"type": float}),
        ("--c2", {"type": float}),
        ("--l-max", {"type": int}),
        ("--b-max", {"type": int}),
        ("--mode", {"choices": ["exact", "windowed"]}),
        ("--delta", {"type": float}),
        ("--t0", {"type": float}),
        ("--cooling", {"type": float}),
        ("--restart-period", {"type": int}),
        ("--max-accepted", {"type": int}),
        ("--max-proposals", {"type": int}),
    ],
    "bound": [
        ("--out", {}),
        ("--remp", {"type": float}),
        ("--m", {"type": int}),
        ("--L", {"type": int}),
        ("--B", {"type": int}),
        ("--alphabet", {"type": int}),
        ("--delta", {"type": float}),
        ("--loss-scale", {"type": float}),
    ],
    "detect": [
        ("--corpus", {}),
        ("--out", {}),
        ("--window-size", {"type": int}),
        ("--folds", {"type": int}),
        ("--models", {"help": "comma-separated model kinds"}),
    ],
    "rank-features": [
        ("--corpus", {}),
        ("--out", {}),
        ("--window-size", {"type": int}),
        ("--folds", {"type": int}),
    ],
    "markov": [
        ("--corpus", {}),
        ("--out-prefix", {}),
        ("--keep", {}),
        ("--collapse-repeats", {"action": "store_const", "const": True}),
        ("--top", {"type": int}),
    ],
    "phmm": [
        ("--corpus", {}),
        ("--out", {}),
        ("--keep", {}),
        ("--collapse-repeats", {"action": "store_const", "const": True}),
        ("--length", {"type": int}),
        ("--pseudocount", {"type": float}),
        ("--iterations", {"type": int}),
    ],
    "wrapup": [
        ("--corpus", {}),
        ("--out-prefix", {}),
    ],
    "persuade": [
        ("--corpus", {}),
        ("--lexicon", {}),
        ("--out", {}),
    ],
    "screen-words": [
        ("--corpus", {}),
        ("--out", {}),
        ("--alpha", {"type": float}),
        ("--ranking-out", {"help": "also fit the word SVM and write ranks here"}),
        ("--screen-alpha", {"type": float, "help": "restrict SVM folds to screened words"}),
        ("--folds", {"type": int}),
    ],
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meetmine",
        description="Mine macro-patterns and decision statistics from meeting act logs.",
    )
    parser.add_argument("--version", action="version", version=f"meetmine {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name, flags in _FLAG_SPECS.items():
        sub = subparsers.add_parser(name)
        for flag, kwargs in flags:
            sub.add_argument(flag, default=None, **kwargs)
        sub.add_argument("--seed", type=int, default=None)
        sub.add_argument("--config", default=None, help="JSON config (flags win)")
        sub.add_argument("--manifest", default=None, help="manifest output path")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler, needs_corpus = _HANDLERS[args.subcommand]
    try:
        config = _load_config(args.config)
        res = _Resolver(args, config)
        outputs = handler(res)
        seed = res.resolved.get("seed")
        if seed is None:
            seed = res.get("seed", 0)
        corpus_path = res.resolved.get("corpus") if needs_corpus else None
        default_manifest = (
            outputs[0].rsplit(".", 1)[0] + ".manifest.json"
            if outputs
            else "manifest.json"
        )
        manifest_path = res.get("manifest", default_manifest)
        _write_manifest(
            manifest_path,
            args.subcommand,
            {k: v for k, v in res.resolved.items() if k != "manifest"},
            outputs,
            corpus_path,
            int(seed) if seed is not None else None,
        )
        return EXIT_OK
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except CorpusFormatError as exc:
        print(f"error: corpus format: {exc}", file=sys.stderr)
        return EXIT_CORPUS_FORMAT
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # pragma: no cover - last-resort diagnostic
        print(f"error: unexpected {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
