"""Command-line entry point: ``mdsum <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Every run writes one manifest: next to ``--out`` (``<out>.manifest.json``),
into ``--outdir`` for ``stats``, or to stderr when output goes to stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from multiprocessing import Pool
from typing import Callable, Iterable, List, Optional, Sequence

from . import __version__
from .corpus import CorpusError, LoadReport, TruncationPolicy, load_corpus, tokenize, truncate_example
from .extractive import FirstKSummarizer, LexRankSummarizer, MMRSummarizer, TextRankSummarizer
from .himap.config import HiMapConfig, Vocab, make_instance
from .himap.gradcheck import gradient_check, tiny_problem
from .himap.params import CheckpointError, init_params, load_checkpoint, save_checkpoint
from .himap.train import TrainingDiverged, build_instances, decode_ids, ids_to_tokens, train
from .rouge import rouge_report
from .textmetrics import corpus_stats, density_points, novelty_report, write_density_csv

logger = logging.getLogger("mdsum")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
JOBS_ENV = "MDSUM_JOBS"
GRADCHECK_TOLERANCE = 1e-4


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class NumericError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def dumps_fixed(obj, digits: int) -> str:
    """JSON text with every float printed with exactly ``digits`` decimals."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise NumericError(f"non-finite value {obj}")
        return f"{obj:.{digits}f}"
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps_fixed(v, digits)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps_fixed(v, digits) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _jobs(args) -> int:
    if args.jobs is not None:
        jobs = args.jobs
    else:
        raw = os.environ.get(JOBS_ENV, "1")
        try:
            jobs = int(raw)
        except ValueError:
            raise UsageError(f"{JOBS_ENV}={raw!r} is not an integer")
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    return jobs


def _map(fn: Callable, items: Sequence, jobs: int) -> List:
    """Order-preserving map, optionally over a process pool."""
    if jobs == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with Pool(jobs) as pool:
        return pool.map(fn, items)


def _read_corpus(path: str, lenient: bool = False):
    report = LoadReport()
    try:
        examples = list(load_corpus(path, lenient=lenient, report=report))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}")
    except CorpusError as exc:
        raise DataError(f"{path}: {exc}")
    if report.warnings:
        logger.warning("%s: %d example(s) skipped", path, report.warnings)
    return examples


def _read_summaries(path: str):
    """(id, tokens) pairs from a JSONL file whose objects carry "summary"."""
    rows = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    rows.append((str(obj.get("id", lineno)), tokenize(obj["summary"])))
                except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as exc:
                    raise DataError(f"{path}: line {lineno}: expected an object with a 'summary' string ({exc})")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}")
    return rows


def _write_text(path: Optional[str], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _jsonl(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)


# ---------------------------------------------------------------------------
# subcommands; each returns (outputs, seed)


def cmd_stats(args):
    examples = _read_corpus(args.corpus, args.lenient)
    if not examples:
        raise DataError(f"{args.corpus}: no usable examples")
    os.makedirs(args.outdir, exist_ok=True)
    stats = corpus_stats(examples)
    stats_path = os.path.join(args.outdir, "stats.json")
    csv_path = os.path.join(args.outdir, "density.csv")
    _write_text(stats_path, dumps_fixed(stats.as_dict(), 6) + "\n")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        write_density_csv(density_points(examples), fh)
    return [stats_path, csv_path], None


def cmd_novelty(args):
    examples = _read_corpus(args.corpus, args.lenient)
    if not examples:
        raise DataError(f"{args.corpus}: no usable examples")
    report = novelty_report(examples, distinct=args.distinct)
    _write_text(args.out, dumps_fixed({str(n): v for n, v in report.items()}, 6) + "\n")
    return [args.out], None


def _make_extractor(args):
    if args.budget is not None and args.budget < 0:
        raise UsageError("--budget must be >= 0")
    if args.method == "first":
        if args.k < 0:
            raise UsageError("--k must be >= 0")
        return FirstKSummarizer(k=args.k, budget=args.budget)
    if args.method == "lexrank":
        return LexRankSummarizer(budget=args.budget, threshold=args.threshold)
    if args.method == "textrank":
        return TextRankSummarizer(budget=args.budget)
    if not 0.0 <= args.lambda_ <= 1.0:
        raise UsageError("--lambda must lie in [0, 1]")
    return MMRSummarizer(budget=args.budget, lambda_=args.lambda_)


def cmd_extract(args):
    est = _make_extractor(args)
    examples = _read_corpus(args.corpus, args.lenient)
    summaries = _map(est.summarize, examples, _jobs(args))
    _write_text(args.out, _jsonl({"id": ex.id, "summary": " ".join(s)} for ex, s in zip(examples, summaries)))
    return [args.out], None


def cmd_rouge(args):
    hyps, refs = _read_summaries(args.hyp), _read_summaries(args.ref)
    if not refs:
        raise DataError(f"{args.ref}: no references")
    ref_by_id = dict(refs)
    if len(ref_by_id) == len(refs) and all(h_id in ref_by_id for h_id, _ in hyps):
        pairs = [(h, ref_by_id[h_id]) for h_id, h in hyps]
    elif len(hyps) == len(refs):
        pairs = [(h, r) for (_, h), (_, r) in zip(hyps, refs)]
    else:
        raise DataError("hypothesis and reference files cannot be aligned by id or by position")
    if not pairs:
        raise DataError(f"{args.hyp}: no hypotheses")
    if any(not r for _, r in pairs):
        raise DataError("empty reference summary")
    reporting = "recall" if args.recall else "f1"
    report = rouge_report(pairs, gap_mode=args.gap_mode, truncate_hypothesis_to=args.truncate)
    out = {}
    for name, score in report.items():
        out[name] = {"P": score.precision, "R": score.recall, "F1": score.f1, "score": score.headline(reporting)}
    _write_text(args.out, dumps_fixed(out, 4) + "\n")
    return [args.out], None


def _load_train_config(path: Optional[str]):
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc.strerror or exc}")
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc.msg})")
        if not isinstance(data, dict):
            raise DataError(f"{path}: expected a JSON object")
    training = {k: data.pop(k) for k in ("optimizer", "lr", "clip") if k in data}
    try:
        cfg = HiMapConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"config: {exc}")
    return cfg, training


def cmd_train(args):
    cfg, training = _load_train_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.epochs < 0:
        raise UsageError("--epochs must be >= 0")
    examples = _read_corpus(args.corpus, args.lenient)
    if not examples:
        raise DataError(f"{args.corpus}: no usable examples")
    vocab = Vocab.build([ex.article_tokens for ex in examples] + [ex.summary.tokens for ex in examples], cfg.vocab_size)
    cfg.vocab_size = len(vocab)
    params = init_params(cfg)
    instances = build_instances(examples, vocab, cfg)
    try:
        _, log = train(params, instances, cfg, training.get("optimizer", "adagrad"), training.get("lr", 0.15),
                       args.epochs, training.get("clip", 2.0), cfg.seed)
    except TrainingDiverged as exc:
        raise NumericError(str(exc))
    save_checkpoint(params, cfg, args.out, vocab)
    log_path = args.out + ".log.json"
    _write_text(log_path, dumps_fixed({"epoch_loss": log.losses}, 6) + "\n")
    return [args.out, log_path], cfg.seed


def cmd_decode(args):
    if args.beam < 1:
        raise UsageError("--beam must be >= 1")
    try:
        params, cfg, vocab = load_checkpoint(args.ckpt)
    except OSError as exc:
        raise DataError(f"cannot read {args.ckpt}: {exc.strerror or exc}")
    except CheckpointError as exc:
        raise DataError(str(exc))
    if vocab is None:
        raise DataError(f"{args.ckpt}: checkpoint carries no vocabulary")
    examples = _read_corpus(args.input, args.lenient)
    policy = TruncationPolicy(cfg.max_encode_tokens)
    rows = []
    for ex in examples:
        inst = make_instance(vocab, truncate_example(ex, policy))
        tokens = ids_to_tokens(decode_ids(params, inst, cfg, beam=args.beam), vocab, inst)
        rows.append({"id": ex.id, "summary": " ".join(tokens)})
    _write_text(args.out, _jsonl(rows))
    return [args.out], cfg.seed


def cmd_gradcheck(args):
    if args.eps <= 0:
        raise UsageError("--eps must be positive")
    params, inst, cfg = tiny_problem(args.seed)
    errors = gradient_check(params, inst, cfg, eps=args.eps, samples=args.samples, seed=args.seed)
    worst = max(errors.values())
    out = {"max_relative_error": float(worst), "tolerance": GRADCHECK_TOLERANCE,
           "passed": bool(worst < GRADCHECK_TOLERANCE), "arrays": {k: float(v) for k, v in errors.items()}}
    _write_text(args.out, json.dumps(out, indent=None) + "\n")
    if not out["passed"]:
        raise NumericError(f"gradient check failed: max relative error {worst:.3e}")
    return [args.out], args.seed


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mdsum", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mdsum {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out=True):
        if out:
            p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--lenient", action="store_true", help="skip malformed corpus lines")
        p.add_argument("--jobs", type=int, help=f"worker processes (default: ${JOBS_ENV} or 1)")

    p = sub.add_parser("stats", help="corpus statistics and density points")
    p.add_argument("corpus")
    p.add_argument("--outdir", required=True)
    common(p, out=False)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("novelty", help="percentage of novel summary n-grams")
    p.add_argument("corpus")
    p.add_argument("--distinct", action="store_true", help="count n-gram types instead of occurrences")
    common(p)
    p.set_defaults(func=cmd_novelty)

    p = sub.add_parser("extract", help="extractive baselines")
    p.add_argument("corpus")
    p.add_argument("--method", choices=["first", "lexrank", "textrank", "mmr"], required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.5)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--threshold", type=float, default=None, help="LexRank similarity threshold")
    common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("rouge", help="R-1, R-2 and R-SU(4) scores")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--recall", action="store_true", help="recall-oriented reporting")
    p.add_argument("--truncate", type=int, default=None, help="cut hypotheses to N tokens")
    p.add_argument("--gap-mode", choices=["intervening", "distance"], default="intervening")
    common(p)
    p.set_defaults(func=cmd_rouge)

    p = sub.add_parser("train", help="train Hi-MAP")
    p.add_argument("--config")
    p.add_argument("--corpus", required=True)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="decode with a Hi-MAP checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--beam", type=int, default=4)
    common(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--samples", type=int, default=20, help="entries per array")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def _manifest(args, outputs, seed, started) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    return {
        "subcommand": args.command,
        "flags": flags,
        "seed": seed,
        "inputs": [getattr(args, k) for k in ("corpus", "hyp", "ref", "config", "ckpt", "input") if getattr(args, k, None)],
        "outputs": [o for o in outputs if o],
        "version": __version__,
        "duration_s": round(time.time() - started, 6),
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    started = time.time()
    try:
        outputs, seed = args.func(args)
    except UsageError as exc:
        print(f"mdsum {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"mdsum {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"mdsum {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    manifest = json.dumps(_manifest(args, outputs, seed, started), sort_keys=False)
    if args.command == "stats":
        _write_text(os.path.join(args.outdir, "manifest.json"), manifest + "\n")
    elif outputs and outputs[0]:
        _write_text(outputs[0] + ".manifest.json", manifest + "\n")
    else:
        print(manifest, file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
