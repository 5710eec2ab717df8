"""ROUGE-1, ROUGE-2 and ROUGE-SU (skip-bigrams plus unigrams) without stemming
or stopword removal."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

VARIANTS = ("R1", "R2", "RSU")


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "RougeScore":
        if precision + recall == 0:
            return cls(precision, recall, 0.0)
        return cls(precision, recall, 2 * precision * recall / (precision + recall))

    def headline(self, reporting: str = "f1") -> float:
        return self.recall if reporting == "recall" else self.f1

    def as_dict(self, digits: int = 4) -> Dict[str, float]:
        return {"P": round(self.precision, digits), "R": round(self.recall, digits), "F1": round(self.f1, digits)}


@dataclass(frozen=True)
class RougeConfig:
    """Scoring options.

    ``gap_mode="intervening"`` allows at most ``skip_distance`` tokens between
    the two words of a skip-bigram (j - i - 1 <= 4); ``"distance"`` bounds the
    index difference instead (j - i <= 4).
    """

    variant: str = "R1"
    skip_distance: int = 4
    gap_mode: str = "intervening"
    reporting: str = "f1"
    truncate_hypothesis_to: Optional[int] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown ROUGE variant {self.variant!r}")
        if self.gap_mode not in ("intervening", "distance"):
            raise ValueError(f"unknown gap_mode {self.gap_mode!r}")
        if self.reporting not in ("f1", "recall"):
            raise ValueError(f"unknown reporting {self.reporting!r}")
        if self.skip_distance < 0:
            raise ValueError("skip_distance must be >= 0")


def ngram_counts(seq: Sequence[str], n: int) -> Counter:
    if n < 1:
        raise ValueError("n must be >= 1")
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def skip_bigram_counts(seq: Sequence[str], max_gap: int) -> Counter:
    """Ordered pairs (seq[i], seq[j]), i < j, with at most ``max_gap`` tokens between them."""
    if max_gap < 0:
        raise ValueError("max_gap must be >= 0")
    counts: Counter = Counter()
    n = len(seq)
    for i in range(n):
        for j in range(i + 1, min(n, i + max_gap + 2)):
            counts[(seq[i], seq[j])] += 1
    return counts


def _units(seq: Sequence[str], cfg: RougeConfig) -> Counter:
    if cfg.variant == "R1":
        return ngram_counts(seq, 1)
    if cfg.variant == "R2":
        return ngram_counts(seq, 2)
    gap = cfg.skip_distance if cfg.gap_mode == "intervening" else cfg.skip_distance - 1
    units = skip_bigram_counts(seq, gap) if gap >= 0 else Counter()
    units.update(ngram_counts(seq, 1))
    return units


def rouge_pair(hyp: Sequence[str], ref: Sequence[str], cfg: RougeConfig = RougeConfig()) -> RougeScore:
    if not ref:
        raise ValueError("reference must be non-empty")
    if cfg.truncate_hypothesis_to is not None:
        hyp = hyp[: cfg.truncate_hypothesis_to]
    hyp_units, ref_units = _units(hyp, cfg), _units(ref, cfg)
    match = sum((hyp_units & ref_units).values())
    n_hyp, n_ref = sum(hyp_units.values()), sum(ref_units.values())
    precision = match / n_hyp if n_hyp else 0.0
    recall = match / n_ref if n_ref else 0.0
    return RougeScore.from_pr(precision, recall)


def rouge_corpus(pairs: Iterable[Tuple[Sequence[str], Sequence[str]]], cfg: RougeConfig = RougeConfig()) -> RougeScore:
    """Macro-average of per-pair precision, recall and F1."""
    scores = [rouge_pair(h, r, cfg) for h, r in pairs]
    if not scores:
        raise ValueError("no pairs to score")
    n = len(scores)
    return RougeScore(
        sum(s.precision for s in scores) / n,
        sum(s.recall for s in scores) / n,
        sum(s.f1 for s in scores) / n,
    )


def rouge_report(pairs, **cfg_kwargs) -> Dict[str, RougeScore]:
    """R-1, R-2 and R-SU macro scores keyed "R-1", "R-2", "R-SU"."""
    pairs = list(pairs)
    out = {}
    for name, variant in (("R-1", "R1"), ("R-2", "R2"), ("R-SU", "RSU")):
        out[name] = rouge_corpus(pairs, RougeConfig(variant=variant, **cfg_kwargs))
    return out
