"""Dataset diversity statistics: extractive fragments, coverage/density/compression,
novel n-gram rates and corpus-level counts."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Sequence, TextIO

from .corpus import Example


class Fragment(NamedTuple):
    summary_start: int
    article_start: int
    length: int


@dataclass(frozen=True)
class ExtractiveStats:
    coverage: float
    density: float
    compression: float


@dataclass(frozen=True)
class CorpusStats:
    pair_count: int
    words_doc: float
    sents_doc: float
    words_summary: float
    sents_summary: float
    vocab_size: int

    def as_dict(self) -> Dict[str, float]:
        return {
            "pair_count": self.pair_count,
            "words_doc": round(self.words_doc, 6),
            "sents_doc": round(self.sents_doc, 6),
            "words_summary": round(self.words_summary, 6),
            "sents_summary": round(self.sents_summary, 6),
            "vocab_size": self.vocab_size,
        }


def extractive_fragments(article: Sequence[str], summary: Sequence[str]) -> List[Fragment]:
    """Greedy left-to-right fragment matching over the summary.

    At each summary position the longest article run matching the summary from
    there is taken (smallest article start on ties); unmatched tokens are
    stepped over.
    """
    positions = defaultdict(list)
    for j, tok in enumerate(article):
        positions[tok].append(j)
    n_a, n_s = len(article), len(summary)
    frags = []
    i = 0
    while i < n_s:
        best_len, best_j = 0, -1
        for j in positions.get(summary[i], ()):
            k = 1
            while i + k < n_s and j + k < n_a and summary[i + k] == article[j + k]:
                k += 1
            if k > best_len:
                best_len, best_j = k, j
        if best_len:
            frags.append(Fragment(i, best_j, best_len))
            i += best_len
        else:
            i += 1
    return frags


def extractive_stats(article: Sequence[str], summary: Sequence[str]) -> ExtractiveStats:
    if not summary:
        raise ValueError("summary must be non-empty")
    if not article:
        raise ValueError("article must be non-empty")
    frags = extractive_fragments(article, summary)
    n = len(summary)
    return ExtractiveStats(
        coverage=sum(f.length for f in frags) / n,
        density=sum(f.length**2 for f in frags) / n,
        compression=len(article) / n,
    )


def example_stats(example: Example) -> ExtractiveStats:
    """Extractive stats of a multi-document example over its concatenated sources."""
    return extractive_stats(example.article_tokens, example.summary.tokens)


def ngrams(seq: Sequence[str], n: int) -> List[tuple]:
    return [tuple(seq[i : i + n]) for i in range(len(seq) - n + 1)]


def novel_ngrams(article: Sequence[str], summary: Sequence[str], n: int, *, distinct: bool = False) -> float:
    """Percentage of summary n-grams that never occur in the article.

    Counts summary n-gram occurrences by default; ``distinct=True`` counts
    n-gram types instead.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(summary) < n:
        raise ValueError(f"summary shorter than n={n}")
    seen = set(ngrams(article, n))
    grams = ngrams(summary, n)
    if distinct:
        grams = list(dict.fromkeys(grams))
    novel = sum(1 for g in grams if g not in seen)
    return 100.0 * novel / len(grams)


def novelty_report(corpus: Iterable[Example], orders: Sequence[int] = (1, 2, 3, 4), *, distinct: bool = False) -> Dict[int, float]:
    """Corpus mean of per-example novelty; examples shorter than n are skipped for that n."""
    totals = {n: 0.0 for n in orders}
    counts = {n: 0 for n in orders}
    for ex in corpus:
        art, summ = ex.article_tokens, ex.summary.tokens
        for n in orders:
            if len(summ) >= n:
                totals[n] += novel_ngrams(art, summ, n, distinct=distinct)
                counts[n] += 1
    if not any(counts.values()):
        raise ValueError("corpus is empty")
    return {n: (totals[n] / counts[n] if counts[n] else 0.0) for n in orders}


def corpus_stats(corpus: Iterable[Example]) -> CorpusStats:
    pairs = 0
    words_doc = sents_doc = words_sum = sents_sum = 0
    vocab = set()
    for ex in corpus:
        pairs += 1
        for doc in ex.sources:
            words_doc += len(doc)
            sents_doc += len(doc.sentences)
            for sent in doc.sentences:
                vocab.update(sent)
        words_sum += len(ex.summary)
        sents_sum += len(ex.summary.sentences)
        for sent in ex.summary.sentences:
            vocab.update(sent)
    if pairs == 0:
        raise ValueError("corpus is empty")
    return CorpusStats(
        pair_count=pairs,
        words_doc=words_doc / pairs,
        sents_doc=sents_doc / pairs,
        words_summary=words_sum / pairs,
        sents_summary=sents_sum / pairs,
        vocab_size=len(vocab),
    )


def density_points(corpus: Iterable[Example]) -> List[ExtractiveStats]:
    return [example_stats(ex) for ex in corpus]


def write_density_csv(points: Iterable[ExtractiveStats], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["coverage", "density", "compression"])
    for p in points:
        writer.writerow([f"{p.coverage:.6f}", f"{p.density:.6f}", f"{p.compression:.6f}"])


def density_csv(corpus: Iterable[Example]) -> str:
    buf = io.StringIO()
    write_density_csv(density_points(corpus), buf)
    return buf.getvalue()
