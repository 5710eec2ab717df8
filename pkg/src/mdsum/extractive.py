"""Extractive baselines: First-k, LexRank, TextRank and MMR under a token budget."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .base import check_examples, check_fraction
from .corpus import Example, TokenSeq

logger = logging.getLogger(__name__)


class SentencePool:
    """Candidate sentences of one example with their tf-idf vectors.

    Each sentence counts as a document for idf, smoothed as
    ``ln((1 + N) / (1 + df)) + 1`` so that no term weight vanishes.
    """

    def __init__(self, sentences: Sequence[TokenSeq], doc_index: Optional[Sequence[int]] = None):
        self.sentences = [list(s) for s in sentences]
        self.doc_index = list(doc_index) if doc_index is not None else [0] * len(self.sentences)
        self.vocab = {}
        for sent in self.sentences:
            for tok in sent:
                self.vocab.setdefault(tok, len(self.vocab))
        n = len(self.sentences)
        tf = np.zeros((n, len(self.vocab)))
        for i, sent in enumerate(self.sentences):
            for tok in sent:
                tf[i, self.vocab[tok]] += 1
        df = (tf > 0).sum(axis=0)
        self.idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
        self.tfidf = tf * self.idf

    @classmethod
    def from_example(cls, example: Example) -> "SentencePool":
        sents, owners = [], []
        for d, doc in enumerate(example.sources):
            for sent in doc.sentences:
                sents.append(sent)
                owners.append(d)
        return cls(sents, owners)

    def __len__(self):
        return len(self.sentences)

    @property
    def lengths(self) -> List[int]:
        return [len(s) for s in self.sentences]

    def vectorize(self, tokens: Sequence[str]) -> np.ndarray:
        """tf-idf vector of arbitrary tokens in this pool's space; unknown tokens are dropped."""
        vec = np.zeros(len(self.vocab))
        for tok in tokens:
            j = self.vocab.get(tok)
            if j is not None:
                vec[j] += 1
        return vec * self.idf

    def centroid(self) -> np.ndarray:
        return self.tfidf.mean(axis=0)

    def similarity_matrix(self) -> np.ndarray:
        norms = np.linalg.norm(self.tfidf, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        unit = self.tfidf / safe[:, None]
        return np.clip(unit @ unit.T, 0.0, 1.0)


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(min(1.0, max(0.0, u @ v / (nu * nv))))


def cosine_tfidf(pool: SentencePool, i: int, j: int) -> float:
    return _cosine(pool.tfidf[i], pool.tfidf[j])


@dataclass
class RankedSentences:
    scores: np.ndarray
    order: List[int]
    converged: bool = True
    n_iter: int = 0


def rank_order(scores: Sequence[float]) -> List[int]:
    """Indices by descending score, smaller index first on ties."""
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def power_iteration(weights: np.ndarray, damping: float = 0.15, tol: float = 1e-6, max_iter: int = 200) -> RankedSentences:
    """Stationary scores of the damped random walk over a weighted graph.

    Rows of ``weights`` are normalised into transition probabilities (all-zero
    rows become uniform) and ``p <- d*u + (1-d) * M.T @ p`` is iterated from the
    uniform vector until the L1 change drops below ``tol``.
    """
    W = np.asarray(weights, dtype=float)
    n = W.shape[0]
    if n == 0:
        raise ValueError("graph has no nodes")
    row_sums = W.sum(axis=1)
    M = np.empty_like(W)
    zero = row_sums <= 0
    M[~zero] = W[~zero] / row_sums[~zero, None]
    M[zero] = 1.0 / n
    MT = M.T
    u = np.full(n, 1.0 / n)
    p = u.copy()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        nxt = damping * u + (1.0 - damping) * (MT @ p)
        delta = np.abs(nxt - p).sum()
        p = nxt
        if delta < tol:
            converged = True
            break
    if not converged:
        logger.warning("power iteration did not converge in %d iterations", max_iter)
    return RankedSentences(p, rank_order(p.tolist()), converged, it)


def lexrank(pool: SentencePool, damping: float = 0.15, tol: float = 1e-6, max_iter: int = 200,
            threshold: Optional[float] = None) -> RankedSentences:
    """Continuous LexRank over cosine tf-idf similarity without self-loops.

    With ``threshold`` set, edges weaker than it are dropped.
    """
    W = pool.similarity_matrix()
    np.fill_diagonal(W, 0.0)
    if threshold is not None:
        W = np.where(W >= threshold, W, 0.0)
    return power_iteration(W, damping, tol, max_iter)


def textrank_weights(sentences: Sequence[TokenSeq]) -> np.ndarray:
    n = len(sentences)
    sets = [set(s) for s in sentences]
    W = np.zeros((n, n))
    for i in range(n):
        if len(sentences[i]) <= 1:
            continue
        for j in range(i + 1, n):
            if len(sentences[j]) <= 1:
                continue
            overlap = len(sets[i] & sets[j])
            if overlap:
                W[i, j] = W[j, i] = overlap / (math.log(len(sentences[i])) + math.log(len(sentences[j])))
    return W


def textrank(pool: SentencePool, damping: float = 0.15, tol: float = 1e-6, max_iter: int = 200) -> RankedSentences:
    return power_iteration(textrank_weights(pool.sentences), damping, tol, max_iter)


@dataclass
class MmrConfig:
    lambda_: float = 0.5
    budget: Optional[int] = None
    query: str = "centroid"
    query_tokens: Optional[TokenSeq] = None

    def __post_init__(self):
        check_fraction(self.lambda_, "lambda")
        if self.query not in ("centroid", "provided"):
            raise ValueError(f"unknown query mode {self.query!r}")
        if self.query == "provided" and self.query_tokens is None:
            raise ValueError("query='provided' needs query_tokens")


def mmr_order(relevance: Sequence[float], similarity: np.ndarray, lambda_: float,
              lengths: Optional[Sequence[int]] = None, budget: Optional[int] = None) -> List[int]:
    """Greedy MMR selection on precomputed relevance and pairwise similarity.

    Each round picks the unselected candidate maximising
    ``lambda*rel[i] - (1-lambda)*max_{j selected} sim[i, j]`` (the max is 0 before
    the first pick), smaller index first on ties. Selection stops once the
    selected lengths reach ``budget`` or candidates run out.
    """
    n = len(relevance)
    rel = np.asarray(relevance, dtype=float)
    sim = np.asarray(similarity, dtype=float)
    redundancy = np.zeros(n)
    chosen: List[int] = []
    available = np.ones(n, dtype=bool)
    used = 0
    while available.any():
        if budget is not None and used >= budget:
            break
        gain = lambda_ * rel - (1.0 - lambda_) * redundancy
        gain[~available] = -np.inf
        best = int(np.argmax(gain))  # first maximum = smallest index
        chosen.append(best)
        available[best] = False
        # similarities may be negative, so the first pick replaces the zero start
        redundancy = sim[:, best].copy() if len(chosen) == 1 else np.maximum(redundancy, sim[:, best])
        if lengths is not None:
            used += lengths[best]
    return chosen


def mmr_select(pool: SentencePool, cfg: MmrConfig = MmrConfig()) -> List[int]:
    if len(pool) == 0:
        raise ValueError("pool is empty")
    query = pool.centroid() if cfg.query == "centroid" else pool.vectorize(cfg.query_tokens)
    relevance = [_cosine(pool.tfidf[i], query) for i in range(len(pool))]
    return mmr_order(relevance, pool.similarity_matrix(), cfg.lambda_, pool.lengths, cfg.budget)


def assemble(pool: SentencePool, order: Sequence[int], budget: Optional[int]) -> TokenSeq:
    """Concatenate sentences in ``order``, cutting the first one that overflows ``budget``."""
    out: TokenSeq = []
    for i in order:
        sent = pool.sentences[i]
        if budget is not None and len(out) + len(sent) > budget:
            out.extend(sent[: budget - len(out)])
            break
        out.extend(sent)
    return out


def first_k(example: Example, k: int, budget: Optional[int] = None) -> TokenSeq:
    if k < 0:
        raise ValueError("k must be >= 0")
    out = [tok for doc in example.sources for sent in doc.sentences[:k] for tok in sent]
    return out if budget is None else out[:budget]


class _ExtractiveSummarizer(BaseEstimator):
    """Stateless summarizers: ``fit`` only validates, ``predict`` summarizes each example."""

    def fit(self, X, y=None):
        check_examples(X)
        self.n_examples_ = len(X) if hasattr(X, "__len__") else None
        return self

    def predict(self, X) -> List[TokenSeq]:
        return [self.summarize(ex) for ex in check_examples(X, allow_empty=True)]

    def summarize(self, example: Example) -> TokenSeq:
        raise NotImplementedError


class FirstKSummarizer(_ExtractiveSummarizer):
    def __init__(self, k=1, budget=300):
        self.k = k
        self.budget = budget

    def summarize(self, example):
        return first_k(example, self.k, self.budget)


class LexRankSummarizer(_ExtractiveSummarizer):
    def __init__(self, budget=300, damping=0.15, tol=1e-6, max_iter=200, threshold=None):
        self.budget = budget
        self.damping = damping
        self.tol = tol
        self.max_iter = max_iter
        self.threshold = threshold

    def rank(self, example: Example) -> RankedSentences:
        return lexrank(SentencePool.from_example(example), self.damping, self.tol, self.max_iter, self.threshold)

    def summarize(self, example):
        return assemble(SentencePool.from_example(example), self.rank(example).order, self.budget)


class TextRankSummarizer(_ExtractiveSummarizer):
    def __init__(self, budget=300, damping=0.15, tol=1e-6, max_iter=200):
        self.budget = budget
        self.damping = damping
        self.tol = tol
        self.max_iter = max_iter

    def rank(self, example: Example) -> RankedSentences:
        return textrank(SentencePool.from_example(example), self.damping, self.tol, self.max_iter)

    def summarize(self, example):
        return assemble(SentencePool.from_example(example), self.rank(example).order, self.budget)


class MMRSummarizer(_ExtractiveSummarizer):
    def __init__(self, budget=300, lambda_=0.5):
        self.budget = budget
        self.lambda_ = lambda_

    def summarize(self, example):
        pool = SentencePool.from_example(example)
        order = mmr_select(pool, MmrConfig(lambda_=self.lambda_, budget=self.budget))
        return assemble(pool, order, self.budget)


SUMMARIZERS = {
    "first": FirstKSummarizer,
    "lexrank": LexRankSummarizer,
    "textrank": TextRankSummarizer,
    "mmr": MMRSummarizer,
}
