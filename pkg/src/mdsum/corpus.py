"""Tokenization, sentence splitting, JSONL ingestion and mega-document truncation."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

from sklearn.base import BaseEstimator, TransformerMixin

logger = logging.getLogger(__name__)

TokenSeq = List[str]

SEPARATOR = "|||doc|||"

# Characters split off as standalone tokens. Everything else is whitespace-delimited,
# so "u.s.-based" becomes [u, ., s, ., -based].
PUNCTUATION = ".,!?;:\"'()[]"

_PUNCT_CLASS = re.escape(PUNCTUATION)
_TOKEN_RE = re.compile(rf"[{_PUNCT_CLASS}]|[^\s{_PUNCT_CLASS}]+")
# Known limitation: abbreviations followed by a capitalised word ("Dr. Smith") split.
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+(?=[A-Z])")


class CorpusError(ValueError):
    """Raised for malformed corpus input; ``lineno`` is 1-based when known."""

    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def tokenize(text: str) -> TokenSeq:
    return _TOKEN_RE.findall(text.lower())


def split_sentences(text: str) -> List[TokenSeq]:
    """Split raw text into tokenized sentences, dropping empty pieces.

    A boundary is placed after ``.``, ``!`` or ``?`` when followed by whitespace
    and an uppercase letter. "Dr. Smith left. He ran." therefore yields three
    sentences: [dr, .], [smith, left, .], [he, ran, .].
    """
    sentences = []
    for piece in _SENTENCE_RE.split(text):
        tokens = tokenize(piece)
        if tokens:
            sentences.append(tokens)
    return sentences


@dataclass
class Document:
    sentences: List[TokenSeq] = field(default_factory=list)

    def __post_init__(self):
        for sent in self.sentences:
            if not sent:
                raise ValueError("documents may not contain empty sentences")

    @classmethod
    def from_text(cls, text: str) -> "Document":
        return cls(split_sentences(text))

    @property
    def tokens(self) -> TokenSeq:
        return [tok for sent in self.sentences for tok in sent]

    def __len__(self):
        return sum(len(s) for s in self.sentences)


@dataclass
class Example:
    id: str
    sources: List[Document]
    summary: Document

    def __post_init__(self):
        if not self.sources:
            raise ValueError(f"example {self.id!r} has no sources")
        if len(self.summary) == 0:
            raise ValueError(f"example {self.id!r} has an empty summary")

    @classmethod
    def from_texts(cls, id: str, sources: Sequence[str], summary: str) -> "Example":
        docs = [Document.from_text(s) for s in sources]
        return cls(id, [d for d in docs if len(d)], Document.from_text(summary))

    @property
    def article_tokens(self) -> TokenSeq:
        """All source tokens concatenated in order, without separators."""
        return [tok for doc in self.sources for tok in doc.tokens]


@dataclass
class MegaDocument:
    tokens: TokenSeq
    sentence_boundaries: List[Tuple[int, int]]
    doc_boundaries: List[int]
    allocation: List[int] = field(default_factory=list)

    def sentence_index(self) -> List[int]:
        """Owning sentence of every token; -1 for separators."""
        owner = [-1] * len(self.tokens)
        for s, (start, end) in enumerate(self.sentence_boundaries):
            for k in range(start, end):
                owner[k] = s
        return owner

    @property
    def sentences(self) -> List[TokenSeq]:
        return [self.tokens[a:b] for a, b in self.sentence_boundaries]

    @classmethod
    def from_sentences(cls, sentences: Sequence[TokenSeq]) -> "MegaDocument":
        """Single-document mega-document without truncation."""
        tokens, bounds = [], []
        for sent in sentences:
            bounds.append((len(tokens), len(tokens) + len(sent)))
            tokens.extend(sent)
        return cls(tokens, bounds, [], [len(tokens)])


@dataclass(frozen=True)
class TruncationPolicy:
    budget: int = 500
    separator: str = SEPARATOR

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("budget must be positive")


@dataclass
class LoadReport:
    """Counters filled in while a corpus stream is consumed."""

    examples: int = 0
    skipped: int = 0
    malformed: int = 0

    @property
    def warnings(self) -> int:
        return self.skipped + self.malformed


def parse_record(record, lineno: Optional[int] = None) -> Optional[Example]:
    """Build an Example from a decoded JSON record.

    Returns None for records that are well-formed but unusable (no sources,
    empty summary); raises CorpusError for structural problems.
    """
    if not isinstance(record, dict):
        raise CorpusError("expected a JSON object", lineno)
    for key in ("id", "sources", "summary"):
        if key not in record:
            raise CorpusError(f"missing key {key!r}", lineno)
    sources, summary = record["sources"], record["summary"]
    if not isinstance(sources, list) or not all(isinstance(s, str) for s in sources):
        raise CorpusError("'sources' must be an array of strings", lineno)
    if not isinstance(summary, str):
        raise CorpusError("'summary' must be a string", lineno)
    docs = [d for d in (Document.from_text(s) for s in sources) if len(d)]
    summ = Document.from_text(summary)
    if not docs or len(summ) == 0:
        return None
    return Example(str(record["id"]), docs, summ)


def load_corpus(
    path: str,
    format: str = "jsonl",
    *,
    lenient: bool = False,
    report: Optional[LoadReport] = None,
) -> Iterator[Example]:
    """Stream Examples from a JSONL file in file order.

    Malformed lines raise CorpusError carrying the line number, unless
    ``lenient`` is set, in which case they are counted in ``report.malformed``.
    Examples without sources or with an empty summary are always skipped and
    counted in ``report.skipped``.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    report = report if report is not None else LoadReport()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"invalid JSON ({exc.msg})", lineno) from exc
                example = parse_record(record, lineno)
            except CorpusError:
                if not lenient:
                    raise
                report.malformed += 1
                logger.warning("skipping malformed line %d of %s", lineno, path)
                continue
            if example is None:
                report.skipped += 1
                logger.warning("skipping unusable example on line %d of %s", lineno, path)
                continue
            report.examples += 1
            yield example


def allocate_tokens(lengths: Sequence[int], budget: int) -> List[int]:
    """Per-source token quotas for a shared budget.

    Starts from ``budget // S`` per source; sources shorter than the quota keep
    all their tokens and the freed budget is re-split over the others until no
    further source saturates. Leftover tokens from the floor division go one per
    source to the unsaturated sources, first source first.
    """
    n = len(lengths)
    alloc = [0] * n
    active = list(range(n))
    remaining = budget
    while active:
        quota = remaining // len(active)
        saturated = [i for i in active if lengths[i] <= quota]
        if not saturated:
            break
        for i in saturated:
            alloc[i] = lengths[i]
            remaining -= lengths[i]
        active = [i for i in active if lengths[i] > quota]
    if active:
        quota, leftover = divmod(remaining, len(active))
        for rank, i in enumerate(active):
            alloc[i] = quota + (1 if rank < leftover else 0)
    return alloc


def truncate_example(example: Example, policy: TruncationPolicy = TruncationPolicy()) -> MegaDocument:
    """Cut every source to its quota and join them into one mega-document."""
    alloc = allocate_tokens([len(d) for d in example.sources], policy.budget)
    tokens: TokenSeq = []
    bounds: List[Tuple[int, int]] = []
    seps: List[int] = []
    for doc, quota in zip(example.sources, alloc):
        if quota == 0:
            continue
        if tokens:
            seps.append(len(tokens))
            tokens.append(policy.separator)
        left = quota
        for sent in doc.sentences:
            if left == 0:
                break
            piece = sent[:left]
            bounds.append((len(tokens), len(tokens) + len(piece)))
            tokens.extend(piece)
            left -= len(piece)
    return MegaDocument(tokens, bounds, seps, alloc)


class MegaDocumentTransformer(BaseEstimator, TransformerMixin):
    """Turn Examples into budget-truncated mega-documents."""

    def __init__(self, budget=500, separator=SEPARATOR):
        self.budget = budget
        self.separator = separator

    def fit(self, X, y=None):
        TruncationPolicy(self.budget, self.separator)
        return self

    def transform(self, X) -> List[MegaDocument]:
        policy = TruncationPolicy(self.budget, self.separator)
        return [truncate_example(ex, policy) for ex in X]
