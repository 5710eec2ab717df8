from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, fields
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from ..corpus import SEPARATOR, MegaDocument

UNK, START, END = "<unk>", "<s>", "</s>"
SPECIALS = (UNK, START, END, SEPARATOR)


@dataclass
class HiMapConfig:
    """Network sizes and decoding limits.

    ``renormalize`` rescales the MMR-weighted attention to sum to one; turning
    it off keeps the raw product (copy mass then no longer sums to one).
    """

    vocab_size: int = 50000
    embed_dim: int = 128
    encoder_hidden: int = 256
    sentence_hidden: int = 256
    decoder_hidden: int = 512
    lambda_: float = 0.5
    max_encode_tokens: int = 500
    max_decode_tokens: int = 300
    seed: int = 0
    renormalize: bool = True
    init_scale: float = 0.1

    def __post_init__(self):
        for name in ("vocab_size", "embed_dim", "encoder_hidden", "sentence_hidden", "decoder_hidden", "max_encode_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.max_decode_tokens < 0:
            raise ValueError("max_decode_tokens must be >= 0")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValueError("lambda_ must lie in [0, 1]")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "HiMapConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


class Vocab:
    def __init__(self, words: Sequence[str]):
        words = list(words)
        if tuple(words[: len(SPECIALS)]) != SPECIALS:
            raise ValueError(f"vocabulary must start with {SPECIALS}")
        self.words = words
        self.index = {w: i for i, w in enumerate(words)}
        if len(self.index) != len(words):
            raise ValueError("vocabulary contains duplicates")

    unk_id, start_id, end_id, sep_id = range(4)

    @classmethod
    def build(cls, token_streams: Iterable[Sequence[str]], size: int) -> "Vocab":
        """Most frequent tokens (ties alphabetical) after the reserved entries."""
        counts: Counter = Counter()
        for toks in token_streams:
            counts.update(t for t in toks if t not in SPECIALS)
        ranked = sorted(counts, key=lambda w: (-counts[w], w))
        return cls(list(SPECIALS) + ranked[: max(0, size - len(SPECIALS))])

    def __len__(self):
        return len(self.words)

    def id(self, word: str) -> int:
        return self.index.get(word, self.unk_id)


@dataclass
class Instance:
    """Id-level view of one (mega-document, target) pair.

    ``ext_ids`` index the per-example extended vocabulary: ids at or above
    ``len(vocab)`` are source words missing from the vocabulary, listed in
    ``oovs``. ``owner`` maps each source token to its sentence (-1 for
    separators).
    """

    src_ids: np.ndarray
    ext_ids: np.ndarray
    owner: np.ndarray
    last_idx: np.ndarray
    oovs: List[str]
    dec_in: np.ndarray
    targets: np.ndarray

    @property
    def n_sentences(self) -> int:
        return len(self.last_idx)


def make_instance(vocab: Vocab, mega: MegaDocument, target: Optional[Sequence[str]] = None,
                  max_decode: Optional[int] = None) -> Instance:
    """Map a mega-document (and optional target tokens) to ids.

    The target gets an end token appended; ``max_decode`` caps the number of
    target steps including it.
    """
    V = len(vocab)
    oovs: List[str] = []
    oov_pos: Dict[str, int] = {}
    src, ext = [], []
    for tok in mega.tokens:
        i = vocab.sep_id if tok == SEPARATOR else vocab.id(tok)
        src.append(i)
        if i == vocab.unk_id:
            if tok not in oov_pos:
                oov_pos[tok] = V + len(oovs)
                oovs.append(tok)
            ext.append(oov_pos[tok])
        else:
            ext.append(i)
    owner = np.array(mega.sentence_index(), dtype=int)
    last_idx = np.array([end - 1 for _, end in mega.sentence_boundaries], dtype=int)
    targets: List[int] = []
    if target is not None:
        for tok in target:
            i = vocab.id(tok)
            if i == vocab.unk_id and tok in oov_pos:
                i = oov_pos[tok]
            targets.append(i)
        targets.append(vocab.end_id)
        if max_decode is not None:
            targets = targets[:max_decode]
    dec_in = [vocab.start_id] + [t if t < V else vocab.unk_id for t in targets[:-1]]
    return Instance(
        np.array(src, dtype=int), np.array(ext, dtype=int), owner, last_idx, oovs,
        np.array(dec_in[: len(targets)], dtype=int), np.array(targets, dtype=int),
    )
