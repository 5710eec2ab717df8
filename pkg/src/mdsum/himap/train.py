"""Optimisation loop, beam-search decoding and the synthetic copy task."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..corpus import Document, Example, MegaDocument, TruncationPolicy, truncate_example
from .config import HiMapConfig, Instance, Vocab, make_instance
from .model import (
    attention_step,
    encode,
    loss_and_grads,
    mmr_scores,
    output_distribution,
    reweight_attention,
    sigmoid,
)
from .params import Params

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainLog:
    losses: List[float] = field(default_factory=list)
    stopped_early: bool = False

    def window_means(self, width: int = 10) -> List[float]:
        return [float(np.mean(self.losses[i : i + width])) for i in range(0, len(self.losses) - width + 1, width)]


def clip_by_global_norm(grads: Params, max_norm: Optional[float]) -> float:
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm is not None and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


class Optimizer:
    """Plain SGD or Adagrad (accumulator seeded with ``initial_accumulator``)."""

    def __init__(self, kind: str, lr: float, params: Params, initial_accumulator: float = 0.1):
        if kind not in ("sgd", "adagrad"):
            raise ValueError(f"unknown optimizer {kind!r}")
        self.kind, self.lr = kind, lr
        if kind == "adagrad":
            self.acc = {k: np.full_like(v, initial_accumulator) for k, v in params.items()}

    def step(self, params: Params, grads: Params) -> None:
        if self.kind == "sgd":
            for k, g in grads.items():
                params[k] -= self.lr * g
        else:
            for k, g in grads.items():
                acc = self.acc[k]
                acc += g * g
                params[k] -= self.lr * g / np.sqrt(acc)


def train(params: Params, instances: Sequence[Instance], cfg: HiMapConfig, optimizer: str = "adagrad",
          lr: float = 0.15, epochs: int = 1, clip: Optional[float] = 2.0, seed: Optional[int] = None,
          callback: Optional[Callable[[int, float], bool]] = None) -> Tuple[Params, TrainLog]:
    """Per-example updates over a seeded shuffle of ``instances`` each epoch.

    ``params`` is updated in place and returned. ``callback(epoch, mean_loss)``
    may return True to stop early.
    """
    if not instances:
        raise ValueError("training corpus is empty")
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    opt = Optimizer(optimizer, lr, params)
    log = TrainLog()
    for epoch in range(1, epochs + 1):
        total = 0.0
        for idx in rng.permutation(len(instances)):
            loss, grads = loss_and_grads(params, instances[idx], cfg)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} at epoch {epoch}, example {idx}")
            clip_by_global_norm(grads, clip)
            opt.step(params, grads)
            total += loss
        mean = total / len(instances)
        log.losses.append(mean)
        logger.info("epoch %d loss %.6f", epoch, mean)
        if callback is not None and callback(epoch, mean):
            log.stopped_early = True
            break
    return params, log


def lstm_step(W: np.ndarray, b: np.ndarray, x: np.ndarray, h: np.ndarray, c: np.ndarray):
    """One LSTM step for a batch of rows."""
    hid = h.shape[1]
    z = np.hstack([x, h]) @ W.T + b
    i, f, o = (sigmoid(z[:, k * hid : (k + 1) * hid]) for k in range(3))
    g = np.tanh(z[:, 3 * hid :])
    c = f * c + i * g
    return o * np.tanh(c), c


def step_distribution(params: Params, enc, inst: Instance, d: np.ndarray, x_ids: np.ndarray, cfg: HiMapConfig) -> np.ndarray:
    """Final extended-vocabulary distribution for a batch of decoder states."""
    _, a, _ = attention_step(params, enc.word, d)
    mmr = mmr_scores(params, enc.sentence, d, cfg.lambda_, enc.redundancy)
    abar = reweight_attention(a, enc.owner, mmr, cfg.renormalize)
    ctx = abar @ enc.word
    n_ext = params["out_V2"].shape[0] + len(inst.oovs)
    _, _, final = output_distribution(params, d, ctx, params["embedding"][x_ids], abar, inst.ext_ids, n_ext)
    return final


def decode_ids(params: Params, inst: Instance, cfg: HiMapConfig, beam: int = 1,
               max_len: Optional[int] = None, end_id: int = 2, start_id: int = 1, unk_id: int = 0) -> List[int]:
    """Length-normalised beam search; ``beam=1`` is greedy arg-max decoding.

    Returns extended-vocabulary ids without the end token.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    max_len = cfg.max_decode_tokens if max_len is None else max_len
    V = params["out_V2"].shape[0]
    Dh = params["dec_W"].shape[0] // 4
    enc = encode(params, inst, cfg)
    live = [([], 0.0)]
    h = np.zeros((1, Dh))
    c = np.zeros((1, Dh))
    finished = []
    for _ in range(max_len):
        x_ids = np.array([(seq[-1] if seq[-1] < V else unk_id) if seq else start_id for seq, _ in live])
        h, c = lstm_step(params["dec_W"], params["dec_b"], params["embedding"][x_ids], h, c)
        logp = np.log(np.maximum(step_distribution(params, enc, inst, h, x_ids, cfg), 1e-300))
        if beam == 1:
            tok = int(np.argmax(logp[0]))
            seq, score = live[0]
            if tok == end_id:
                finished.append((seq, score + logp[0, tok]))
                live = []
                break
            live = [(seq + [tok], score + logp[0, tok])]
            continue
        cands = []
        for r, (seq, score) in enumerate(live):
            top = np.argsort(-logp[r], kind="stable")[:beam]
            cands.extend((score + logp[r, t], r, int(t)) for t in top)
        cands.sort(key=lambda z: (-z[0], z[1], z[2]))
        new_live, rows = [], []
        for score, r, t in cands:
            if t == end_id:
                seq = live[r][0]
                finished.append((seq, score))
            else:
                new_live.append((live[r][0] + [t], score))
                rows.append(r)
            if len(new_live) == beam:
                break
        if len(finished) >= beam or not new_live:
            live = new_live
            break
        live = new_live
        h, c = h[rows], c[rows]
    pool = finished if finished else live
    best = max(pool, key=lambda z: z[1] / (len(z[0]) + 1))
    return best[0]


def ids_to_tokens(ids: Sequence[int], vocab: Vocab, inst: Instance) -> List[str]:
    V = len(vocab)
    return [vocab.words[i] if i < V else inst.oovs[i - V] for i in ids]


def token_accuracy(params: Params, instances: Sequence[Instance], cfg: HiMapConfig) -> float:
    """Share of target positions (end token excluded) that greedy decoding reproduces."""
    hits = total = 0
    for inst in instances:
        target = inst.targets[:-1]
        out = decode_ids(params, inst, cfg, beam=1, max_len=len(inst.targets))
        hits += sum(1 for k, t in enumerate(target) if k < len(out) and out[k] == t)
        total += len(target)
    return hits / total if total else 0.0


def make_copy_task(n_examples: int = 200, n_symbols: int = 30, sentence_len: Tuple[int, int] = (3, 5),
                   seed: int = 0) -> List[Example]:
    """Two sources of two sentences each; the summary is both first sentences.

    Sentences are random symbols ``s0 .. s{n_symbols-1}`` closed by ".".
    """
    rng = np.random.default_rng(seed)
    symbols = [f"s{i}" for i in range(n_symbols)]

    def sentence():
        k = int(rng.integers(sentence_len[0], sentence_len[1] + 1))
        return [symbols[j] for j in rng.integers(0, n_symbols, size=k)] + ["."]

    examples = []
    for n in range(n_examples):
        docs = [Document([sentence(), sentence()]) for _ in range(2)]
        summary = Document([list(docs[0].sentences[0]), list(docs[1].sentences[0])])
        examples.append(Example(f"copy-{n}", docs, summary))
    return examples


def build_instances(examples: Sequence[Example], vocab: Vocab, cfg: HiMapConfig,
                    policy: Optional[TruncationPolicy] = None) -> List[Instance]:
    policy = policy or TruncationPolicy(cfg.max_encode_tokens)
    return [make_instance(vocab, truncate_example(ex, policy), ex.summary.tokens, cfg.max_decode_tokens)
            for ex in examples]


def mega_instance(vocab: Vocab, mega: MegaDocument) -> Instance:
    return make_instance(vocab, mega)
