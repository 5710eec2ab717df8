"""Central-difference verification of the reverse pass."""

from __future__ import annotations

from typing import Dict, Optional, Tuple

import numpy as np

from ..corpus import Document, Example, TruncationPolicy, truncate_example
from .config import HiMapConfig, Instance, Vocab, make_instance
from .model import backward, forward_loss
from .params import Params, init_params

# Central differences at eps=1e-5 carry ~1e-10 absolute round-off for O(1)
# losses, so relative error is measured against at least this magnitude.
REL_FLOOR = 1e-6

TINY = dict(vocab_size=20, embed_dim=4, encoder_hidden=6, sentence_hidden=6, decoder_hidden=8)


def relative_error(analytic: float, numeric: float, floor: float = REL_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def tiny_problem(seed: int = 0, **overrides) -> Tuple[Params, Instance, HiMapConfig]:
    """Random parameters plus a two-source instance with copyable OOV words.

    Biases are drawn non-zero so their gradients are exercised away from the
    initial point.
    """
    rng = np.random.default_rng(seed)
    cfg = HiMapConfig(**{**TINY, "max_decode_tokens": 40, "max_encode_tokens": 60,
                         "seed": seed, "init_scale": 0.5, **overrides})
    words = [f"w{i}" for i in range(cfg.vocab_size + 4)]

    def sentence(k):
        return [words[j] for j in rng.integers(0, len(words), size=k)]

    example = Example("tiny", [Document([sentence(4), sentence(3)]), Document([sentence(5), sentence(2)])],
                      Document([sentence(6)]))
    vocab = Vocab.build([words[: cfg.vocab_size - 4]], cfg.vocab_size)
    mega = truncate_example(example, TruncationPolicy(cfg.max_encode_tokens))
    inst = make_instance(vocab, mega, example.summary.tokens, cfg.max_decode_tokens)
    params = init_params(cfg)
    for name, arr in params.items():
        if not arr.any():
            params[name] = rng.uniform(-0.5, 0.5, size=arr.shape)
    return params, inst, cfg


def gradient_check(params: Params, inst: Instance, cfg: HiMapConfig, eps: float = 1e-5,
                   samples: Optional[int] = 20, seed: int = 0) -> Dict[str, float]:
    """Largest relative error per array between backward() and central differences.

    ``samples`` entries are drawn per array (all entries when None).
    """
    rng = np.random.default_rng(seed)
    _, graph = forward_loss(params, inst, cfg)
    grads = backward(graph)
    worst = {}
    for name, arr in params.items():
        flat = arr.reshape(-1)
        if samples is None or samples >= flat.size:
            idx = np.arange(flat.size)
        else:
            idx = rng.choice(flat.size, size=samples, replace=False)
        g = grads[name].reshape(-1)
        err = 0.0
        for k in idx:
            old = flat[k]
            flat[k] = old + eps
            up, _ = forward_loss(params, inst, cfg)
            flat[k] = old - eps
            down, _ = forward_loss(params, inst, cfg)
            flat[k] = old
            err = max(err, relative_error(g[k], (up - down) / (2 * eps)))
        worst[name] = err
    return worst
