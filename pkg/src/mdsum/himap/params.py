"""Parameter layout, initialisation and JSON checkpoints."""

from __future__ import annotations

import base64
import json
from typing import Dict, Optional, Tuple

import numpy as np

from .config import HiMapConfig, Vocab

CHECKPOINT_VERSION = 1

Params = Dict[str, np.ndarray]

# LSTM weight matrices act on [input; previous hidden] with gates stacked i, f, o, g.
BIASES = frozenset({"enc_fw_b", "enc_bw_b", "sent_b", "dec_b", "attn_b", "out_b", "out_b2", "ptr_b"})


class CheckpointError(ValueError):
    pass


def param_shapes(cfg: HiMapConfig) -> Dict[str, Tuple[int, ...]]:
    V, E = cfg.vocab_size, cfg.embed_dim
    H, S, D = cfg.encoder_hidden, cfg.sentence_hidden, cfg.decoder_hidden
    A = P = D  # attention and output-projection widths follow the decoder
    return {
        "embedding": (V, E),
        "enc_fw_W": (4 * H, E + H),
        "enc_fw_b": (4 * H,),
        "enc_bw_W": (4 * H, E + H),
        "enc_bw_b": (4 * H,),
        "sent_W": (4 * S, 2 * H + S),
        "sent_b": (4 * S,),
        "dec_W": (4 * D, E + D),
        "dec_b": (4 * D,),
        "attn_v": (A,),
        "attn_W_h": (A, 2 * H),
        "attn_W_s": (A, D),
        "attn_b": (A,),
        "out_V": (P, D + 2 * H),
        "out_b": (P,),
        "out_V2": (V, P),
        "out_b2": (V,),
        "ptr_w_h": (2 * H,),
        "ptr_w_d": (D,),
        "ptr_w_x": (E,),
        "ptr_b": (1,),
        "W_sim": (S, D),
        "W_self": (S, S),
    }


def init_params(cfg: HiMapConfig, seed: Optional[int] = None) -> Params:
    """Uniform(-scale, scale) weights and zero biases, drawn in a fixed name order."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name in BIASES:
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.uniform(-cfg.init_scale, cfg.init_scale, size=shape)
    return params


def _encode_array(arr: np.ndarray) -> Dict:
    data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return {"shape": list(arr.shape), "data": base64.b64encode(data).decode("ascii")}


def save_checkpoint(params: Params, cfg: HiMapConfig, path: str, vocab: Optional[Vocab] = None) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "config": cfg.to_dict(),
        "vocab": vocab.words if vocab is not None else None,
        "arrays": {name: _encode_array(params[name]) for name in sorted(params)},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path: str) -> Tuple[Params, HiMapConfig, Optional[Vocab]]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: not a valid checkpoint ({exc})") from exc
    if not isinstance(doc, dict) or "arrays" not in doc or "config" not in doc:
        raise CheckpointError(f"{path}: missing 'config' or 'arrays'")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: checkpoint version {doc.get('version')!r}, expected {CHECKPOINT_VERSION}")
    try:
        cfg = HiMapConfig.from_dict(doc["config"])
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: bad config ({exc})") from exc
    shapes = param_shapes(cfg)
    arrays = doc["arrays"]
    missing = sorted(set(shapes) - set(arrays))
    if missing:
        raise CheckpointError(f"{path}: missing array {missing[0]!r}")
    params = {}
    for name, shape in shapes.items():
        entry = arrays[name]
        if tuple(entry["shape"]) != shape:
            raise CheckpointError(f"{path}: array {name!r} has shape {tuple(entry['shape'])}, expected {shape}")
        try:
            raw = base64.b64decode(entry["data"], validate=True)
            arr = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
        except (ValueError, TypeError) as exc:
            raise CheckpointError(f"{path}: array {name!r} is corrupt ({exc})") from exc
        params[name] = arr
    vocab = Vocab(doc["vocab"]) if doc.get("vocab") else None
    return params, cfg, vocab
