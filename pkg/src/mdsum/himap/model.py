"""Hi-MAP forward computation and its exact reverse pass.

The decoder has no input feeding, so with teacher forcing every decoder state
is known before any attention is computed. All per-step quantities (attention,
MMR distribution, output mixture) are therefore evaluated for all target
positions at once as T-row matrices; only the three LSTMs loop over time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .config import HiMapConfig, Instance
from .params import Params

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(x, axis=-1):
    z = np.exp(x - x.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# LSTM


@dataclass
class LSTMCache:
    X: np.ndarray
    H: np.ndarray
    C: np.ndarray
    TC: np.ndarray
    gates: np.ndarray


def lstm_forward(W: np.ndarray, b: np.ndarray, X: np.ndarray, h0=None, c0=None):
    """Run an LSTM over the rows of ``X``; returns hidden states and a cache."""
    T, n_in = X.shape
    hid = W.shape[0] // 4
    Wh = W[:, n_in:]
    Zx = X @ W[:, :n_in].T + b
    h = np.zeros(hid) if h0 is None else h0
    c = np.zeros(hid) if c0 is None else c0
    H = np.empty((T, hid))
    C = np.empty((T, hid))
    TC = np.empty((T, hid))
    G = np.empty((T, 4 * hid))
    s3 = 3 * hid
    for t in range(T):
        z = Zx[t] + Wh @ h
        g = G[t]
        g[:s3] = sigmoid(z[:s3])
        g[s3:] = np.tanh(z[s3:])
        c = g[hid : 2 * hid] * c + g[:hid] * g[s3:]
        tc = np.tanh(c)
        h = g[2 * hid : s3] * tc
        H[t], C[t], TC[t] = h, c, tc
    return H, LSTMCache(X, H, C, TC, G)


def lstm_backward(W: np.ndarray, cache: LSTMCache, dH: np.ndarray):
    """Gradients (dX, dW, db) of an LSTM started from zero state."""
    X, H, C, TC, G = cache.X, cache.H, cache.C, cache.TC, cache.gates
    T, n_in = X.shape
    hid = H.shape[1]
    WhT = W[:, n_in:].T
    dZ = np.empty((T, 4 * hid))
    dh_next = np.zeros(hid)
    dc_next = np.zeros(hid)
    zero = np.zeros(hid)
    for t in range(T - 1, -1, -1):
        g = G[t]
        i, f, o, cand = g[:hid], g[hid : 2 * hid], g[2 * hid : 3 * hid], g[3 * hid :]
        tc = TC[t]
        c_prev = C[t - 1] if t else zero
        dh = dH[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dZ[t]
        dz[:hid] = dc * cand * i * (1.0 - i)
        dz[hid : 2 * hid] = dc * c_prev * f * (1.0 - f)
        dz[2 * hid : 3 * hid] = dh * tc * o * (1.0 - o)
        dz[3 * hid :] = dc * i * (1.0 - cand * cand)
        dc_next = dc * f
        dh_next = WhT @ dz
    H_prev = np.vstack([np.zeros((1, hid)), H[:-1]])
    dW = np.hstack([dZ.T @ X, dZ.T @ H_prev])
    return dZ @ W[:, :n_in], dW, dZ.sum(axis=0)


# ---------------------------------------------------------------------------
# Encoder


@dataclass
class EncoderStates:
    word: np.ndarray  # (N, 2H) concatenated forward/backward states
    sentence: np.ndarray  # (n, S)
    owner: np.ndarray  # (N,) sentence of each token, -1 for separators
    last_idx: np.ndarray  # (n,) last token of each sentence
    redundancy: np.ndarray  # (n,) self-attention score per sentence
    cache: Dict = field(default_factory=dict, repr=False)

    @property
    def ownership(self) -> np.ndarray:
        """(N, n) one-hot token-to-sentence matrix; separator rows are zero."""
        O = np.zeros((len(self.owner), len(self.last_idx)))
        mask = self.owner >= 0
        O[np.nonzero(mask)[0], self.owner[mask]] = 1.0
        return O


def redundancy_scores(Hs: np.ndarray, W_self: np.ndarray):
    """Largest self-attention weight of each sentence over the other sentences.

    A lone sentence has score 0. Returns (scores, cache).
    """
    n = len(Hs)
    if n == 1:
        return np.zeros(1), None
    M = Hs @ W_self.T @ Hs.T  # M[i, j] = h_j^T W_self h_i
    Vm = np.tanh(M)
    logits = Vm.copy()
    np.fill_diagonal(logits, -np.inf)
    beta = softmax(logits, axis=1)
    jstar = np.argmax(beta, axis=1)  # ties go to the smallest j
    return beta[np.arange(n), jstar], (Hs, W_self, Vm, beta, jstar)


def redundancy_backward(cache, dscore: np.ndarray):
    Hs, W, Vm, beta, jstar = cache
    n = len(Hs)
    dbeta = np.zeros((n, n))
    dbeta[np.arange(n), jstar] = dscore
    dv = beta * (dbeta - (dbeta * beta).sum(axis=1, keepdims=True))
    dM = dv * (1.0 - Vm * Vm)
    np.fill_diagonal(dM, 0.0)
    dHs = dM @ Hs @ W + dM.T @ Hs @ W.T
    dW = Hs.T @ dM.T @ Hs
    return dHs, dW


def encode(params: Params, inst: Instance, cfg: Optional[HiMapConfig] = None) -> EncoderStates:
    """Bidirectional word encoder followed by the sentence-level LSTM."""
    N = len(inst.src_ids)
    if N == 0:
        raise ValueError("cannot encode an empty input")
    if inst.n_sentences == 0:
        raise ValueError("input has no sentences")
    if cfg is not None:
        n_sep = int((inst.owner < 0).sum())
        if N - n_sep > cfg.max_encode_tokens:
            raise ValueError(f"input has {N - n_sep} tokens, limit is {cfg.max_encode_tokens}")
    X = params["embedding"][inst.src_ids]
    Hf, cf = lstm_forward(params["enc_fw_W"], params["enc_fw_b"], X)
    Hb, cb = lstm_forward(params["enc_bw_W"], params["enc_bw_b"], X[::-1])
    word = np.hstack([Hf, Hb[::-1]])
    Hs, cs = lstm_forward(params["sent_W"], params["sent_b"], word[inst.last_idx])
    red, rc = redundancy_scores(Hs, params["W_self"])
    return EncoderStates(word, Hs, inst.owner, inst.last_idx, red,
                         {"fw": cf, "bw": cb, "sent": cs, "red": rc})


def encoder_backward(params: Params, inst: Instance, enc: EncoderStates, dword: np.ndarray,
                     dsent: np.ndarray, dred: np.ndarray, grads: Params) -> None:
    c = enc.cache
    if c["red"] is not None:
        dHs, dW_self = redundancy_backward(c["red"], dred)
        dsent = dsent + dHs
        grads["W_self"] += dW_self
    dsent_in, dW, db = lstm_backward(params["sent_W"], c["sent"], dsent)
    grads["sent_W"] += dW
    grads["sent_b"] += db
    dword = dword.copy()
    np.add.at(dword, enc.last_idx, dsent_in)
    H = dword.shape[1] // 2
    dXf, dW, db = lstm_backward(params["enc_fw_W"], c["fw"], dword[:, :H])
    grads["enc_fw_W"] += dW
    grads["enc_fw_b"] += db
    dXb, dW, db = lstm_backward(params["enc_bw_W"], c["bw"], dword[::-1, H:])
    grads["enc_bw_W"] += dW
    grads["enc_bw_b"] += db
    np.add.at(grads["embedding"], inst.src_ids, dXf + dXb[::-1])


# ---------------------------------------------------------------------------
# Per-step pieces, each vectorised over T decoder states


def attention_step(params: Params, word: np.ndarray, d: np.ndarray):
    """Additive attention over encoder states for decoder state(s) ``d``.

    Returns (e, a, context); with a 1-D ``d`` the results are 1-D as well.
    """
    single = d.ndim == 1
    D = d[None] if single else d
    T_ = np.tanh((word @ params["attn_W_h"].T)[None] + (D @ params["attn_W_s"].T + params["attn_b"])[:, None])
    e = T_ @ params["attn_v"]
    a = softmax(e, axis=1)
    ctx = a @ word
    return (e[0], a[0], ctx[0]) if single else (e, a, ctx)


def mmr_scores(params: Params, Hs: np.ndarray, s_sum: np.ndarray, lambda_: float, redundancy=None):
    """Softmax-normalised MMR weight of every sentence given summary vector(s) ``s_sum``."""
    single = s_sum.ndim == 1
    S = s_sum[None] if single else s_sum
    if redundancy is None:
        redundancy, _ = redundancy_scores(Hs, params["W_self"])
    sim1 = S @ (Hs @ params["W_sim"]).T
    dist = softmax(lambda_ * sim1 - (1.0 - lambda_) * redundancy[None], axis=1)
    return dist[0] if single else dist


def reweight_attention(a: np.ndarray, owner: np.ndarray, mmr: np.ndarray, renormalize: bool = True) -> np.ndarray:
    """Scale each token's attention by its sentence's MMR weight.

    Separator tokens (owner -1) get zero. Rows whose product is all zero fall
    back to the original attention.
    """
    single = a.ndim == 1
    A = a[None] if single else a
    M = mmr[None] if mmr.ndim == 1 else mmr
    padded = np.hstack([M, np.zeros((M.shape[0], 1))])
    u = A * padded[:, owner]  # owner -1 picks the zero column
    Z = u.sum(axis=1, keepdims=True)
    dead = Z[:, 0] <= 0
    if dead.any():
        logger.warning("MMR-weighted attention vanished; using plain attention")
        u[dead] = A[dead]
        Z[dead] = A[dead].sum(axis=1, keepdims=True)
    out = u / Z if renormalize else u
    return out[0] if single else out


def output_distribution(params: Params, d: np.ndarray, ctx: np.ndarray, x: np.ndarray,
                        attn: np.ndarray, ext_ids: np.ndarray, n_ext: int):
    """Vocabulary softmax, generation switch and final copy/generate mixture.

    ``x`` is the decoder input embedding; ``attn`` the (reweighted) attention
    used for copying. Returns (P_vocab, p_gen, P_final) where P_final spans the
    extended vocabulary of ``n_ext`` entries.
    """
    single = d.ndim == 1
    D, Ctx, X, Att = (v[None] if single else v for v in (d, ctx, x, attn))
    hidden = np.hstack([D, Ctx]) @ params["out_V"].T + params["out_b"]
    p_vocab = softmax(hidden @ params["out_V2"].T + params["out_b2"], axis=1)
    p_gen = sigmoid(Ctx @ params["ptr_w_h"] + D @ params["ptr_w_d"] + X @ params["ptr_w_x"] + params["ptr_b"][0])
    V = p_vocab.shape[1]
    final = np.zeros((len(D), n_ext))
    final[:, :V] = p_gen[:, None] * p_vocab
    copy = np.zeros((len(D), n_ext))
    for k, w in enumerate(ext_ids):
        copy[:, w] += Att[:, k]
    final += (1.0 - p_gen)[:, None] * copy
    if single:
        return p_vocab[0], p_gen[0], final[0]
    return p_vocab, p_gen, final


@dataclass
class DecodeStep:
    d_t: np.ndarray
    s_sum: np.ndarray
    energies: np.ndarray
    attention: np.ndarray
    mmr: np.ndarray
    attention_mmr: np.ndarray
    context: np.ndarray
    p_vocab: np.ndarray
    p_gen: float
    p_final: np.ndarray


def decode_step(params: Params, enc: EncoderStates, inst: Instance, d_t: np.ndarray, x_id: int,
                cfg: HiMapConfig, *, mmr_override: Optional[np.ndarray] = None, use_mmr: bool = True) -> DecodeStep:
    """Every intermediate of one decoding step for decoder state ``d_t``.

    ``use_mmr=False`` gives the plain pointer-generator step (no sentence
    reweighting); ``mmr_override`` replaces the computed MMR distribution.
    """
    x = params["embedding"][x_id]
    e, a, _ = attention_step(params, enc.word, d_t)
    if mmr_override is not None:
        mmr = np.asarray(mmr_override, dtype=float)
    else:
        mmr = mmr_scores(params, enc.sentence, d_t, cfg.lambda_, enc.redundancy)
    abar = reweight_attention(a, enc.owner, mmr, cfg.renormalize) if use_mmr else a
    ctx = abar @ enc.word
    n_ext = params["out_V2"].shape[0] + len(inst.oovs)
    p_vocab, p_gen, final = output_distribution(params, d_t, ctx, x, abar, inst.ext_ids, n_ext)
    return DecodeStep(d_t, d_t, e, a, mmr, abar, ctx, p_vocab, float(p_gen), final)


# ---------------------------------------------------------------------------
# Teacher-forced loss and its gradient


@dataclass
class Graph:
    params: Params
    inst: Instance
    cfg: HiMapConfig
    loss: float
    values: Dict = field(default_factory=dict)


def forward_loss(params: Params, inst: Instance, cfg: HiMapConfig):
    """Mean negative log-likelihood of the target under teacher forcing.

    Returns (loss, graph); ``backward(graph)`` yields the parameter gradients.
    """
    T = len(inst.targets)
    if T > cfg.max_decode_tokens:
        raise ValueError(f"target has {T} steps, limit is {cfg.max_decode_tokens}")
    enc = encode(params, inst, cfg)
    if T == 0:
        return 0.0, Graph(params, inst, cfg, 0.0, {"enc": enc, "T": 0})
    lam = cfg.lambda_
    Xd = params["embedding"][inst.dec_in]
    D, dec_cache = lstm_forward(params["dec_W"], params["dec_b"], Xd)
    word, Hs = enc.word, enc.sentence

    # word attention
    F = word @ params["attn_W_h"].T
    G = D @ params["attn_W_s"].T + params["attn_b"]
    Th = np.tanh(F[None] + G[:, None])
    a = softmax(Th @ params["attn_v"], axis=1)

    # sentence MMR, summary vector = current decoder state
    K = Hs @ params["W_sim"]
    sim1 = D @ K.T
    mmr = softmax(lam * sim1 - (1.0 - lam) * enc.redundancy[None], axis=1)

    O = enc.ownership
    mtok = mmr @ O.T
    u = a * mtok
    Z = u.sum(axis=1, keepdims=True)
    dead = Z[:, 0] <= 0
    if dead.any():
        logger.warning("MMR-weighted attention vanished; using plain attention")
        u[dead] = a[dead]
        Z[dead] = a[dead].sum(axis=1, keepdims=True)
    abar = u / Z if cfg.renormalize else u

    ctx = abar @ word
    DC = np.hstack([D, ctx])
    hidden = DC @ params["out_V"].T + params["out_b"]
    p_vocab = softmax(hidden @ params["out_V2"].T + params["out_b2"], axis=1)
    p_gen = sigmoid(ctx @ params["ptr_w_h"] + D @ params["ptr_w_d"] + Xd @ params["ptr_w_x"] + params["ptr_b"][0])

    y = inst.targets
    V = p_vocab.shape[1]
    in_vocab = y < V
    rows = np.arange(T)
    pv_y = np.where(in_vocab, p_vocab[rows, np.minimum(y, V - 1)], 0.0)
    copy_mask = (inst.ext_ids[None, :] == y[:, None]).astype(float)
    copy_y = (abar * copy_mask).sum(axis=1)
    prob = p_gen * pv_y + (1.0 - p_gen) * copy_y
    loss = float(-np.log(np.maximum(prob, PROB_FLOOR)).mean())
    values = dict(enc=enc, T=T, Xd=Xd, D=D, dec_cache=dec_cache, Th=Th, a=a, K=K, mmr=mmr, O=O,
                  mtok=mtok, Z=Z, dead=dead, abar=abar, ctx=ctx, DC=DC, hidden=hidden, p_vocab=p_vocab,
                  p_gen=p_gen, in_vocab=in_vocab, pv_y=pv_y, copy_mask=copy_mask, copy_y=copy_y, prob=prob)
    return loss, Graph(params, inst, cfg, loss, values)


def backward(graph: Graph) -> Params:
    """Exact gradient of the mean NLL for every parameter array.

    The max over self-attention weights passes its gradient to the arg-max
    entry only.
    """
    p, inst, cfg, v = graph.params, graph.inst, graph.cfg, graph.values
    grads = {k: np.zeros_like(w) for k, w in p.items()}
    T = v["T"]
    if T == 0:
        return grads
    enc = v["enc"]
    word, Hs = enc.word, enc.sentence
    lam = cfg.lambda_
    y = inst.targets
    prob, p_gen, p_vocab = v["prob"], v["p_gen"], v["p_vocab"]

    dprob = np.where(prob > PROB_FLOOR, -1.0 / (T * prob), 0.0)
    dpgen = dprob * (v["pv_y"] - v["copy_y"])
    dabar = (dprob * (1.0 - p_gen))[:, None] * v["copy_mask"]

    # vocabulary softmax: only the target entry carries gradient
    dpv_y = np.where(v["in_vocab"], dprob * p_gen, 0.0)
    dlogits = -(dpv_y * v["pv_y"])[:, None] * p_vocab
    iv = np.nonzero(v["in_vocab"])[0]
    dlogits[iv, y[iv]] += dpv_y[iv] * v["pv_y"][iv]
    grads["out_V2"] += dlogits.T @ v["hidden"]
    grads["out_b2"] += dlogits.sum(axis=0)
    dhidden = dlogits @ p["out_V2"]
    grads["out_V"] += dhidden.T @ v["DC"]
    grads["out_b"] += dhidden.sum(axis=0)
    dDC = dhidden @ p["out_V"]
    Dh = p["dec_W"].shape[0] // 4
    dD = dDC[:, :Dh].copy()
    dctx = dDC[:, Dh:].copy()

    # generation switch
    s = dpgen * p_gen * (1.0 - p_gen)
    grads["ptr_w_h"] += v["ctx"].T @ s
    grads["ptr_w_d"] += v["D"].T @ s
    grads["ptr_w_x"] += v["Xd"].T @ s
    grads["ptr_b"] += s.sum()
    dctx += np.outer(s, p["ptr_w_h"])
    dD += np.outer(s, p["ptr_w_d"])
    dXd = np.outer(s, p["ptr_w_x"])

    # context vector
    abar = v["abar"]
    dabar += dctx @ word.T
    dword = abar.T @ dctx

    # MMR reweighting
    a, mtok, Z, dead = v["a"], v["mtok"], v["Z"], v["dead"]
    if cfg.renormalize:
        du = (dabar - (dabar * abar).sum(axis=1, keepdims=True)) / Z
    else:
        du = dabar
    da = du * mtok
    da[dead] = du[dead]
    dmtok = du * a
    dmtok[dead] = 0.0
    dmmr = dmtok @ v["O"]
    mmr = v["mmr"]
    dlog_mmr = mmr * (dmmr - (dmmr * mmr).sum(axis=1, keepdims=True))
    dsim1 = lam * dlog_mmr
    dred = -(1.0 - lam) * dlog_mmr.sum(axis=0)
    dD += dsim1 @ v["K"]
    dK = dsim1.T @ v["D"]
    dHs = dK @ p["W_sim"].T
    grads["W_sim"] += Hs.T @ dK

    # word attention
    de = a * (da - (da * a).sum(axis=1, keepdims=True))
    Th = v["Th"]
    grads["attn_v"] += np.einsum("tn,tna->a", de, Th)
    dpre = de[:, :, None] * p["attn_v"] * (1.0 - Th * Th)
    dF = dpre.sum(axis=0)
    dG = dpre.sum(axis=1)
    grads["attn_W_h"] += dF.T @ word
    dword += dF @ p["attn_W_h"]
    grads["attn_W_s"] += dG.T @ v["D"]
    grads["attn_b"] += dG.sum(axis=0)
    dD += dG @ p["attn_W_s"]

    # decoder LSTM and its input embeddings
    dX, dW, db = lstm_backward(p["dec_W"], v["dec_cache"], dD)
    grads["dec_W"] += dW
    grads["dec_b"] += db
    np.add.at(grads["embedding"], inst.dec_in, dX + dXd)

    encoder_backward(p, inst, enc, dword, dHs, dred, grads)
    return grads


def loss_and_grads(params: Params, inst: Instance, cfg: HiMapConfig):
    loss, graph = forward_loss(params, inst, cfg)
    return loss, backward(graph)
