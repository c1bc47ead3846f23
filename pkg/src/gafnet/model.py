"""Dual-branch network: 1D CNN + BiLSTM over the raw segment, 2D CNN over its
GAF image, dual-layer cross-channel split attention fusion, MLP head, softmax
classifier. Forward and backward are hand-written on top of `ops`.
"""

import struct
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import ops
from .errors import DataFormatError, ShapeMismatchError
from .ops import ParamTensor

VARIANTS = ("full", "no_dual_attention", "no_cross_channel", "time_only", "gaf_only")

MODEL_MAGIC = b"GAFN"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    num_classes: int
    cnn1d_layers: Tuple[Tuple[int, int], ...] = ((32, 7), (64, 5))  # (channels, kernel)
    lstm_hidden: int = 64
    cnn2d_layers: Tuple[Tuple[int, int, int], ...] = ((16, 3, 2), (32, 3, 2), (64, 3, 2))  # (channels, kernel, stride)
    groups: int = 8
    d_attn: int = 16
    mlp_hidden: int = 128
    variant: str = "full"

    def __post_init__(self):
        object.__setattr__(self, "cnn1d_layers", tuple(tuple(l) for l in self.cnn1d_layers))
        object.__setattr__(self, "cnn2d_layers", tuple(tuple(l) for l in self.cnn2d_layers))
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.d_attn <= 0 or self.groups <= 0 or self.mlp_hidden <= 0:
            raise ValueError("d_attn, groups, mlp_hidden must be positive")
        if self.d_t % self.groups or self.d_s % self.groups:
            raise ValueError("groups must divide both feature dims")

    @property
    def d_t(self) -> int:
        return 2 * self.lstm_hidden

    @property
    def d_s(self) -> int:
        return self.cnn2d_layers[-1][0]

    @property
    def fused_in(self) -> int:
        if self.variant == "time_only":
            return self.d_t
        if self.variant == "gaf_only":
            return self.d_s
        return self.d_t + self.d_s

    @property
    def uses_temporal(self) -> bool:
        return self.variant != "gaf_only"

    @property
    def uses_spatial(self) -> bool:
        return self.variant != "time_only"

    @property
    def uses_attention(self) -> bool:
        return self.variant in ("full", "no_cross_channel")

    @property
    def uses_cross(self) -> bool:
        return self.variant == "full"


def ablation_variant(cfg: ModelConfig, variant: str) -> ModelConfig:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    return replace(cfg, variant=variant)


class ModelParams:
    """All learnable tensors, addressed by name in a fixed order."""

    def __init__(self, cfg: ModelConfig, tensors: Dict[str, ParamTensor]):
        self.cfg = cfg
        self.tensors = tensors

    def __getitem__(self, name: str) -> ParamTensor:
        return self.tensors[name]

    def items(self):
        return list(self.tensors.items())

    def zero_grad(self):
        for p in self.tensors.values():
            p.zero_grad()

    def add_grad(self, name: str, g):
        self.tensors[name].grad += g

    def copy(self) -> "ModelParams":
        return ModelParams(self.cfg, {k: ParamTensor(p.value.copy()) for k, p in self.items()})


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> ModelParams:
    """Seed-deterministic initialization: weights uniform(+-sqrt(1/fan_in)),
    biases zero (LSTM forget gate 1.0), layer-norm gain 1 / bias 0."""
    t: Dict[str, ParamTensor] = {}

    def add(name, value):
        t[name] = ParamTensor(value)

    if cfg.uses_temporal:
        cin = 1
        for i, (ch, k) in enumerate(cfg.cnn1d_layers):
            add(f"conv1.{i}.w", ops.uniform_init(rng, (ch, cin, k), cin * k))
            add(f"conv1.{i}.b", np.zeros(ch))
            cin = ch
        for tag in ("f", "b"):
            cell = ops.init_lstm_cell(rng, cin, cfg.lstm_hidden)
            add(f"lstm.{tag}.w_x", cell.w_x)
            add(f"lstm.{tag}.w_h", cell.w_h)
            add(f"lstm.{tag}.b", cell.b)
    if cfg.uses_spatial:
        cin = 1
        for i, (ch, k, _s) in enumerate(cfg.cnn2d_layers):
            add(f"conv2.{i}.w", ops.uniform_init(rng, (ch, cin, k, k), cin * k * k))
            add(f"conv2.{i}.b", np.zeros(ch))
            cin = ch
    if cfg.uses_attention:
        c_t = cfg.d_t // cfg.groups
        c_s = cfg.d_s // cfg.groups
        flat = cfg.groups * cfg.d_attn
        for tag, c in (("t", c_t), ("s", c_s)):
            for proj in ("wq", "wk", "wv"):
                add(f"attn.{tag}.{proj}", ops.uniform_init(rng, (c, cfg.d_attn), c))
        add("attn.t.wo_intra", ops.uniform_init(rng, (flat, cfg.d_t), flat))
        add("attn.s.wo_intra", ops.uniform_init(rng, (flat, cfg.d_s), flat))
        if cfg.uses_cross:
            add("attn.t.wo_cross", ops.uniform_init(rng, (flat, cfg.d_t), flat))
            add("attn.s.wo_cross", ops.uniform_init(rng, (flat, cfg.d_s), flat))
        add("ln.t.gain", np.ones(cfg.d_t))
        add("ln.t.bias", np.zeros(cfg.d_t))
        add("ln.s.gain", np.ones(cfg.d_s))
        add("ln.s.bias", np.zeros(cfg.d_s))
    add("mlp.w1", ops.uniform_init(rng, (cfg.fused_in, cfg.mlp_hidden), cfg.fused_in))
    add("mlp.b1", np.zeros(cfg.mlp_hidden))
    add("cls.w", ops.uniform_init(rng, (cfg.mlp_hidden, cfg.num_classes), cfg.mlp_hidden))
    add("cls.b", np.zeros(cfg.num_classes))
    return ModelParams(cfg, t)


# ---------------------------------------------------------------------------
# feature vector tokenization


def channel_split(f: np.ndarray, groups: int) -> np.ndarray:
    """Reshape a feature vector (..., d) into (..., g, d/g) tokens, order preserved."""
    f = np.asarray(f, dtype=np.float64)
    d = f.shape[-1]
    if d % groups:
        raise ShapeMismatchError(f"groups {groups} does not divide feature dim {d}")
    return f.reshape(*f.shape[:-1], groups, d // groups)


# ---------------------------------------------------------------------------
# scaled dot-product attention over tokens


def _attention_forward(tq, tkv, wq, wk, wv):
    """softmax(Q K^T / sqrt(d_attn)) V for token matrices (B, g, c)."""
    q = tq @ wq
    k = tkv @ wk
    v = tkv @ wv
    scale = 1.0 / np.sqrt(wq.shape[1])
    scores = q @ np.swapaxes(k, -1, -2) * scale
    att, sm_cache = ops.softmax_forward(scores, axis=-1)
    out = att @ v
    return out, (tq, tkv, wq, wk, wv, q, k, v, att, sm_cache, scale)


def _attention_backward(gout, cache):
    """Returns (g_tq, g_tkv, gwq, gwk, gwv); for self-attention the caller
    adds g_tq and g_tkv."""
    tq, tkv, wq, wk, wv, q, k, v, att, sm_cache, scale = cache
    gatt = gout @ np.swapaxes(v, -1, -2)
    gv = np.swapaxes(att, -1, -2) @ gout
    (gscores,) = ops.softmax_backward(gatt, sm_cache)
    gq = gscores @ k * scale
    gk = np.swapaxes(gscores, -1, -2) @ q * scale
    g_tq = gq @ wq.T
    g_tkv = gk @ wk.T + gv @ wv.T
    gwq = np.einsum("bgc,bgd->cd", tq, gq, optimize=True)
    gwk = np.einsum("bgc,bgd->cd", tkv, gk, optimize=True)
    gwv = np.einsum("bgc,bgd->cd", tkv, gv, optimize=True)
    return g_tq, g_tkv, gwq, gwk, gwv


def intra_attention(tokens, wq, wk, wv):
    """Self-attention over one modality's (g, c) tokens -> (g, d_attn)."""
    out, _ = _attention_forward(np.asarray(tokens)[None], np.asarray(tokens)[None], wq, wk, wv)
    return out[0]


def cross_attention(tokens_q, tokens_kv, wq, wk, wv):
    """Queries from one modality attend over the other's tokens -> (g, d_attn)."""
    out, _ = _attention_forward(np.asarray(tokens_q)[None], np.asarray(tokens_kv)[None], wq, wk, wv)
    return out[0]


# ---------------------------------------------------------------------------
# branches


def _temporal_forward(segs, params, cfg):
    x = np.asarray(segs, dtype=np.float64)[:, None, :]  # (B, 1, w)
    layer_caches = []
    for i in range(len(cfg.cnn1d_layers)):
        x, c_cache = ops.conv1d_forward(x, params[f"conv1.{i}.w"].value, params[f"conv1.{i}.b"].value)
        x, r_cache = ops.relu_forward(x)
        layer_caches.append((c_cache, r_cache))
    seq = np.ascontiguousarray(np.swapaxes(x, 1, 2))  # (B, T, c)
    f_cell = ops.LstmCellParams(params["lstm.f.w_x"].value, params["lstm.f.w_h"].value, params["lstm.f.b"].value)
    b_cell = ops.LstmCellParams(params["lstm.b.w_x"].value, params["lstm.b.w_h"].value, params["lstm.b.b"].value)
    h, bi_cache = ops.bilstm_forward(seq, f_cell, b_cell)
    f_t = h.mean(axis=1)  # global average pool over time
    return f_t, (layer_caches, bi_cache, h.shape[1])


def _temporal_backward(gf_t, cache, params):
    layer_caches, bi_cache, t_len = cache
    gh = np.repeat(gf_t[:, None, :] / t_len, t_len, axis=1)
    gseq, gf, gb = ops.bilstm_backward(gh, bi_cache)
    for tag, grads in (("f", gf), ("b", gb)):
        params.add_grad(f"lstm.{tag}.w_x", grads[0])
        params.add_grad(f"lstm.{tag}.w_h", grads[1])
        params.add_grad(f"lstm.{tag}.b", grads[2])
    gx = np.ascontiguousarray(np.swapaxes(gseq, 1, 2))
    for i in range(len(layer_caches) - 1, -1, -1):
        c_cache, r_cache = layer_caches[i]
        (gx,) = ops.relu_backward(gx, r_cache)
        gx, gw, gbias = ops.conv1d_backward(gx, c_cache)
        params.add_grad(f"conv1.{i}.w", gw)
        params.add_grad(f"conv1.{i}.b", gbias)
    return gx[:, 0, :]


def _spatial_forward(imgs, params, cfg):
    x = np.asarray(imgs, dtype=np.float64)[:, None, :, :]  # (B, 1, w, w)
    layer_caches = []
    for i, (_ch, _k, stride) in enumerate(cfg.cnn2d_layers):
        x, c_cache = ops.conv2d_forward(
            x, params[f"conv2.{i}.w"].value, params[f"conv2.{i}.b"].value, stride=stride
        )
        x, r_cache = ops.relu_forward(x)
        layer_caches.append((c_cache, r_cache))
    f_s = x.mean(axis=(2, 3))
    return f_s, (layer_caches, x.shape[2], x.shape[3])


def _spatial_backward(gf_s, cache, params):
    layer_caches, ho, wo = cache
    gx = np.broadcast_to(gf_s[:, :, None, None] / (ho * wo), (*gf_s.shape, ho, wo)).copy()
    for i in range(len(layer_caches) - 1, -1, -1):
        c_cache, r_cache = layer_caches[i]
        (gx,) = ops.relu_backward(gx, r_cache)
        gx, gw, gbias = ops.conv2d_backward(gx, c_cache)
        params.add_grad(f"conv2.{i}.w", gw)
        params.add_grad(f"conv2.{i}.b", gbias)
    return gx[:, 0, :, :]


# ---------------------------------------------------------------------------
# attention fusion


def _fuse_forward(f_t, f_s, params, cfg):
    bsz = f_t.shape[0]
    g = cfg.groups
    tk_t = channel_split(f_t, g)
    tk_s = channel_split(f_s, g)
    wq_t, wk_t, wv_t = (params[f"attn.t.{p}"].value for p in ("wq", "wk", "wv"))
    wq_s, wk_s, wv_s = (params[f"attn.s.{p}"].value for p in ("wq", "wk", "wv"))
    at_out, at_cache = _attention_forward(tk_t, tk_t, wq_t, wk_t, wv_t)
    as_out, as_cache = _attention_forward(tk_s, tk_s, wq_s, wk_s, wv_s)
    at_vec = at_out.reshape(bsz, -1) @ params["attn.t.wo_intra"].value
    as_vec = as_out.reshape(bsz, -1) @ params["attn.s.wo_intra"].value
    pre_t = f_t + at_vec
    pre_s = f_s + as_vec
    ct_cache = cs_cache = None
    ct_out = cs_out = None
    if cfg.uses_cross:
        ct_out, ct_cache = _attention_forward(tk_t, tk_s, wq_t, wk_s, wv_s)
        cs_out, cs_cache = _attention_forward(tk_s, tk_t, wq_s, wk_t, wv_t)
        pre_t = pre_t + ct_out.reshape(bsz, -1) @ params["attn.t.wo_cross"].value
        pre_s = pre_s + cs_out.reshape(bsz, -1) @ params["attn.s.wo_cross"].value
    f_t2, ln_t_cache = ops.layer_norm_forward(pre_t, params["ln.t.gain"].value, params["ln.t.bias"].value)
    f_s2, ln_s_cache = ops.layer_norm_forward(pre_s, params["ln.s.gain"].value, params["ln.s.bias"].value)
    cache = (tk_t, tk_s, at_out, as_out, ct_out, cs_out, at_cache, as_cache, ct_cache, cs_cache, ln_t_cache, ln_s_cache)
    return f_t2, f_s2, cache


def _fuse_backward(gf_t2, gf_s2, cache, params, cfg):
    (tk_t, tk_s, at_out, as_out, ct_out, cs_out,
     at_cache, as_cache, ct_cache, cs_cache, ln_t_cache, ln_s_cache) = cache
    bsz = gf_t2.shape[0]
    gpre_t, ggain_t, gbias_t = ops.layer_norm_backward(gf_t2, ln_t_cache)
    gpre_s, ggain_s, gbias_s = ops.layer_norm_backward(gf_s2, ln_s_cache)
    params.add_grad("ln.t.gain", ggain_t)
    params.add_grad("ln.t.bias", gbias_t)
    params.add_grad("ln.s.gain", ggain_s)
    params.add_grad("ln.s.bias", gbias_s)

    g_tk_t = np.zeros_like(tk_t)
    g_tk_s = np.zeros_like(tk_s)

    def through_output_proj(gpre, att_out, wo_name):
        params.add_grad(wo_name, att_out.reshape(bsz, -1).T @ gpre)
        return (gpre @ params[wo_name].value.T).reshape(att_out.shape)

    # intra-modality paths
    g_at = through_output_proj(gpre_t, at_out, "attn.t.wo_intra")
    g_tq, g_tkv, gwq, gwk, gwv = _attention_backward(g_at, at_cache)
    g_tk_t += g_tq + g_tkv
    params.add_grad("attn.t.wq", gwq)
    params.add_grad("attn.t.wk", gwk)
    params.add_grad("attn.t.wv", gwv)

    g_as = through_output_proj(gpre_s, as_out, "attn.s.wo_intra")
    g_tq, g_tkv, gwq, gwk, gwv = _attention_backward(g_as, as_cache)
    g_tk_s += g_tq + g_tkv
    params.add_grad("attn.s.wq", gwq)
    params.add_grad("attn.s.wk", gwk)
    params.add_grad("attn.s.wv", gwv)

    # cross-modality paths
    if cfg.uses_cross:
        g_ct = through_output_proj(gpre_t, ct_out, "attn.t.wo_cross")
        g_tq, g_tkv, gwq, gwk, gwv = _attention_backward(g_ct, ct_cache)
        g_tk_t += g_tq
        g_tk_s += g_tkv
        params.add_grad("attn.t.wq", gwq)
        params.add_grad("attn.s.wk", gwk)
        params.add_grad("attn.s.wv", gwv)

        g_cs = through_output_proj(gpre_s, cs_out, "attn.s.wo_cross")
        g_tq, g_tkv, gwq, gwk, gwv = _attention_backward(g_cs, cs_cache)
        g_tk_s += g_tq
        g_tk_t += g_tkv
        params.add_grad("attn.s.wq", gwq)
        params.add_grad("attn.t.wk", gwk)
        params.add_grad("attn.t.wv", gwv)

    gf_t = gpre_t + g_tk_t.reshape(bsz, -1)
    gf_s = gpre_s + g_tk_s.reshape(bsz, -1)
    return gf_t, gf_s


def dual_attention_fuse(f_t, f_s, params, cfg):
    """Unbatched convenience wrapper: (d_t,), (d_s,) -> (d_t,), (d_s,)."""
    f_t2, f_s2, _ = _fuse_forward(np.asarray(f_t)[None], np.asarray(f_s)[None], params, cfg)
    return f_t2[0], f_s2[0]


# ---------------------------------------------------------------------------
# full model


@dataclass
class ForwardTrace:
    probs: np.ndarray  # (B, C)
    logits: np.ndarray
    f_t: Optional[np.ndarray]
    f_s: Optional[np.ndarray]
    caches: dict = field(default_factory=dict)


def forward(segs, imgs, params: ModelParams, cfg: ModelConfig) -> ForwardTrace:
    """Run the variant's full pipeline on a batch.

    segs: (B, w) raw segments (None for gaf_only); imgs: (B, w, w) GAF images
    (None for time_only).
    """
    caches = {}
    f_t = f_s = None
    if cfg.uses_temporal:
        if segs is None:
            raise ValueError("variant requires segment input")
        f_t, caches["temporal"] = _temporal_forward(np.atleast_2d(segs), params, cfg)
    if cfg.uses_spatial:
        if imgs is None:
            raise ValueError("variant requires image input")
        imgs = np.asarray(imgs, dtype=np.float64)
        if imgs.ndim == 2:
            imgs = imgs[None]
        f_s, caches["spatial"] = _spatial_forward(imgs, params, cfg)

    if cfg.uses_attention:
        f_t2, f_s2, caches["fuse"] = _fuse_forward(f_t, f_s, params, cfg)
        z, caches["concat"] = ops.concat_forward(f_t2, f_s2, axis=-1)
    elif cfg.variant == "no_dual_attention":
        z, caches["concat"] = ops.concat_forward(f_t, f_s, axis=-1)
    elif cfg.variant == "time_only":
        z = f_t
    else:  # gaf_only
        z = f_s

    h1, caches["mlp"] = ops.linear_forward(z, params["mlp.w1"].value, params["mlp.b1"].value)
    fused, caches["mlp_relu"] = ops.relu_forward(h1)
    logits, caches["cls"] = ops.linear_forward(fused, params["cls.w"].value, params["cls.b"].value)
    probs, caches["softmax"] = ops.softmax_forward(logits, axis=-1)
    return ForwardTrace(probs=probs, logits=logits, f_t=f_t, f_s=f_s, caches=caches)


def backward(trace: ForwardTrace, grad_logits, params: ModelParams, cfg: ModelConfig):
    """Accumulate dLoss/dtheta into every ParamTensor given dLoss/dlogits.

    Returns (grad_segments, grad_images); entries are None for branches the
    variant does not use.
    """
    caches = trace.caches
    gfused, gw, gb = ops.linear_backward(np.asarray(grad_logits, dtype=np.float64), caches["cls"])
    params.add_grad("cls.w", gw)
    params.add_grad("cls.b", gb)
    (gh1,) = ops.relu_backward(gfused, caches["mlp_relu"])
    gz, gw, gb = ops.linear_backward(gh1, caches["mlp"])
    params.add_grad("mlp.w1", gw)
    params.add_grad("mlp.b1", gb)

    gf_t = gf_s = None
    if cfg.uses_attention:
        gf_t2, gf_s2 = ops.concat_backward(gz, caches["concat"])
        gf_t, gf_s = _fuse_backward(gf_t2, gf_s2, caches["fuse"], params, cfg)
    elif cfg.variant == "no_dual_attention":
        gf_t, gf_s = ops.concat_backward(gz, caches["concat"])
    elif cfg.variant == "time_only":
        gf_t = gz
    else:
        gf_s = gz

    gsegs = gimgs = None
    if cfg.uses_temporal:
        gsegs = _temporal_backward(gf_t, caches["temporal"], params)
    if cfg.uses_spatial:
        gimgs = _spatial_backward(gf_s, caches["spatial"], params)
    return gsegs, gimgs


def backward_cross_entropy(trace: ForwardTrace, labels_onehot, params: ModelParams, cfg: ModelConfig, scale: Optional[float] = None):
    """Backprop the batch-mean cross-entropy loss; d/dlogits = (p - y) / B."""
    y = np.asarray(labels_onehot, dtype=np.float64)
    if scale is None:
        scale = 1.0 / y.shape[0]
    return backward(trace, (trace.probs - y) * scale, params, cfg)


def temporal_branch(seg, params, cfg):
    """Single segment (w,) -> feature vector (d_t,)."""
    f_t, _ = _temporal_forward(np.asarray(seg)[None], params, cfg)
    return f_t[0]


def spatial_branch(img, params, cfg):
    """Single GAF image (w, w) -> feature vector (d_s,)."""
    f_s, _ = _spatial_forward(np.asarray(img)[None], params, cfg)
    return f_s[0]


def fuse_and_classify(f_t2, f_s2, params, cfg):
    """Fused-feature head on attended vectors -> class probabilities (C,)."""
    z = np.concatenate([np.asarray(f_t2), np.asarray(f_s2)])
    h1, _ = ops.linear_forward(z, params["mlp.w1"].value, params["mlp.b1"].value)
    fused, _ = ops.relu_forward(h1)
    logits, _ = ops.linear_forward(fused, params["cls.w"].value, params["cls.b"].value)
    probs, _ = ops.softmax_forward(logits, axis=-1)
    return probs


def predict_probs(params: ModelParams, cfg: ModelConfig, segs, imgs, batch_size: int = 256) -> np.ndarray:
    """Batched inference over a whole dataset."""
    n = len(segs) if segs is not None else len(imgs)
    out = []
    for start in range(0, n, batch_size):
        sl = slice(start, min(start + batch_size, n))
        trace = forward(
            segs[sl] if segs is not None else None,
            imgs[sl] if imgs is not None else None,
            params,
            cfg,
        )
        out.append(trace.probs)
    return np.concatenate(out, axis=0)


# ---------------------------------------------------------------------------
# serialization
#
# Layout (little-endian throughout):
#   magic "GAFN" | version u16 | input_len u32 | num_classes u32
#   lstm_hidden u32 | groups u32 | d_attn u32 | mlp_hidden u32 | variant u8
#   n_conv1 u8, then per layer: channels u32, kernel u32
#   n_conv2 u8, then per layer: channels u32, kernel u32, stride u32
#   then every ParamTensor in `init_params` order:
#     rank u8, dims u32 each, payload float64


def save_model(path, cfg: ModelConfig, input_len: int, params: ModelParams) -> None:
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<H", MODEL_VERSION))
        f.write(struct.pack("<IIIIII", input_len, cfg.num_classes, cfg.lstm_hidden,
                            cfg.groups, cfg.d_attn, cfg.mlp_hidden))
        f.write(struct.pack("<B", VARIANTS.index(cfg.variant)))
        f.write(struct.pack("<B", len(cfg.cnn1d_layers)))
        for ch, k in cfg.cnn1d_layers:
            f.write(struct.pack("<II", ch, k))
        f.write(struct.pack("<B", len(cfg.cnn2d_layers)))
        for ch, k, s in cfg.cnn2d_layers:
            f.write(struct.pack("<III", ch, k, s))
        for _name, p in params.items():
            arr = p.value
            f.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<I", d))
            f.write(arr.astype("<f8").tobytes())


def load_model(path) -> Tuple[ModelConfig, int, "ModelParams"]:
    with open(path, "rb") as f:
        data = f.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(data):
            raise DataFormatError("truncated model file")
        chunk = data[off : off + n]
        off += n
        return chunk

    if take(4) != MODEL_MAGIC:
        raise DataFormatError("bad magic: not a model file")
    (version,) = struct.unpack("<H", take(2))
    if version != MODEL_VERSION:
        raise DataFormatError(f"unsupported model format version {version}")
    input_len, num_classes, lstm_hidden, groups, d_attn, mlp_hidden = struct.unpack("<IIIIII", take(24))
    (variant_idx,) = struct.unpack("<B", take(1))
    if variant_idx >= len(VARIANTS):
        raise DataFormatError("unknown variant code")
    (n1,) = struct.unpack("<B", take(1))
    cnn1d = tuple(struct.unpack("<II", take(8)) for _ in range(n1))
    (n2,) = struct.unpack("<B", take(1))
    cnn2d = tuple(struct.unpack("<III", take(12)) for _ in range(n2))
    cfg = ModelConfig(
        num_classes=num_classes,
        cnn1d_layers=cnn1d,
        lstm_hidden=lstm_hidden,
        cnn2d_layers=cnn2d,
        groups=groups,
        d_attn=d_attn,
        mlp_hidden=mlp_hidden,
        variant=VARIANTS[variant_idx],
    )
    params = init_params(cfg, ops.make_rng(0))
    for name, p in params.items():
        (rank,) = struct.unpack("<B", take(1))
        dims = tuple(struct.unpack("<I", take(4))[0] for _ in range(rank))
        if dims != p.value.shape:
            raise DataFormatError(f"shape mismatch for {name}: file {dims}, expected {p.value.shape}")
        payload = take(8 * int(np.prod(dims, dtype=np.int64)))
        p.value[...] = np.frombuffer(payload, dtype="<f8").reshape(dims)
    if off != len(data):
        raise DataFormatError("trailing bytes after model payload")
    return cfg, input_len, params
