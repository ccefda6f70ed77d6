"""The trainable network: a two-layer LSTM over raw windows, a linear
projection of the final hidden state, concatenation with handcrafted
features, and three linear heads emitting raw logits (activations live
inside the losses).

Everything is float64 numpy with explicit forward caches and analytic
backward passes; gradient correctness is enforced against central finite
differences in the test suite. With use_encoder=False the sequence path is
absent entirely (zero encoder parameters) and the heads consume the
handcrafted features alone.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1

HEADS = ("activity", "context", "user")


@dataclass(frozen=True)
class ModelConfig:
    channels: int
    snapshots: int
    feature_dim: int
    n_activities: int
    n_contexts: int
    n_users: int
    hidden_size: int = 64
    encoder_dim: int = 64
    use_encoder: bool = True
    num_layers: int = 2
    seed: int = 0

    def __post_init__(self):
        dims = (self.channels, self.snapshots, self.feature_dim, self.n_activities,
                self.n_contexts, self.n_users, self.hidden_size, self.encoder_dim)
        if any(d <= 0 for d in dims):
            raise ValueError("all model dimensions must be positive")
        if self.num_layers != 2:
            raise ValueError("the sequence encoder is fixed at 2 layers")

    @property
    def fused_dim(self) -> int:
        return (self.encoder_dim if self.use_encoder else 0) + self.feature_dim

    def head_dim(self, head: str) -> int:
        return {"activity": self.n_activities, "context": self.n_contexts,
                "user": self.n_users}[head]


@dataclass(frozen=True)
class HeadLogits:
    activity: np.ndarray
    context: np.ndarray
    user: np.ndarray


def _uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_params(config: ModelConfig) -> dict[str, np.ndarray]:
    """Seeded uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] initialization."""
    rng = np.random.default_rng(config.seed)
    H, S, dt = config.hidden_size, config.channels, config.encoder_dim
    params: dict[str, np.ndarray] = {}
    if config.use_encoder:
        for layer, in_dim in ((1, S), (2, H)):
            params[f"lstm{layer}_Wx"] = _uniform(rng, (4 * H, in_dim), in_dim)
            params[f"lstm{layer}_Wh"] = _uniform(rng, (4 * H, H), H)
            params[f"lstm{layer}_b"] = _uniform(rng, (4 * H,), H)
        params["proj_W"] = _uniform(rng, (dt, H), H)
        params["proj_b"] = _uniform(rng, (dt,), H)
    fused = config.fused_dim
    for head in HEADS:
        out = config.head_dim(head)
        params[f"head_{head}_W"] = _uniform(rng, (out, fused), fused)
        params[f"head_{head}_b"] = _uniform(rng, (out,), fused)
    return params


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    p = x >= 0
    out[p] = 1.0 / (1.0 + np.exp(-x[p]))
    e = np.exp(x[~p])
    out[~p] = e / (1.0 + e)
    return out


def _lstm_layer_forward(x_seq: np.ndarray, Wx: np.ndarray, Wh: np.ndarray,
                        b: np.ndarray):
    """Run one LSTM layer over (N, T, in_dim); returns (h_seq, cache)."""
    N, T, _ = x_seq.shape
    H = Wh.shape[1]
    h = np.zeros((N, H))
    c = np.zeros((N, H))
    h_seq = np.empty((N, T, H))
    steps = []
    for t in range(T):
        z = x_seq[:, t] @ Wx.T + h @ Wh.T + b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c_new = f * c + i * g
        h_new = o * np.tanh(c_new)
        steps.append((x_seq[:, t], h, c, i, f, g, o, c_new))
        h, c = h_new, c_new
        h_seq[:, t] = h
    return h_seq, steps


def _lstm_layer_backward(dh_seq, dh_last, steps, Wx, Wh):
    """BPTT through one layer.

    dh_seq: (N, T, H) gradients entering each h_t from the layer above (or
    None), dh_last: extra gradient into the final hidden state (readout).
    Returns (dx_seq, dWx, dWh, db).
    """
    T = len(steps)
    N, in_dim = steps[0][0].shape
    H = Wh.shape[1]
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * H)
    dx_seq = np.empty((N, T, in_dim))
    dh_next = dh_last.copy()
    dc_next = np.zeros((N, H))
    for t in range(T - 1, -1, -1):
        x_t, h_prev, c_prev, i, f, g, o, c_new = steps[t]
        dh = dh_next if dh_seq is None else dh_next + dh_seq[:, t]
        tc = np.tanh(c_new)
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc ** 2)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_next = dc * f
        dz = np.concatenate([di * i * (1 - i), df * f * (1 - f),
                             dg * (1 - g ** 2), do * o * (1 - o)], axis=1)
        dWx += dz.T @ x_t
        dWh += dz.T @ h_prev
        db += dz.sum(axis=0)
        dx_seq[:, t] = dz @ Wx
        dh_next = dz @ Wh
    return dx_seq, dWx, dWh, db


def encode_sequence(windows: np.ndarray, params: dict, config: ModelConfig,
                    return_cache: bool = False):
    """Encode (N, S, T) windows to (N, encoder_dim) via the 2-layer LSTM:
    last-timestep hidden state of layer 2, linearly projected."""
    w = np.asarray(windows, dtype=float)
    if w.ndim != 3 or w.shape[1:] != (config.channels, config.snapshots):
        raise ValueError(f"windows must be (N, {config.channels}, {config.snapshots}), "
                         f"got {w.shape}")
    if w.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    x_seq = np.ascontiguousarray(w.transpose(0, 2, 1))  # (N, T, S)
    h1_seq, steps1 = _lstm_layer_forward(x_seq, params["lstm1_Wx"],
                                         params["lstm1_Wh"], params["lstm1_b"])
    h2_seq, steps2 = _lstm_layer_forward(h1_seq, params["lstm2_Wx"],
                                         params["lstm2_Wh"], params["lstm2_b"])
    h_last = h2_seq[:, -1]
    encoded = h_last @ params["proj_W"].T + params["proj_b"]
    if not return_cache:
        return encoded
    return encoded, {"steps1": steps1, "steps2": steps2, "h_last": h_last}


def fuse(encoded: np.ndarray | None, features: np.ndarray) -> np.ndarray:
    """Concatenate encoder output with handcrafted features (encoder first)."""
    f = np.atleast_2d(np.asarray(features, dtype=float))
    if encoded is None:
        return f.copy()
    e = np.atleast_2d(np.asarray(encoded, dtype=float))
    if e.shape[0] != f.shape[0]:
        raise ValueError(f"batch mismatch: encoded {e.shape[0]} vs features {f.shape[0]}")
    return np.concatenate([e, f], axis=1)


def predict_heads(x_r: np.ndarray, params: dict, config: ModelConfig) -> HeadLogits:
    """Per-task linear projections of the fused representation to raw logits."""
    x = np.atleast_2d(np.asarray(x_r, dtype=float))
    if x.shape[1] != config.fused_dim:
        raise ValueError(f"fused dim {x.shape[1]} != configured {config.fused_dim}")
    out = {}
    for head in HEADS:
        out[head] = x @ params[f"head_{head}_W"].T + params[f"head_{head}_b"]
    return HeadLogits(activity=out["activity"], context=out["context"],
                      user=out["user"])


def forward(windows: np.ndarray, features: np.ndarray, params: dict,
            config: ModelConfig, return_cache: bool = False):
    """Full pass: encode (unless ablated), fuse, predict. Returns
    (x_r, HeadLogits[, cache])."""
    feats = np.atleast_2d(np.asarray(features, dtype=float))
    if feats.shape[1] != config.feature_dim:
        raise ValueError(f"feature dim {feats.shape[1]} != configured {config.feature_dim}")
    cache = {"features": feats}
    if config.use_encoder:
        encoded, enc_cache = encode_sequence(windows, params, config, return_cache=True)
        cache.update(enc_cache)
        x_r = fuse(encoded, feats)
    else:
        x_r = fuse(None, feats)
    logits = predict_heads(x_r, params, config)
    cache["x_r"] = x_r
    if not np.isfinite(logits.activity).all():
        raise FloatingPointError("non-finite logits; check inputs/params")
    if return_cache:
        return x_r, logits, cache
    return x_r, logits


def backward(grads: dict, cache: dict, params: dict,
             config: ModelConfig) -> dict[str, np.ndarray]:
    """Backpropagate loss gradients to every parameter.

    grads carries 'activity_logits', 'context_logits', 'user_logits' (each
    (N, C)) and 'x_r' ((N, fused_dim), the contrastive path). Returns a dict
    keyed like params.
    """
    x_r = cache["x_r"]
    pgrads: dict[str, np.ndarray] = {}
    dx_r = np.array(grads["x_r"], dtype=float, copy=True)
    for head, key in (("activity", "activity_logits"), ("context", "context_logits"),
                      ("user", "user_logits")):
        dlog = grads[key]
        pgrads[f"head_{head}_W"] = dlog.T @ x_r
        pgrads[f"head_{head}_b"] = dlog.sum(axis=0)
        dx_r += dlog @ params[f"head_{head}_W"]
    if not config.use_encoder:
        return pgrads

    dt = config.encoder_dim
    d_encoded = dx_r[:, :dt]
    h_last = cache["h_last"]
    pgrads["proj_W"] = d_encoded.T @ h_last
    pgrads["proj_b"] = d_encoded.sum(axis=0)
    dh_last2 = d_encoded @ params["proj_W"]

    dh1_seq, dWx2, dWh2, db2 = _lstm_layer_backward(
        None, dh_last2, cache["steps2"], params["lstm2_Wx"], params["lstm2_Wh"])
    pgrads["lstm2_Wx"], pgrads["lstm2_Wh"], pgrads["lstm2_b"] = dWx2, dWh2, db2

    zero_last = np.zeros_like(dh_last2)
    _, dWx1, dWh1, db1 = _lstm_layer_backward(
        dh1_seq, zero_last, cache["steps1"], params["lstm1_Wx"], params["lstm1_Wh"])
    pgrads["lstm1_Wx"], pgrads["lstm1_Wh"], pgrads["lstm1_b"] = dWx1, dWh1, db1
    return pgrads


def save_checkpoint(params: dict, config: ModelConfig, path: str | Path) -> None:
    """Versioned npz blob: config as JSON plus every weight array."""
    blob = {f"param__{k}": v for k, v in params.items()}
    np.savez(path, format_version=np.int64(CHECKPOINT_VERSION),
             config_json=np.str_(json.dumps(asdict(config))), **blob)


def load_checkpoint(path: str | Path):
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        config = ModelConfig(**json.loads(str(data["config_json"])))
        params = {k[len("param__"):]: data[k] for k in data.files
                  if k.startswith("param__")}
    return params, config
