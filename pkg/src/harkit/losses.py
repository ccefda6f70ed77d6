"""Training objective: weighted BCE + CE classification terms plus an
instance-pair supervised contrastive term over fused representations.

Total objective:

    L = L_A + gamma1 * L_PP + gamma2 * L_U + alpha * L_d

where L_A / L_PP are class-weighted sigmoid BCE over the multi-label heads,
L_U is softmax cross-entropy over the user head, and L_d pulls each batch
anchor toward the mean of its positive pairs (instances sharing at least one
pairing label) and away from the mean of its negative pairs.

Every loss returns both its value and the analytic gradient needed by the
training loop; gradients are verified against central finite differences in
the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LossWeights:
    """Scalar mixing weights; alpha=0 disables the contrastive term and
    gamma2=0 disables the user-identification term (the ablation switches)."""

    alpha: float = 0.5
    gamma1: float = 1.0
    gamma2: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass(frozen=True)
class PairPartition:
    """Batch indices split into positives / negatives for one anchor."""

    anchor: int
    positive_indices: np.ndarray
    negative_indices: np.ndarray


@dataclass(frozen=True)
class LossBreakdown:
    L_A: float
    L_PP: float
    L_U: float
    L_d: float
    L_total: float


def class_weights(train_labels: np.ndarray) -> np.ndarray:
    """Inverse-frequency class weights from training labels, mean-normalized.

    w_c = mean(freq) / freq_c, renormalized so mean(w) == 1. Classes with no
    positives get the maximum weight computed over the remaining classes.
    """
    y = np.asarray(train_labels, dtype=float)
    if y.ndim != 2 or y.shape[0] == 0:
        raise ValueError("need a nonempty (N, C) label matrix")
    freq = y.mean(axis=0)
    pos = freq > 0
    if not pos.any():
        return np.ones(y.shape[1])
    w = np.empty_like(freq)
    w[pos] = freq[pos].mean() / freq[pos]
    if (~pos).any():
        w[~pos] = w[pos].max()
    return w / w.mean()


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    p = x >= 0
    out[p] = 1.0 / (1.0 + np.exp(-x[p]))
    e = np.exp(x[~p])
    out[~p] = e / (1.0 + e)
    return out


def _softplus(x: np.ndarray) -> np.ndarray:
    # log(1 + e^x), stable on both tails
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def weighted_bce(logits: np.ndarray, targets: np.ndarray,
                 weights: np.ndarray | None = None,
                 return_grad: bool = False):
    """Class-weighted sigmoid binary cross-entropy, averaged over samples
    and classes, in log-sum-exp form.

    Per entry: w_c * [ (1 - y) * x + softplus(-x) ].
    """
    x = np.atleast_2d(np.asarray(logits, dtype=float))
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: logits {x.shape} vs targets {y.shape}")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("targets must be binary")
    w = np.ones(x.shape[1]) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (x.shape[1],):
        raise ValueError("one weight per class required")
    per_entry = w * ((1.0 - y) * x + _softplus(-x))
    loss = float(per_entry.mean())
    if not return_grad:
        return loss
    grad = w * (_sigmoid(x) - y) / x.size
    return loss, grad


def cross_entropy(logits: np.ndarray, targets: np.ndarray,
                  return_grad: bool = False):
    """Softmax cross-entropy against one-hot targets, averaged over the batch."""
    x = np.atleast_2d(np.asarray(logits, dtype=float))
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: logits {x.shape} vs targets {y.shape}")
    if not np.isin(y, (0.0, 1.0)).all() or not (y.sum(axis=1) == 1).all():
        raise ValueError("targets must be one-hot rows")
    shifted = x - x.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_softmax = shifted - log_z
    n = x.shape[0]
    loss = float(-(log_softmax * y).sum() / n)
    if not return_grad:
        return loss
    grad = (np.exp(log_softmax) - y) / n
    return loss, grad


def partition_pairs(anchor_idx: int, pairing_labels: np.ndarray) -> PairPartition:
    """Split a batch into the anchor's positive / negative index sets.

    An instance is a positive iff its pairing vector has a nonzero dot
    product with the anchor's; the anchor itself belongs to neither set.
    """
    y = np.asarray(pairing_labels)
    n = y.shape[0]
    if n < 2:
        raise ValueError("pair partitioning needs a batch of at least 2")
    if not (0 <= anchor_idx < n):
        raise IndexError(f"anchor {anchor_idx} out of range for batch {n}")
    dots = y @ y[anchor_idx]
    others = np.arange(n) != anchor_idx
    positive = np.where(others & (dots > 0))[0]
    negative = np.where(others & (dots == 0))[0]
    return PairPartition(anchor_idx, positive, negative)


def pair_means(x_r: np.ndarray, part: PairPartition):
    """Componentwise means of the positive and negative sets.

    An empty negative set yields the zero vector; an empty positive set
    yields None so the caller can skip the anchor.
    """
    x = np.asarray(x_r, dtype=float)
    x_plus = x[part.positive_indices].mean(axis=0) if len(part.positive_indices) else None
    if len(part.negative_indices):
        x_minus = x[part.negative_indices].mean(axis=0)
    else:
        x_minus = np.zeros(x.shape[1])
    return x_plus, x_minus


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity with sim(anything, zero vector) defined as 0."""
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v / (nu * nv))


def contrastive_loss(x_r: np.ndarray, pairing_labels: np.ndarray,
                     return_grad: bool = False):
    """Instance-pair supervised contrastive loss over a batch.

    For each anchor with a nonempty positive set the per-anchor term is the
    two-way softmax cross-entropy of [sim+, sim-] against class 0, i.e.
    log(1 + exp(sim- - sim+)) with cosine similarities against the positive
    and negative set means. Anchors without positives contribute 0 but still
    count in the 1/|B| normalization.
    """
    x = np.asarray(x_r, dtype=float)
    y = np.asarray(pairing_labels)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("x_r and pairing_labels must share batch dimension")
    n = x.shape[0]
    if n < 2:
        raise ValueError("contrastive loss needs a batch of at least 2")

    share = (y @ y.T) > 0
    np.fill_diagonal(share, False)
    non_anchor = ~np.eye(n, dtype=bool)
    pos_mask = share
    neg_mask = non_anchor & ~share
    cnt_pos = pos_mask.sum(axis=1)
    cnt_neg = neg_mask.sum(axis=1)

    # set means; rows with empty sets are zero vectors (negatives by
    # convention, positives are skipped below)
    x_plus = (pos_mask @ x) / np.maximum(cnt_pos, 1)[:, None]
    x_minus = (neg_mask @ x) / np.maximum(cnt_neg, 1)[:, None]

    norm_a = np.linalg.norm(x, axis=1)
    norm_p = np.linalg.norm(x_plus, axis=1)
    norm_m = np.linalg.norm(x_minus, axis=1)

    ok_p = (cnt_pos > 0) & (norm_a > 0) & (norm_p > 0)
    ok_m = (cnt_neg > 0) & (norm_a > 0) & (norm_m > 0)
    sim_p = np.zeros(n)
    sim_m = np.zeros(n)
    sim_p[ok_p] = (x[ok_p] * x_plus[ok_p]).sum(axis=1) / (norm_a[ok_p] * norm_p[ok_p])
    sim_m[ok_m] = (x[ok_m] * x_minus[ok_m]).sum(axis=1) / (norm_a[ok_m] * norm_m[ok_m])

    active = cnt_pos > 0
    terms = np.zeros(n)
    terms[active] = _softplus(sim_m[active] - sim_p[active])
    loss = float(terms.sum() / n)
    if not return_grad:
        return loss

    grad = np.zeros_like(x)
    # d term / d sim+ = -g, d term / d sim- = +g with g = sigmoid(sim- - sim+)
    g = _sigmoid(sim_m - sim_p)
    for a in np.where(active)[0]:
        ga = g[a] / n
        if ok_p[a]:
            u, v = x[a], x_plus[a]
            inv = 1.0 / (norm_a[a] * norm_p[a])
            dcos_du = v * inv - sim_p[a] * u / norm_a[a] ** 2
            dcos_dv = u * inv - sim_p[a] * v / norm_p[a] ** 2
            grad[a] += -ga * dcos_du
            grad[pos_mask[a]] += (-ga / cnt_pos[a]) * dcos_dv
        if ok_m[a]:
            u, v = x[a], x_minus[a]
            inv = 1.0 / (norm_a[a] * norm_m[a])
            dcos_du = v * inv - sim_m[a] * u / norm_a[a] ** 2
            dcos_dv = u * inv - sim_m[a] * v / norm_m[a] ** 2
            grad[a] += ga * dcos_du
            grad[neg_mask[a]] += (ga / cnt_neg[a]) * dcos_dv
    return loss, grad


def build_pairing(activities: np.ndarray, contexts: np.ndarray,
                  users: np.ndarray, scope: str = "activity+context") -> np.ndarray:
    """Batch pairing-label matrix for the configured scope."""
    parts = {"activity": [activities],
             "activity+context": [activities, contexts],
             "all": [activities, contexts, users]}
    if scope not in parts:
        raise ValueError(f"pairing scope must be one of {tuple(parts)}")
    return np.concatenate([np.atleast_2d(p) for p in parts[scope]], axis=1)


def total_loss(activity_logits: np.ndarray, context_logits: np.ndarray,
               user_logits: np.ndarray, x_r: np.ndarray,
               activities: np.ndarray, contexts: np.ndarray, users: np.ndarray,
               weights: LossWeights, w_activity: np.ndarray | None = None,
               w_context: np.ndarray | None = None,
               pairing_scope: str = "activity+context",
               return_grads: bool = False):
    """Combine the four objective terms into one breakdown.

    The contrastive term is computed (for diagnostics) whenever the batch
    has at least 2 instances, even when alpha == 0; it only enters L_total
    scaled by alpha. Pairing labels default to the activity and context bits.
    """
    n = x_r.shape[0]
    pairing = build_pairing(activities, contexts, users, pairing_scope)

    la, g_a = weighted_bce(activity_logits, activities, w_activity, return_grad=True)
    lpp, g_pp = weighted_bce(context_logits, contexts, w_context, return_grad=True)
    lu, g_u = cross_entropy(user_logits, users, return_grad=True)
    if n >= 2:
        ld, g_d = contrastive_loss(x_r, pairing, return_grad=True)
    elif weights.alpha > 0:
        raise ValueError("contrastive loss requires batch size >= 2 when alpha > 0")
    else:
        ld, g_d = 0.0, np.zeros_like(np.asarray(x_r, dtype=float))

    total = la + weights.gamma1 * lpp + weights.gamma2 * lu + weights.alpha * ld
    breakdown = LossBreakdown(L_A=la, L_PP=lpp, L_U=lu, L_d=ld, L_total=float(total))
    if not return_grads:
        return breakdown
    grads = {
        "activity_logits": g_a,
        "context_logits": weights.gamma1 * g_pp,
        "user_logits": weights.gamma2 * g_u,
        "x_r": weights.alpha * g_d,
    }
    return breakdown, grads
