"""Independent brute-force references shared by the unit and acceptance
tests. Everything here is deliberately scalar / loop-based and written
against the defining formulas, not against the library implementation.
"""

import math

import numpy as np


def bf_cosine(u, v):
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(x * x for x in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return sum(a * b for a, b in zip(u, v)) / (nu * nv)


def bf_partition(anchor, pairing):
    """Explicit per-pair dot-product enumeration."""
    pos, neg = [], []
    for j in range(len(pairing)):
        if j == anchor:
            continue
        dot = sum(int(a) * int(b) for a, b in zip(pairing[anchor], pairing[j]))
        (pos if dot > 0 else neg).append(j)
    return pos, neg


def bf_contrastive(x, pairing):
    """Anchor loop + explicit set means + scalar two-logit cross-entropy."""
    n, d = np.asarray(x).shape
    total = 0.0
    for a in range(n):
        pos, neg = bf_partition(a, pairing)
        if not pos:
            continue
        x_plus = [sum(x[j][k] for j in pos) / len(pos) for k in range(d)]
        if neg:
            x_minus = [sum(x[j][k] for j in neg) / len(neg) for k in range(d)]
        else:
            x_minus = [0.0] * d
        sim_p = bf_cosine(x[a], x_plus)
        sim_m = bf_cosine(x[a], x_minus)
        # CE([sim_p, sim_m], class 0) with the pair treated as logits
        total += math.log(1.0 + math.exp(sim_m - sim_p))
    return total / n


def bf_weighted_bce(logits, targets, weights):
    """Literal per-entry form: -w[y log s + (1-y) log(1-s)], averaged."""
    logits = np.atleast_2d(logits)
    targets = np.atleast_2d(targets)
    total = 0.0
    n, c = logits.shape
    for i in range(n):
        for j in range(c):
            s = 1.0 / (1.0 + math.exp(-logits[i, j]))
            y = targets[i, j]
            total += -weights[j] * (y * math.log(s) + (1 - y) * math.log(1 - s))
    return total / (n * c)


def bf_cross_entropy(logits, target_index):
    z = [math.exp(v) for v in logits]
    return -math.log(z[target_index] / sum(z))


def central_difference(f, x, step=1e-4):
    """Central finite-difference gradient of scalar f at flat array x."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.ravel()
    g = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = f(x)
        flat[i] = orig - step
        lo = f(x)
        flat[i] = orig
        g[i] = (hi - lo) / (2 * step)
    return grad


def relative_error(a, b, floor=1e-12):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    denom = max(np.linalg.norm(b), floor)
    return np.linalg.norm(a - b) / denom
