"""Dataset splitting, the optimization loop with ablation switches, grid
search over validation, and the four-variant ablation driver.

Model selection uses validation macro-MCC on the activity head throughout.
Training is deterministic given (config, seed, data): parameter init and
batch shuffling draw from seed-sequence children of the run seed.
"""

from __future__ import annotations

import copy
import itertools
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset
from .losses import LossBreakdown, LossWeights, class_weights, total_loss
from .metrics import MetricsReport, evaluate_head
from .model import ModelConfig, backward, forward, init_params

ABLATIONS = ("none", "no_UI", "no_CL", "no_TS")
ABLATION_VARIANTS = ("full", "no_UI", "no_CL", "no_TS")


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.6
    val: float = 0.2
    test: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train, self.val, self.test)
        if any(f <= 0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError("split fractions must be positive and sum to 1")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    max_epochs: int = 50
    learning_rate: float = 1e-3
    patience: int = 10
    loss_weights: LossWeights = field(default_factory=LossWeights)
    hidden_size: int = 64
    encoder_dim: int = 64
    pairing_scope: str = "activity+context"
    seed: int = 0
    ablation: str = "none"

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}")
        if self.batch_size < 2 and self.effective_weights().alpha > 0:
            raise ValueError("batch_size must be >= 2 when the contrastive "
                             "weight is positive")

    def effective_weights(self) -> LossWeights:
        w = self.loss_weights
        if self.ablation == "no_UI":
            w = replace(w, gamma2=0.0)
        elif self.ablation == "no_CL":
            w = replace(w, alpha=0.0)
        return w

    @property
    def use_encoder(self) -> bool:
        return self.ablation != "no_TS"


@dataclass
class TrainHistory:
    epoch_losses: list[LossBreakdown] = field(default_factory=list)
    val_reports: list[dict[str, MetricsReport]] = field(default_factory=list)
    step_log: list[dict] = field(default_factory=list)
    best_epoch: int = -1

    @property
    def n_epochs(self) -> int:
        return len(self.epoch_losses)


def _allocate_counts(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    """Floor-then-distribute rounding; leftovers go to the largest fractional
    remainders, ties resolved test first, then val, then train."""
    raw = np.array([spec.train, spec.val, spec.test]) * n
    counts = np.floor(raw).astype(int)
    remainders = raw - counts
    tie_rank = {0: 2, 1: 1, 2: 0}  # ties: test first, then val, then train
    order = sorted(range(3), key=lambda i: (-remainders[i], tie_rank[i]))
    for i in range(n - counts.sum()):
        counts[order[i % 3]] += 1
    return int(counts[0]), int(counts[1]), int(counts[2])


def split_indices(user_index: np.ndarray, spec: SplitSpec):
    """Per-user stratified split of instance indices into train/val/test.

    Every user's instances are split by the configured fractions so user
    identification stays learnable and evaluable for each user. Users with
    fewer than 3 instances are warned about and assigned wholly to train.
    """
    user_index = np.asarray(user_index)
    if user_index.size < 5:
        raise ValueError("need at least 5 instances to split")
    rng = np.random.default_rng(spec.seed)
    train_idx, val_idx, test_idx = [], [], []
    for user in np.unique(user_index):
        idx = np.where(user_index == user)[0]
        if idx.size < 3:
            warnings.warn(f"user {user} has {idx.size} instance(s); "
                          "assigning all to train")
            train_idx.append(idx)
            continue
        perm = idx[rng.permutation(idx.size)]
        n_tr, n_va, n_te = _allocate_counts(idx.size, spec)
        train_idx.append(perm[:n_tr])
        val_idx.append(perm[n_tr:n_tr + n_va])
        test_idx.append(perm[n_tr + n_va:])
    cat = lambda parts: np.sort(np.concatenate(parts)) if parts else np.array([], dtype=int)
    return cat(train_idx), cat(val_idx), cat(test_idx)


def split_dataset(dataset: Dataset, spec: SplitSpec):
    """Stratified (train, val, test) Datasets; deterministic given the seed."""
    tr, va, te = split_indices(dataset.user_index, spec)
    return dataset.subset(tr), dataset.subset(va), dataset.subset(te)


class RAdam:
    """Rectified adaptive moment optimizer: adaptive step with a
    variance-rectification warmup. lr=0 leaves parameters untouched."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2, t = self.beta1, self.beta2, self.t
        rho_inf = 2.0 / (1.0 - b2) - 1.0
        b2t = b2 ** t
        rho_t = rho_inf - 2.0 * t * b2t / (1.0 - b2t)
        rectify = rho_t > 4.0
        if rectify:
            r_t = np.sqrt(((rho_t - 4) * (rho_t - 2) * rho_inf)
                          / ((rho_inf - 4) * (rho_inf - 2) * rho_t))
        for key, g in grads.items():
            if key not in self.m:
                self.m[key] = np.zeros_like(g)
                self.v[key] = np.zeros_like(g)
            self.m[key] = b1 * self.m[key] + (1 - b1) * g
            self.v[key] = b2 * self.v[key] + (1 - b2) * g * g
            m_hat = self.m[key] / (1 - b1 ** t)
            if rectify:
                v_hat = np.sqrt(self.v[key] / (1 - b2t))
                params[key] -= self.lr * r_t * m_hat / (v_hat + self.eps)
            else:
                params[key] -= self.lr * m_hat


def _batches(n: int, batch_size: int, rng: np.random.Generator,
             drop_short: bool) -> list[np.ndarray]:
    """Shuffled mini-batch index lists for one epoch.

    With a positive contrastive weight the final short batch is dropped
    (pair formation degenerates on tiny batches) unless that would discard
    the whole epoch, in which case the single full-set batch is kept.
    """
    perm = rng.permutation(n)
    chunks = [perm[i:i + batch_size] for i in range(0, n, batch_size)]
    if drop_short and len(chunks) > 1 and len(chunks[-1]) < batch_size:
        chunks = chunks[:-1]
    return chunks


def evaluate(params: dict, mconfig: ModelConfig, data: Dataset,
             chunk: int = 1024) -> dict[str, MetricsReport]:
    """Metrics reports for all three heads on a read-only parameter snapshot."""
    logits = {"activity": [], "context": [], "user": []}
    reps = []
    for lo in range(0, data.n, chunk):
        x_r, out = forward(data.windows[lo:lo + chunk], data.features[lo:lo + chunk],
                           params, mconfig)
        reps.append(x_r)
        logits["activity"].append(out.activity)
        logits["context"].append(out.context)
        logits["user"].append(out.user)
    truth = {"activity": data.activities, "context": data.contexts, "user": data.users}
    names = {"activity": data.schema.activity_names,
             "context": data.schema.context_names,
             "user": data.schema.user_ids}
    return {head: evaluate_head(np.concatenate(logits[head]), truth[head],
                                head, list(names[head]))
            for head in logits}


def fused_representations(params: dict, mconfig: ModelConfig, data: Dataset,
                          chunk: int = 1024) -> np.ndarray:
    """X_r rows for a dataset under a trained parameter snapshot."""
    return np.concatenate([forward(data.windows[lo:lo + chunk],
                                   data.features[lo:lo + chunk],
                                   params, mconfig)[0]
                           for lo in range(0, data.n, chunk)])


def model_config_for(config: TrainConfig, data: Dataset,
                     init_seed: int) -> ModelConfig:
    return ModelConfig(
        channels=data.windows.shape[1], snapshots=data.windows.shape[2],
        feature_dim=data.features.shape[1],
        n_activities=data.activities.shape[1], n_contexts=data.contexts.shape[1],
        n_users=data.users.shape[1], hidden_size=config.hidden_size,
        encoder_dim=config.encoder_dim, use_encoder=config.use_encoder,
        seed=init_seed)


def train(config: TrainConfig, train_set: Dataset, val_set: Dataset):
    """Optimize the full objective; returns (best params, ModelConfig, history).

    Per epoch: seeded shuffled mini-batches, one optimizer step per batch,
    then validation. The best-validation (activity macro-MCC) snapshot is
    returned; early stopping fires after `patience` non-improving epochs.
    A non-finite loss aborts with the offending batch index.
    """
    if train_set.n == 0 or val_set.n == 0:
        raise ValueError("train and validation splits must be nonempty")
    weights = config.effective_weights()
    ss = np.random.SeedSequence(config.seed)
    init_seed, shuffle_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    mconfig = model_config_for(config, train_set, init_seed)
    params = init_params(mconfig)
    w_act = class_weights(train_set.activities)
    w_ctx = class_weights(train_set.contexts)
    opt = RAdam(lr=config.learning_rate)
    rng = np.random.default_rng(shuffle_seed)

    history = TrainHistory()
    best_score = -np.inf
    best_params = copy.deepcopy(params)
    step = 0
    for epoch in range(config.max_epochs):
        epoch_terms = []
        for batch_i, idx in enumerate(_batches(train_set.n, config.batch_size,
                                               rng, weights.alpha > 0)):
            x_r, logits, cache = forward(train_set.windows[idx],
                                         train_set.features[idx],
                                         params, mconfig, return_cache=True)
            breakdown, grads = total_loss(
                logits.activity, logits.context, logits.user, x_r,
                train_set.activities[idx], train_set.contexts[idx],
                train_set.users[idx], weights, w_act, w_ctx,
                pairing_scope=config.pairing_scope, return_grads=True)
            if not np.isfinite(breakdown.L_total):
                raise RuntimeError(f"non-finite loss at epoch {epoch}, "
                                   f"batch {batch_i}: {breakdown}")
            pgrads = backward(grads, cache, params, mconfig)
            opt.step(params, pgrads)
            epoch_terms.append(breakdown)
            history.step_log.append({"step": step, "L_A": breakdown.L_A,
                                     "L_PP": breakdown.L_PP, "L_U": breakdown.L_U,
                                     "L_d": breakdown.L_d,
                                     "L_total": breakdown.L_total})
            step += 1
        history.epoch_losses.append(LossBreakdown(
            L_A=float(np.mean([b.L_A for b in epoch_terms])),
            L_PP=float(np.mean([b.L_PP for b in epoch_terms])),
            L_U=float(np.mean([b.L_U for b in epoch_terms])),
            L_d=float(np.mean([b.L_d for b in epoch_terms])),
            L_total=float(np.mean([b.L_total for b in epoch_terms]))))
        reports = evaluate(params, mconfig, val_set)
        history.val_reports.append(reports)
        score = reports["activity"].macro_mcc
        if score > best_score:
            best_score = score
            best_params = copy.deepcopy(params)
            history.best_epoch = epoch
        elif epoch - history.best_epoch >= config.patience:
            break
    return best_params, mconfig, history


GRID_KEYS = ("alpha", "gamma1", "gamma2", "learning_rate", "encoder_dim",
             "hidden_size", "batch_size", "pairing_scope")


def _apply_grid_point(config: TrainConfig, point: dict) -> TrainConfig:
    weights = config.loss_weights
    for key in ("alpha", "gamma1", "gamma2"):
        if key in point:
            weights = replace(weights, **{key: point[key]})
    direct = {k: v for k, v in point.items()
              if k not in ("alpha", "gamma1", "gamma2")}
    return replace(config, loss_weights=weights, **direct)


@dataclass
class GridTrial:
    point: dict
    config: TrainConfig
    score: float
    history: TrainHistory


def grid_search(config: TrainConfig, grid: dict[str, list],
                train_set: Dataset, val_set: Dataset):
    """Exhaustive Cartesian search; selection by validation activity
    macro-MCC, ties toward smaller alpha then smaller learning rate."""
    if not grid:
        raise ValueError("grid must name at least one axis")
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise ValueError(f"unknown grid keys: {sorted(unknown)}")
    keys = list(grid.keys())
    trials: list[GridTrial] = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        point = dict(zip(keys, combo))
        trial_config = _apply_grid_point(config, point)
        _, _, history = train(trial_config, train_set, val_set)
        score = history.val_reports[history.best_epoch]["activity"].macro_mcc
        trials.append(GridTrial(point=point, config=trial_config,
                                score=score, history=history))

    def rank(t: GridTrial):
        return (-t.score, t.config.loss_weights.alpha, t.config.learning_rate)

    best = min(trials, key=rank)
    return best.config, trials


@dataclass
class AblationResult:
    reports: dict[str, dict[str, MetricsReport]]
    params: dict[str, dict]
    model_configs: dict[str, ModelConfig]
    histories: dict[str, TrainHistory]


def ablate(config: TrainConfig, train_set: Dataset, val_set: Dataset,
           test_set: Dataset) -> AblationResult:
    """Run {full, no_UI, no_CL, no_TS} with shared seed and data; report
    test metrics for every head of every variant."""
    result = AblationResult({}, {}, {}, {})
    for variant in ABLATION_VARIANTS:
        ablation = "none" if variant == "full" else variant
        params, mconfig, history = train(replace(config, ablation=ablation),
                                         train_set, val_set)
        result.reports[variant] = evaluate(params, mconfig, test_set)
        result.params[variant] = params
        result.model_configs[variant] = mconfig
        result.histories[variant] = history
    return result
