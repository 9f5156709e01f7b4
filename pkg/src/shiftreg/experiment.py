"""Training loop, loss assembly, evaluation, and multi-trial protocols."""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor, backward, no_grad
from .datasets import SplitMasks
from .discrepancy import CmdConfig, MmdConfig, cmd, mmd
from .errors import InputError, TrainingDiverged
from .graph import Graph
from .models import AppnpParams, GcnParams, appnp_forward, gcn_forward
from .optim import AdamState, adam_step
from .ppr import DENSE_CAP, BiasConfig, PprConfig, biased_train_select, ppr_exact, ppr_power


@dataclass(frozen=True)
class TrainConfig:
    """Everything one trial needs besides the graph and the splits.

    lam and beta weight the CMD and MMD penalties; epsilon is the training
    -set bias strength used when masks are redrawn per trial.
    """

    model: str = "appnp"
    lam: float = 0.0
    beta: float = 0.0
    alpha: float = 0.1
    propagation_steps: int = 10
    hidden: int = 64
    dropout_rate: float = 0.5
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    max_epochs: int = 1000
    patience: int = 100
    seed: int = 0
    epsilon: float = 0.0
    per_class_train: int = 20
    val_size: int = 500
    test_size: int = 1000
    reg_target: str = "all_unlabeled"
    reg_inputs: str = "probs"
    reg_sample_cap: int = 2048
    num_moments: int = 5
    mmd_kernel: str = "rbf"
    mmd_bandwidth: object = "median"
    dataset: str = ""

    def __post_init__(self):
        if self.model not in ("appnp", "gcn"):
            raise InputError(f"model must be appnp or gcn, got {self.model!r}")
        if self.lam < 0 or self.beta < 0:
            raise InputError("lam and beta must be >= 0")
        if self.max_epochs < 1:
            raise InputError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not 0 <= self.patience <= self.max_epochs:
            raise InputError("patience must be in [0, max_epochs]")
        if self.learning_rate <= 0:
            raise InputError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise InputError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.reg_target not in ("all_unlabeled", "test_only"):
            raise InputError(f"unknown reg_target {self.reg_target!r}")
        if self.reg_inputs not in ("probs", "logits"):
            raise InputError(f"unknown reg_inputs {self.reg_inputs!r}")
        if self.reg_sample_cap < 1:
            raise InputError("reg_sample_cap must be >= 1")


@dataclass
class TrialReport:
    """Per-epoch loss terms and the held-out outcome of one trial."""

    seed: int
    epoch_ce: list = field(default_factory=list)
    epoch_cmd: list = field(default_factory=list)
    epoch_mmd: list = field(default_factory=list)
    epoch_total: list = field(default_factory=list)
    best_epoch: int = -1
    test_f1: float = 0.0
    wall_time: float = 0.0

    def check_decomposition(self, lam, beta, tol=1e-10):
        for ce, c, m, t in zip(self.epoch_ce, self.epoch_cmd, self.epoch_mmd, self.epoch_total):
            if abs(t - (ce + lam * c + beta * m)) > tol:
                raise InputError(f"loss decomposition violated: {t} vs {ce + lam * c + beta * m}")


@dataclass
class AggregateReport:
    """Trial outcomes plus their mean/std summary and the config used."""

    trials: list
    failures: list
    f1_mean: float
    f1_std: float
    config: dict


def trial_streams(seed: int):
    """Derive the three independent random streams of one trial: the
    weight-init seed, the dropout generator, and the generator used to
    subsample regularization rows."""
    init_state, dropout_state, sample_state = np.random.SeedSequence(seed).generate_state(3)
    return (
        int(init_state),
        np.random.default_rng(int(dropout_state)),
        np.random.default_rng(int(sample_state)),
    )


def total_loss(
    logits,
    labels,
    train_mask,
    reg_mask,
    lam: float,
    beta: float,
    cmd_cfg: CmdConfig = CmdConfig(),
    mmd_cfg: MmdConfig = MmdConfig(),
    reg_inputs: str = "probs",
    parts: dict | None = None,
):
    """Cross-entropy over training rows plus weighted discrepancies
    between training rows and regularization rows.

    With lam == beta == 0 the regularizer branch is skipped entirely (no
    softmax, no row gather), so the returned value is the plain
    cross-entropy loss, bit for bit. Term values are written to `parts`
    when a dict is passed.
    """
    train_mask = np.asarray(train_mask, dtype=bool)
    reg_mask = np.asarray(reg_mask, dtype=bool)
    if (train_mask & reg_mask).any():
        raise InputError("training and regularization masks overlap")
    ce = ad.softmax_cross_entropy(logits, labels, train_mask)
    ce_val = float(ce.data)
    cmd_val = 0.0
    mmd_val = 0.0
    total = ce
    if lam > 0.0 or beta > 0.0:
        if not reg_mask.any():
            raise InputError("regularization mask selects no rows")
        rows = ad.row_softmax(logits) if reg_inputs == "probs" else logits
        p = ad.take_rows(rows, np.flatnonzero(train_mask))
        q = ad.take_rows(rows, np.flatnonzero(reg_mask))
        if lam > 0.0:
            cmd_term = cmd(p, q, cmd_cfg)
            cmd_val = float(cmd_term.data)
            total = ad.add(total, ad.mul(cmd_term, lam))
        if beta > 0.0:
            mmd_term = mmd(p, q, mmd_cfg)
            mmd_val = float(mmd_term.data)
            total = ad.add(total, ad.mul(mmd_term, beta))
    if parts is not None:
        parts.update(ce=ce_val, cmd=cmd_val, mmd=mmd_val, total=float(total.data))
    return total


def evaluate_f1_micro(logits, labels, mask) -> float:
    """Micro-averaged F1 of argmax predictions over the masked rows; for
    single-label multiclass this equals plain accuracy. Argmax ties go to
    the lowest class id."""
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise InputError("evaluation mask selects no rows")
    pred = np.argmax(data[mask], axis=1)
    return float(np.mean(pred == np.asarray(labels)[mask]))


def _build_model(cfg: TrainConfig, g: Graph, init_seed: int):
    if cfg.model == "appnp":
        params_obj = AppnpParams.init(
            g.num_features,
            g.num_classes,
            hidden=cfg.hidden,
            seed=init_seed,
            propagation_steps=cfg.propagation_steps,
            alpha=cfg.alpha,
            dropout_rate=cfg.dropout_rate,
        )
        return params_obj, appnp_forward
    params_obj = GcnParams.init(
        g.num_features, g.num_classes, hidden=cfg.hidden, seed=init_seed,
        dropout_rate=cfg.dropout_rate,
    )
    return params_obj, gcn_forward


def _reg_row_mask(cfg: TrainConfig, masks: SplitMasks, sample_rng) -> np.ndarray:
    """Rows the discrepancy terms compare against, subsampled to the cap.
    Nothing is drawn when the regularizer is off."""
    if cfg.lam == 0.0 and cfg.beta == 0.0:
        return np.zeros(len(masks.train), dtype=bool)
    base = masks.test if cfg.reg_target == "test_only" else ~masks.train
    idx = np.flatnonzero(base)
    if len(idx) > cfg.reg_sample_cap:
        idx = np.sort(sample_rng.choice(idx, size=cfg.reg_sample_cap, replace=False))
    out = np.zeros(len(masks.train), dtype=bool)
    out[idx] = True
    return out


def train(cfg: TrainConfig, g: Graph, masks: SplitMasks) -> TrialReport:
    """One full training run with early stopping on validation F1.

    The best-validation parameters are restored before the test
    evaluation. Weight decay applies to the first-layer weight gradient
    only, so the recorded loss decomposition stays exact.
    """
    start = time.perf_counter()
    masks.check(g.labels, g.num_classes)
    if not masks.val.any():
        raise InputError("early stopping needs a non-empty validation split")
    if not masks.test.any():
        raise InputError("evaluation needs a non-empty test split")
    init_seed, dropout_rng, sample_rng = trial_streams(cfg.seed)
    params_obj, forward = _build_model(cfg, g, init_seed)
    params = params_obj.params()
    adam = AdamState.for_params(params, learning_rate=cfg.learning_rate)

    reg_mask = _reg_row_mask(cfg, masks, sample_rng)
    cmd_cfg = CmdConfig(num_moments=cfg.num_moments)
    mmd_cfg = MmdConfig(kernel=cfg.mmd_kernel, bandwidth=cfg.mmd_bandwidth)

    report = TrialReport(seed=cfg.seed)
    best_val = -np.inf
    best_state = [p.data.copy() for p in params]
    since_improvement = 0

    for epoch in range(cfg.max_epochs):
        parts = {}
        with Tape() as tape:
            logits = forward(g, params_obj, train_flag=True, rng=dropout_rng)
            loss = total_loss(
                logits, g.labels, masks.train, reg_mask, cfg.lam, cfg.beta,
                cmd_cfg, mmd_cfg, cfg.reg_inputs, parts,
            )
            if not np.isfinite(loss.data):
                raise TrainingDiverged(
                    f"non-finite training loss at epoch {epoch} (seed {cfg.seed})"
                )
            backward(tape, loss)
        grads = [p.grad for p in params]
        grads[0] = grads[0] + cfg.weight_decay * params[0].data
        adam_step(params, grads, adam)

        report.epoch_ce.append(parts["ce"])
        report.epoch_cmd.append(parts["cmd"])
        report.epoch_mmd.append(parts["mmd"])
        report.epoch_total.append(parts["total"])

        with no_grad():
            val_logits = forward(g, params_obj, train_flag=False)
        val_f1 = evaluate_f1_micro(val_logits, g.labels, masks.val)
        if val_f1 > best_val:
            best_val = val_f1
            report.best_epoch = epoch
            best_state = [p.data.copy() for p in params]
            since_improvement = 0
        else:
            since_improvement += 1
        if since_improvement >= cfg.patience:
            break

    for p, snapshot in zip(params, best_state):
        p.data = snapshot
    with no_grad():
        test_logits = forward(g, params_obj, train_flag=False)
    report.test_f1 = evaluate_f1_micro(test_logits, g.labels, masks.test)
    report.wall_time = time.perf_counter() - start
    return report


def _score_source(cfg: TrainConfig, g: Graph):
    """PPR scores for the biased sampler: the dense matrix on small
    graphs, a per-column solver above the dense cap."""
    if g.num_nodes <= DENSE_CAP:
        return ppr_exact(g.norm_adjacency, cfg.alpha)
    power_cfg = PprConfig(alpha=cfg.alpha, mode="power_iteration")
    return lambda s: ppr_power(g.norm_adjacency, cfg.alpha, s, power_cfg)


def run_trials(cfg: TrainConfig, g: Graph, masks: SplitMasks, n_trials: int = 10,
               jobs: int = 1) -> AggregateReport:
    """Repeat training with seeds cfg.seed .. cfg.seed + n_trials - 1.

    Each trial redraws the training mask (biased by cfg.epsilon) from the
    nodes outside the fixed val/test splits. Diverged trials are recorded
    as failures and left out of the aggregate. Trials are independent, so
    jobs > 1 runs them on a thread pool; results are folded in seed order
    either way.
    """
    if n_trials < 1:
        raise InputError(f"n_trials must be >= 1, got {n_trials}")
    if jobs < 1:
        raise InputError(f"jobs must be >= 1, got {jobs}")
    scores = _score_source(cfg, g) if cfg.epsilon > 0.0 else None
    candidates = ~(masks.val | masks.test)

    def one_trial(trial_seed):
        bias = BiasConfig(
            epsilon=cfg.epsilon, per_class_train=cfg.per_class_train, seed=trial_seed
        )
        train_mask = biased_train_select(scores, g.labels, candidates, bias)
        trial_masks = SplitMasks(train=train_mask, val=masks.val, test=masks.test)
        trial_cfg = replace(cfg, seed=trial_seed)
        try:
            return train(trial_cfg, g, trial_masks)
        except TrainingDiverged as exc:
            return {"seed": trial_seed, "error": str(exc)}

    seeds = range(cfg.seed, cfg.seed + n_trials)
    if jobs == 1:
        outcomes = [one_trial(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(one_trial, seeds))
    trials = [o for o in outcomes if isinstance(o, TrialReport)]
    failures = [o for o in outcomes if not isinstance(o, TrialReport)]
    if not trials:
        raise TrainingDiverged(f"all {n_trials} trials diverged")

    f1s = np.array([t.test_f1 for t in trials])
    return AggregateReport(
        trials=trials,
        failures=failures,
        f1_mean=float(f1s.mean()),
        f1_std=float(f1s.std()),
        config=asdict(cfg),
    )


SWEEP_AXES = {"lambda": "lam", "beta": "beta", "epsilon": "epsilon"}


def sweep(base_cfg: TrainConfig, axis: str, values, g: Graph, masks: SplitMasks,
          n_trials: int = 10, jobs: int = 1):
    """One aggregate per axis value, everything else held fixed; results
    come back as (value, AggregateReport) pairs in input order."""
    if axis not in SWEEP_AXES:
        raise InputError(f"sweep axis must be one of {sorted(SWEEP_AXES)}, got {axis!r}")
    values = list(values)
    if not values:
        raise InputError("sweep needs at least one value")
    out = []
    for v in values:
        cfg_v = replace(base_cfg, **{SWEEP_AXES[axis]: float(v)})
        out.append((float(v), run_trials(cfg_v, g, masks, n_trials, jobs=jobs)))
    return out
