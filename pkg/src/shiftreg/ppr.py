"""Personalized PageRank scores and the biased training-set sampler.

The score matrix is the inverse (I - (1-alpha) A_norm)^-1 taken as
printed, without the conventional alpha prefactor; selection only ever
compares scores within one column, so the constant factor is irrelevant.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import per_class_sample
from .errors import ConvergenceError, InputError
from .sparse import SparseMatrix, spmm

DENSE_CAP = 5000


@dataclass(frozen=True)
class PprConfig:
    """Teleport probability and the iteration budget for power mode."""

    alpha: float = 0.1
    max_iters: int = 1000
    tolerance: float = 1e-10
    mode: str = "exact_solve"

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise InputError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.max_iters < 1:
            raise InputError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tolerance <= 0.0:
            raise InputError(f"tolerance must be positive, got {self.tolerance}")
        if self.mode not in ("exact_solve", "power_iteration"):
            raise InputError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class BiasConfig:
    """Bias strength, per-class budget, and the sampling seed."""

    epsilon: float = 0.0
    per_class_train: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise InputError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.per_class_train < 1:
            raise InputError(f"per_class_train must be >= 1, got {self.per_class_train}")


def ppr_exact(norm_adj: SparseMatrix, alpha: float, dense_cap: int = DENSE_CAP) -> np.ndarray:
    """Full score matrix by dense solve; refuses graphs above dense_cap."""
    if not 0.0 < alpha <= 1.0:
        raise InputError(f"alpha must be in (0, 1], got {alpha}")
    n = norm_adj.num_rows
    if n > dense_cap:
        raise InputError(
            f"graph has {n} nodes, above the dense cap {dense_cap}; "
            "use power_iteration mode per needed column"
        )
    if alpha == 1.0:
        return np.eye(n)
    system = np.eye(n) - (1.0 - alpha) * norm_adj.to_dense()
    return np.linalg.solve(system, np.eye(n))


def ppr_power(norm_adj: SparseMatrix, alpha: float, source: int, cfg: PprConfig) -> np.ndarray:
    """One column of the score matrix by the fixed-point iteration
    pi <- (1-alpha) A_norm pi + e_source, started at e_source."""
    if not 0.0 < alpha <= 1.0:
        raise InputError(f"alpha must be in (0, 1], got {alpha}")
    n = norm_adj.num_rows
    if not 0 <= source < n:
        raise InputError(f"source {source} outside [0, {n})")
    e = np.zeros(n)
    e[source] = 1.0
    pi = e.copy()
    for _ in range(cfg.max_iters):
        nxt = (1.0 - alpha) * spmm(norm_adj, pi) + e
        residual = float(np.max(np.abs(nxt - pi)))
        pi = nxt
        if residual <= cfg.tolerance:
            return pi
    raise ConvergenceError(
        f"power iteration did not reach {cfg.tolerance} in {cfg.max_iters} iterations",
        residual=residual,
    )


def ppr_matrix(norm_adj: SparseMatrix, cfg: PprConfig, jobs: int = 1) -> np.ndarray:
    """Full score matrix in the configured mode; power mode assembles
    columns independently, in parallel when jobs > 1."""
    if cfg.mode == "exact_solve":
        return ppr_exact(norm_adj, cfg.alpha)
    n = norm_adj.num_rows
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            cols = list(pool.map(lambda s: ppr_power(norm_adj, cfg.alpha, s, cfg), range(n)))
    else:
        cols = [ppr_power(norm_adj, cfg.alpha, s, cfg) for s in range(n)]
    return np.column_stack(cols)


def biased_train_select(ppr_scores, labels, candidate_mask, cfg: BiasConfig) -> np.ndarray:
    """Training mask biased toward the PPR neighborhood of one seed node.

    With epsilon > 0, a seed node is drawn uniformly from the candidates
    and each class budget is filled by epsilon-mixing top-of-ranking picks
    (by the seed's score column, descending) with uniform picks. With
    epsilon == 0 nothing PPR-related is drawn or computed and the
    selection stream reduces to plain uniform per-class sampling.

    ppr_scores is the dense score matrix, or a callable source -> column
    for graphs too large to hold the full matrix.
    """
    labels = np.asarray(labels, dtype=np.int64)
    candidate_mask = np.asarray(candidate_mask, dtype=bool)
    if len(candidate_mask) != len(labels):
        raise InputError("candidate mask and labels disagree on node count")
    candidates = np.flatnonzero(candidate_mask)
    if len(candidates) == 0:
        raise InputError("no candidate nodes to sample from")
    rng = np.random.default_rng(cfg.seed)

    scores = None
    if cfg.epsilon > 0.0:
        seed_node = int(candidates[rng.integers(len(candidates))])
        if callable(ppr_scores):
            scores = np.asarray(ppr_scores(seed_node), dtype=np.float64)
        else:
            scores = np.asarray(ppr_scores, dtype=np.float64)[:, seed_node]
        if len(scores) != len(labels):
            raise InputError("score column and labels disagree on node count")

    chosen = per_class_sample(
        labels, candidates, cfg.per_class_train, rng, scores=scores, epsilon=cfg.epsilon
    )
    mask = np.zeros(len(labels), dtype=bool)
    mask[chosen] = True
    return mask


def save_train_mask(path, mask: np.ndarray, cfg: BiasConfig):
    """Persist a selection as {seed, epsilon, indices}."""
    payload = {
        "seed": cfg.seed,
        "epsilon": cfg.epsilon,
        "indices": [int(i) for i in np.flatnonzero(mask)],
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def load_train_mask(path, num_nodes: int):
    """Read a saved selection back as (mask, seed, epsilon)."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"train mask file not found: {path}")
    payload = json.loads(path.read_text())
    indices = np.asarray(payload["indices"], dtype=np.int64)
    if len(indices) and (indices.min() < 0 or indices.max() >= num_nodes):
        raise InputError(f"{path}: node index outside [0, {num_nodes})")
    mask = np.zeros(num_nodes, dtype=bool)
    mask[indices] = True
    return mask, int(payload["seed"]), float(payload["epsilon"])
