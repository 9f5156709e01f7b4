"""Differentiable distribution discrepancies between two sets of rows.

Both metrics compare the rows of P against the rows of Q as samples from
two distributions over the same feature space and are differentiable
through the tape, so they can serve as training penalties.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InputError


@dataclass(frozen=True)
class CmdConfig:
    """Central-moment discrepancy: number of moment terms and the support
    interval [support_lo, support_hi] of the inputs."""

    num_moments: int = 5
    support_lo: float = 0.0
    support_hi: float = 1.0

    def __post_init__(self):
        if self.num_moments < 1:
            raise InputError(f"num_moments must be >= 1, got {self.num_moments}")
        if not self.support_hi > self.support_lo:
            raise InputError(
                f"support interval is empty: [{self.support_lo}, {self.support_hi}]"
            )


@dataclass(frozen=True)
class MmdConfig:
    """Maximum mean discrepancy: kernel choice and bandwidth. bandwidth is
    a positive number or the string "median" for the median heuristic."""

    kernel: str = "rbf"
    bandwidth: object = "median"

    def __post_init__(self):
        if self.kernel not in ("linear", "rbf"):
            raise InputError(f"unknown kernel {self.kernel!r}")
        if self.bandwidth != "median":
            if not isinstance(self.bandwidth, (int, float)) or self.bandwidth <= 0:
                raise InputError(f"bandwidth must be positive or 'median', got {self.bandwidth!r}")


def _check_pair(p: Tensor, q: Tensor):
    if p.data.ndim != 2 or q.data.ndim != 2:
        raise InputError("discrepancy inputs must be 2-d row sets")
    if p.data.shape[0] == 0 or q.data.shape[0] == 0:
        raise InputError("discrepancy inputs must contain at least one row")
    if p.data.shape[1] != q.data.shape[1]:
        raise InputError(
            f"row sets have different widths: {p.data.shape[1]} vs {q.data.shape[1]}"
        )


def _l2(v):
    return ad.safe_sqrt(ad.reduce_sum(ad.mul(v, v)))


def cmd(p, q, cfg: CmdConfig = CmdConfig()) -> Tensor:
    """Central moment discrepancy between row sets.

    The mean term is scaled by 1/(support_hi - support_lo); the k-th
    central moments for k = 2..num_moments enter unscaled:

        |b - a|^-1 ||E(p) - E(q)||_2  +  sum_k ||c_k(p) - c_k(q)||_2
    """
    p = ad._as_tensor(p)
    q = ad._as_tensor(q)
    _check_pair(p, q)
    mu_p = ad.mean_rows(p)
    mu_q = ad.mean_rows(q)
    scale = 1.0 / abs(cfg.support_hi - cfg.support_lo)
    total = ad.mul(_l2(ad.sub(mu_p, mu_q)), scale)
    if cfg.num_moments >= 2:
        cent_p = ad.sub(p, mu_p)
        cent_q = ad.sub(q, mu_q)
        for k in range(2, cfg.num_moments + 1):
            mom_p = ad.mean_rows(ad.powi(cent_p, k))
            mom_q = ad.mean_rows(ad.powi(cent_q, k))
            total = ad.add(total, _l2(ad.sub(mom_p, mom_q)))
    return total


def median_bandwidth(p, q) -> float:
    """Median of all pairwise Euclidean distances over the concatenated
    rows of p and q; 1.0 when that median is zero or no pair exists."""
    rows_p = p.data if isinstance(p, Tensor) else np.asarray(p, dtype=np.float64)
    rows_q = q.data if isinstance(q, Tensor) else np.asarray(q, dtype=np.float64)
    combined = np.vstack([rows_p, rows_q])
    if combined.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(combined)))
    return med if med > 0.0 else 1.0


def _mean_rbf(a, b, inv_two_sigma_sq: float) -> Tensor:
    """Mean of exp(-||x - y||^2 / (2 sigma^2)) over all row pairs of a, b."""
    sq_a = ad.reduce_sum(ad.mul(a, a), axis=1, keepdims=True)
    sq_b = ad.reduce_sum(ad.mul(b, b), axis=1, keepdims=True)
    cross = ad.matmul(a, ad.transpose(b))
    d2 = ad.sub(ad.add(sq_a, ad.transpose(sq_b)), ad.mul(cross, 2.0))
    return ad.reduce_mean(ad.exp(ad.mul(d2, -inv_two_sigma_sq)))


def mmd(p, q, cfg: MmdConfig = MmdConfig()) -> Tensor:
    """Maximum mean discrepancy between row sets.

    linear kernel: the norm of the mean difference, ||E(p) - E(q)||_2.
    rbf kernel: sqrt of the biased squared-MMD estimate
    mean k(p,p) + mean k(q,q) - 2 mean k(p,q), clamped at zero before the
    root so roundoff cannot turn it negative.
    """
    p = ad._as_tensor(p)
    q = ad._as_tensor(q)
    _check_pair(p, q)
    if cfg.kernel == "linear":
        return _l2(ad.sub(ad.mean_rows(p), ad.mean_rows(q)))
    sigma = median_bandwidth(p, q) if cfg.bandwidth == "median" else float(cfg.bandwidth)
    inv = 1.0 / (2.0 * sigma * sigma)
    mmd_sq = ad.sub(
        ad.add(_mean_rbf(p, p, inv), _mean_rbf(q, q, inv)),
        ad.mul(_mean_rbf(p, q, inv), 2.0),
    )
    return ad.safe_sqrt(ad.relu(mmd_sq))
