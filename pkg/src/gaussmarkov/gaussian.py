"""Exact finite-dimensional Gaussian algebra.

Conditioning, concatenation and composition of Gaussian transport plans,
the Markov criterion for Gaussian laws, and the sup-norm convergence
metric used by every experiment downstream.

Everything here is plain matrix algebra: a chain of transport plans with
matching marginals glues into a joint Gaussian whose cross blocks are
telescoping products ``S_{i,i+1} S_{i+1,i+1}^{-1} ... S_{j-1,j}``; a joint
law is Markov exactly when each cross block factors through every
intermediate marginal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg as sla

from .errors import (
    ChainMismatchError,
    InvalidInputError,
    SingularMarginalError,
)

#: Condition-number guard for marginal covariance inversion.
COND_LIMIT = 1e12

#: Entrywise tolerance when matching chained marginals.
MARGINAL_MATCH_TOL = 1e-10

#: Residual threshold of the Markov criterion, relative to max diagonal.
MARKOV_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class GaussianVector:
    """Finite-dimensional Gaussian law on an ordered time grid.

    ``times`` must be strictly increasing; ``cov`` symmetric with minimum
    eigenvalue at least ``-1e-10 * max(diagonal)``.  The covariance is
    stored symmetrized.
    """

    times: np.ndarray
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.asarray(self.cov, dtype=float)
        n = times.size
        if n == 0:
            raise InvalidInputError("empty time grid")
        if n > 1 and not np.all(np.diff(times) > 0.0):
            raise InvalidInputError("times must be strictly increasing")
        if mean.shape != (n,) or cov.shape != (n, n):
            raise InvalidInputError(
                f"shape mismatch: {n} times, mean {mean.shape}, cov {cov.shape}"
            )
        asym = float(np.max(np.abs(cov - cov.T))) if n else 0.0
        if asym > 1e-12 * max(1.0, float(np.max(np.abs(cov)))):
            raise InvalidInputError(f"covariance not symmetric (max deviation {asym})")
        cov = 0.5 * (cov + cov.T)
        scale = float(np.max(np.diag(cov))) if n else 0.0
        min_eig = float(np.linalg.eigvalsh(cov)[0])
        if min_eig < -1e-10 * max(scale, 1e-300):
            raise InvalidInputError(
                f"covariance not PSD: min eigenvalue {min_eig}, scale {scale}"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.times.size

    def project(self, indices) -> "GaussianVector":
        idx = np.asarray(indices, dtype=int)
        return GaussianVector(
            times=self.times[idx],
            mean=self.mean[idx],
            cov=self.cov[np.ix_(idx, idx)],
        )

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianVector":
        return cls(
            times=np.asarray(data["times"], dtype=float),
            mean=np.asarray(data["mean"], dtype=float),
            cov=np.asarray(data["cov"], dtype=float),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GaussianVector":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class TransportPlan:
    """Joint Gaussian law split into a left and a right marginal block."""

    joint: GaussianVector
    left_dim: int
    right_dim: int

    def __post_init__(self):
        if self.left_dim < 1 or self.right_dim < 1:
            raise InvalidInputError("block dimensions must be positive")
        if self.left_dim + self.right_dim != self.joint.dim:
            raise InvalidInputError(
                f"blocks {self.left_dim}+{self.right_dim} != joint dim {self.joint.dim}"
            )

    @classmethod
    def from_blocks(
        cls,
        cov_left,
        cross,
        cov_right,
        mean_left=None,
        mean_right=None,
        times=None,
    ) -> "TransportPlan":
        """Build a plan from marginal covariances and the cross block."""
        cov_left = np.atleast_2d(np.asarray(cov_left, dtype=float))
        cov_right = np.atleast_2d(np.asarray(cov_right, dtype=float))
        m, n = cov_left.shape[0], cov_right.shape[0]
        cross = np.asarray(cross, dtype=float).reshape(m, n)
        mean_left = np.zeros(m) if mean_left is None else np.asarray(mean_left, dtype=float).ravel()
        mean_right = np.zeros(n) if mean_right is None else np.asarray(mean_right, dtype=float).ravel()
        cov = np.block([[cov_left, cross], [cross.T, cov_right]])
        if times is None:
            times = np.arange(m + n, dtype=float)
        joint = GaussianVector(
            times=times, mean=np.concatenate([mean_left, mean_right]), cov=cov
        )
        return cls(joint=joint, left_dim=m, right_dim=n)

    @property
    def cov_left(self) -> np.ndarray:
        return self.joint.cov[: self.left_dim, : self.left_dim]

    @property
    def cov_right(self) -> np.ndarray:
        return self.joint.cov[self.left_dim :, self.left_dim :]

    @property
    def cross(self) -> np.ndarray:
        return self.joint.cov[: self.left_dim, self.left_dim :]

    @property
    def mean_left(self) -> np.ndarray:
        return self.joint.mean[: self.left_dim]

    @property
    def mean_right(self) -> np.ndarray:
        return self.joint.mean[self.left_dim :]

    @property
    def times_left(self) -> np.ndarray:
        return self.joint.times[: self.left_dim]

    @property
    def times_right(self) -> np.ndarray:
        return self.joint.times[self.left_dim :]

    def left_marginal(self) -> GaussianVector:
        return self.joint.project(np.arange(self.left_dim))

    def right_marginal(self) -> GaussianVector:
        return self.joint.project(np.arange(self.left_dim, self.joint.dim))


@dataclass(frozen=True)
class ConditionalLaw:
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class MarkovReport:
    max_residual: float
    is_markov: bool


def solve_spd(mat: np.ndarray, rhs: np.ndarray, what: str = "marginal") -> np.ndarray:
    """Solve ``mat @ x = rhs`` for symmetric positive-definite ``mat``.

    Uses a Cholesky solve guarded by a condition-number estimate; raises
    :class:`SingularMarginalError` past ``COND_LIMIT``.
    """
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    eigs = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    if eigs[0] <= 0.0 or eigs[-1] / eigs[0] >= COND_LIMIT:
        raise SingularMarginalError(
            f"{what} covariance singular or ill-conditioned "
            f"(eigenvalues in [{eigs[0]:.3e}, {eigs[-1]:.3e}])"
        )
    c, low = sla.cho_factor(mat, lower=True)
    return sla.cho_solve((c, low), rhs)


def condition(plan: TransportPlan, x) -> ConditionalLaw:
    """Law of the right block given the left block equals ``x``.

    Mean ``m_r + S_cross^T S_left^{-1} (x - m_l)`` and covariance
    ``S_right - S_cross^T S_left^{-1} S_cross``.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != plan.left_dim:
        raise InvalidInputError(
            f"conditioning point has dim {x.size}, expected {plan.left_dim}"
        )
    solved = solve_spd(plan.cov_left, np.column_stack([plan.cross, (x - plan.mean_left)[:, None]]),
                       what="left marginal")
    solved_cross = solved[:, : plan.right_dim]
    solved_x = solved[:, plan.right_dim]
    mean = plan.mean_right + plan.cross.T @ solved_x
    cov = plan.cov_right - plan.cross.T @ solved_cross
    return ConditionalLaw(mean=mean, cov=0.5 * (cov + cov.T))


def _check_chained(plans: Sequence[TransportPlan]) -> None:
    if len(plans) == 0:
        raise InvalidInputError("need at least one transport plan")
    for a, b in zip(plans, plans[1:]):
        if a.right_dim != b.left_dim:
            raise ChainMismatchError(
                f"dim mismatch: right block {a.right_dim} vs left block {b.left_dim}"
            )
        for name, u, v in (
            ("times", a.times_right, b.times_left),
            ("mean", a.mean_right, b.mean_left),
            ("cov", a.cov_right, b.cov_left),
        ):
            if float(np.max(np.abs(u - v))) > MARGINAL_MATCH_TOL:
                raise ChainMismatchError(
                    f"chained marginal {name} differ by more than {MARGINAL_MATCH_TOL}"
                )


def concatenate(plans: Sequence[TransportPlan]) -> GaussianVector:
    """Glue chained plans into their joint Gaussian law.

    Block (i, j) of the result is the telescoping product
    ``S_{i,i+1} S_{i+1,i+1}^{-1} ... S_{j-1,j}``; diagonal blocks are the
    marginal covariances.  Conditionally on any middle block, the blocks
    before and after it are independent.
    """
    _check_chained(plans)
    margs = [p.left_marginal() for p in plans] + [plans[-1].right_marginal()]
    dims = [m.dim for m in margs]
    offsets = np.concatenate([[0], np.cumsum(dims)])
    total = int(offsets[-1])
    cov = np.zeros((total, total))
    mean = np.concatenate([m.mean for m in margs])
    times = np.concatenate([m.times for m in margs])

    for i, m in enumerate(margs):
        sl = slice(offsets[i], offsets[i + 1])
        cov[sl, sl] = m.cov

    # Row by row, extend the cross block one step at a time:
    # A_{i,j+1} = A_{i,j} S_{j,j}^{-1} S_{j,j+1}.
    p = len(margs)
    for i in range(p - 1):
        block = plans[i].cross
        cov[offsets[i] : offsets[i + 1], offsets[i + 1] : offsets[i + 2]] = block
        cov[offsets[i + 1] : offsets[i + 2], offsets[i] : offsets[i + 1]] = block.T
        for j in range(i + 1, p - 1):
            step = solve_spd(margs[j].cov, plans[j].cross, what="intermediate marginal")
            block = block @ step
            cov[offsets[i] : offsets[i + 1], offsets[j + 1] : offsets[j + 2]] = block
            cov[offsets[j + 1] : offsets[j + 2], offsets[i] : offsets[i + 1]] = block.T

    return GaussianVector(times=times, mean=mean, cov=cov)


def compose(plans: Sequence[TransportPlan]) -> TransportPlan:
    """Outer-marginal projection of a chain: the Gaussian Chapman-Kolmogorov product."""
    _check_chained(plans)
    if len(plans) == 1:
        return plans[0]
    first, last = plans[0], plans[-1]
    cross = first.cross
    for prev, nxt in zip(plans, plans[1:]):
        step = solve_spd(nxt.left_marginal().cov, nxt.cross, what="intermediate marginal")
        cross = cross @ step
    return TransportPlan.from_blocks(
        cov_left=first.cov_left,
        cross=cross,
        cov_right=last.cov_right,
        mean_left=first.mean_left,
        mean_right=last.mean_right,
        times=np.concatenate([first.times_left, last.times_right]),
    )


def _block_slices(dim: int, block_dims: Sequence[int] | None) -> list[slice]:
    if block_dims is None:
        block_dims = [1] * dim
    if sum(block_dims) != dim or any(d < 1 for d in block_dims):
        raise InvalidInputError(f"block dims {block_dims} do not partition dim {dim}")
    offsets = np.concatenate([[0], np.cumsum(block_dims)])
    return [slice(int(a), int(b)) for a, b in zip(offsets, offsets[1:])]


def markov_check(
    joint: GaussianVector,
    block_dims: Sequence[int] | None = None,
    tol: float = MARKOV_RESIDUAL_TOL,
) -> MarkovReport:
    """Test the Markov factorization of a joint Gaussian law.

    For every triple of blocks i < j < k the residual is
    ``max |S_ik - S_ij S_jj^{-1} S_jk|``; the law is Markov when the largest
    residual stays below ``tol * max(diagonal)``.
    """
    slices = _block_slices(joint.dim, block_dims)
    cov = joint.cov
    worst = 0.0
    for j in range(1, len(slices) - 1):
        inv_jj_cross = {}
        for k in range(j + 1, len(slices)):
            inv_jj_cross[k] = solve_spd(
                cov[slices[j], slices[j]], cov[slices[j], slices[k]],
                what="diagonal block",
            )
        for i in range(j):
            for k in range(j + 1, len(slices)):
                predicted = cov[slices[i], slices[j]] @ inv_jj_cross[k]
                residual = float(np.max(np.abs(cov[slices[i], slices[k]] - predicted)))
                if residual > worst:
                    worst = residual
    scale = float(np.max(np.diag(cov)))
    return MarkovReport(max_residual=worst, is_markov=worst < tol * max(scale, 1e-300))


def gaussian_distance(a: GaussianVector, b: GaussianVector) -> float:
    """Sup-norm distance ``max(|mean_a - mean_b|_inf, |cov_a - cov_b|_inf)``.

    Convergence of Gaussian laws is equivalent to convergence of means and
    covariances, so this is the convergence metric used everywhere.
    """
    if a.dim != b.dim:
        raise InvalidInputError(f"dimension mismatch {a.dim} vs {b.dim}")
    if float(np.max(np.abs(a.times - b.times))) > 1e-12:
        raise InvalidInputError("laws live on different time grids")
    return max(
        float(np.max(np.abs(a.mean - b.mean))),
        float(np.max(np.abs(a.cov - b.cov))),
    )
