"""Markov transforms of Gaussian laws.

Builds the canonical Markov targets ``exp(-integral of alpha)``, the laws
"made Markov" at a finite set of times, the mimicking covariance that
matches one-dimensional marginals and decorrelation rate, and the
convergence experiments that track partition-composed laws toward their
Markov limits.
"""

from __future__ import annotations

import math
from bisect import insort
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import gaussian, kernels
from .errors import InvalidInputError, InvalidRateError, SingularMarginalError
from .gaussian import GaussianVector, TransportPlan
from .kernels import Kernel, RateFunction

#: Absolute tolerance of the rate antiderivative quadrature.
INTEGRAL_ABS_TOL = 1e-10


@dataclass(frozen=True)
class Partition:
    """Strictly increasing finite time sequence spanning an interval."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        if pts.size < 2:
            raise InvalidInputError("a partition needs at least two points")
        if not np.all(np.diff(pts) > 0.0):
            raise InvalidInputError("partition points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, s: float, t: float, n_intervals: int) -> "Partition":
        if n_intervals < 1:
            raise InvalidInputError("need at least one interval")
        return cls(points=np.linspace(s, t, n_intervals + 1))

    @classmethod
    def dyadic(cls, s: float, t: float, level: int) -> "Partition":
        """Uniform partition with mesh ``(t - s) * 2**-level``."""
        return cls.uniform(s, t, 2**level)

    @property
    def start(self) -> float:
        return float(self.points[0])

    @property
    def end(self) -> float:
        return float(self.points[-1])

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.points)))


@dataclass(frozen=True)
class AdmissibleSequence:
    """Generator of time sets ``R_n = step(n) * Z intersect [-w(n), w(n)]``.

    Admissibility (inf to -inf, sup to +inf, mesh to 0) is sanity-checked
    on the first ``check_first`` generated sets.
    """

    step_at: Callable[[int], float]
    halfwidth_at: Callable[[int], float]
    check_first: int = 4

    def __post_init__(self):
        steps = [self.step_at(n) for n in range(1, self.check_first + 1)]
        widths = [self.halfwidth_at(n) for n in range(1, self.check_first + 1)]
        if any(s <= 0.0 for s in steps) or any(w <= 0.0 for w in widths):
            raise InvalidInputError("steps and half-widths must be positive")
        if len(steps) >= 2:
            if any(b > a + 1e-15 for a, b in zip(steps, steps[1:])) or steps[-1] >= steps[0]:
                raise InvalidInputError("steps must decrease toward zero")
            if any(b < a - 1e-15 for a, b in zip(widths, widths[1:])):
                raise InvalidInputError("half-widths must not shrink")

    @classmethod
    def geometric(cls, ratio: float = 0.5, first_step: float = 1.0) -> "AdmissibleSequence":
        if not 0.0 < ratio < 1.0:
            raise InvalidInputError("ratio must be in (0, 1)")
        return cls(
            step_at=lambda n: first_step * ratio**n,
            halfwidth_at=lambda n: float(n),
        )

    @classmethod
    def from_steps(cls, steps: Sequence[float], halfwidths: Sequence[float] | None = None):
        steps = [float(s) for s in steps]
        if halfwidths is None:
            halfwidths = [float(n) for n in range(1, len(steps) + 1)]
        halfwidths = [float(w) for w in halfwidths]
        if len(halfwidths) != len(steps):
            raise InvalidInputError("need one half-width per step")

        def step_at(n: int) -> float:
            return steps[min(n, len(steps)) - 1]

        def halfwidth_at(n: int) -> float:
            return halfwidths[min(n, len(halfwidths)) - 1]

        return cls(step_at=step_at, halfwidth_at=halfwidth_at,
                   check_first=min(4, len(steps)))

    def time_set(self, n: int) -> np.ndarray:
        step = self.step_at(n)
        width = self.halfwidth_at(n)
        k_max = int(math.floor(width / step))
        return step * np.arange(-k_max, k_max + 1, dtype=float)

    def sets(self, n_max: int) -> Iterable[np.ndarray]:
        for n in range(1, n_max + 1):
            yield self.time_set(n)


# ---------------------------------------------------------------------------
# The Markov kernel exp(-integral of alpha)
# ---------------------------------------------------------------------------


class _Antiderivative:
    """Memoized adaptive-Simpson antiderivative of a nonnegative rate.

    All kernel evaluations share the same cached samples, so identities
    such as ``A(u) - A(s) = (A(t) - A(s)) + (A(u) - A(t))`` hold exactly
    in floating point and the resulting kernels are Markov to machine
    precision.
    """

    def __init__(self, rate: RateFunction, abs_tol: float = INTEGRAL_ABS_TOL):
        # anchored lazily at the first queried point, so integration never
        # reaches outside the hull of the queries (open domain boundaries
        # may carry non-integrable rates)
        self._rate = rate
        self._abs_tol = abs_tol
        self._knots: list[float] = []
        self._values: dict[float, float] = {}

    def _f(self, u: float) -> float:
        val = self._rate(u)
        if val < -1e-12:
            raise InvalidRateError(f"rate is negative at t={u}: {val}")
        return val

    def _simpson(self, a: float, fa: float, m: float, fm: float, b: float, fb: float,
                 whole: float, tol: float, depth: int) -> float:
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = self._f(lm), self._f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        half = 0.5 * tol
        return self._simpson(a, fa, lm, flm, m, fm, left, half, depth - 1) + self._simpson(
            m, fm, rm, frm, b, fb, right, half, depth - 1
        )

    def _integrate(self, a: float, b: float) -> float:
        if a == b:
            return 0.0
        sign = 1.0
        if a > b:
            a, b = b, a
            sign = -1.0
        fa, fb = self._f(a), self._f(b)
        m = 0.5 * (a + b)
        fm = self._f(m)
        whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
        return sign * self._simpson(a, fa, m, fm, b, fb, whole, self._abs_tol, 48)

    def __call__(self, t: float) -> float:
        t = float(t)
        if t in self._values:
            return self._values[t]
        if not self._knots:
            self._knots.append(t)
            self._values[t] = 0.0
            return 0.0
        pos = min(
            range(len(self._knots)),
            key=lambda i: abs(self._knots[i] - t),
        )
        base = self._knots[pos]
        val = self._values[base] + self._integrate(base, t)
        insort(self._knots, t)
        self._values[t] = val
        return val


def rate_kernel(
    alpha: RateFunction,
    domain: tuple[float, float] = (-math.inf, math.inf),
) -> Kernel:
    """Markov kernel ``K(s, t) = exp(-integral of alpha from s to t)``.

    ``alpha`` must be nonnegative and integrable on compacts; the infinite
    marker yields the white-noise kernel.  Unit variance on the diagonal.
    """
    if alpha.is_infinite:
        wn = kernels.white_noise()
        return Kernel(
            eval=wn.eval,
            stationary=True,
            profile=wn.profile,
            domain=domain,
            name="rate_kernel(inf)",
        )
    if alpha.const is not None:
        c = alpha.const

        def profile(x):
            return np.exp(-c * np.abs(np.asarray(x, dtype=float)))

        return Kernel(
            eval=lambda s, t: math.exp(-c * abs(t - s)),
            stationary=True,
            profile=profile,
            domain=domain,
            name=f"rate_kernel(const={c})",
        )

    antider = _Antiderivative(alpha)

    def k(s: float, t: float) -> float:
        return math.exp(-abs(antider(t) - antider(s)))

    return Kernel(eval=k, domain=domain, name="rate_kernel")


# ---------------------------------------------------------------------------
# Partition-composed laws and laws made Markov at a set of times
# ---------------------------------------------------------------------------


def pair_law(kernel: Kernel, s: float, t: float) -> TransportPlan:
    """Two-time joint law of the kernel as a 1+1 transport plan."""
    if not s < t:
        raise InvalidInputError("need s < t")
    kernel.require_in_domain([s, t])
    vs, vt = kernel.variance(s), kernel.variance(t)
    if vs <= 0.0 or vt <= 0.0:
        raise SingularMarginalError(f"kernel singular at {s} or {t}")
    return TransportPlan.from_blocks(
        cov_left=[[vs]],
        cross=[[kernel.eval(s, t)]],
        cov_right=[[vt]],
        mean_left=[kernel.mean(s)],
        mean_right=[kernel.mean(t)],
        times=np.array([s, t]),
    )


def partition_law(kernel: Kernel, partition: Partition) -> TransportPlan:
    """Two-time law at the partition endpoints, transitioning through its points.

    Composes the kernel's consecutive two-time plans over the partition;
    the resulting correlation is the product of the one-step correlations
    while the endpoint marginals stay those of the kernel.
    """
    pts = partition.points
    plans = [pair_law(kernel, float(a), float(b)) for a, b in zip(pts, pts[1:])]
    return gaussian.compose(plans)


def _chain_value(kernel: Kernel, u: float, v: float, interior: np.ndarray) -> float:
    """Covariance between u < v after making the law Markov at the interior points.

    Telescoping product ``K(u, r_1) K(r_1, r_2) ... K(r_q, v)`` divided by
    the variances at the interior points, straight from the concatenation
    formula with scalar shared marginals.
    """
    if interior.size == 0:
        return kernel.eval(u, v)
    pts = np.concatenate([[u], interior, [v]])
    if kernel.stationary and kernel.profile is not None:
        try:
            steps = np.asarray(kernel.profile(np.diff(pts)), dtype=float)
            var0 = float(kernel.profile(0.0))
            if var0 <= 0.0:
                raise SingularMarginalError("kernel singular (zero variance)")
            return var0 * float(np.prod(steps / var0))
        except (TypeError, ValueError):
            pass
    prod = 1.0
    for a, b in zip(pts[:-1], pts[1:]):
        prod *= kernel.eval(float(a), float(b))
    for r in interior:
        var = kernel.variance(float(r))
        if var <= 0.0:
            raise SingularMarginalError(f"kernel singular at split time {r}")
        prod /= var
    return prod


def made_markov_law(kernel: Kernel, split_times, query_times) -> GaussianVector:
    """Finite-dimensional law of the kernel's process made Markov at ``split_times``.

    Equals the law obtained by concatenating the kernel's joint laws over
    the blocks of ``query_times + split_times`` cut at each split time and
    projecting back onto ``query_times``: between two query times the
    covariance telescopes through every split time lying strictly between
    them.  With two query times this is exactly
    ``partition_law`` over ``{s, t} + (splits inside (s, t))``.
    """
    splits = np.sort(np.unique(np.asarray(split_times, dtype=float).ravel()))
    queries = np.asarray(query_times, dtype=float).ravel()
    if queries.size < 1 or (queries.size > 1 and not np.all(np.diff(queries) > 0.0)):
        raise InvalidInputError("query times must be strictly increasing and nonempty")
    kernel.require_in_domain(queries)
    if splits.size:
        kernel.require_in_domain(splits)
    n = queries.size
    cov = np.empty((n, n))
    mean = np.array([kernel.mean(float(t)) for t in queries])
    for i in range(n):
        var = kernel.variance(float(queries[i]))
        if var <= 0.0:
            raise SingularMarginalError(f"kernel singular at query time {queries[i]}")
        cov[i, i] = var
        for j in range(i + 1, n):
            u, v = float(queries[i]), float(queries[j])
            interior = splits[(splits > u) & (splits < v)]
            cov[i, j] = cov[j, i] = _chain_value(kernel, u, v, interior)
    return GaussianVector(times=queries, mean=mean, cov=cov)


def made_markov_law_by_blocks(kernel: Kernel, split_times, query_times) -> GaussianVector:
    """Reference path for :func:`made_markov_law` via explicit block gluing.

    Cuts ``queries + splits`` into blocks at each split time (consecutive
    blocks overlap in exactly that split time), keeps the kernel's own
    joint law inside every block, glues block after block with
    :func:`gaussian.concatenate` so that past and future are independent
    given each split time, and finally projects onto the query times.
    Quadratic in the total number of points; used to cross-validate
    :func:`made_markov_law`.
    """
    splits = np.sort(np.unique(np.asarray(split_times, dtype=float).ravel()))
    queries = np.asarray(query_times, dtype=float).ravel()
    if queries.size < 1 or (queries.size > 1 and not np.all(np.diff(queries) > 0.0)):
        raise InvalidInputError("query times must be strictly increasing and nonempty")
    # Splits outside the query range do not change the projected law.
    relevant = splits[(splits > queries[0]) & (splits < queries[-1])]
    if relevant.size == 0:
        return _joint_law(kernel, queries)

    all_pts = np.sort(np.unique(np.concatenate([queries, relevant])))
    cut_idx = [int(np.searchsorted(all_pts, r)) for r in relevant]
    blocks = []
    start = 0
    for ci in cut_idx:
        blocks.append(all_pts[start : ci + 1])
        start = ci
    blocks.append(all_pts[start:])

    glued = _joint_law(kernel, blocks[0])
    for block_pts in blocks[1:]:
        right_plan = TransportPlan(
            joint=_joint_law(kernel, block_pts),
            left_dim=1,
            right_dim=block_pts.size - 1,
        )
        if glued.dim == 1:
            glued = right_plan.joint
            continue
        left_plan = TransportPlan(joint=glued, left_dim=glued.dim - 1, right_dim=1)
        glued = gaussian.concatenate([left_plan, right_plan])

    keep = np.searchsorted(glued.times, queries)
    return glued.project(keep)


def _joint_law(kernel: Kernel, grid) -> GaussianVector:
    pts = np.asarray(grid, dtype=float).ravel()
    return GaussianVector(
        times=pts,
        mean=np.array([kernel.mean(float(t)) for t in pts]),
        cov=kernels.gram(kernel, pts),
    )


def joint_law(kernel: Kernel, grid) -> GaussianVector:
    """Kernel's own finite-dimensional law on a grid."""
    return _joint_law(kernel, grid)


def mimic_kernel(kernel: Kernel, alpha: RateFunction) -> Kernel:
    """Covariance of the mimicking process.

    ``K'(s, t) = sqrt(K(s, s)) sqrt(K(t, t)) exp(-integral of alpha)``,
    with the mean function unchanged.  The diagonal is preserved exactly
    and the result is Markov on every grid.  The infinite marker yields
    the diagonal kernel (independent coordinates with matching variances).
    """
    std_cache: dict[float, float] = {}

    def std(t: float) -> float:
        if t not in std_cache:
            std_cache[t] = kernel.std(t)
        return std_cache[t]

    if alpha.is_infinite:
        def k_diag(s: float, t: float) -> float:
            if s == t:
                return kernel.eval(t, t)
            return 0.0

        return Kernel(
            eval=k_diag, mean=kernel.mean, domain=kernel.domain,
            name=f"mimic({kernel.name}, inf)",
        )

    base = rate_kernel(alpha, domain=kernel.domain)

    def k(s: float, t: float) -> float:
        if s == t:
            return kernel.eval(t, t)
        return std(s) * std(t) * base.eval(s, t)

    return Kernel(
        eval=k, mean=kernel.mean, domain=kernel.domain,
        name=f"mimic({kernel.name})",
    )


# ---------------------------------------------------------------------------
# Convergence experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    index: float  # mesh (local experiment) or n (global experiment)
    distance: float
    correlation: float
    target_correlation: float


def target_pair_law(target: Kernel, s: float, t: float) -> GaussianVector:
    """Two-time law of the target kernel, tolerating zero cross terms."""
    return _joint_law(target, [s, t])


def local_convergence_experiment(
    kernel: Kernel,
    target: Kernel,
    s: float,
    t: float,
    partitions: Sequence[Partition],
) -> list[ConvergenceRow]:
    """Distances of partition-composed two-time laws to a target law.

    One row per partition, sorted by decreasing mesh, so the last row is
    the finest.  Partitions must span ``[s, t]``.
    """
    if not partitions:
        raise InvalidInputError("need at least one partition")
    for p in partitions:
        if abs(p.start - s) > 1e-12 or abs(p.end - t) > 1e-12:
            raise InvalidInputError(f"partition [{p.start}, {p.end}] does not span [{s}, {t}]")
    target_law = target_pair_law(target, s, t)
    tgt_corr = target.eval(s, t) / math.sqrt(target.variance(s) * target.variance(t))
    rows = []
    for p in sorted(partitions, key=lambda q: -q.mesh):
        plan = partition_law(kernel, p)
        corr = float(plan.cross[0, 0]) / math.sqrt(
            float(plan.cov_left[0, 0]) * float(plan.cov_right[0, 0])
        )
        rows.append(
            ConvergenceRow(
                index=p.mesh,
                distance=gaussian.gaussian_distance(plan.joint, target_law),
                correlation=corr,
                target_correlation=tgt_corr,
            )
        )
    return rows


def global_convergence_experiment(
    kernel: Kernel,
    target: Kernel,
    adm: AdmissibleSequence,
    query_times,
    n_max: int,
) -> list[ConvergenceRow]:
    """Distances of laws made Markov at ``R_n`` to the target law on a query set."""
    queries = np.asarray(query_times, dtype=float).ravel()
    if queries.size < 2:
        raise InvalidInputError("need at least two query times")
    target_law = _joint_law(target, queries)
    s, t = float(queries[0]), float(queries[-1])
    tgt_corr = target.eval(s, t) / math.sqrt(target.variance(s) * target.variance(t))
    rows = []
    for n, time_set in enumerate(adm.sets(n_max), start=1):
        law = made_markov_law(kernel, time_set, queries)
        corr = float(law.cov[0, -1]) / math.sqrt(float(law.cov[0, 0]) * float(law.cov[-1, -1]))
        rows.append(
            ConvergenceRow(
                index=float(n),
                distance=gaussian.gaussian_distance(law, target_law),
                correlation=corr,
                target_correlation=tgt_corr,
            )
        )
    return rows


@dataclass(frozen=True)
class TightnessReport:
    m_empirical: float
    per_partition: tuple[float, ...]
    passed: bool


def tightness_bound_check(
    kernel: Kernel,
    alpha: RateFunction,
    a: float,
    b: float,
    partitions: Sequence[Partition],
    pairs_per_stride: int = 32,
) -> TightnessReport:
    """Empirical Lipschitz bound ``(1 - corr_n(s, t)) <= M |s - t|``.

    For each partition the law made Markov at its points is probed on
    consecutive and strided point pairs; the statistic is the largest
    ratio ``(1 - corr_n(s, t)) / |s - t|``.  Passes when the per-partition
    maxima show no growth trend across partitions (bounded M exists).
    """
    if not partitions:
        raise InvalidInputError("need at least one partition")
    maxima = []
    for part in sorted(partitions, key=lambda q: -q.mesh):
        pts = part.points
        if pts[0] < a - 1e-12 or pts[-1] > b + 1e-12:
            raise InvalidInputError(f"partition leaves [{a}, {b}]")
        corr_steps = kernels.pair_correlations(kernel, pts[:-1], pts[1:])
        if np.any(corr_steps <= 0.0):
            raise SingularMarginalError("nonpositive one-step correlation")
        log_prefix = np.concatenate([[0.0], np.cumsum(np.log(corr_steps))])
        worst = 0.0
        n = pts.size
        stride = 1
        while stride < n:
            starts = range(0, n - stride, max(1, (n - stride) // pairs_per_stride))
            for i in starts:
                j = i + stride
                corr_n = math.exp(log_prefix[j] - log_prefix[i])
                ratio = (1.0 - corr_n) / (pts[j] - pts[i])
                if ratio > worst:
                    worst = ratio
            stride *= 2
        maxima.append(worst)
    growing = False
    if len(maxima) >= 3:
        tail = maxima[-3:]
        growing = tail[0] < tail[1] < tail[2] and maxima[-1] > 1.25 * maxima[0] + 1e-9
    return TightnessReport(
        m_empirical=float(max(maxima)),
        per_partition=tuple(maxima),
        passed=not growing,
    )
