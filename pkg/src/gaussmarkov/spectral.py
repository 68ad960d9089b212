"""Stationary kernels from atomic spectral measures.

A finite symmetric measure on the line generates a stationary positive
semi-definite kernel through its Fourier transform.  This module builds
such kernels, evaluates the decay rate ``t -> (1 - mu_hat(t)) / t`` of the
transform near zero, and carries out the lacunary-series construction of
a probability measure whose decay rate oscillates between 0 and +inf as
t -> 0+, so that every value in [0, inf] is a cluster point.  Such a
measure yields a stationary Gaussian process with infinitely many weak
Markov transforms: one per cluster point.

The construction alternates geometric frequency windows (where the
lacunary sum grows without bound) with gaps (where it dies off), choosing
the window edges by integer search.  The index searches are honest but
grow tower-exponentially: with weights (1/2)^k the first gap already ends
near 1.1e5 and the next active window is provably beyond any floating
budget, so deep searches end with :class:`BudgetExceededError` carrying
partial results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, InvalidInputError, InvalidMeasureError
from .kernels import Kernel

#: Default integer budget of the witness-index searches.
DEFAULT_INDEX_BUDGET = 10**6

#: Indices past this cap contribute less than ~1e-60 to any witness sum.
_TERM_CAP = 220


@dataclass(frozen=True)
class SpectralMeasure:
    """Finite symmetric atomic probability measure on the line.

    ``atoms`` is a list of ``(weight, location)`` with positive weights and
    nonnegative locations.  An atom ``(a, y)`` with ``y > 0`` stands for
    ``a * (delta_y + delta_{-y})`` (effective mass ``2a``); an atom at 0
    carries its own weight.  Effective masses must sum to 1.
    """

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        cleaned = []
        for w, y in self.atoms:
            w, y = float(w), float(y)
            if w <= 0.0:
                raise InvalidMeasureError(f"atom weight must be positive, got {w}")
            if y < 0.0:
                raise InvalidMeasureError(f"atom location must be nonnegative, got {y}")
            cleaned.append((w, y))
        object.__setattr__(self, "atoms", tuple(cleaned))
        if abs(self.total_mass - 1.0) > 1e-12:
            raise InvalidMeasureError(
                f"effective masses sum to {self.total_mass}, expected 1"
            )

    @property
    def total_mass(self) -> float:
        return sum(2.0 * w if y > 0.0 else w for w, y in self.atoms)

    def effective(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays (effective masses, locations)."""
        masses = np.array([2.0 * w if y > 0.0 else w for w, y in self.atoms])
        locs = np.array([y for _, y in self.atoms])
        return masses, locs

    def fourier(self, t) -> np.ndarray:
        """Fourier transform ``mu_hat(t) = sum of eff * cos(t * y)``."""
        masses, locs = self.effective()
        t = np.asarray(t, dtype=float)
        return np.cos(np.multiply.outer(t, locs)) @ masses

    def to_list(self) -> list[dict]:
        return [{"weight": w, "location": y} for w, y in self.atoms]

    @classmethod
    def from_list(cls, data: Sequence[dict]) -> "SpectralMeasure":
        return cls(atoms=tuple((d["weight"], d["location"]) for d in data))


def kernel_from_spectral(mu: SpectralMeasure) -> Kernel:
    """Stationary kernel ``K(s, t) = mu_hat(t - s)``; unit variance."""
    def profile(x):
        return mu.fourier(x)

    return Kernel(
        eval=lambda s, t: float(mu.fourier(t - s)),
        stationary=True,
        profile=profile,
        name="spectral",
    )


def fourier_decay_rate(mu: SpectralMeasure, t: float) -> float:
    """Decay rate ``(1 - mu_hat(t)) / t`` of the transform, for t > 0.

    Computed as ``sum of eff * (1 - cos(t y)) / t`` so the result is
    nonnegative by construction.
    """
    if t <= 0.0:
        raise InvalidInputError(f"t must be positive, got {t}")
    masses, locs = mu.effective()
    return float(np.dot(masses, 1.0 - np.cos(t * locs)) / t)


# ---------------------------------------------------------------------------
# Lacunary witness construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeierstrassConfig:
    """Parameters of the lacunary construction: weights a^k, frequencies b^k."""

    a: float = 0.5
    b: float = 3.0
    k_cut: int = 60
    i_max: int = 4

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise InvalidInputError(f"need 0 < a < 1, got {self.a}")
        if self.a * self.b <= 1.0:
            raise InvalidInputError(f"need a*b > 1, got {self.a * self.b}")
        if self.k_cut < 2:
            raise InvalidInputError("k_cut must be at least 2")
        if self.i_max < 1:
            raise InvalidInputError("i_max must be at least 1")


@dataclass(frozen=True)
class WitnessIndices:
    """Window edges n_0 < n_1 < ... of the lacunary construction.

    Frequencies ``b^k`` are active (location ``y_k = b^k``) for k in
    ``[n_0, n_1) + [n_2, n_3) + ...`` and silenced (``y_k = 0``) in the
    gaps.  ``complete`` is False when the searches hit their budget; the
    recorded windows are still valid as far as they go.
    """

    indices: tuple[int, ...]
    windows: tuple[tuple[int, int], ...]
    complete: bool
    config: WeierstrassConfig = field(default_factory=WeierstrassConfig)

    def location(self, k: int) -> float:
        for lo, hi in self.windows:
            if lo <= k < hi:
                return self.config.b**k
        return 0.0

    def y_map(self, k_max: int | None = None) -> dict[int, float]:
        k_max = self.config.k_cut if k_max is None else k_max
        return {k: self.location(k) for k in range(2, k_max + 1)}


def _effective_cap(config: WeierstrassConfig, x: float, eps: float = 1e-12) -> int:
    """Largest index whose term can still move a sum by more than eps.

    A term is bounded by ``2 x a^k``; indices past the cap change any
    witness value by less than eps in total, far below every threshold
    margin used here.
    """
    cap = math.ceil(math.log(2.0 * max(x, 1.0) / eps) / math.log(1.0 / config.a))
    return min(_TERM_CAP, cap)


def lacunary_sum(config: WeierstrassConfig, x: float, k_from: int, k_to: int) -> float:
    """``x * sum_{k=k_from}^{k_to} a^k (1 - cos(b^k / x))``.

    Terms beyond :func:`_effective_cap` are dropped; the omission is below
    1e-12 for any x within the search budget.
    """
    if x <= 0.0:
        raise InvalidInputError(f"x must be positive, got {x}")
    k_to = min(k_to, _effective_cap(config, x))
    if k_to < k_from:
        return 0.0
    total = 0.0
    a, b = config.a, config.b
    ak = a**k_from
    bk = b**k_from
    for _ in range(k_from, k_to + 1):
        total += ak * (1.0 - math.cos(bk / x))
        ak *= a
        bk *= b
    return x * total


def f_witness(config: WeierstrassConfig, n: int, x: float) -> float:
    """Growth functional ``x * sum_{k=n}^{floor(x)} a^k (1 - cos(b^k / x))``."""
    return lacunary_sum(config, x, n, int(math.floor(x)))


def g_witness(config: WeierstrassConfig, windows: Sequence[tuple[int, int]], x: float) -> float:
    """Gap functional: the same sum restricted to half-open index windows [lo, hi)."""
    return sum(lacunary_sum(config, x, lo, hi - 1) for lo, hi in windows)


def _first_gap_hit(
    config: WeierstrassConfig,
    windows: Sequence[tuple[int, int]],
    x_start: int,
    x_stop: int,
    threshold: float,
    chunk: int = 8192,
) -> int | None:
    """Smallest integer x in [x_start, x_stop] with g_windows(x) < threshold."""
    cap = _effective_cap(config, float(x_stop))
    ks = np.concatenate(
        [np.arange(lo, min(hi - 1, cap) + 1) for lo, hi in windows]
    ).astype(float)
    if ks.size == 0:
        return x_start
    weights = config.a**ks
    freqs = config.b**ks
    start = x_start
    while start <= x_stop:
        stop = min(start + chunk, x_stop + 1)
        xs = np.arange(start, stop, dtype=float)
        vals = xs * ((1.0 - np.cos(np.outer(1.0 / xs, freqs))) @ weights)
        hits = np.nonzero(vals < threshold)[0]
        if hits.size:
            return start + int(hits[0])
        start = stop
    return None


def piecewise_f(config: WeierstrassConfig, witness: WitnessIndices, x: float) -> float:
    """``x * sum_{k=2}^{floor(x)} a^k (1 - cos(y_k / x))`` with the constructed y."""
    if x <= 0.0:
        raise InvalidInputError(f"x must be positive, got {x}")
    top = min(int(math.floor(x)), _TERM_CAP)
    total = 0.0
    for lo, hi in witness.windows:
        if lo > top:
            break
        total += lacunary_sum(config, x, lo, min(hi - 1, top))
    return total


def weierstrass_indices(
    config: WeierstrassConfig,
    budget: int = DEFAULT_INDEX_BUDGET,
) -> WitnessIndices:
    """Integer search for the alternating window edges.

    ``n_0 = 2``; then alternately
    ``n_{2i+1} = inf{n > n_{2i} : f_{n_{2i}}(n - 1) > i}`` and
    ``n_{2(i+1)} = inf{n > n_{2i+1} : g_windows(n - 1) < 1/i}``
    (``1/0`` read as +inf).  Raises :class:`BudgetExceededError` with
    partial results when a search passes ``budget`` or is provably
    unreachable within it.
    """
    indices: list[int] = [2]
    closed_windows: list[tuple[int, int]] = []

    def fail(stage: str) -> BudgetExceededError:
        # An unclosed active window keeps its frequencies up to the cap.
        windows = list(closed_windows)
        if len(indices) % 2 == 1 and indices[-1] <= _TERM_CAP:
            windows.append((indices[-1], _TERM_CAP + 1))
        return BudgetExceededError(
            f"index budget {budget} exceeded while searching {stage} "
            f"(found {indices})",
            indices=indices,
            windows=windows,
            partial_measure=None,
        )

    for i in range(config.i_max + 1):
        lo = indices[-1]
        # Odd index: first n with f_lo(n - 1) > i.  The sum is capped by
        # x * 2 * sum_{k>=lo} a^k, so some searches are provably hopeless.
        best_possible = budget * 2.0 * config.a**lo / (1.0 - config.a)
        if best_possible <= i and i > 0:
            raise fail(f"n_{2 * i + 1} (provably unreachable: cap {best_possible:.3e})")
        n = lo + 1
        while True:
            if n > budget:
                raise fail(f"n_{2 * i + 1}")
            if f_witness(config, lo, n - 1) > i:
                break
            n += 1
        indices.append(n)
        closed_windows.append((lo, n))

        # Even index: first n with the gap functional below 1/i.
        threshold = math.inf if i == 0 else 1.0 / i
        n_odd = indices[-1]
        if threshold is math.inf:
            indices.append(n_odd + 1)
            continue
        hit = _first_gap_hit(config, closed_windows, n_odd, budget - 1, threshold)
        if hit is None:
            raise fail(f"n_{2 * (i + 1)}")
        indices.append(hit + 1)

    return WitnessIndices(
        indices=tuple(indices),
        windows=tuple(closed_windows),
        complete=True,
        config=config,
    )


def measure_from_windows(
    config: WeierstrassConfig, windows: Sequence[tuple[int, int]]
) -> SpectralMeasure:
    """Assemble the symmetric probability measure for an active-window set.

    Index k carries weight ``2^-k`` at ``+-b^k`` when active, at 0 when
    silenced; all indices beyond ``k_cut`` are folded into the atom at 0
    so the measure stays a probability measure.
    """
    if config.a != 0.5:
        raise InvalidInputError("the probability normalization requires a = 1/2")
    zero_mass = 0.0
    atoms: list[tuple[float, float]] = []
    for k in range(2, config.k_cut + 1):
        w = config.a**k
        active = any(lo <= k < hi for lo, hi in windows)
        if active:
            atoms.append((w, config.b**k))
        else:
            zero_mass += 2.0 * w
    zero_mass += 2.0 * config.a**config.k_cut  # tail beyond the truncation
    atoms.append((zero_mass, 0.0))
    return SpectralMeasure(atoms=tuple(atoms))


def weierstrass_gamma(config: WeierstrassConfig | None = None) -> SpectralMeasure:
    """The fully active lacunary measure (every frequency b^k present)."""
    config = config or WeierstrassConfig()
    return measure_from_windows(config, [(2, config.k_cut + 1)])


def counterexample_measure(
    config: WeierstrassConfig | None = None,
    budget: int = DEFAULT_INDEX_BUDGET,
) -> SpectralMeasure:
    """Measure whose Fourier decay rate has every point of [0, inf] as cluster point.

    Propagates :class:`BudgetExceededError` from the index search with the
    measure built from the partial windows attached as ``partial_measure``.
    """
    config = config or WeierstrassConfig()
    try:
        witness = weierstrass_indices(config, budget=budget)
    except BudgetExceededError as err:
        err.partial_measure = measure_from_windows(config, err.windows)
        raise
    return measure_from_windows(config, witness.windows)


@dataclass(frozen=True)
class WitnessResult:
    target: float
    found: bool
    t: float
    rate: float
    error: float
    message: str = ""


def cluster_witnesses(
    mu: SpectralMeasure,
    targets: Sequence[float],
    search_grid=None,
    tol_factor: float = 1e-3,
    max_iter: int = 60,
) -> dict[float, WitnessResult]:
    """Find lags realizing prescribed decay-rate values.

    For each target rate, scans the search grid for a bracketing pair and
    bisects (the decay rate is continuous in t) until the rate is within
    ``tol_factor * (1 + target)``.  Missing brackets are reported in the
    result, not raised.
    """
    if search_grid is None:
        search_grid = np.geomspace(1e-9, 20.0, 4000)
    grid = np.asarray(search_grid, dtype=float)
    if np.any(grid <= 0.0):
        raise InvalidInputError("search grid must be positive")
    grid = np.sort(grid)
    rates = np.array([fourier_decay_rate(mu, float(t)) for t in grid])
    out: dict[float, WitnessResult] = {}
    for target in targets:
        target = float(target)
        if target < 0.0 or not math.isfinite(target):
            raise InvalidInputError(f"targets must be finite and nonnegative, got {target}")
        tol = tol_factor * (1.0 + target)
        best = int(np.argmin(np.abs(rates - target)))
        if abs(rates[best] - target) <= tol:
            t, r = float(grid[best]), float(rates[best])
            out[target] = WitnessResult(target, True, t, r, abs(r - target))
            continue
        bracket = None
        for i in range(grid.size - 1):
            if (rates[i] - target) * (rates[i + 1] - target) < 0.0:
                bracket = (grid[i], grid[i + 1], rates[i], rates[i + 1])
                break
        if bracket is None:
            out[target] = WitnessResult(
                target, False, math.nan, math.nan, math.inf,
                message="no bracketing pair on the search grid",
            )
            continue
        lo, hi, r_lo, r_hi = bracket
        t_mid, r_mid = lo, r_lo
        for _ in range(max_iter):
            t_mid = 0.5 * (lo + hi)
            r_mid = fourier_decay_rate(mu, t_mid)
            if abs(r_mid - target) <= tol:
                break
            if (r_lo - target) * (r_mid - target) < 0.0:
                hi, r_hi = t_mid, r_mid
            else:
                lo, r_lo = t_mid, r_mid
        if abs(r_mid - target) <= tol:
            out[target] = WitnessResult(target, True, float(t_mid), float(r_mid),
                                        abs(r_mid - target))
        else:
            out[target] = WitnessResult(
                target, False, float(t_mid), float(r_mid), abs(r_mid - target),
                message=f"bisection stalled after {max_iter} iterations",
            )
    return out
