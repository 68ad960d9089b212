"""Covariance kernels and decorrelation-rate diagnostics.

A :class:`Kernel` bundles a symmetric positive semi-definite covariance
function ``K(s, t)`` with a mean function, an optional stationary profile
and a validity domain.  Kernels are immutable values; every operation in
this module is pure and safe to call concurrently.

The central diagnostic is the instantaneous decorrelation rate

    alpha(t) = lim_{h -> 0+} (1 - corr(t, t+h)) / h,

estimated here along explicit h-sequences since the limit may fail to
exist (see :mod:`gaussmarkov.spectral` for a kernel whose rate oscillates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import (
    InvalidInputError,
    SingularMarginalError,
    UnsupportedDiagnosticError,
)

#: PSD slack relative to the largest diagonal entry of a Gram matrix.
TOL_PSD = 1e-10

#: Smallest admissible h when estimating the decorrelation rate.
DEFAULT_H_MIN = 1e-8

#: Relative agreement needed between trailing rate values to call it converged.
DEFAULT_REL_TOL = 1e-3

#: Rate value past which an increasing sequence is declared divergent.
DEFAULT_DIVERGENCE_THRESHOLD = 1e6


def _zero_mean(t: float) -> float:
    return 0.0


@dataclass(frozen=True)
class Kernel:
    """A covariance function with metadata.

    Parameters
    ----------
    eval : callable
        ``(s, t) -> K(s, t)``; must be symmetric in its arguments.
    mean : callable, optional
        Mean function of the associated Gaussian process (default zero).
    stationary : bool
        If set, ``profile`` must be given and ``eval(s, t) == profile(t - s)``
        by construction.
    profile : callable, optional
        Stationary profile ``h -> K(t, t + h)``; should accept numpy arrays.
    domain : (float, float)
        Interval of valid times; bounds may be infinite.
    """

    eval: Callable[[float, float], float]
    mean: Callable[[float], float] = _zero_mean
    stationary: bool = False
    profile: Callable[[float], float] | None = None
    domain: tuple[float, float] = (-math.inf, math.inf)
    name: str = "kernel"

    def __post_init__(self):
        if self.stationary and self.profile is None:
            raise InvalidInputError("stationary kernel requires a profile function")
        lo, hi = self.domain
        if not lo < hi:
            raise InvalidInputError(f"empty kernel domain {self.domain}")

    def variance(self, t: float) -> float:
        return self.eval(t, t)

    def std(self, t: float) -> float:
        v = self.variance(t)
        if v <= 0.0:
            raise SingularMarginalError(f"kernel '{self.name}' is singular at t={t}")
        return math.sqrt(v)

    def contains(self, t: float) -> bool:
        lo, hi = self.domain
        return lo <= t <= hi

    def require_in_domain(self, times) -> None:
        for t in np.atleast_1d(np.asarray(times, dtype=float)):
            if not self.contains(float(t)):
                raise InvalidInputError(
                    f"time {t} outside domain {self.domain} of kernel '{self.name}'"
                )


@dataclass(frozen=True)
class RateFunction:
    """Nonnegative decorrelation rate, possibly the infinite marker.

    The infinite rate is represented explicitly (``is_infinite=True``)
    instead of a float sentinel, so it can never leak into matrices.
    ``const`` is an optional hint that the rate is a known constant, used
    for exact stationary shortcuts.
    """

    func: Callable[[float], float] | None = None
    is_infinite: bool = False
    const: float | None = None

    @classmethod
    def constant(cls, value: float) -> "RateFunction":
        if value < 0.0:
            raise InvalidInputError(f"rate must be nonnegative, got {value}")
        return cls(func=lambda t: value, const=float(value))

    @classmethod
    def infinite(cls) -> "RateFunction":
        return cls(func=None, is_infinite=True)

    @classmethod
    def from_callable(cls, f: Callable[[float], float]) -> "RateFunction":
        return cls(func=f)

    def __call__(self, t: float) -> float:
        if self.is_infinite:
            raise UnsupportedDiagnosticError("rate is the infinite marker")
        return float(self.func(t))


@dataclass(frozen=True)
class PsdReport:
    min_eigenvalue: float
    passed: bool


@dataclass(frozen=True)
class AlphaEstimate:
    """Result of a decorrelation-rate limit estimate along an h-sequence."""

    value: float
    is_infinite: bool
    converged: bool
    samples: tuple[float, ...] = field(default=(), repr=False)

    def as_rate(self) -> RateFunction:
        if self.is_infinite:
            return RateFunction.infinite()
        return RateFunction.constant(self.value)


def _as_strictly_increasing(grid) -> np.ndarray:
    arr = np.asarray(grid, dtype=float).ravel()
    if arr.size < 1:
        raise InvalidInputError("grid must contain at least one time")
    if arr.size > 1 and not np.all(np.diff(arr) > 0.0):
        raise InvalidInputError("grid must be strictly increasing")
    return arr


def gram(kernel: Kernel, grid) -> np.ndarray:
    """Gram matrix ``[K(t_i, t_j)]`` over an ordered grid."""
    pts = _as_strictly_increasing(grid)
    kernel.require_in_domain(pts)
    if kernel.stationary and kernel.profile is not None:
        try:
            return np.asarray(kernel.profile(pts[None, :] - pts[:, None]), dtype=float)
        except (TypeError, ValueError):
            pass  # profile is scalar-only; fall through
    n = pts.size
    out = np.empty((n, n))
    for i in range(n):
        out[i, i] = kernel.eval(pts[i], pts[i])
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = kernel.eval(pts[i], pts[j])
    return out


def pair_correlations(kernel: Kernel, left, right) -> np.ndarray:
    """Correlations ``c_K(left_i, right_i)`` for paired time arrays."""
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    if kernel.stationary and kernel.profile is not None:
        try:
            vals = np.asarray(kernel.profile(right - left), dtype=float)
            var0 = float(kernel.profile(0.0))
            return vals / var0
        except (TypeError, ValueError):
            pass
    return np.array(
        [correlation(kernel, float(s), float(t)) for s, t in zip(left, right)]
    )


def psd_check(kernel: Kernel, grid, tol: float = TOL_PSD) -> PsdReport:
    """Check positive semi-definiteness of the Gram matrix on a grid.

    Passes when the smallest eigenvalue is no smaller than
    ``-tol * max(diagonal)``.
    """
    mat = gram(kernel, grid)
    eigs = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    min_eig = float(eigs[0])
    scale = float(np.max(np.diag(mat)))
    return PsdReport(min_eigenvalue=min_eig, passed=min_eig >= -tol * max(scale, 0.0))


def correlation(kernel: Kernel, s: float, t: float) -> float:
    """Correlation ``K(s, t) / sqrt(K(s, s) K(t, t))``."""
    vs = kernel.variance(s)
    vt = kernel.variance(t)
    if vs <= 0.0 or vt <= 0.0:
        raise SingularMarginalError(
            f"kernel '{kernel.name}' has nonpositive variance at s={s} or t={t}"
        )
    return kernel.eval(s, t) / math.sqrt(vs * vt)


def decay_rate(kernel: Kernel, t: float, h: float) -> float:
    """Finite-h decay rate of the correlation, ``(1 - c(t, t+h)) / h``."""
    if h <= 0.0:
        raise InvalidInputError(f"h must be positive, got {h}")
    kernel.require_in_domain([t, t + h])
    return (1.0 - correlation(kernel, t, t + h)) / h


def estimate_alpha(
    kernel: Kernel,
    t: float,
    h_sequence: Sequence[float],
    rel_tol: float = DEFAULT_REL_TOL,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
    h_min: float = DEFAULT_H_MIN,
) -> AlphaEstimate:
    """Estimate the instantaneous decorrelation rate at time ``t``.

    Evaluates :func:`decay_rate` along a strictly decreasing h-sequence.
    Converged when the last three values agree within
    ``rel_tol * (1 + |last|)``.  Returns the infinite marker when the
    values are increasing and the last one exceeds ``divergence_threshold``.
    """
    hs = np.asarray(list(h_sequence), dtype=float)
    if hs.size < 3:
        raise InvalidInputError("h_sequence needs at least three values")
    if not np.all(np.diff(hs) < 0.0):
        raise InvalidInputError("h_sequence must be strictly decreasing")
    if hs[-1] < h_min:
        raise InvalidInputError(f"h_sequence goes below the floor h_min={h_min}")
    vals = [decay_rate(kernel, t, float(h)) for h in hs]
    tail = vals[-3:]
    diverging = tail[0] < tail[1] < tail[2] and tail[2] > divergence_threshold
    if diverging:
        return AlphaEstimate(
            value=math.inf, is_infinite=True, converged=True, samples=tuple(vals)
        )
    slack = rel_tol * (1.0 + abs(tail[2]))
    converged = max(tail) - min(tail) <= slack
    return AlphaEstimate(
        value=vals[-1], is_infinite=False, converged=converged, samples=tuple(vals)
    )


def uniform_convergence_diagnostic(
    kernel: Kernel,
    alpha: RateFunction,
    s: float,
    t: float,
    h_star: float,
    grid_density: int,
) -> float:
    """Largest deviation ``|decay_rate(v, h) - alpha(v)|`` on a (v, h) lattice.

    The lattice covers ``v in [s, t - h]``, ``h in (0, h_star]`` with
    ``grid_density`` points per axis.  Only defined for finite rates.
    """
    if alpha.is_infinite:
        raise UnsupportedDiagnosticError(
            "uniform convergence diagnostic requires a finite rate"
        )
    if not s < t:
        raise InvalidInputError("need s < t")
    if grid_density < 2:
        raise InvalidInputError("grid_density must be at least 2")
    worst = 0.0
    for j in range(1, grid_density + 1):
        h = h_star * j / grid_density
        if h >= t - s:
            h = (t - s) * (1.0 - 1e-12)
        for v in np.linspace(s, t - h, grid_density):
            dev = abs(decay_rate(kernel, float(v), h) - alpha(float(v)))
            if dev > worst:
                worst = dev
    return worst


def transform_kernel(
    kernel: Kernel,
    scale: Callable[[float], float],
    time_change: Callable[[float], float],
    domain: tuple[float, float] | None = None,
    scale_is_constant: bool = False,
    time_change_is_affine: bool = False,
) -> Kernel:
    """Rescaled, time-changed kernel ``scale(s) scale(t) K(phi(s), phi(t))``.

    ``time_change`` must map the new domain into ``kernel.domain`` and be
    strictly increasing; ``scale`` must never vanish.  The stationary flag is
    cleared unless the caller declares the scale constant and the time change
    affine (both checked at two probe points).
    """
    new_domain = kernel.domain if domain is None else tuple(domain)
    lo, hi = new_domain
    for endpoint in (lo, hi):
        if not math.isfinite(endpoint):
            continue
        try:
            image = time_change(endpoint)
        except (ValueError, OverflowError):
            continue  # boundary of an open interval; interior evaluations decide
        if not kernel.contains(image):
            raise InvalidInputError(
                f"time change maps {endpoint} to {image}, outside {kernel.domain}"
            )

    def new_eval(s: float, t: float) -> float:
        u, v = scale(s), scale(t)
        if u == 0.0 or v == 0.0:
            raise InvalidInputError(f"scale vanishes at {s if u == 0.0 else t}")
        return u * v * kernel.eval(time_change(s), time_change(t))

    def new_mean(t: float) -> float:
        return scale(t) * kernel.mean(time_change(t))

    stationary = False
    new_profile = None
    if kernel.stationary and scale_is_constant and time_change_is_affine:
        p0 = lo if math.isfinite(lo) else 0.0
        p1 = p0 + 1.0 if kernel.contains(time_change(p0 + 1.0)) else p0 - 1.0
        c = scale(p0)
        slope = (time_change(p1) - time_change(p0)) / (p1 - p0)
        if abs(scale(p1) - c) > 1e-12:
            raise InvalidInputError("scale declared constant but varies")
        base_profile = kernel.profile
        new_profile = lambda h: c * c * np.asarray(base_profile(slope * h))
        stationary = True

    return Kernel(
        eval=new_eval,
        mean=new_mean,
        stationary=stationary,
        profile=new_profile,
        domain=new_domain,
        name=f"transformed({kernel.name})",
    )


# ---------------------------------------------------------------------------
# Built-in kernel families
# ---------------------------------------------------------------------------


def fbm(hurst: float) -> Kernel:
    """Fractional Brownian motion kernel on (0, inf).

    ``K(s, t) = (|t|^{2H} + |s|^{2H} - |t-s|^{2H}) / 2`` with Hurst
    parameter ``H`` in (0, 1).
    """
    if not 0.0 < hurst < 1.0:
        raise InvalidInputError(f"Hurst parameter must lie in (0, 1), got {hurst}")
    two_h = 2.0 * hurst

    def k(s: float, t: float) -> float:
        return 0.5 * (abs(t) ** two_h + abs(s) ** two_h - abs(t - s) ** two_h)

    return Kernel(eval=k, domain=(0.0, math.inf), name=f"fbm(H={hurst})")


def fbm_log(hurst: float) -> Kernel:
    """Stationary profile of fractional Brownian motion in log time.

    ``K(s, t) = Ktilde(t - s)`` with
    ``Ktilde(x) = (e^{2Hx} + e^{-2Hx} - |e^x - e^{-x}|^{2H}) / 2``;
    rescaling by ``t^H`` and the time change ``ln(s)/2`` recovers the
    fBm kernel (see :func:`transform_kernel`).  Unit variance.
    """
    if not 0.0 < hurst < 1.0:
        raise InvalidInputError(f"Hurst parameter must lie in (0, 1), got {hurst}")
    two_h = 2.0 * hurst

    def profile(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (
            np.exp(two_h * x)
            + np.exp(-two_h * x)
            - np.abs(np.exp(x) - np.exp(-x)) ** two_h
        )

    def k(s: float, t: float) -> float:
        return float(profile(t - s))

    return Kernel(
        eval=k,
        stationary=True,
        profile=profile,
        name=f"fbm_log(H={hurst})",
    )


def constant() -> Kernel:
    """Completely correlated process: ``K(s, t) = 1`` everywhere."""
    def profile(x):
        return np.ones_like(np.asarray(x, dtype=float))

    return Kernel(
        eval=lambda s, t: 1.0, stationary=True, profile=profile, name="constant"
    )


def white_noise() -> Kernel:
    """Independent unit Gaussians: identity Gram matrix on any grid."""
    def profile(x):
        x = np.asarray(x, dtype=float)
        return np.where(x == 0.0, 1.0, 0.0)

    return Kernel(
        eval=lambda s, t: 1.0 if s == t else 0.0,
        stationary=True,
        profile=profile,
        name="white_noise",
    )


def exponential_rate(alpha, domain: tuple[float, float] = (-math.inf, math.inf)) -> Kernel:
    """Markov kernel ``exp(-integral of alpha)``; accepts a constant or a rate."""
    from .transform import rate_kernel  # deferred: transform builds on this module

    if not isinstance(alpha, RateFunction):
        alpha = RateFunction.constant(float(alpha))
    return rate_kernel(alpha, domain=domain)


def noise_integral(
    k: Callable[[float, float], float],
    interval: tuple[float, float],
    abs_tol: float = 1e-10,
    tail_tol: float = 1e-14,
) -> Kernel:
    """Kernel of a white-noise integral process.

    ``K(s, t) = integral over J of k(s, u) k(t, u) du`` computed by adaptive
    quadrature with absolute tolerance ``abs_tol``.  Infinite endpoints are
    truncated where the integrand falls below ``tail_tol``.  Evaluations are
    memoized; the kernel is exactly symmetric by construction.
    """
    lo, hi = interval
    if not lo < hi:
        raise InvalidInputError(f"empty integration interval {interval}")
    cache: dict[tuple[float, float], float] = {}

    def truncated_upper(s: float, t: float) -> float:
        u = max(1.0, lo + 1.0) if not math.isfinite(hi) else hi
        if math.isfinite(hi):
            return hi
        for _ in range(200):
            if abs(k(s, u) * k(t, u)) < tail_tol and abs(k(s, 2 * u) * k(t, 2 * u)) < tail_tol:
                return 2 * u
            u *= 2.0
        raise InvalidInputError(
            f"noise-integral integrand does not decay on {interval} at ({s}, {t})"
        )

    def truncated_lower(s: float, t: float) -> float:
        if math.isfinite(lo):
            return lo
        u = min(-1.0, hi - 1.0)
        for _ in range(200):
            if abs(k(s, u) * k(t, u)) < tail_tol and abs(k(s, 2 * u) * k(t, 2 * u)) < tail_tol:
                return 2 * u
            u *= 2.0
        raise InvalidInputError(
            f"noise-integral integrand does not decay on {interval} at ({s}, {t})"
        )

    def kv(s: float, t: float) -> float:
        key = (s, t) if s <= t else (t, s)
        if key not in cache:
            a, b = key
            upper = truncated_upper(a, b)
            lower = truncated_lower(a, b)
            val, _ = integrate.quad(
                lambda u: k(a, u) * k(b, u), lower, upper, epsabs=abs_tol, limit=200
            )
            cache[key] = val
        return cache[key]

    return Kernel(eval=kv, domain=(-math.inf, math.inf), name="noise_integral")


def matrix_kernel(grid, matrix, name: str = "matrix") -> Kernel:
    """Kernel defined by table lookup on a fixed grid (diagnostic helper)."""
    pts = _as_strictly_increasing(grid)
    mat = np.asarray(matrix, dtype=float)
    if mat.shape != (pts.size, pts.size):
        raise InvalidInputError("matrix shape does not match grid length")
    index = {float(p): i for i, p in enumerate(pts)}

    def k(s: float, t: float) -> float:
        try:
            return float(mat[index[float(s)], index[float(t)]])
        except KeyError as exc:
            raise InvalidInputError(f"time {exc} not on the kernel grid") from exc

    return Kernel(eval=k, domain=(float(pts[0]), float(pts[-1])), name=name)
