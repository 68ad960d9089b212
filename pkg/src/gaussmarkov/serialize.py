"""JSON-compatible specifications for kernels and rate functions.

Schema (one object per kernel, dispatched on ``"type"``):

    {"type": "fbm",            "hurst": H}
    {"type": "fbm_log",        "hurst": H}
    {"type": "exponential",    "rate": <rate spec>, "domain": [lo, hi]?}
    {"type": "constant"}
    {"type": "white_noise"}
    {"type": "spectral",       "atoms": [{"weight": w, "location": y}, ...]}
    {"type": "noise_integral", "family": "sqrt_exp"}
    {"type": "matrix",         "grid": [...], "matrix": [[...]]}
    {"type": "transformed",    "base": <kernel spec>, "scale": <scale spec>,
                               "time_change": <time-change spec>, "domain": [lo, hi]}

Rate specs are a number, the string "inf", or an object:

    {"form": "constant", "value": v}
    {"form": "linear",   "slope": a, "intercept": b}
    {"form": "power",    "coeff": c, "exponent": p}      # c * t**p
    {"form": "infinite"}

Scale specs: {"form": "constant", "value": c} | {"form": "power", "coeff": c,
"exponent": p} | {"form": "exp", "coeff": c, "rate": r}.  Time-change specs:
{"form": "affine", "slope": a, "intercept": b} | {"form": "log", "coeff": a,
"intercept": b} | {"form": "exp", "coeff": c, "rate": r}.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import kernels, spectral
from .errors import InvalidInputError
from .kernels import Kernel, RateFunction


def _bound(value) -> float:
    if value is None:
        return math.inf
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity"):
            return math.inf
        if text == "-inf":
            return -math.inf
        raise InvalidInputError(f"bad domain bound {value!r}")
    return float(value)


def rate_from_spec(spec) -> RateFunction:
    """Parse a rate specification (number, "inf", or an object)."""
    if isinstance(spec, RateFunction):
        return spec
    if isinstance(spec, (int, float)):
        return RateFunction.constant(float(spec))
    if isinstance(spec, str):
        text = spec.strip().lower()
        if text in ("inf", "+inf", "infinity", "infinite"):
            return RateFunction.infinite()
        try:
            return RateFunction.constant(float(text))
        except ValueError:
            return rate_from_spec(json.loads(spec))
    if not isinstance(spec, dict):
        raise InvalidInputError(f"cannot parse rate spec {spec!r}")
    form = spec.get("form")
    if form == "constant":
        return RateFunction.constant(float(spec["value"]))
    if form == "infinite":
        return RateFunction.infinite()
    if form == "linear":
        a = float(spec.get("slope", 1.0))
        b = float(spec.get("intercept", 0.0))
        return RateFunction.from_callable(lambda t: a * t + b)
    if form == "power":
        c = float(spec.get("coeff", 1.0))
        p = float(spec.get("exponent", 1.0))
        return RateFunction.from_callable(lambda t: c * t**p)
    raise InvalidInputError(f"unknown rate form {form!r}")


def _scale_from_spec(spec) -> tuple:
    form = spec.get("form")
    if form == "constant":
        c = float(spec["value"])
        return (lambda t: c), True
    if form == "power":
        c = float(spec.get("coeff", 1.0))
        p = float(spec.get("exponent", 1.0))
        return (lambda t: c * t**p), p == 0.0
    if form == "exp":
        c = float(spec.get("coeff", 1.0))
        r = float(spec.get("rate", 1.0))
        return (lambda t: c * math.exp(r * t)), r == 0.0
    raise InvalidInputError(f"unknown scale form {form!r}")


def _time_change_from_spec(spec) -> tuple:
    form = spec.get("form")
    if form == "affine":
        a = float(spec.get("slope", 1.0))
        b = float(spec.get("intercept", 0.0))
        if a <= 0.0:
            raise InvalidInputError("affine time change must have positive slope")
        return (lambda t: a * t + b), True
    if form == "log":
        a = float(spec.get("coeff", 1.0))
        b = float(spec.get("intercept", 0.0))
        if a <= 0.0:
            raise InvalidInputError("log time change must have positive coefficient")
        return (lambda t: a * math.log(t) + b), False
    if form == "exp":
        c = float(spec.get("coeff", 1.0))
        r = float(spec.get("rate", 1.0))
        if c * r <= 0.0:
            raise InvalidInputError("exp time change must be increasing")
        return (lambda t: c * math.exp(r * t)), False
    raise InvalidInputError(f"unknown time-change form {form!r}")


def _noise_integral_family(name: str) -> Kernel:
    if name == "sqrt_exp":
        # X_t = integral of sqrt(t) exp(-t u / 2) dB_u on (0, inf);
        # closed form K(s, t) = 2 sqrt(s t) / (s + t), unit variance.
        kern = kernels.noise_integral(
            lambda t, u: math.sqrt(t) * math.exp(-t * u / 2.0),
            interval=(0.0, math.inf),
        )
        return Kernel(
            eval=kern.eval,
            domain=(0.0, math.inf),
            name="noise_integral(sqrt_exp)",
        )
    raise InvalidInputError(f"unknown noise-integral family {name!r}")


def kernel_from_spec(spec) -> Kernel:
    """Build a kernel from a spec object, JSON text, or file path."""
    if isinstance(spec, Kernel):
        return spec
    if isinstance(spec, (str, Path)):
        text = str(spec)
        path = Path(text)
        if path.suffix == ".json" and path.exists():
            spec = json.loads(path.read_text())
        else:
            try:
                spec = json.loads(text)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(
                    f"kernel spec is neither valid JSON nor an existing file: {text!r}"
                ) from exc
    if not isinstance(spec, dict):
        raise InvalidInputError(f"kernel spec must be an object, got {type(spec)}")
    kind = spec.get("type")
    if kind == "fbm":
        return kernels.fbm(float(spec["hurst"]))
    if kind == "fbm_log":
        return kernels.fbm_log(float(spec["hurst"]))
    if kind == "exponential":
        domain = spec.get("domain")
        if domain is None:
            bounds = (-math.inf, math.inf)
        else:
            bounds = (_bound(domain[0]), _bound(domain[1]))
        return kernels.exponential_rate(rate_from_spec(spec.get("rate", 1.0)), domain=bounds)
    if kind == "constant":
        return kernels.constant()
    if kind == "white_noise":
        return kernels.white_noise()
    if kind == "spectral":
        mu = spectral.SpectralMeasure.from_list(spec["atoms"])
        return spectral.kernel_from_spectral(mu)
    if kind == "noise_integral":
        return _noise_integral_family(spec.get("family", "sqrt_exp"))
    if kind == "matrix":
        return kernels.matrix_kernel(spec["grid"], spec["matrix"])
    if kind == "transformed":
        base = kernel_from_spec(spec["base"])
        scale, scale_const = _scale_from_spec(spec["scale"])
        change, change_affine = _time_change_from_spec(spec["time_change"])
        domain = spec.get("domain")
        bounds = None if domain is None else (_bound(domain[0]), _bound(domain[1]))
        return kernels.transform_kernel(
            base, scale, change, domain=bounds,
            scale_is_constant=scale_const, time_change_is_affine=change_affine,
        )
    raise InvalidInputError(f"unknown kernel type {kind!r}")


def parse_grid(text: str) -> np.ndarray:
    """Parse ``start:stop:count`` into a linspace grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidInputError(f"grid must be start:stop:count, got {text!r}")
    start, stop = float(parts[0]), float(parts[1])
    count = int(parts[2])
    if count < 1 or not start < stop:
        raise InvalidInputError(f"bad grid {text!r}")
    return np.linspace(start, stop, count)


def parse_float_list(text: str) -> list[float]:
    vals = [float(x) for x in text.split(",") if x.strip()]
    if not vals:
        raise InvalidInputError(f"empty list {text!r}")
    return vals
