"""Central finite-difference check of tape gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import ShapeError
from .tensor import GradTape, Tensor, no_tape


def tape_gradients(f: Callable[[], Tensor], params: Sequence[Tensor]) -> list[np.ndarray]:
    for p in params:
        p.grad = None
    with GradTape() as tape:
        out = f()
    if out.values.size != 1:
        raise ShapeError(f"grad_check needs a scalar-valued function, got shape {out.shape}")
    if out.requires_grad:
        tape.backward(out)
    return [p.grad.copy() if p.grad is not None else np.zeros_like(p.values) for p in params]


def numeric_gradients(f: Callable[[], Tensor], params: Sequence[Tensor], epsilon: float) -> list[np.ndarray]:
    grads = []
    with no_tape():
        for p in params:
            g = np.zeros_like(p.values)
            base = p.values
            for idx in np.ndindex(base.shape):
                plus = base.copy()
                plus[idx] += epsilon
                p.values = plus
                f_plus = f().item()
                minus = base.copy()
                minus[idx] -= epsilon
                p.values = minus
                f_minus = f().item()
                g[idx] = (f_plus - f_minus) / (2.0 * epsilon)
            p.values = base
            grads.append(g)
    return grads


def relative_errors(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Elementwise relative error; entries with |analytic| < floor use absolute error."""
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    return np.where(np.abs(analytic) < floor, diff, diff / np.where(scale > 0, scale, 1.0))


def roundoff_noise(f_value: float, epsilon: float, ulps: float = 10.0) -> float:
    """Rounding noise of a central difference: a few ulps of f over 2*epsilon.

    Losses are sums of O(1) terms that may cancel, so |f| is floored at 1.
    """
    return float(ulps * np.spacing(max(abs(f_value), 1.0)) / (2.0 * epsilon))


KINK_OPS = ("relu", "leaky_relu")


def kink_margin(f: Callable[[], Tensor]) -> float:
    """Smallest |input| seen by a piecewise-linear activation during one run of ``f``.

    A central difference whose step moves such an input across zero measures
    a one-sided slope mix, not a derivative; callers can use the margin to
    keep random test instances away from kinks.
    """
    with GradTape() as tape:
        f()
    margins = [np.abs(r.inputs[0].values).min() for r in tape._records if r.op in KINK_OPS and r.inputs[0].values.size]
    return float(min(margins)) if margins else float("inf")


def roundoff_floor(f_value: float, epsilon: float, rtol: float = 1e-4, ulps: float = 10.0) -> float:
    """Smallest gradient magnitude whose central difference resolves to ``rtol``."""
    return roundoff_noise(f_value, epsilon, ulps) / rtol


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], epsilon: float = 1e-5,
               floor: float | str = 1e-8) -> float:
    """Max relative error between tape gradients and central differences.

    ``f`` must be deterministic and rebuild its computation from the current
    ``params`` on every call. Entries with |analytic| below ``floor`` are
    compared absolutely; ``floor="auto"`` raises it to the round-off limit
    of the central difference (see ``roundoff_floor``).
    """
    return grad_check_report(f, params, epsilon, floor)["max_relative_error"]


def grad_check_report(f: Callable[[], Tensor], params: Sequence[Tensor], epsilon: float = 1e-5,
                      floor: float | str = 1e-8) -> dict:
    if not 0.0 < epsilon <= 1e-3:
        raise ValueError(f"epsilon must be in (0, 1e-3], got {epsilon}")
    analytic = tape_gradients(f, params)
    with no_tape():
        f0 = f().item()
    if floor == "auto":
        floor = max(1e-8, roundoff_floor(f0, epsilon))
    numeric = numeric_gradients(f, params, epsilon)
    worst, worst_abs, n_small = 0.0, 0.0, 0
    for a, n in zip(analytic, numeric):
        if a.size:
            worst = max(worst, float(relative_errors(a, n, floor).max()))
            small = np.abs(a) < floor
            n_small += int(small.sum())
            if small.any():
                worst_abs = max(worst_abs, float(np.abs(a - n)[small].max()))
    return {"max_relative_error": worst, "floor": float(floor), "entries_below_floor": n_small,
            "max_abs_error_below_floor": worst_abs, "noise": roundoff_noise(f0, epsilon), "f": f0}
