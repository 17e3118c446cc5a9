"""Finite-difference gradient checking.

Central differences against the autodiff backward pass, on a random
sample of coordinates per parameter. Coordinates where the function is
locally non-smooth (a ramp kink between the two evaluation points) are
excluded and counted, since the central difference is meaningless there.
Run everything in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tensor as T
from .tensor import Tensor

__all__ = ["GradCheckReport", "grad_check"]

# one-sided slopes disagreeing by more than this (relative) flag a kink
_KINK_TOLERANCE = 0.05


@dataclass
class GradCheckReport:
    per_param: dict[str, float] = field(default_factory=dict)
    n_checked: int = 0
    n_excluded: int = 0

    @property
    def max_rel_error(self) -> float:
        return max(self.per_param.values(), default=0.0)


def _rel_error(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-8)


def grad_check(
    fn: Callable[[], Tensor],
    params: dict[str, Tensor],
    epsilon: float = 1e-5,
    samples_per_param: int = 24,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare autodiff grads of ``fn()`` (a scalar) against central
    finite differences at ``samples_per_param`` random coordinates of
    each parameter."""
    rng = rng or np.random.default_rng(0)
    for name, p in params.items():
        if p.data.dtype != np.float64:
            raise ValueError(f"grad_check requires float64 parameters ({name} is {p.data.dtype})")

    for p in params.values():
        p.zero_grad()
    loss = fn()
    T.backward(loss)
    analytic = {name: p.grad.copy() for name, p in params.items()}

    report = GradCheckReport()
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n_coords = flat.shape[0]
        k = min(samples_per_param, n_coords)
        coords = rng.choice(n_coords, size=k, replace=False)
        worst = 0.0
        for c in coords:
            orig = flat[c]
            flat[c] = orig + epsilon
            f_plus = fn().item()
            flat[c] = orig - epsilon
            f_minus = fn().item()
            flat[c] = orig
            f_mid = fn().item()

            slope_up = (f_plus - f_mid) / epsilon
            slope_down = (f_mid - f_minus) / epsilon
            scale = max(abs(slope_up), abs(slope_down), 1e-8)
            if abs(slope_up - slope_down) / scale > _KINK_TOLERANCE:
                report.n_excluded += 1
                continue
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            a = float(analytic[name].reshape(-1)[c])
            worst = max(worst, _rel_error(a, numeric))
            report.n_checked += 1
        report.per_param[name] = worst
    return report
