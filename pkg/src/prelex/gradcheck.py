"""Central-difference gradient verification for taped operations.

The checker perturbs every entry of every input tensor by +/-epsilon,
re-evaluates the (scalar-valued, deterministic) function, and compares the
numeric slope against the taped gradient under a relative error that is
safe near zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckEntry:
    input_index: int
    flat_index: int
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    entries: list[GradCheckEntry] = field(default_factory=list)
    note: str = ""

    def worst(self) -> GradCheckEntry | None:
        return max(self.entries, key=lambda e: e.rel_error) if self.entries else None

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        msg = f"grad check {status}: max rel error {self.max_rel_error:.3e}"
        if self.note:
            msg += f" ({self.note})"
        return msg


def _rel_error(a: float, n: float) -> float:
    return abs(a - n) / max(1.0, abs(a), abs(n))


def grad_check(
    f: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """Compare taped gradients of ``f(*inputs)`` against central differences.

    ``f`` must return a scalar tensor and be deterministic: any internal
    randomness (dropout masks etc.) has to be fixed before calling. A
    non-finite value anywhere turns into a failed report, not an exception.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon {epsilon} outside [1e-7, 1e-3]")
    inputs = list(inputs)
    for t in inputs:
        t.grad = None

    out = f(*inputs)
    if out.data.size != 1:
        raise ValueError("grad_check needs a scalar-valued function; add a reduction")
    if not np.isfinite(out.data).all():
        return GradCheckReport(False, np.inf, note="non-finite forward output")
    out.backward()

    analytic = []
    for t in inputs:
        g = t.grad if t.grad is not None else np.zeros_like(t.data)
        if not np.isfinite(g).all():
            return GradCheckReport(False, np.inf, note="non-finite analytic gradient")
        analytic.append(g.copy())

    entries: list[GradCheckEntry] = []
    max_err = 0.0
    for i, t in enumerate(inputs):
        flat = t.data.reshape(-1)
        for j in range(flat.shape[0]):
            orig = flat[j]
            flat[j] = orig + epsilon
            f_plus = f(*inputs).item()
            flat[j] = orig - epsilon
            f_minus = f(*inputs).item()
            flat[j] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                return GradCheckReport(
                    False, np.inf, entries,
                    note=f"non-finite perturbed output at input {i} entry {j}",
                )
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            a = float(analytic[i].reshape(-1)[j])
            err = _rel_error(a, numeric)
            entries.append(GradCheckEntry(i, j, a, numeric, err))
            max_err = max(max_err, err)

    return GradCheckReport(max_err <= tolerance, max_err, entries)
