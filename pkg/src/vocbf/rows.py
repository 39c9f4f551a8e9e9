"""Affine constraint rows shared by the CLF/CBF builders and the solvers.

A row reads ``coeff_u . u + coeff_delta . delta + constant  (sense)  0`` where
``u = [a, alpha]`` and ``delta = [delta_d, delta_theta, delta_v, delta_omega]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

LE = "<="
GE = ">="

N_U = 2
N_DELTA = 4
ZERO_DELTA = (0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class AffineRow:
    coeff_u: tuple[float, float]
    coeff_delta: tuple[float, float, float, float] = ZERO_DELTA
    constant: float = 0.0
    sense: str = GE
    label: str = ""

    def __post_init__(self):
        if self.sense not in (LE, GE):
            raise ValueError(f"unknown sense {self.sense!r}")
        values = (*self.coeff_u, *self.coeff_delta, self.constant)
        if len(self.coeff_u) != N_U or len(self.coeff_delta) != N_DELTA:
            raise ValueError("row has wrong dimension")
        if not all(math.isfinite(x) for x in values):
            raise ValueError(f"non-finite coefficient in row {self.label!r}")

    @property
    def is_hard(self) -> bool:
        """Rows without relaxation variables are hard constraints."""
        return not any(self.coeff_delta)

    def value(self, u, delta=ZERO_DELTA) -> float:
        return (
            self.coeff_u[0] * u[0]
            + self.coeff_u[1] * u[1]
            + sum(c * d for c, d in zip(self.coeff_delta, delta))
            + self.constant
        )

    def violation(self, u, delta=ZERO_DELTA) -> float:
        """Amount by which the row is violated (zero when satisfied)."""
        val = self.value(u, delta)
        return max(0.0, val) if self.sense == LE else max(0.0, -val)

    def as_le(self) -> tuple[tuple[float, ...], float]:
        """Return ``(a, b)`` with the row equivalent to ``a . [u, delta] <= b``."""
        coeffs = (*self.coeff_u, *self.coeff_delta)
        if self.sense == LE:
            return coeffs, -self.constant
        return tuple(-c for c in coeffs), self.constant

    def scaled(self, factor: float) -> "AffineRow":
        if factor <= 0.0:
            raise ValueError("rows may only be scaled by positive factors")
        return AffineRow(
            (self.coeff_u[0] * factor, self.coeff_u[1] * factor),
            tuple(c * factor for c in self.coeff_delta),
            self.constant * factor,
            self.sense,
            self.label,
        )
