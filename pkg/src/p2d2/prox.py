"""
Common nonsmooth regularizers and their closed-form proximal maps.

Kinds:

* ``zero``              R(w) = 0
* ``l1``                R(w) = rho |w|_1
* ``elastic_net``       R(w) = rho |w|_1 + rho2/2 |w|^2
* ``nonneg_indicator``  R(w) = 0 if w >= 0 else +inf

All maps act componentwise, so they accept a single vector or a K x M stack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter

KINDS = ("zero", "l1", "elastic_net", "nonneg_indicator")


@dataclass(frozen=True)
class RegularizerSpec:
    kind: str = "zero"
    rho: float = 0.0
    rho2: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"unknown regularizer kind {self.kind!r}")
        if self.rho < 0 or self.rho2 < 0:
            raise InvalidParameter("regularizer parameters must be nonnegative")

    @property
    def is_zero(self):
        return self.kind == "zero" or (self.kind in ("l1", "elastic_net") and self.rho == 0 and self.rho2 == 0)

    @classmethod
    def from_dict(cls, spec):
        spec = dict(spec)
        kind = spec.pop("kind", "zero")
        rho = float(spec.pop("rho", spec.pop("rho1", 0.0)))
        rho2 = float(spec.pop("rho2", 0.0))
        if spec:
            raise InvalidParameter(f"unexpected regularizer fields {sorted(spec)}")
        return cls(kind, rho, rho2)

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind in ("l1", "elastic_net"):
            out["rho"] = self.rho
        if self.kind == "elastic_net":
            out["rho2"] = self.rho2
        return out


def soft_threshold(z, tau):
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def prox(spec, z, mu):
    """Minimizer of ``R(v) + |v - z|^2 / (2 mu)``."""
    if not mu > 0:
        raise InvalidParameter(f"prox step must be positive, got {mu}")
    z = np.asarray(z, dtype=float)
    if spec.kind == "zero":
        return z.copy()
    if spec.kind == "l1":
        return soft_threshold(z, mu * spec.rho)
    if spec.kind == "elastic_net":
        # shrink first, then scale
        return soft_threshold(z, mu * spec.rho) / (1.0 + mu * spec.rho2)
    return np.maximum(z, 0.0)


def value(spec, w):
    w = np.asarray(w, dtype=float)
    if spec.kind == "zero":
        return 0.0
    if spec.kind == "l1":
        return float(spec.rho * np.abs(w).sum())
    if spec.kind == "elastic_net":
        return float(spec.rho * np.abs(w).sum() + 0.5 * spec.rho2 * (w * w).sum())
    return 0.0 if np.all(w >= 0.0) else float("inf")


def subgradient_witness(spec, w, z, mu):
    """
    Distance from ``(z - w)/mu`` to the subdifferential of R at `w`.

    Zero exactly when ``w = prox(spec, z, mu)``.
    """
    w = np.asarray(w, dtype=float)
    g = (np.asarray(z, dtype=float) - w) / mu
    if spec.kind == "zero":
        gap = g
    elif spec.kind in ("l1", "elastic_net"):
        smooth = spec.rho2 * w if spec.kind == "elastic_net" else 0.0
        h = g - smooth
        gap = np.where(w != 0.0, h - spec.rho * np.sign(w), np.maximum(np.abs(h) - spec.rho, 0.0))
    else:
        if np.any(w < 0.0):
            return float("inf")
        # normal cone of the orthant: {0} inside, (-inf, 0] on the boundary
        gap = np.where(w > 0.0, g, np.maximum(g, 0.0))
    return float(np.linalg.norm(gap))
