"""Sharp-interface reference solutions for circular bubbles.

Orientation: the bubble interior is Omega+, the signed distance is positive
inside, and a circle of radius R has curvature ``H = 1/R``.  The mean
curvature drift of the Allen-Cahn layer is then ``V = -m H`` (inward), which
for a circle integrates to ``R(t)^2 = R0^2 - 2 m t``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .potential import Profile, compute_profile, smoothstep5

__all__ = [
    "ReferenceScenario",
    "CollapseError",
    "cutoff",
    "leading_order_c",
    "laplace_jump",
    "corrected_radius",
    "transported_center",
    "KINDS",
]

KINDS = ("stationary_bubble", "transported_bubble", "mobility_corrected_bubble")


class CollapseError(ValueError):
    pass


def cutoff(d, delta):
    """``zeta(d)``: 1 on ``[-delta, delta]``, 0 outside ``[-2 delta, 2 delta]``, quintic between.

    ``delta=None`` means no cutoff (``zeta = 1``).
    """
    d = np.asarray(d, dtype=float)
    if delta is None:
        return np.ones_like(d)
    return 1.0 - smoothstep5((np.abs(d) - delta) / delta)


def corrected_radius(R0, eps, alpha, t):
    """``sqrt(R0^2 - 2 eps^alpha t)``, the curvature-drift radius at mobility ``eps^alpha``."""
    arg = R0**2 - 2.0 * eps**alpha * np.asarray(t, dtype=float)
    if np.any(arg <= 0):
        raise CollapseError(f"bubble of radius {R0} collapses before t={np.max(t)}")
    out = np.sqrt(arg)
    return float(out) if out.ndim == 0 else out


def transported_center(center0, U, t, box=None):
    """``center0 + U t``, wrapped into ``box = (x0, y0, Lx, Ly)`` when given."""
    c = np.asarray(center0, dtype=float) + np.asarray(U, dtype=float) * t
    if box is not None:
        x0, y0, Lx, Ly = box
        c = np.array([x0 + np.mod(c[0] - x0, Lx), y0 + np.mod(c[1] - y0, Ly)])
    return c


def laplace_jump(scenario: "ReferenceScenario | float", sigma=2.0 / 3.0):
    """Pressure jump ``sigma H = sigma / R`` across a resting circular interface."""
    R = scenario.R0 if isinstance(scenario, ReferenceScenario) else float(scenario)
    return sigma / R


@dataclass(frozen=True)
class ReferenceScenario:
    kind: str
    center: tuple = (0.5, 0.5)
    R0: float = 0.25
    U: tuple = (0.0, 0.0)
    eps: float = 1.0 / 32
    alpha: float = 0.5
    delta: float | None = None
    box: tuple | None = None     # (x0, y0, Lx, Ly) for periodic minimum-image distance

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.R0 <= 0:
            raise ValueError("R0 must be positive")

    @property
    def mobility(self):
        return self.eps**self.alpha

    def center_at(self, t):
        return transported_center(self.center, self.U, t, self.box)

    def radius_at(self, t):
        if self.kind == "mobility_corrected_bubble":
            return corrected_radius(self.R0, self.eps, self.alpha, t)
        return self.R0

    def uncorrected(self):
        """Same geometry with the curvature drift switched off (pure transport)."""
        kind = "transported_bubble" if any(self.U) else "stationary_bubble"
        return replace(self, kind=kind)

    def validate(self, T):
        if self.kind == "mobility_corrected_bubble":
            corrected_radius(self.R0, self.eps, self.alpha, T)
        if self.box is not None and self.delta is not None:
            x0, y0, Lx, Ly = self.box
            if self.R0 + 3 * self.delta > 0.5 * min(Lx, Ly):
                raise ValueError("bubble does not stay 3 delta away from the box boundary")

    def distance(self, x, y, t):
        """Signed distance to the reference circle, positive inside."""
        cx, cy = self.center_at(t)
        dx = np.asarray(x, dtype=float) - cx
        dy = np.asarray(y, dtype=float) - cy
        if self.box is not None:
            _, _, Lx, Ly = self.box
            dx = dx - Lx * np.round(dx / Lx)
            dy = dy - Ly * np.round(dy / Ly)
        return self.radius_at(t) - np.hypot(dx, dy)


_PROFILE = None


def _profile():
    global _PROFILE
    if _PROFILE is None:
        _PROFILE = compute_profile()
    return _PROFILE


def leading_order_c(x, y, t, scenario: ReferenceScenario, profile: Profile | None = None):
    """``zeta(d) theta0(d/eps) + sign(d) (1 - zeta(d))`` with the scenario's distance."""
    profile = profile or _profile()
    d = scenario.distance(x, y, t)
    z = cutoff(d, scenario.delta)
    inner = profile.evaluate(d / scenario.eps)
    return z * inner + np.sign(d) * (1.0 - z)
