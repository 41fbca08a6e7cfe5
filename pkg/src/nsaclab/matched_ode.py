"""Model ODE solvers on the real line from the inner expansion.

Two problems are handled on the truncated profile grid:

* the linearized Allen-Cahn problem ``w'' - f''(theta0) w = A``, ``w(0) = 0``,
  bounded, solvable iff ``A`` is orthogonal to ``theta0'``;
* the weighted problem ``(nu(theta0) w')' = B``, solvable iff ``int B = 0``,
  with the particular solution built by nested quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import cumulative_simpson, simpson

from .potential import Blend, Profile, ViscosityModel

__all__ = [
    "ode_suite",
    "RhsSample",
    "SolvabilityViolated",
    "solvability_defect",
    "solve_linearized_ac",
    "solve_weighted",
    "linearized_residual",
    "fit_decay_constant",
    "write_solution_csv",
]

TOL_SOLV = 1e-6


class SolvabilityViolated(ValueError):
    def __init__(self, defect, tol):
        super().__init__(f"solvability condition violated: defect {defect:.6g} exceeds {tol:.3g}")
        self.defect = defect
        self.tol = tol


@dataclass(frozen=True, eq=False)
class RhsSample:
    """Right-hand side sampled on a profile grid, with optional limits at -+inf."""

    values: np.ndarray
    minus: float | None = None
    plus: float | None = None

    @classmethod
    def of(cls, values, limits=None):
        values = np.asarray(values, dtype=float)
        if limits is None:
            return cls(values)
        return cls(values, float(limits[0]), float(limits[1]))

    @property
    def scale(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def _as_rhs(A):
    return A if isinstance(A, RhsSample) else RhsSample.of(A)


def _center_weights(n):
    if n % 2:
        return [(n - 1) // 2], [1.0]
    return [n // 2 - 1, n // 2], [0.5, 0.5]


def solvability_defect(A, profile: Profile):
    """Quadrature of ``A * theta0'`` over the grid."""
    A = _as_rhs(A)
    if A.values.shape != profile.rho.shape:
        raise ValueError("right-hand side does not match the profile grid")
    return float(simpson(A.values * profile.theta0p, x=profile.rho))


def _tolerance(A: RhsSample, tol):
    return tol * max(A.scale, 1e-300)


def solve_linearized_ac(A, profile: Profile, tol_solv=TOL_SOLV):
    """Bounded solution of ``w'' - f''(theta0) w = A`` with ``w(0) = 0``.

    The far field is closed by Robin conditions
    ``w' -+ alpha_pm (w - w_pm) = 0`` at ``rho = -+L`` with
    ``w_pm = -A_pm / f''(pm 1)``.  Limits not supplied are read off the ends
    of ``A``.  The translation mode ``theta0'`` makes the truncated operator
    nearly singular; it is removed by bordering the system with a multiplier
    on ``theta0'`` together with the pin ``w(0) = 0``.

    Raises
    ------
    SolvabilityViolated
        If ``int A theta0'`` exceeds ``tol_solv * max|A|``.
    """
    A = _as_rhs(A)
    defect = solvability_defect(A, profile)
    tol = _tolerance(A, tol_solv)
    if abs(defect) > tol:
        raise SolvabilityViolated(defect, tol)
    rho = profile.rho
    n = rho.size
    h = profile.h
    well = profile.well
    q = well.d2(profile.theta0)
    a = A.values
    a_minus = a[0] if A.minus is None else A.minus
    a_plus = a[-1] if A.plus is None else A.plus
    w_minus = -a_minus / well.d2(-1.0)
    w_plus = -a_plus / well.d2(1.0)
    al_m = np.sqrt(well.d2(-1.0))
    al_p = np.sqrt(well.d2(1.0))

    main = -2.0 / h**2 - q
    off = np.full(n - 1, 1.0 / h**2)
    rhs = a.copy()
    upper = off.copy()
    lower = off.copy()
    # ghost elimination at the ends via the Robin closure
    upper[0] = 2.0 / h**2
    main = main.copy()
    main[0] -= 2.0 * al_m / h
    rhs[0] -= 2.0 * al_m * w_minus / h
    lower[-1] = 2.0 / h**2
    main[-1] -= 2.0 * al_p / h
    rhs[-1] -= 2.0 * al_p * w_plus / h
    L = sp.diags([lower, main, upper], [-1, 0, 1], shape=(n, n), format="csr")

    cols, vals = _center_weights(n)
    pin = sp.csr_matrix((vals, ([0] * len(cols), cols)), shape=(1, n))
    phi = sp.csr_matrix(profile.theta0p.reshape(-1, 1))
    K = sp.bmat([[L, phi], [pin, None]], format="csc")
    sol = spla.spsolve(K, np.concatenate([rhs, [0.0]]))
    return sol[:n]


def linearized_residual(w, A, profile: Profile):
    """Interior residual of the second-order discrete linearized operator."""
    A = _as_rhs(A)
    h = profile.h
    q = profile.well.d2(profile.theta0)
    lw = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / h**2 - q[1:-1] * w[1:-1]
    return float(np.max(np.abs(lw - A.values[1:-1])))


def solve_weighted(B, model: ViscosityModel, profile: Profile, tol_solv=TOL_SOLV,
                   decay_tol=1e-3):
    """Particular solution of ``(nu(theta0) w')' = B``.

    ``w*(rho) = int_0^rho 1/nu(theta0(r)) int_{-inf}^r B(s) ds dr`` evaluated by
    nested cumulative Simpson quadrature.

    Raises
    ------
    SolvabilityViolated
        If ``int B`` exceeds ``tol_solv * max|B|``.
    """
    B = _as_rhs(B)
    rho = profile.rho
    if B.values.shape != rho.shape:
        raise ValueError("right-hand side does not match the profile grid")
    total = float(simpson(B.values, x=rho))
    tol = _tolerance(B, tol_solv)
    if abs(total) > tol:
        raise SolvabilityViolated(total, tol)
    if B.scale > 0 and max(abs(B.values[0]), abs(B.values[-1])) > decay_tol * B.scale:
        raise ValueError("right-hand side does not decay at the ends of the grid")
    inner = cumulative_simpson(B.values, x=rho, initial=0.0)
    outer = cumulative_simpson(inner / model(profile.theta0), x=rho, initial=0.0)
    cols, vals = _center_weights(rho.size)
    return outer - sum(v * outer[c] for c, v in zip(cols, vals))


def fit_decay_constant(values, limit_minus, limit_plus, profile: Profile, rate_factor=1.0,
                       fraction=0.25):
    """Smallest ``C`` with ``|w(+-rho) - w_pm| <= C exp(-rate_factor*alpha*|rho|)``
    on the outer ``fraction`` of the grid (a diagnostic, not a bound)."""
    rho = profile.rho
    L = profile.L
    outer = np.abs(rho) >= (1.0 - fraction) * L
    lim = np.where(rho > 0, limit_plus, limit_minus)
    gap = np.abs(values - lim)[outer]
    return float(np.max(gap * np.exp(rate_factor * profile.alpha * np.abs(rho[outer]))))


def write_solution_csv(path, rho, w):
    np.savetxt(path, np.column_stack([rho, w]), delimiter=",", header="rho,w", comments="")
    return path


def ode_suite(profile: Profile, model: ViscosityModel | None = None, tol_solv=TOL_SOLV):
    """Closed-form checks of both solvers.

    ``A = theta0''`` has the bounded solution ``rho theta0' / 2``;
    ``B = (nu(theta0) eta')'`` has ``eta - 1/2``; ``A = theta0'`` and
    ``B = theta0'`` must be rejected.  Returns ``{name: (value, ok)}`` where
    the errors are max-norms over the grid.
    """
    model = model or ViscosityModel(1.0, 1.0)
    rho = profile.rho
    w = solve_linearized_ac(profile.theta0pp, profile, tol_solv)
    err_ac = float(np.max(np.abs(w - 0.5 * rho * profile.theta0p)))
    blend = Blend()
    B = model.d1(profile.theta0) * profile.theta0p * blend.d1(rho) \
        + model(profile.theta0) * blend.d2(rho)
    eta_w = solve_weighted(B, model, profile, tol_solv)
    err_w = float(np.max(np.abs(eta_w - (blend.eta(rho) - 0.5))))

    def rejects(fn, rhs):
        try:
            fn(rhs)
        except SolvabilityViolated:
            return True
        return False

    rej_a = rejects(lambda a: solve_linearized_ac(a, profile, tol_solv), profile.theta0p)
    rej_b = rejects(lambda b: solve_weighted(b, model, profile, tol_solv), profile.theta0p)
    return {
        "ac_theta0pp_error": (err_ac, err_ac <= 1e-5),
        "weighted_eta_error": (err_w, err_w <= 1e-5),
        "rejects_A_theta0p": (float(rej_a), rej_a),
        "rejects_B_theta0p": (float(rej_b), rej_b),
    }
