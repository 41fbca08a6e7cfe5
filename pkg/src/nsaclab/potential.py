"""Double-well potential, optimal profile, blending function and viscosity.

The optimal profile is the heteroclinic orbit of ``-theta'' + f'(theta) = 0``
joining -1 to +1 with ``theta(0) = 0``.  It is computed on a uniform grid by
Newton iteration on a sixth-order centered-difference discretization; the
grid is closed at both ends by ghost values that follow the exponential decay
``1 -+ theta ~ exp(-alpha |rho|)``.
"""
from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import simpson
from scipy.interpolate import make_interp_spline

__all__ = [
    "DoubleWell",
    "Profile",
    "Blend",
    "ViscosityModel",
    "ProfileConvergenceError",
    "eval_potential",
    "named_well",
    "compute_profile",
    "compute_sigma1",
    "mean_viscosity",
    "blend_odd_moment",
    "inner_pressure_leading",
    "inner_velocity_leading",
    "smoothstep5",
]

# sixth-order centered stencils
_D2 = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
_D1 = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])
_NG = 3


class ProfileConvergenceError(RuntimeError):
    """Newton iteration for the optimal profile did not converge."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


def smoothstep5(x):
    """C2 quintic smoothstep, 0 for x <= 0 and 1 for x >= 1."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (x * (6.0 * x - 15.0) + 10.0)


def _smoothstep5_d1(x):
    inside = (x > 0.0) & (x < 1.0)
    x = np.clip(x, 0.0, 1.0)
    return np.where(inside, 30.0 * x * x * (1.0 - x) ** 2, 0.0)


def _smoothstep5_d2(x):
    inside = (x > 0.0) & (x < 1.0)
    x = np.clip(x, 0.0, 1.0)
    return np.where(inside, 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x), 0.0)


@dataclass(frozen=True)
class DoubleWell:
    """Even double-well potential with minima at -1 and +1.

    The default is the quartic ``f(c) = (c**2 - 1)**2 / 8``.  A custom
    potential is given as three callables ``f, df, d2f``.
    """

    f: Callable | None = None
    df: Callable | None = None
    d2f: Callable | None = None
    name: str = "quartic"

    def __post_init__(self):
        custom = (self.f, self.df, self.d2f)
        if any(g is not None for g in custom) and not all(g is not None for g in custom):
            raise ValueError("a custom potential needs f, df and d2f")
        if self.f is not None:
            self._check()

    def _check(self, tol=1e-10):
        for s in (-1.0, 1.0):
            if abs(self.value(s)) > tol or abs(self.d1(s)) > tol:
                raise ValueError("potential must satisfy f(+-1) = f'(+-1) = 0")
            if self.d2(s) <= 0.0:
                raise ValueError("potential must satisfy f''(+-1) > 0")
        s = np.linspace(-0.999, 0.999, 201)
        if np.max(np.abs(self.value(s) - self.value(-s))) > tol:
            raise ValueError("potential must be even")
        if np.any(self.value(s) <= 0.0):
            raise ValueError("potential must be positive on (-1, 1)")

    def value(self, c):
        if self.f is not None:
            return self.f(c)
        c = np.asarray(c, dtype=float)
        return 0.125 * (c * c - 1.0) ** 2

    def d1(self, c):
        if self.df is not None:
            return self.df(c)
        c = np.asarray(c, dtype=float)
        return 0.5 * c * (c * c - 1.0)

    def d2(self, c):
        if self.d2f is not None:
            return self.d2f(c)
        c = np.asarray(c, dtype=float)
        return 0.5 * (3.0 * c * c - 1.0)

    @property
    def alpha(self):
        """Exponential decay rate of the profile tails."""
        return float(min(np.sqrt(self.d2(-1.0)), np.sqrt(self.d2(1.0))))

    def max_curvature(self, bound=1.2, n=2001):
        """max f'' over |c| <= bound (used for the stabilization constant)."""
        c = np.linspace(-bound, bound, n)
        return float(np.max(self.d2(c)))


@functools.cache
def named_well(name="quartic"):
    """``"quartic"``: ``(c^2 - 1)^2 / 8``; ``"sextic"``: ``(1 - c^2)^2 (1 + c^2) / 8``.

    Cached, so equal names give the identical (hence equal) well.
    """
    if name == "quartic":
        return DoubleWell()
    if name == "sextic":
        return DoubleWell(f=lambda c: (1 - c**2) ** 2 * (1 + c**2) / 8,
                          df=lambda c: c * (c**2 - 1) * (3 * c**2 + 1) / 4,
                          d2f=lambda c: (15 * c**4 - 6 * c**2 - 1) / 4,
                          name="sextic")
    raise ValueError(f"unknown potential {name!r}; choose 'quartic' or 'sextic'")


def eval_potential(c, well: DoubleWell | None = None):
    """Return ``(f, f', f'')`` at ``c``."""
    well = well or DoubleWell()
    return well.value(c), well.d1(c), well.d2(c)


@dataclass(frozen=True, eq=False)
class Profile:
    """Optimal profile sampled on a uniform grid of the stretched variable."""

    rho: np.ndarray
    theta0: np.ndarray
    theta0p: np.ndarray
    theta0pp: np.ndarray
    sigma: float
    alpha: float
    residual: float
    well: DoubleWell = field(default_factory=DoubleWell)

    @property
    def L(self):
        return float(self.rho[-1])

    @property
    def h(self):
        return float(self.rho[1] - self.rho[0])

    @property
    def n(self):
        return self.rho.size

    def _spline(self, deriv=0):
        spl = self.__dict__.get("_spl")
        if spl is None:
            spl = make_interp_spline(self.rho, self.theta0, k=5)
            object.__setattr__(self, "_spl", spl)
        return spl if deriv == 0 else spl.derivative(deriv)

    def evaluate(self, rho, deriv=0):
        """theta0 (or a derivative) at arbitrary points.

        Inside the grid a quintic spline is used; beyond it the tails decay
        exponentially towards +-1 at the well rates.
        """
        rho = np.asarray(rho, dtype=float)
        out = np.empty_like(rho)
        L = self.L
        inner = np.abs(rho) <= L
        out[inner] = self._spline(deriv)(rho[inner])
        right = rho > L
        left = rho < -L
        ap = np.sqrt(self.well.d2(1.0))
        am = np.sqrt(self.well.d2(-1.0))
        gap_r = 1.0 - self.theta0[-1]
        gap_l = 1.0 + self.theta0[0]
        er = np.exp(-ap * (rho[right] - L))
        el = np.exp(am * (rho[left] + L))
        if deriv == 0:
            out[right] = 1.0 - gap_r * er
            out[left] = -1.0 + gap_l * el
        else:
            out[right] = -gap_r * (-ap) ** deriv * er
            out[left] = gap_l * am ** deriv * el
        return out

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rho", "theta0", "theta0p", "theta0pp"])
            for row in zip(self.rho, self.theta0, self.theta0p, self.theta0pp):
                w.writerow([repr(float(v)) for v in row])
        return path

    @classmethod
    def read_csv(cls, path, well: DoubleWell | None = None):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        well = well or DoubleWell()
        rho, th, thp, thpp = data.T
        return cls(rho=rho, theta0=th, theta0p=thp, theta0pp=thpp,
                   sigma=float(simpson(thp**2, x=rho)), alpha=well.alpha,
                   residual=float(np.max(np.abs(thpp - well.d1(th)))), well=well)


def _ghost_weights(alpha_r, alpha_l, h):
    k = np.arange(1, _NG + 1)
    return np.exp(-alpha_r * k * h), np.exp(-alpha_l * k * h)


def _pad_with_tails(theta, wr, wl):
    right = 1.0 - (1.0 - theta[-1]) * wr
    left = (-1.0 + (1.0 + theta[0]) * wl)[::-1]
    return np.concatenate([left, theta, right])


def _apply_stencil(padded, stencil):
    n = padded.size - 2 * _NG
    out = np.zeros(n)
    for k, a in enumerate(stencil):
        if a != 0.0:
            out += a * padded[k:k + n]
    return out


def compute_profile(L_rho=15.0, n=3001, well: DoubleWell | None = None,
                    tol=1e-10, max_iter=50) -> Profile:
    """Solve the optimal-profile problem on ``[-L_rho, L_rho]`` with ``n`` nodes.

    Raises
    ------
    ProfileConvergenceError
        If Newton's method fails to reach ``tol`` within ``max_iter`` steps.
    """
    if L_rho < 10.0:
        raise ValueError(f"L_rho must be >= 10, got {L_rho}")
    if n < 256:
        raise ValueError(f"profile grid needs n >= 256 nodes, got {n}")
    well = well or DoubleWell()
    alpha = well.alpha
    rho = np.linspace(-L_rho, L_rho, n)
    h = rho[1] - rho[0]
    ar = np.sqrt(well.d2(1.0))
    al = np.sqrt(well.d2(-1.0))
    wr, wl = _ghost_weights(ar, al, h)

    # sparse D2 including the ghost closure (ghost values are affine in the end nodes)
    diags = [np.full(n - abs(o), _D2[o + _NG]) for o in range(-_NG, _NG + 1)]
    D2 = sp.diags(diags, list(range(-_NG, _NG + 1)), shape=(n, n), format="lil")
    for i in range(_NG):
        # row i sees left ghosts k = NG - i, ..., NG (distances i+1 .. NG from node 0)
        for g in range(1, _NG - i + 1):
            D2[i, 0] += _D2[_NG - (i + g)] * wl[g - 1]
        for g in range(1, _NG - i + 1):
            D2[n - 1 - i, n - 1] += _D2[_NG + (i + g)] * wr[g - 1]
    D2 = D2.tocsr() / h**2
    const = np.zeros(n)
    for i in range(_NG):
        for g in range(1, _NG - i + 1):
            const[i] += _D2[_NG - (i + g)] * (-1.0) * (1.0 - wl[g - 1])
            const[n - 1 - i] += _D2[_NG + (i + g)] * (1.0 - wr[g - 1])
    const /= h**2

    if n % 2:
        pin = (n - 1) // 2
        pin_cols, pin_vals = [pin], [1.0]
    else:
        pin = n // 2
        pin_cols, pin_vals = [pin - 1, pin], [1.0, 1.0]
    pin_row = sp.csr_matrix((pin_vals, ([0] * len(pin_cols), pin_cols)), shape=(1, n))
    mask = np.ones(n, dtype=bool)
    mask[pin] = False

    # generic monotone guess; deliberately not the quartic's closed form
    theta = np.tanh(alpha * rho)
    res = np.inf
    for _ in range(max_iter):
        F = D2 @ theta + const - well.d1(theta)
        F[pin] = (pin_row @ theta)[0]
        res = float(np.max(np.abs(F)))
        if res <= tol:
            break
        J = (D2 - sp.diags(well.d2(theta))).tolil()
        J[pin, :] = 0.0
        for col, val in zip(pin_cols, pin_vals):
            J[pin, col] = val
        step = spla.spsolve(J.tocsc(), -F)
        lam = 1.0
        while lam > 1e-3:
            trial = theta + lam * step
            Ft = D2 @ trial + const - well.d1(trial)
            Ft[pin] = (pin_row @ trial)[0]
            if np.max(np.abs(Ft)) < res or lam <= 1.0 / 64:
                break
            lam *= 0.5
        theta = theta + lam * step
    else:
        raise ProfileConvergenceError("profile Newton iteration did not converge", res)
    if res > tol:
        raise ProfileConvergenceError("profile Newton iteration did not converge", res)

    padded = _pad_with_tails(theta, wr, wl)
    thetap = _apply_stencil(padded, _D1) / h
    thetapp = _apply_stencil(padded, _D2) / h**2
    residual = float(np.max(np.abs(thetapp - well.d1(theta))[mask]))
    sigma = float(simpson(thetap**2, x=rho))
    return Profile(rho=rho, theta0=theta, theta0p=thetap, theta0pp=thetapp,
                   sigma=sigma, alpha=alpha, residual=residual, well=well)


@dataclass(frozen=True)
class Blend:
    """Monotone blend eta with eta = 0 on (-inf, -1] and eta = 1 on [1, inf).

    ``eta(rho) = smoothstep5((rho + 1) / 2)``; eta - 1/2 is odd.
    """

    def eta(self, rho):
        return smoothstep5((np.asarray(rho, dtype=float) + 1.0) / 2.0)

    def d1(self, rho):
        return 0.5 * _smoothstep5_d1((np.asarray(rho, dtype=float) + 1.0) / 2.0)

    def d2(self, rho):
        return 0.25 * _smoothstep5_d2((np.asarray(rho, dtype=float) + 1.0) / 2.0)

    support = (-1.0, 1.0)


def _support_grid(m=4096):
    # Simpson nodes aligned with the kinks of eta' at +-1
    return np.linspace(-1.0, 1.0, m + 1)


def compute_sigma1(profile: Profile, blend: Blend | None = None, m=4096):
    """Integral of theta0' * eta' over the real line."""
    blend = blend or Blend()
    r = _support_grid(m)
    return float(simpson(profile.evaluate(r, 1) * blend.d1(r), x=r))


def blend_odd_moment(profile: Profile, blend: Blend | None = None, m=4096):
    """Integral of theta0' * (eta - 1/2); vanishes by parity."""
    blend = blend or Blend()
    r = _support_grid(m)
    inner = simpson(profile.evaluate(r, 1) * (blend.eta(r) - 0.5), x=r)
    # outside the support eta - 1/2 = +-1/2
    L = profile.L
    tails = 0.5 * (profile.evaluate(np.array([L]))[0] - profile.evaluate(np.array([1.0]))[0]) \
        - 0.5 * (profile.evaluate(np.array([-1.0]))[0] - profile.evaluate(np.array([-L]))[0])
    return float(inner + tails)


@dataclass(frozen=True)
class ViscosityModel:
    """Concentration-dependent viscosity, linear in c on [-1, 1].

    Outside ``[-1, 1]`` the argument is saturated smoothly (C2) at ``|c| = 1.2``
    so that overshooting discrete fields keep ``nu >= nu_min``.
    """

    nu_plus: float = 1.0
    nu_minus: float = 1.0
    clamp: float = 1.2

    def __post_init__(self):
        if self.nu_plus <= 0 or self.nu_minus <= 0:
            raise ValueError("viscosities must be positive")
        if self.nu_min <= 0:
            raise ValueError("viscosity contrast too large: nu would vanish at the clamp")

    @property
    def nu_bar(self):
        return 0.5 * (self.nu_plus + self.nu_minus)

    @property
    def slope(self):
        return 0.5 * (self.nu_plus - self.nu_minus)

    @property
    def nu_min(self):
        return self.nu_bar - abs(self.slope) * self.clamp

    @property
    def nu_max(self):
        return self.nu_bar + abs(self.slope) * self.clamp

    def _saturate(self, c):
        c = np.asarray(c, dtype=float)
        w = self.clamp - 1.0
        a = np.abs(c)
        out = np.where(a <= 1.0, a, 1.0 + w * np.tanh((a - 1.0) / w))
        return np.sign(c) * out

    def __call__(self, c):
        return self.nu_bar + self.slope * self._saturate(c)

    def d1(self, c):
        c = np.asarray(c, dtype=float)
        w = self.clamp - 1.0
        a = np.abs(c)
        ds = np.where(a <= 1.0, 1.0, 1.0 / np.cosh((a - 1.0) / w) ** 2)
        return self.slope * ds


def mean_viscosity(model: ViscosityModel, profile: Profile, blend: Blend | None = None, m=4096):
    """Integral of nu(theta0) * eta'; equals (nu+ + nu-)/2."""
    blend = blend or Blend()
    r = _support_grid(m)
    return float(simpson(model(profile.evaluate(r)) * blend.d1(r), x=r))


def inner_pressure_leading(profile: Profile):
    """Leading inner pressure -(theta0')**2, normalized to vanish at +-infinity."""
    return -profile.theta0p**2


def inner_velocity_leading(v_plus, v_minus, rho, blend: Blend | None = None):
    """Leading inner velocity ``v+ eta(rho) + v- (1 - eta(rho))``."""
    blend = blend or Blend()
    eta = blend.eta(rho)[..., None]
    return np.asarray(v_plus) * eta + np.asarray(v_minus) * (1.0 - eta)
