"""Navier-Stokes/Allen-Cahn solver on a MAC grid.

    c_t + v.grad c = m (lap c - eps^-2 f'(c)),          m = eps^alpha
    v_t + v.grad v - div(2 nu(c) Dv) + grad p = -eps lap c grad c,
    div v = 0.

Layout (index order ``[x, y]``): ``c`` and ``p`` at cell centers with shape
``(nx, ny)``; ``u`` on x-faces with shape ``(nx + 1, ny)``; ``v`` on y-faces
with shape ``(nx, ny + 1)``.  In periodic mode the last face row duplicates
the first.  In wall mode the normal velocity vanishes on the walls, the
tangential velocity is mirrored (no slip) and ``c = -1`` on the walls.

One step: explicit second-order upwind advection of ``c`` in flux form, a
linearly stabilized semi-implicit Allen-Cahn update solved by FFT (periodic)
or DST (walls), then forward Euler for momentum with centered advection,
explicit variable-viscosity stress and the capillary force, and a Chorin
projection with an FFT / DCT pressure solve.  The capillary force is the
``-eps lap c grad c`` form; the gradient part of ``div(grad c x grad c)`` is
carried by ``p``.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft
from skimage import measure

from .potential import DoubleWell, Profile, ViscosityModel, compute_profile
from .reference import ReferenceScenario, leading_order_c

__all__ = [
    "SimConfig",
    "InitialCondition",
    "SimState",
    "EnergyDiag",
    "RunResult",
    "Interface",
    "SimulationError",
    "NoInterfaceError",
    "init_state",
    "capillary_force",
    "step",
    "energy",
    "run",
    "extract_interface",
    "divergence",
    "time_step",
    "equilibrium_stripe",
]

log = logging.getLogger(__name__)

C_BOUND = 1.2


class SimulationError(RuntimeError):
    pass


class NoInterfaceError(ValueError):
    pass


@dataclass(frozen=True)
class InitialCondition:
    """``kind`` is ``circle``, ``ellipse``, ``stripe``, ``uniform`` (c = -1) or ``field``.

    ``radius`` is the circle radius or the ellipse semi-axes ``(a, b)``;
    for a stripe ``radius`` is the half-width of the ``c > 0`` band in x.
    ``delta`` is the cutoff half-width of the blended profile (None: none).
    """

    kind: str = "circle"
    center: tuple = (0.5, 0.5)
    radius: float | tuple = 0.25
    U: tuple = (0.0, 0.0)
    delta: float | None = None
    c: np.ndarray | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SimConfig:
    nx: int = 64
    ny: int = 64
    Lx: float = 1.0
    Ly: float = 1.0
    x0: float = 0.0
    y0: float = 0.0
    boundary: str = "periodic"
    eps: float = 1.0 / 32
    alpha: float = 0.5
    mobility: float | None = None          # overrides eps**alpha when set
    viscosity: ViscosityModel = field(default_factory=ViscosityModel)
    well: DoubleWell = field(default_factory=DoubleWell)
    T: float = 0.0
    dt_max: float | None = None
    cfl: float = 0.5
    visc_safety: float = 0.9
    ac_accuracy: float = 0.02
    output_every: float | None = None      # time between diagnostics records
    snapshot_every: float | None = None
    init: InitialCondition = field(default_factory=InitialCondition)
    check_energy: bool = True
    navier_stokes: bool = True             # False: Allen-Cahn only, velocity frozen

    def __post_init__(self):
        if self.boundary not in ("periodic", "wall"):
            raise ValueError(f"boundary must be 'periodic' or 'wall', got {self.boundary!r}")
        if self.nx < 4 or self.ny < 4:
            raise ValueError("grid too small")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if abs(self.Lx / self.nx - self.Ly / self.ny) > 1e-12 * self.Lx / self.nx:
            raise ValueError("cells must be square")
        if self.T < 0:
            raise ValueError("T must be nonnegative")

    @property
    def h(self):
        return self.Lx / self.nx

    @property
    def m(self):
        return self.eps**self.alpha if self.mobility is None else float(self.mobility)

    @property
    def periodic(self):
        return self.boundary == "periodic"

    @property
    def stabilization(self):
        """``S = max_{|c| <= 1.2} f''(c) m / eps^2``."""
        return max(self.well.max_curvature(C_BOUND), 0.0) * self.m / self.eps**2

    def centers(self):
        h = self.h
        x = self.x0 + (np.arange(self.nx) + 0.5) * h
        y = self.y0 + (np.arange(self.ny) + 0.5) * h
        return np.meshgrid(x, y, indexing="ij")

    def to_dict(self):
        d = asdict(self)
        d["viscosity"] = {"nu_plus": self.viscosity.nu_plus, "nu_minus": self.viscosity.nu_minus}
        d["well"] = self.well.name
        d["init"] = {k: v for k, v in d["init"].items() if k != "c"}
        return d


@dataclass(eq=False)
class SimState:
    c: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    t: float = 0.0
    nstep: int = 0

    def copy(self):
        return SimState(self.c.copy(), self.u.copy(), self.v.copy(), self.p.copy(), self.t,
                        self.nstep)


@dataclass(frozen=True)
class EnergyDiag:
    E: float
    kinetic: float
    gradient: float
    potential: float
    viscous_dissipation: float      # int |Dv|^2
    chemical_dissipation: float     # eps^-1 int mu^2
    mu: np.ndarray = field(repr=False, compare=False, default=None)


# ---------------------------------------------------------------- padding

def _pad_c(c, cfg: SimConfig, g=2):
    if cfg.periodic:
        return np.pad(c, g, mode="wrap")
    # odd reflection about -1 keeps c = -1 on the wall faces
    return _pad_dirichlet(c, g, -1.0)


def _pad_dirichlet(c, g, value):
    out = np.pad(c, g, mode="symmetric")
    out[:g] = 2 * value - out[:g]
    out[-g:] = 2 * value - out[-g:]
    out[:, :g] = 2 * value - out[:, :g]
    out[:, -g:] = 2 * value - out[:, -g:]
    return out


def _pad_u(u, cfg: SimConfig):
    """``u`` (nx+1, ny) -> (nx+3, ny+2); face i, row j at ``[i+1, j+1]``."""
    nx = cfg.nx
    up = np.empty((u.shape[0] + 2, u.shape[1] + 2))
    up[1:-1, 1:-1] = u
    if cfg.periodic:
        up[0, 1:-1] = u[nx - 1]
        up[-1, 1:-1] = u[1]
        up[:, 0] = up[:, -2]
        up[:, -1] = up[:, 1]
    else:
        up[0, 1:-1] = -u[1]
        up[-1, 1:-1] = -u[nx - 1]
        up[:, 0] = -up[:, 1]
        up[:, -1] = -up[:, -2]
    return up


def _pad_v(v, cfg: SimConfig):
    """``v`` (nx, ny+1) -> (nx+2, ny+3); face (i, j) at ``[i+1, j+1]``."""
    ny = cfg.ny
    vp = np.empty((v.shape[0] + 2, v.shape[1] + 2))
    vp[1:-1, 1:-1] = v
    if cfg.periodic:
        vp[1:-1, 0] = v[:, ny - 1]
        vp[1:-1, -1] = v[:, 1]
        vp[0] = vp[-2]
        vp[-1] = vp[1]
    else:
        vp[1:-1, 0] = -v[:, 1]
        vp[1:-1, -1] = -v[:, ny - 1]
        vp[0] = -vp[1]
        vp[-1] = -vp[-2]
    return vp


def _laplacian_padded(cp, h):
    """Five-point Laplacian of a padded field on its interior (one layer trimmed)."""
    return (cp[2:, 1:-1] + cp[:-2, 1:-1] + cp[1:-1, 2:] + cp[1:-1, :-2] - 4.0 * cp[1:-1, 1:-1]) / h**2


def _enforce_faces(u, v, cfg: SimConfig):
    if cfg.periodic:
        u[-1] = u[0]
        v[:, -1] = v[:, 0]
    else:
        u[0] = u[-1] = 0.0
        v[:, 0] = v[:, -1] = 0.0
    return u, v


# ---------------------------------------------------------------- operators

def divergence(u, v, h):
    return (u[1:] - u[:-1] + v[:, 1:] - v[:, :-1]) / h


def capillary_force(c, eps, cfg: SimConfig):
    """``-eps lap c grad c`` on x- and y-faces.

    ``lap c`` is averaged from the two adjacent cells, ``grad c`` is the
    compact face difference.
    """
    h = cfg.h
    cp = _pad_c(c, cfg, 2)
    lap = _laplacian_padded(cp, h)          # cells -1..nx, -1..ny
    cc = cp[1:-1, 1:-1]
    # x-faces 0..nx, rows 0..ny-1: cells i-1 and i
    lx = 0.5 * (lap[:-1, 1:-1] + lap[1:, 1:-1])
    gx = (cc[1:, 1:-1] - cc[:-1, 1:-1]) / h
    ly = 0.5 * (lap[1:-1, :-1] + lap[1:-1, 1:])
    gy = (cc[1:-1, 1:] - cc[1:-1, :-1]) / h
    fu = -eps * lx * gx
    fv = -eps * ly * gy
    if not cfg.periodic:
        fu[0] = fu[-1] = 0.0
        fv[:, 0] = fv[:, -1] = 0.0
    return fu, fv


def _advect_c(c, u, v, cfg: SimConfig):
    """Flux-form ``div(v c)`` with linear second-order upwind face values."""
    h = cfg.h
    cp = _pad_c(c, cfg, 2)
    # x-faces 0..nx: upwind pair (i-1, i-2) or (i, i+1)
    cl = 1.5 * cp[1:-2, 2:-2] - 0.5 * cp[0:-3, 2:-2]
    cr = 1.5 * cp[2:-1, 2:-2] - 0.5 * cp[3:, 2:-2]
    Fx = np.where(u > 0, u * cl, u * cr)
    cb = 1.5 * cp[2:-2, 1:-2] - 0.5 * cp[2:-2, 0:-3]
    ct = 1.5 * cp[2:-2, 2:-1] - 0.5 * cp[2:-2, 3:]
    Fy = np.where(v > 0, v * cb, v * ct)
    return (Fx[1:] - Fx[:-1] + Fy[:, 1:] - Fy[:, :-1]) / h


def _momentum_rhs(u, v, c, cfg: SimConfig):
    """Centered advection and viscous stress divergence on faces."""
    h = cfg.h
    nx, ny = cfg.nx, cfg.ny
    up = _pad_u(u, cfg)
    vp = _pad_v(v, cfg)
    cp = _pad_c(c, cfg, 1)
    nu_c = cfg.viscosity(cp)                                  # cells -1..nx, -1..ny

    # advection of u at x-faces i=0..nx, j=0..ny-1
    vbar = 0.25 * (vp[0:nx + 1, 1:ny + 1] + vp[1:nx + 2, 1:ny + 1] + vp[0:nx + 1, 2:ny + 2]
                   + vp[1:nx + 2, 2:ny + 2])
    uc = up[1:-1, 1:-1]
    adv_u = uc * (up[2:, 1:-1] - up[:-2, 1:-1]) / (2 * h) + vbar * (up[1:-1, 2:] - up[1:-1, :-2]) / (2 * h)
    # advection of v at y-faces i=0..nx-1, j=0..ny
    ubar = 0.25 * (up[1:nx + 1, 0:ny + 1] + up[2:nx + 2, 0:ny + 1] + up[1:nx + 1, 1:ny + 2]
                   + up[2:nx + 2, 1:ny + 2])
    vc = vp[1:-1, 1:-1]
    adv_v = ubar * (vp[2:, 1:-1] - vp[:-2, 1:-1]) / (2 * h) + vc * (vp[1:-1, 2:] - vp[1:-1, :-2]) / (2 * h)

    # stresses
    txx = 2.0 * nu_c[:, 1:-1] * (up[1:, 1:-1] - up[:-1, 1:-1]) / h      # cells -1..nx, rows 0..ny-1
    tyy = 2.0 * nu_c[1:-1, :] * (vp[1:-1, 1:] - vp[1:-1, :-1]) / h      # cells 0..nx-1, rows -1..ny
    nu_k = 0.25 * (nu_c[:-1, :-1] + nu_c[1:, :-1] + nu_c[:-1, 1:] + nu_c[1:, 1:])  # corners 0..nx, 0..ny
    u_y = (up[1:-1, 1:] - up[1:-1, :-1]) / h
    v_x = (vp[1:, 1:-1] - vp[:-1, 1:-1]) / h
    txy = nu_k * (u_y + v_x)
    visc_u = (txx[1:] - txx[:-1]) / h + (txy[:, 1:] - txy[:, :-1]) / h
    visc_v = (txy[1:] - txy[:-1]) / h + (tyy[:, 1:] - tyy[:, :-1]) / h
    return visc_u - adv_u, visc_v - adv_v


# ------------------------------------------------------------ linear solves

class _Solvers:
    """Cached spectral symbols for the Helmholtz and Poisson problems."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        nx, ny, h = cfg.nx, cfg.ny, cfg.h
        if cfg.periodic:
            kx = 2 * np.pi * np.fft.fftfreq(nx)
            ky = 2 * np.pi * np.fft.rfftfreq(ny)
            lam_x = -(4 / h**2) * np.sin(kx / 2) ** 2
            lam_y = -(4 / h**2) * np.sin(ky / 2) ** 2
            self.lap_ac = lam_x[:, None] + lam_y[None, :]
            self.lap_p = self.lap_ac
        else:
            # Dirichlet (DST-II) for c + 1, Neumann (DCT-II) for pressure
            kd = np.arange(1, nx + 1)
            ld_x = -(4 / h**2) * np.sin(np.pi * kd / (2 * nx)) ** 2
            kd = np.arange(1, ny + 1)
            ld_y = -(4 / h**2) * np.sin(np.pi * kd / (2 * ny)) ** 2
            self.lap_ac = ld_x[:, None] + ld_y[None, :]
            kn = np.arange(nx)
            ln_x = -(4 / h**2) * np.sin(np.pi * kn / (2 * nx)) ** 2
            kn = np.arange(ny)
            ln_y = -(4 / h**2) * np.sin(np.pi * kn / (2 * ny)) ** 2
            self.lap_p = ln_x[:, None] + ln_y[None, :]
        lp = self.lap_p.copy()
        lp[0, 0] = 1.0
        self.inv_lap_p = 1.0 / lp
        self.inv_lap_p[0, 0] = 0.0

    def helmholtz(self, rhs, a, b):
        """Solve ``a w - b lap w = rhs`` (w = c + 1 in wall mode)."""
        if self.cfg.periodic:
            W = sfft.rfft2(rhs) / (a - b * self.lap_ac)
            return sfft.irfft2(W, s=rhs.shape)
        W = sfft.dstn(rhs, type=2) / (a - b * self.lap_ac)
        return sfft.idstn(W, type=2)

    def poisson(self, rhs):
        """Zero-mean solution of ``lap phi = rhs`` (periodic or homogeneous Neumann)."""
        if self.cfg.periodic:
            P = sfft.rfft2(rhs) * self.inv_lap_p
            return sfft.irfft2(P, s=rhs.shape)
        P = sfft.dctn(rhs, type=2) * self.inv_lap_p
        return sfft.idctn(P, type=2)


_SOLVER_CACHE: dict = {}


def _solvers(cfg: SimConfig):
    key = (cfg.nx, cfg.ny, cfg.h, cfg.boundary)
    s = _SOLVER_CACHE.get(key)
    if s is None:
        s = _Solvers(cfg)
        _SOLVER_CACHE.clear()
        _SOLVER_CACHE[key] = s
    return s


# ------------------------------------------------------------- time step

def time_step(state: SimState, cfg: SimConfig):
    """Largest admissible step: viscous, advective, centered-advection and
    Allen-Cahn accuracy bounds, capped by ``dt_max``."""
    h = cfg.h
    nu_max = cfg.viscosity.nu_max
    nu_min = cfg.viscosity.nu_min
    bounds = [cfg.visc_safety * h**2 / (4.0 * nu_max)]
    umax = max(float(np.max(np.abs(state.u))), float(np.max(np.abs(state.v))))
    if umax > 0:
        bounds.append(cfg.cfl * h / umax)
        bounds.append(cfg.cfl * 2.0 * nu_min / umax**2)
    if cfg.m > 0:
        bounds.append(cfg.ac_accuracy * cfg.eps**2 / cfg.m)
    if cfg.dt_max is not None:
        bounds.append(cfg.dt_max)
    return float(min(bounds))


# ----------------------------------------------------------------- state

_PROFILE = None


def _profile():
    global _PROFILE
    if _PROFILE is None:
        _PROFILE = compute_profile()
    return _PROFILE


def equilibrium_stripe(cfg: SimConfig, half_width=0.25, center=None, tol=1e-13, max_iter=50):
    """Discrete periodic equilibrium with two flat interfaces normal to x.

    Newton on ``lap_h c - eps^-2 f'(c) = 0`` in 1D, started from the tanh pair
    and pinned by the reflection symmetry about the stripe center.
    """
    if not cfg.periodic:
        raise ValueError("stripe equilibrium requires periodic mode")
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    h, n, eps = cfg.h, cfg.nx, cfg.eps
    x = cfg.x0 + (np.arange(n) + 0.5) * h
    xc = cfg.x0 + 0.5 * cfg.Lx if center is None else center
    dx = x - xc
    dx = dx - cfg.Lx * np.round(dx / cfg.Lx)
    prof = _profile()
    c = prof.evaluate((half_width - np.abs(dx)) / eps)
    e = np.ones(n)
    L = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], shape=(n, n), format="lil")
    L[0, n - 1] = 1.0
    L[n - 1, 0] = 1.0
    L = L.tocsc() / h**2
    well = cfg.well
    for _ in range(max_iter):
        F = L @ c - well.d1(c) / eps**2
        J = L - sp.diags(well.d2(c) / eps**2)
        dc = spla.spsolve(J.tocsc(), -F)
        c = c + dc
        if np.max(np.abs(dc)) < tol:
            break
    F = L @ c - well.d1(c) / eps**2
    if np.max(np.abs(F)) * eps**2 > 1e-9:
        raise SimulationError(f"stripe equilibrium did not converge (residual {np.max(np.abs(F)):.2e})")
    return np.repeat(c[:, None], cfg.ny, axis=1)


def _scenario_for(cfg: SimConfig, ic: InitialCondition):
    box = (cfg.x0, cfg.y0, cfg.Lx, cfg.Ly) if cfg.periodic else None
    return ReferenceScenario("stationary_bubble", center=tuple(ic.center), R0=float(ic.radius),
                             eps=cfg.eps, alpha=cfg.alpha, delta=ic.delta, box=box)


def init_state(cfg: SimConfig, profile: Profile | None = None) -> SimState:
    """Blended-profile initial data, velocity from the descriptor, ``p = 0``.

    Raises
    ------
    ValueError
        If ``h > eps`` or the descriptor is inconsistent with the boundary mode.
    """
    if cfg.h > cfg.eps * (1 + 1e-12):
        raise ValueError(f"interface under-resolved: h={cfg.h:.4g} > eps={cfg.eps:.4g}")
    ic = cfg.init
    profile = profile or _profile()
    X, Y = cfg.centers()
    if ic.kind == "circle":
        c = leading_order_c(X, Y, 0.0, _scenario_for(cfg, ic), profile)
    elif ic.kind == "ellipse":
        a, b = ic.radius
        dx, dy = X - ic.center[0], Y - ic.center[1]
        # first-order signed distance to the ellipse, enough for initial data
        F = np.sqrt((dx / a) ** 2 + (dy / b) ** 2) - 1.0
        gn = np.hypot(dx / a**2, dy / b**2) / np.maximum(np.sqrt((dx / a) ** 2 + (dy / b) ** 2), 1e-300)
        d = -F / np.maximum(gn, 1e-300)
        c = profile.evaluate(d / cfg.eps)
    elif ic.kind == "stripe":
        c = equilibrium_stripe(cfg, float(ic.radius), ic.center[0])
    elif ic.kind == "uniform":
        c = -np.ones((cfg.nx, cfg.ny))
    elif ic.kind == "field":
        c = np.array(ic.c, dtype=float)
        if c.shape != (cfg.nx, cfg.ny):
            raise ValueError("initial field has the wrong shape")
    else:
        raise ValueError(f"unknown initial condition {ic.kind!r}")
    U = np.asarray(ic.U, dtype=float)
    if not cfg.periodic and np.any(U != 0):
        raise ValueError("uniform background flow needs periodic mode")
    u = np.full((cfg.nx + 1, cfg.ny), U[0])
    v = np.full((cfg.nx, cfg.ny + 1), U[1])
    _enforce_faces(u, v, cfg)
    return SimState(c=c, u=u, v=v, p=np.zeros((cfg.nx, cfg.ny)))


# ------------------------------------------------------------------ step

def _check(state: SimState, cfg: SimConfig):
    if not (np.all(np.isfinite(state.c)) and np.all(np.isfinite(state.u))
            and np.all(np.isfinite(state.v))):
        raise SimulationError(f"non-finite values at t={state.t:.6g} (step {state.nstep})")
    cmax = float(np.max(np.abs(state.c)))
    if cmax > C_BOUND:
        raise SimulationError(f"|c| = {cmax:.4f} exceeds {C_BOUND} at t={state.t:.6g}")


def step(state: SimState, cfg: SimConfig, dt: float | None = None) -> SimState:
    """Advance one step of size ``dt`` (default :func:`time_step`)."""
    dt = time_step(state, cfg) if dt is None else float(dt)
    sol = _solvers(cfg)
    c, u, v = state.c, state.u, state.v
    m, eps = cfg.m, cfg.eps
    S = cfg.stabilization

    # Allen-Cahn: (1 + dt S - dt m lap) c+ = c + dt S c - dt m f'(c)/eps^2 - dt div(v c)
    rhs = c + dt * S * c - dt * m * cfg.well.d1(c) / eps**2 - dt * _advect_c(c, u, v, cfg)
    a = 1.0 + dt * S
    if cfg.periodic:
        c_new = sol.helmholtz(rhs, a, dt * m)
    else:
        c_new = sol.helmholtz(rhs + a, a, dt * m) - 1.0

    if not cfg.navier_stokes:
        new = SimState(c=c_new, u=u.copy(), v=v.copy(), p=state.p.copy(), t=state.t + dt,
                       nstep=state.nstep + 1)
        _check(new, cfg)
        return new

    # momentum with nu(c+) and the capillary force of c+
    ru, rv = _momentum_rhs(u, v, c_new, cfg)
    fu, fv = capillary_force(c_new, eps, cfg)
    us = u + dt * (ru + fu)
    vs = v + dt * (rv + fv)
    _enforce_faces(us, vs, cfg)

    # projection
    h = cfg.h
    phi = sol.poisson(divergence(us, vs, h) / dt)
    if cfg.periodic:
        pp = np.pad(phi, ((1, 0), (1, 0)), mode="wrap")
        gx = np.empty_like(us)
        gx[:-1] = (pp[1:, 1:] - pp[:-1, 1:]) / h
        gx[-1] = gx[0]
        gy = np.empty_like(vs)
        gy[:, :-1] = (pp[1:, 1:] - pp[1:, :-1]) / h
        gy[:, -1] = gy[:, 0]
    else:
        gx = np.zeros_like(us)
        gx[1:-1] = (phi[1:] - phi[:-1]) / h
        gy = np.zeros_like(vs)
        gy[:, 1:-1] = (phi[:, 1:] - phi[:, :-1]) / h
    u_new = us - dt * gx
    v_new = vs - dt * gy
    _enforce_faces(u_new, v_new, cfg)
    new = SimState(c=c_new, u=u_new, v=v_new, p=phi, t=state.t + dt, nstep=state.nstep + 1)
    _check(new, cfg)
    return new


# ---------------------------------------------------------------- energy

def _grad_sq_faces(c, cfg: SimConfig):
    """Sum over faces of ``h^2 |D c|^2`` consistent with the discrete Laplacian."""
    if cfg.periodic:
        dx = np.roll(c, -1, 0) - c
        dy = np.roll(c, -1, 1) - c
        return float(np.sum(dx**2) + np.sum(dy**2))
    w = c + 1.0
    s = float(np.sum(np.diff(w, axis=0) ** 2) + np.sum(np.diff(w, axis=1) ** 2))
    # wall faces: ghost = -w, half-cell distance -> 0.5 (2w)^2
    s += 0.5 * float(np.sum((2 * w[0]) ** 2) + np.sum((2 * w[-1]) ** 2)
                     + np.sum((2 * w[:, 0]) ** 2) + np.sum((2 * w[:, -1]) ** 2))
    return s


def energy(state: SimState, cfg: SimConfig) -> EnergyDiag:
    """Kinetic, gradient and potential energy and the two dissipation integrands."""
    h, eps = cfg.h, cfg.eps
    u, v, c = state.u, state.v, state.c
    area = h * h
    if cfg.periodic:
        ke = 0.5 * area * (np.sum(u[:-1] ** 2) + np.sum(v[:, :-1] ** 2))
    else:
        ke = 0.5 * area * (np.sum(u**2) + np.sum(v**2))
    grad = 0.5 * eps * _grad_sq_faces(c, cfg)          # h^2 * |grad c|^2 = (dc)^2
    pot = area * float(np.sum(cfg.well.value(c))) / eps
    cp = _pad_c(c, cfg, 1)
    lap = _laplacian_padded(cp, h)
    mu = -eps * lap + cfg.well.d1(c) / eps
    chem = area * float(np.sum(mu**2)) / eps
    # |Dv|^2 from cell-centered normal strains and corner shear
    up = _pad_u(u, cfg)
    vp = _pad_v(v, cfg)
    exx = (u[1:] - u[:-1]) / h
    eyy = (v[:, 1:] - v[:, :-1]) / h
    exy = 0.5 * ((up[1:-1, 1:] - up[1:-1, :-1]) / h + (vp[1:, 1:-1] - vp[:-1, 1:-1]) / h)
    if cfg.periodic:
        exy_sum = np.sum(exy[:-1, :-1] ** 2)
    else:
        exy_sum = np.sum(exy**2)
    visc = area * float(np.sum(exx**2) + np.sum(eyy**2) + 2.0 * exy_sum)
    return EnergyDiag(E=float(ke + grad + pot), kinetic=float(ke), gradient=float(grad),
                      potential=float(pot), viscous_dissipation=visc, chemical_dissipation=chem,
                      mu=mu)


# ------------------------------------------------------------- interface

@dataclass(frozen=True, eq=False)
class Interface:
    polyline: np.ndarray       # (M, 2) closed, physical coordinates
    length: float
    area: float
    center: np.ndarray | None
    radius: float | None
    fit_residual: float | None


def _fit_circle(P):
    """Algebraic least-squares circle fit."""
    x, y = P[:, 0], P[:, 1]
    A = np.column_stack([2 * x, 2 * y, np.ones_like(x)])
    b = x**2 + y**2
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    cx, cy, k = sol
    R = float(np.sqrt(k + cx**2 + cy**2))
    res = float(np.max(np.abs(np.hypot(x - cx, y - cy) - R)))
    return np.array([cx, cy]), R, res


def extract_interface(c, cfg: SimConfig, level=0.0, circle_tol=0.1) -> Interface:
    """Longest closed zero contour by marching squares, with a circle fit
    when the contour is within ``circle_tol * R`` of a circle.

    Raises
    ------
    NoInterfaceError
        If ``c`` has no sign change.
    """
    c = np.asarray(c, dtype=float)
    if not (np.min(c) < level < np.max(c)):
        raise NoInterfaceError("field has no zero crossing")
    contours = measure.find_contours(c, level)
    closed = [P for P in contours if len(P) > 3 and np.allclose(P[0], P[-1])]
    pool = closed or contours
    P = max(pool, key=len)
    h = cfg.h
    P = np.column_stack([cfg.x0 + (P[:, 0] + 0.5) * h, cfg.y0 + (P[:, 1] + 0.5) * h])
    seg = np.diff(P, axis=0)
    length = float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))
    area = float(0.5 * abs(np.sum(P[:-1, 0] * P[1:, 1] - P[1:, 0] * P[:-1, 1])))
    center, R, res = _fit_circle(P[:-1] if np.allclose(P[0], P[-1]) else P)
    if res > circle_tol * R:
        center, R = None, None
    return Interface(polyline=P, length=length, area=area, center=center, radius=R,
                     fit_residual=res)


# -------------------------------------------------------------------- run

@dataclass(eq=False)
class RunResult:
    diagnostics: dict
    final: SimState
    snapshots: list
    config: SimConfig
    energy_ok: bool = True
    max_energy_growth: float = 0.0
    max_step_increase: float = -np.inf    # max (E_n+1 - E_n) / E_0 over steps
    files: list = field(default_factory=list)


_DIAG_KEYS = ("t", "E", "Ekin", "Egrad", "Epot", "divmax", "radius", "cx", "cy", "dt")


def _record(diag, state, cfg, dt, want_interface=True):
    e = energy(state, cfg)
    div = float(np.max(np.abs(divergence(state.u, state.v, cfg.h))))
    R = cx = cy = np.nan
    if want_interface:
        try:
            itf = extract_interface(state.c, cfg)
            if itf.radius is not None:
                R, (cx, cy) = itf.radius, itf.center
        except NoInterfaceError:
            pass
    for k, val in zip(_DIAG_KEYS, (state.t, e.E, e.kinetic, e.gradient, e.potential, div, R, cx, cy,
                                   dt)):
        diag[k].append(float(val))
    return e


def run(cfg: SimConfig, state: SimState | None = None, out_dir=None, callback=None,
        interface=True, energy_tol=(1e-8, 1e-3)) -> RunResult:
    """Integrate to ``cfg.T`` recording diagnostics every ``output_every``.

    Energy is checked each step with ``energy_tol = (step, run)``: for
    Allen-Cahn-only runs (zero velocity throughout) against
    ``E(t_n+1) <= E(t_n) + step E(0)``, otherwise against
    ``E(t) <= E(0) (1 + run)``.  A failed check sets ``energy_ok`` false.
    """
    tol_step, tol_run = energy_tol
    state = init_state(cfg) if state is None else state
    _check(state, cfg)
    diag = {k: [] for k in _DIAG_KEYS}
    e0 = _record(diag, state, cfg, 0.0, interface).E
    snaps = [(state.t, state.c.copy())] if cfg.snapshot_every else []
    next_out = cfg.output_every if cfg.output_every else np.inf
    next_snap = cfg.snapshot_every if cfg.snapshot_every else np.inf
    energy_ok = True
    growth = 0.0
    step_inc = -np.inf
    e_prev = e0
    flow_free = not (np.any(state.u) or np.any(state.v))
    T = cfg.T
    while state.t < T - 1e-14 * max(T, 1.0):
        dt = time_step(state, cfg)
        dt = min(dt, T - state.t, next_out - state.t, next_snap - state.t)
        state = step(state, cfg, dt)
        if cfg.check_energy:
            e_now = energy(state, cfg).E
            flow_free = flow_free and not (np.any(state.u) or np.any(state.v))
            growth = max(growth, (e_now - e0) / max(e0, 1e-300))
            step_inc = max(step_inc, (e_now - e_prev) / max(e0, 1e-300))
            if flow_free:
                if e_now > e_prev + tol_step * e0:
                    energy_ok = False
            elif e_now > e0 * (1 + tol_run):
                energy_ok = False
            e_prev = e_now
        hit_out = abs(state.t - next_out) < 1e-12 * max(T, 1.0)
        if hit_out:
            _record(diag, state, cfg, dt, interface)
            next_out += cfg.output_every
        if abs(state.t - next_snap) < 1e-12 * max(T, 1.0):
            snaps.append((state.t, state.c.copy()))
            next_snap += cfg.snapshot_every
        if callback is not None:
            callback(state)
    if not diag["t"] or diag["t"][-1] != state.t:
        _record(diag, state, cfg, 0.0, interface)
    if cfg.snapshot_every and snaps[-1][0] != state.t:
        snaps.append((state.t, state.c.copy()))
    result = RunResult(diagnostics={k: np.array(v) for k, v in diag.items()}, final=state,
                       snapshots=snaps, config=cfg, energy_ok=energy_ok, max_energy_growth=growth,
                       max_step_increase=step_inc)
    if out_dir is not None:
        result.files = write_run(result, out_dir)
    return result


def write_run(result: RunResult, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    path = out / "diagnostics.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        keys = ("t", "E", "Ekin", "Egrad", "Epot", "divmax", "radius")
        w.writerow(keys)
        for row in zip(*(result.diagnostics[k] for k in keys)):
            w.writerow([repr(float(x)) for x in row])
    files.append(path)
    cfg = result.config
    snaps = result.snapshots or [(result.final.t, result.final.c)]
    for i, (t, c) in enumerate(snaps):
        base = out / f"snapshot_{i:04d}"
        arr = np.ascontiguousarray(c, dtype="<f8")
        arr.tofile(base.with_suffix(".bin"))
        meta = {"nx": cfg.nx, "ny": cfg.ny, "h": cfg.h, "t": t, "eps": cfg.eps,
                "alpha": cfg.alpha, "x0": cfg.x0, "y0": cfg.y0, "field": "c",
                "dtype": "float64-le", "shape": list(arr.shape), "order": "C (x, y)"}
        base.with_suffix(".json").write_text(json.dumps(meta, indent=2))
        files += [base.with_suffix(".bin"), base.with_suffix(".json")]
    return files
