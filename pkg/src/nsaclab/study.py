"""Epsilon sweeps, error norms against sharp-interface references, and
mobility-scaling measurements."""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .geometry import circle as make_circle, signed_distance
from .potential import compute_profile
from .reference import ReferenceScenario, leading_order_c
from .solver import InitialCondition, SimConfig, extract_interface, run

__all__ = [
    "ErrorReport",
    "OrderFit",
    "fit_order",
    "error_norms",
    "convergence_study",
    "mobility_comparison",
    "drift_rate",
    "write_report",
    "pressure_jump",
]

NORM_KEYS = ("linf_l2", "grad_off", "grad_tan", "grad_near", "radius_error")


@dataclass(frozen=True)
class OrderFit:
    order: float
    ci_low: float
    ci_high: float
    n: int


def fit_order(eps, errors, confidence=0.95) -> OrderFit:
    """Least-squares slope of ``log(error)`` against ``log(eps)`` with a t-interval."""
    eps = np.asarray(eps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if eps.size < 2:
        raise ValueError("need at least two points for an order fit")
    if np.any(errors <= 0):
        raise ValueError("errors must be positive for a log-log fit")
    res = stats.linregress(np.log(eps), np.log(errors))
    if eps.size > 2:
        q = stats.t.ppf(0.5 + confidence / 2, eps.size - 2)
        half = q * res.stderr
    else:
        half = float("nan")
    return OrderFit(float(res.slope), float(res.slope - half), float(res.slope + half), int(eps.size))


@dataclass
class ErrorReport:
    alpha: float
    records: list = field(default_factory=list)    # dicts: eps, reference, norms...
    fits: dict = field(default_factory=dict)       # (reference, norm) -> OrderFit
    failed: str | None = None

    def errors(self, reference="corrected", key="linf_l2"):
        rows = [r for r in self.records if r["reference"] == reference]
        return np.array([r["eps"] for r in rows]), np.array([r[key] for r in rows])

    def summary(self):
        return {"alpha": self.alpha, "failed": self.failed,
                "fits": {f"{ref}:{key}": fit.__dict__ for (ref, key), fit in self.fits.items()}}


def _grad(e, cfg: SimConfig):
    h = cfg.h
    if cfg.periodic:
        gx = (np.roll(e, -1, 0) - np.roll(e, 1, 0)) / (2 * h)
        gy = (np.roll(e, -1, 1) - np.roll(e, 1, 1)) / (2 * h)
        return gx, gy
    return np.gradient(e, h)


def _tangents(X, Y, sc: ReferenceScenario, t, mask):
    """Unit tangents of the reference circle at the projections of masked points."""
    cx, cy = sc.center_at(t)
    dx, dy = X[mask] - cx, Y[mask] - cy
    if sc.box is not None:
        _, _, Lx, Ly = sc.box
        dx = dx - Lx * np.round(dx / Lx)
        dy = dy - Ly * np.round(dy / Ly)
    curve = make_circle(sc.radius_at(t), 256)
    _, s = signed_distance(np.stack([dx, dy], -1), curve)
    _, tau, _, _, _ = curve.frame(s)
    return tau


def _trap_time(vals, t):
    vals = np.asarray(vals, dtype=float)
    if vals.size < 2:
        return 0.0
    return float(np.trapezoid(vals, t))


def error_norms(snapshots, scenario: ReferenceScenario, eps, cfg: SimConfig, delta=None,
                profile=None, radii=None):
    """Leading-order error norms of snapshots ``[(t, c), ...]`` against ``scenario``.

    Returns a dict with
      linf_l2      max_t ||c - c_ref||_{L2}
      grad_off     eps^(1/4) ||grad(c - c_ref)||_{L2((0,T) x Omega minus Gamma(delta))}
      grad_tan     eps^(1/4) ||tau . grad(c - c_ref)||_{L2((0,T) x Gamma(2 delta))}
      grad_near    eps ||grad(c - c_ref)||_{L2((0,T) x Gamma(2 delta))}
      radius_error max_t |R_fit - R_ref| (nan when no circle is found)
    Space integrals are midpoint sums, time integrals trapezoid over snapshots.
    """
    if not snapshots:
        raise ValueError("no snapshots to evaluate")
    profile = profile or compute_profile()
    delta = scenario.R0 / 4 if delta is None else delta
    X, Y = cfg.centers()
    area = cfg.h**2
    ts, l2, off, tan, near, rerr = [], [], [], [], [], []
    for k, (t, c) in enumerate(snapshots):
        cref = leading_order_c(X, Y, t, scenario, profile)
        e = np.asarray(c) - cref
        d = scenario.distance(X, Y, t)
        gx, gy = _grad(e, cfg)
        g2 = gx**2 + gy**2
        band = np.abs(d) < 2 * delta
        ts.append(t)
        l2.append(np.sqrt(area * np.sum(e**2)))
        off.append(area * np.sum(g2[np.abs(d) >= delta]))
        near.append(area * np.sum(g2[band]))
        if np.any(band):
            tau = _tangents(X, Y, scenario, t, band)
            tan.append(area * np.sum((gx[band] * tau[:, 0] + gy[band] * tau[:, 1]) ** 2))
        else:
            tan.append(0.0)
        if radii is not None:
            R = radii[k]
        else:
            try:
                R = extract_interface(c, cfg).radius
            except ValueError:
                R = None
        rerr.append(np.nan if R is None else abs(R - scenario.radius_at(t)))
    ts = np.array(ts)
    return {
        "linf_l2": float(np.max(l2)),
        "grad_off": float(eps**0.25 * np.sqrt(_trap_time(off, ts))),
        "grad_tan": float(eps**0.25 * np.sqrt(_trap_time(tan, ts))),
        "grad_near": float(eps * np.sqrt(_trap_time(near, ts))),
        "radius_error": float(np.nanmax(rerr)) if np.any(np.isfinite(rerr)) else float("nan"),
    }


def _config_for(eps, base: SimConfig, scenario: ReferenceScenario, alpha, T, n_snap, cells_per_eps):
    n = int(round(base.Lx * cells_per_eps / eps))
    ny = int(round(base.Ly * cells_per_eps / eps))
    init = InitialCondition(kind="circle", center=tuple(scenario.center), radius=scenario.R0,
                            U=tuple(scenario.U), delta=scenario.delta)
    return replace(base, nx=n, ny=ny, eps=eps, alpha=alpha, T=T, snapshot_every=T / n_snap,
                   output_every=T / n_snap, init=init)


def _one_run(args):
    eps, cfg, scen, delta = args
    res = run(cfg, interface=False)
    corrected = replace(scen, eps=eps, alpha=cfg.alpha, kind="mobility_corrected_bubble")
    plain = corrected.uncorrected()
    out = []
    for name, sc in (("corrected", corrected), ("uncorrected", plain)):
        norms = error_norms(res.snapshots, sc, eps, cfg, delta)
        out.append({"eps": eps, "alpha": cfg.alpha, "reference": name, "nx": cfg.nx,
                    "steps": res.final.nstep, "energy_ok": res.energy_ok,
                    "energy_growth": res.max_energy_growth, **norms})
    return out


def convergence_study(alpha, eps_list, scenario: ReferenceScenario, base: SimConfig | None = None,
                      T=1.0 / 64, n_snap=8, cells_per_eps=2.0, delta=None, workers=1) -> ErrorReport:
    """Run the solver per eps (``h = eps / cells_per_eps``) and compare with the
    drift-corrected and the uncorrected (pure transport) references.

    ``eps_list`` must be descending.  A failing run stops the sweep and the
    partial report carries the error message in ``failed``.
    """
    eps_list = list(eps_list)
    report = ErrorReport(alpha=alpha)
    if not eps_list:
        return report
    if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly descending")
    base = base or SimConfig()
    box = (base.x0, base.y0, base.Lx, base.Ly) if base.periodic else None
    scenario = replace(scenario, box=box)
    jobs = []
    for eps in eps_list:
        sc = replace(scenario, eps=eps, alpha=alpha)
        sc.validate(T)
        jobs.append((eps, _config_for(eps, base, sc, alpha, T, n_snap, cells_per_eps), sc, delta))
    try:
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = list(pool.map(_one_run, jobs))
        else:
            results = []
            for job in jobs:
                results.append(_one_run(job))
    except Exception as exc:  # partial report
        report.failed = f"{type(exc).__name__}: {exc}"
        results = results if "results" in locals() else []
    for rows in results:
        report.records.extend(rows)
    if report.failed is None and len(eps_list) >= 2:
        for ref in ("corrected", "uncorrected"):
            for key in NORM_KEYS:
                e, v = report.errors(ref, key)
                if np.all(np.isfinite(v)) and np.all(v > 0):
                    report.fits[(ref, key)] = fit_order(e, v)
    return report


def drift_rate(times, radii):
    """Slope of ``R(t)^2`` by linear least squares."""
    times = np.asarray(times, float)
    R2 = np.asarray(radii, float) ** 2
    ok = np.isfinite(R2)
    return float(np.polyfit(times[ok], R2[ok], 1)[0])


def mobility_comparison(eps, alpha_list, scenario: ReferenceScenario | None = None,
                        base: SimConfig | None = None, cells_per_eps=2.0, n_out=10,
                        horizons=None, shrink=0.3, workers=1):
    """Measured ``d(R^2)/dt`` of the fitted interface circle against ``-2 eps^alpha``.

    Each horizon is chosen so that ``R^2`` drops by the fraction ``shrink``
    under the reference law, unless given in ``horizons``.
    """
    scenario = scenario or ReferenceScenario("stationary_bubble")
    base = base or SimConfig()
    rows = []
    jobs = []
    for i, alpha in enumerate(alpha_list):
        if alpha not in (0, 0.5, 1, 0.0, 1.0):
            raise ValueError(f"alpha must be one of 0, 1/2, 1; got {alpha}")
        rate = 2.0 * eps**alpha
        T = horizons[i] if horizons is not None else shrink * scenario.R0**2 / rate
        sc = replace(scenario, eps=eps, alpha=alpha)
        cfg = _config_for(eps, base, sc, alpha, T, n_out, cells_per_eps)
        cfg = replace(cfg, snapshot_every=None)
        jobs.append((alpha, cfg))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(run, [cfg for _, cfg in jobs]))
    else:
        results = [run(cfg) for _, cfg in jobs]
    for (alpha, cfg), res in zip(jobs, results):
        d = res.diagnostics
        measured = drift_rate(d["t"], d["radius"])
        expected = -2.0 * eps**alpha
        rows.append({"eps": eps, "alpha": alpha, "T": cfg.T, "rate": measured,
                     "expected": expected, "rel_error": abs(measured / expected - 1.0),
                     "energy_ok": res.energy_ok, "energy_growth": res.max_energy_growth,
                     "steps": res.final.nstep})
    return rows


def pressure_jump(p, cfg: SimConfig, center, radius, margin=None):
    """Mean pressure inside ``|x - center| < radius - margin`` minus the mean
    outside ``radius + margin`` (minimum image in periodic mode).

    ``margin`` defaults to ``4 eps``, beyond which the diffuse layer's
    gradient-squared contribution to the discrete pressure has decayed.
    """
    margin = 4.0 * cfg.eps if margin is None else margin
    X, Y = cfg.centers()
    dx, dy = X - center[0], Y - center[1]
    if cfg.periodic:
        dx = dx - cfg.Lx * np.round(dx / cfg.Lx)
        dy = dy - cfg.Ly * np.round(dy / cfg.Ly)
    r = np.hypot(dx, dy)
    inner = r < radius - margin
    outer = r > radius + margin
    if not np.any(inner) or not np.any(outer):
        raise ValueError("margin leaves no inner or outer cells")
    return float(np.mean(p[inner]) - np.mean(p[outer]))


def write_report(report: ErrorReport, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = ["eps", "alpha", "reference", "nx", *NORM_KEYS]
    with (out / "errors.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in report.records:
            w.writerow([r[c] for c in cols])
    (out / "summary.json").write_text(json.dumps(report.summary(), indent=2))
    return [out / "errors.csv", out / "summary.json"]
