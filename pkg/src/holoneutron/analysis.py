"""Inverse problems and design on top of the convolved forward model.

* ``fit``: weighted damped least squares of (index modulation, thickness,
  rocking-angle offset) against a measured rocking curve.
* ``design_three_port``: tilt at which orders -1, 0, +1 carry equal intensity.
* ``pendelloesung_scan``: first-order Bragg efficiency versus thickness or
  wavelength.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .cwt import DEFAULT_ORDERS, DEFAULT_STEPS, order_efficiencies
from .errors import DomainError
from .instrument import DEFAULT_NODES, REPORTED_ORDERS, RockingCurve, convolved_array
from .model import Beam, Grating, bragg_angle

PARAMETERS = ("index_modulation", "thickness", "theta_offset")
BOUND_LIMIT = 0.93
BOUND_SLACK = 0.005
BALANCE_THRESHOLD = 0.05
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class FitProblem:
    data: RockingCurve
    grating: Grating
    beam: Beam
    free: Sequence[str]
    bounds: dict[str, tuple[float, float]]
    initial: dict[str, float] = field(default_factory=dict)
    orders: int = DEFAULT_ORDERS
    nodes: int = DEFAULT_NODES
    steps: int = DEFAULT_STEPS
    max_iter: int = 200

    def __post_init__(self) -> None:
        self.free = tuple(self.free)
        if not self.free:
            raise ValueError("no free parameters")
        for name in self.free:
            if name not in PARAMETERS:
                raise ValueError(f"unknown parameter {name!r}; choose from {PARAMETERS}")
            if name not in self.bounds:
                raise ValueError(f"no bounds for free parameter {name!r}")
            lo, hi = self.bounds[name]
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bounds for {name!r} must be finite with lo < hi")
            start = self.start[name]
            if not lo <= start <= hi:
                raise ValueError(f"initial {name}={start:g} outside bounds [{lo:g}, {hi:g}]")
        if len(self.data) < 3 * len(self.free):
            raise ValueError(f"need >= {3 * len(self.free)} theta samples for {len(self.free)} free parameters")
        if self.data.sigma is None:
            raise ValueError("data must carry sigma values")

    @property
    def start(self) -> dict[str, float]:
        base = {
            "index_modulation": self.grating.index_modulation,
            "thickness": self.grating.thickness,
            "theta_offset": 0.0,
        }
        base.update(self.initial)
        return base


@dataclass
class FitResult:
    values: dict[str, float]
    errors: dict[str, float]
    chi2: float
    reduced_chi2: float
    iterations: int
    converged: bool
    message: str
    bounds: dict[str, tuple[float, float]]
    history: list[float] = field(default_factory=list)
    degenerate: list[dict[str, float]] = field(default_factory=list)

    def bound_status(self, name: str) -> str:
        if name not in self.bounds:
            return "fixed"
        lo, hi = self.bounds[name]
        tol = 1e-9 * (hi - lo)
        if self.values[name] <= lo + tol:
            return "at_lower"
        if self.values[name] >= hi - tol:
            return "at_upper"
        return "free"

    def to_csv(self, target) -> None:
        rows = [[name, f"{self.values[name]:.10g}", f"{self.errors.get(name, math.nan):.6g}",
                 self.bound_status(name)] for name in self.values]
        writer = csv.writer(target, lineterminator="\n")
        writer.writerow(("parameter", "value", "std_error", "bound_status"))
        writer.writerows(rows)

    def report(self) -> str:
        out = io.StringIO()
        out.write(f"converged: {'yes' if self.converged else 'no'} ({self.message})\n")
        out.write(f"iterations: {self.iterations}\n")
        out.write(f"chi2: {self.chi2:.6g}   reduced chi2: {self.reduced_chi2:.6g}\n")
        out.write(f"{'parameter':<18}{'value':>16}{'std error':>14}  bound\n")
        for name, value in self.values.items():
            out.write(f"{name:<18}{value:>16.8g}{self.errors.get(name, math.nan):>14.4g}  "
                      f"{self.bound_status(name)}\n")
        for d in self.degenerate:
            combo = ", ".join(f"{k}:{v:+.3f}" for k, v in d.items())
            out.write(f"degenerate direction: {combo}\n")
        return out.getvalue()


def model_curve(grating: Grating, beam: Beam, thetas: np.ndarray, params: dict[str, float], *,
                orders: int = DEFAULT_ORDERS, nodes: int = DEFAULT_NODES,
                steps: int = DEFAULT_STEPS, check: bool = False) -> np.ndarray:
    """Convolved efficiencies of orders -2..2, shape (len(thetas), 5).

    The offset is added to the data angles: true incidence = theta + offset.
    """
    g = grating.with_(index_modulation=params["index_modulation"], thickness=params["thickness"])
    eta = convolved_array(g, beam, np.asarray(thetas) + params["theta_offset"],
                          orders=orders, nodes=nodes, steps=steps, check=check)
    return eta[:, [m + orders for m in REPORTED_ORDERS]]


class _Objective:
    def __init__(self, problem: FitProblem):
        self.p = problem
        self.fixed = problem.start
        lo = np.array([problem.bounds[n][0] for n in problem.free])
        hi = np.array([problem.bounds[n][1] for n in problem.free])
        self.lo, self.scale = lo, hi - lo
        self.weights = 1.0 / problem.data.sigma[:, None]

    def params(self, u: np.ndarray) -> dict[str, float]:
        values = dict(self.fixed)
        values.update(zip(self.p.free, self.lo + u * self.scale))
        return values

    def residuals(self, u: np.ndarray, check: bool = False) -> np.ndarray:
        p = self.p
        model = model_curve(p.grating, p.beam, p.data.theta, self.params(u),
                            orders=p.orders, nodes=p.nodes, steps=p.steps, check=check)
        return ((model - p.data.eta) * self.weights).ravel()

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        cols = []
        for i in range(len(u)):
            h = max(1e-6 * abs(u[i]), 1e-12 / self.scale[i], 1e-9)
            up, dn = u.copy(), u.copy()
            up[i] = min(u[i] + h, 1.0)
            dn[i] = max(u[i] - h, 0.0)
            cols.append((self.residuals(up) - self.residuals(dn)) / (up[i] - dn[i]))
        return np.column_stack(cols)


def fit(problem: FitProblem, *, ftol: float = 1e-8, gtol: float = 1e-8) -> FitResult:
    """Levenberg-Marquardt over box-bounded parameters rescaled to [0, 1].

    Jacobians are central finite differences. Steps that leave the box are
    projected back onto it. Standard errors come from (J^T J)^-1 at the
    optimum; when J^T J is near singular the weak directions are reported
    instead and the affected errors are NaN.
    """
    obj = _Objective(problem)
    u = (np.array([problem.start[n] for n in problem.free]) - obj.lo) / obj.scale
    r = obj.residuals(u, check=True)
    chi2 = float(r @ r)
    history = [chi2]
    lam = 1e-3
    converged, message, iterations = False, "iteration cap reached", 0
    J = obj.jacobian(u)
    while iterations < problem.max_iter:
        iterations += 1
        g = J.T @ r
        A = J.T @ J
        diag = np.maximum(np.diag(A), 1e-30)
        if np.max(np.abs(g) / np.sqrt(diag)) <= gtol * max(math.sqrt(chi2), 1e-300):
            converged, message = True, "gradient below tolerance"
            break
        accepted = False
        while lam < 1e12:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = np.clip(u + step, 0.0, 1.0)
            if np.allclose(trial, u, rtol=0, atol=1e-15):
                break
            r_trial = obj.residuals(trial)
            chi2_trial = float(r_trial @ r_trial)
            if chi2_trial < chi2:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            converged, message = True, "no further decrease possible"
            break
        decrease = (chi2 - chi2_trial) / max(chi2, 1e-300)
        u, r, chi2 = trial, r_trial, chi2_trial
        history.append(chi2)
        lam = max(lam / 10.0, 1e-12)
        J = obj.jacobian(u)
        if decrease < ftol:
            converged, message = True, "relative chi2 decrease below tolerance"
            break

    # re-run the accepted point with the quadrature check on
    r = obj.residuals(u, check=True)
    values = obj.params(u)
    dof = max(len(r) - len(u), 1)
    errors, degenerate = _standard_errors(J, obj.scale, problem.free)
    return FitResult(
        values=values,
        errors=errors,
        chi2=chi2,
        reduced_chi2=chi2 / dof,
        iterations=iterations,
        converged=converged,
        message=message,
        bounds={n: tuple(problem.bounds[n]) for n in problem.free},
        history=history,
        degenerate=degenerate,
    )


def _standard_errors(J: np.ndarray, scale: np.ndarray, names: Sequence[str]):
    A = J.T @ J
    w, V = np.linalg.eigh(A)
    cutoff = 1e-12 * max(w.max(), 1e-300)
    weak = w <= cutoff
    errors = {}
    if not np.any(weak):
        cov = (V / w) @ V.T
        for i, n in enumerate(names):
            errors[n] = float(math.sqrt(cov[i, i]) * scale[i])
        return errors, []
    degenerate = []
    for j in np.flatnonzero(weak):
        vec = V[:, j] * scale
        vec = vec / np.max(np.abs(vec))
        degenerate.append({n: float(v) for n, v in zip(names, vec)})
    involved = np.any(np.abs(V[:, weak]) > 1e-6, axis=1)
    for i, n in enumerate(names):
        errors[n] = math.nan if involved[i] else float(math.sqrt(1.0 / A[i, i]) * scale[i])
    return errors, degenerate


# --- design ------------------------------------------------------------------

@dataclass
class DesignPoint:
    tilt: float
    efficiencies: dict[int, float]
    total: float
    imbalance: float
    balanced: bool

    @property
    def within_bound(self) -> bool:
        return self.total <= BOUND_LIMIT + BOUND_SLACK

    def report(self) -> str:
        out = io.StringIO()
        out.write(f"tilt: {math.degrees(self.tilt):.3f} deg\n")
        for m in REPORTED_ORDERS:
            out.write(f"eta[{m:+d}]: {self.efficiencies[m]:.5f}\n")
        out.write(f"total (-1,0,+1): {self.total:.5f}\n")
        out.write(f"imbalance: {self.imbalance:.5f}\n")
        out.write(f"balanced point found: {'yes' if self.balanced else 'no'}\n")
        if self.balanced:
            out.write(f"total within {BOUND_LIMIT}+{BOUND_SLACK}: {'yes' if self.within_bound else 'no'}\n")
        return out.getvalue()


def split_at_normal(grating: Grating, beam: Beam, tilts, *, orders: int = DEFAULT_ORDERS,
                    nodes: int = DEFAULT_NODES, steps: int = DEFAULT_STEPS,
                    check: bool = False) -> np.ndarray:
    """Convolved efficiencies at theta = 0 for each tilt; shape (len(tilts), 2*orders + 1)."""
    tilts = np.atleast_1d(np.asarray(tilts, dtype=float))
    return np.array([convolved_array(grating.with_(tilt=float(t)), beam, [0.0], orders=orders,
                                     nodes=nodes, steps=steps, check=check)[0] for t in tilts])


def imbalance(eta: np.ndarray, orders: int = DEFAULT_ORDERS) -> np.ndarray:
    three = eta[..., orders - 1:orders + 2]
    return three.max(axis=-1) - three.min(axis=-1)


def design_three_port(grating: Grating, beam: Beam, tilt_range: tuple[float, float], *,
                      scan_points: int = 41, tolerance: float = math.radians(0.05),
                      orders: int = DEFAULT_ORDERS, nodes: int = DEFAULT_NODES,
                      steps: int = DEFAULT_STEPS) -> DesignPoint:
    """Tilt minimizing max-min of (eta_-1, eta_0, eta_+1) at normal incidence.

    A uniform scan locates the best sample (ties go to the smallest tilt);
    golden-section search then refines it between its neighbours.
    """
    lo, hi = sorted(tilt_range)
    if not (abs(lo) < math.pi / 2 and abs(hi) < math.pi / 2):
        raise DomainError("tilt range must lie inside (-pi/2, pi/2)")
    if scan_points < 3:
        raise ValueError("need at least three scan points")

    def eps(t: float) -> float:
        return float(imbalance(split_at_normal(grating, beam, [t], orders=orders,
                                               nodes=nodes, steps=steps)[0], orders))

    tilts = np.linspace(lo, hi, scan_points)
    values = imbalance(split_at_normal(grating, beam, tilts, orders=orders, nodes=nodes, steps=steps), orders)
    i = int(np.argmin(values))
    a, b = tilts[max(i - 1, 0)], tilts[min(i + 1, scan_points - 1)]
    best_t, best_e = float(tilts[i]), float(values[i])
    t, e = _golden_min(eps, a, b, tolerance)
    if e < best_e:
        best_t, best_e = t, e
    eta = convolved_array(grating.with_(tilt=best_t), beam, [0.0], orders=orders,
                          nodes=nodes, steps=steps, check=True)[0]
    effs = {m: float(eta[m + orders]) for m in range(-orders, orders + 1)}
    total = effs[-1] + effs[0] + effs[1]
    eps_final = float(imbalance(eta, orders))
    return DesignPoint(tilt=best_t, efficiencies=effs, total=total, imbalance=eps_final,
                       balanced=eps_final < BALANCE_THRESHOLD)


def _golden_min(f: Callable[[float], float], a: float, b: float, tol: float) -> tuple[float, float]:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


# --- Pendelloesung -------------------------------------------------------------

@dataclass
class PendelloesungCurve:
    variable: str
    values: np.ndarray
    eta: np.ndarray
    first_maximum: float | None


def pendelloesung_scan(grating: Grating, wavelength: float, variable: str,
                       value_range: tuple[float, float], n: int, *,
                       orders: int = DEFAULT_ORDERS, steps: int = DEFAULT_STEPS) -> PendelloesungCurve:
    """First-order efficiency at Bragg incidence versus effective thickness or wavelength.

    In a wavelength scan the index modulation given for ``wavelength`` is
    rescaled as lambda^2 and the incidence follows the Bragg angle of each
    sample. The first maximum is refined with a bounded scalar search.
    """
    if variable not in ("thickness", "wavelength"):
        raise ValueError("variable must be 'thickness' or 'wavelength'")
    lo, hi = value_range
    if not 0 < lo < hi:
        raise ValueError("range must be positive and increasing")
    if n < 8:
        raise ValueError("need at least 8 samples")
    values = np.linspace(lo, hi, n)
    eta1 = _bragg_eta1(grating, wavelength, variable, values, orders, steps)
    first = None
    if grating.index_modulation > 0:
        peaks = np.flatnonzero((eta1[1:-1] >= eta1[:-2]) & (eta1[1:-1] > eta1[2:])) + 1
        if len(peaks):
            j = peaks[0]
            res = minimize_scalar(
                lambda v: -_bragg_eta1(grating, wavelength, variable, np.array([v]), orders, steps)[0],
                bounds=(values[j - 1], values[j + 1]), method="bounded",
                options={"xatol": 1e-6 * values[j]},
            )
            first = float(res.x)
    return PendelloesungCurve(variable, values, eta1, first)


def _bragg_eta1(grating: Grating, wavelength: float, variable: str, values: np.ndarray,
                orders: int, steps: int) -> np.ndarray:
    if variable == "thickness":
        theta = bragg_angle(wavelength, grating.spacing)
        eta = order_efficiencies(grating.spacing, values, grating.index_modulation, wavelength, theta,
                                 mean_index=grating.mean_index, orders=orders, steps=steps)
    else:
        theta = np.array([bragg_angle(v, grating.spacing) for v in values])
        dn = grating.index_modulation * (values / wavelength) ** 2
        eta = order_efficiencies(grating.spacing, grating.effective_thickness, dn, values, theta,
                                 mean_index=grating.mean_index, orders=orders, steps=steps)
    return eta[:, orders + 1]
