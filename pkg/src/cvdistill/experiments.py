"""Sweeps, optimisers and searches over the local-squeezing protocol."""

from __future__ import annotations

import dataclasses
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .distiller import ProtocolParams, distill
from .errors import CVDistillError, InvalidParameter, NoTransitionError
from .fock import converge_truncation, mixture_to_fock
from .metrics import log_negativity_value, teleport_fidelity_mixture

OBJECTIVES = ("E_N", "p_succ", "fidelity")
VARIABLES = ("r", "r_prime", "eta", "T")
DEFAULT_TOL = 1e-4
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ExperimentRecord:
    """Inputs and outputs of one protocol evaluation."""

    index: int
    params: ProtocolParams
    E_N: float = math.nan
    p_succ: float = math.nan
    fidelity: float = math.nan
    n_max_used: Optional[int] = None
    status: str = "ok"
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def row(self) -> dict:
        """Flat mapping in output-column order (wall time excluded)."""
        p = self.params
        angles = p.angles or (0.0, 0.0, 0.0, 0.0)
        out = {
            "index": self.index,
            "r": p.r,
            "r_prime": p.r_prime_a,
            "T": p.T,
            "eta": p.eta,
            "theta_a": angles[0],
            "phi_a": angles[1],
            "theta_b": angles[2],
            "phi_b": angles[3],
            "E_N": self.E_N,
            "p_succ": self.p_succ,
            "fidelity": self.fidelity,
            "n_max": self.n_max_used,
            "status": self.status,
        }
        out.update(self.extra)
        return out


@dataclass(frozen=True)
class SweepSpec:
    """A one-dimensional grid over a protocol parameter.

    ``tie_r_prime`` sets ``r' = r`` at every point of an ``r`` sweep.
    """

    template: ProtocolParams
    variable: str = "r_prime"
    lo: float = 0.01
    hi: float = 0.20
    steps: int = 40
    objective: str = "E_N"
    tol: float = DEFAULT_TOL
    n_max: Optional[int] = None
    tie_r_prime: bool = False

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise InvalidParameter(f"unknown sweep variable {self.variable!r}")
        if self.objective not in OBJECTIVES:
            raise InvalidParameter(f"unknown objective {self.objective!r}")
        if not self.lo < self.hi:
            raise InvalidParameter("sweep range needs lo < hi")
        if self.steps < 2:
            raise InvalidParameter("sweep needs at least 2 steps")

    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)

    def params_at(self, value: float) -> ProtocolParams:
        value = float(value)
        t = self.template
        if self.variable == "r_prime":
            return dataclasses.replace(t, r_prime_a=value, r_prime_b=value)
        if self.variable == "r" and self.tie_r_prime:
            return dataclasses.replace(t, r=value, r_prime_a=value, r_prime_b=value)
        return dataclasses.replace(t, **{self.variable: value})


def with_r_prime(params: ProtocolParams, r_prime: float) -> ProtocolParams:
    return dataclasses.replace(params, r_prime_a=float(r_prime), r_prime_b=float(r_prime))


def evaluate_point(
    params: ProtocolParams,
    index: int = 0,
    tol: float = DEFAULT_TOL,
    n_max: Optional[int] = None,
    negativity: bool = True,
) -> ExperimentRecord:
    """Evaluate E_N, p_succ and fidelity at one parameter point.

    With ``n_max=None`` the truncation is grown until converged to ``tol``.
    Package errors are caught and reported through ``status``.
    """
    start = time.perf_counter()
    try:
        mixture = distill(params)
        fid = teleport_fidelity_mixture(mixture).value
        en, used = math.nan, None
        if negativity:
            if n_max is None:
                conv = converge_truncation(mixture, tol)
                en, used = conv.log_negativity, conv.n_max
            else:
                en, used = log_negativity_value(mixture_to_fock(mixture, n_max)), n_max
        return ExperimentRecord(index, params, en, mixture.p_succ, fid, used, "ok", time.perf_counter() - start)
    except CVDistillError as exc:
        return ExperimentRecord(index, params, status=f"error: {exc}", wall_time=time.perf_counter() - start)


def _evaluate_star(args):
    return evaluate_point(*args)


def resolve_jobs(jobs: Optional[int]) -> int:
    if jobs is None or jobs <= 0:
        return os.cpu_count() or 1
    return jobs


def parallel_map(fn: Callable, tasks: Sequence, jobs: int = 1) -> list:
    """``[fn(t) for t in tasks]``, fanned out over processes when ``jobs > 1``.

    ``fn`` must be a picklable module-level function; results keep task order.
    """
    jobs = resolve_jobs(jobs)
    if jobs == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def run_points(tasks: Sequence[tuple], jobs: int = 1) -> list:
    """Evaluate ``evaluate_point(*task)`` for each task, results in task order."""
    return parallel_map(_evaluate_star, tasks, jobs)


def sweep(spec: SweepSpec, jobs: int = 1) -> list:
    """One :class:`ExperimentRecord` per grid point, in grid order."""
    tasks = [(spec.params_at(v), i, spec.tol, spec.n_max) for i, v in enumerate(spec.grid())]
    return run_points(tasks, jobs)


# --------------------------------------------------------------------------
# optimisation over r'


@dataclass(frozen=True)
class OptimizationResult:
    r_prime: float
    value: float
    flag: str  # "interior", "boundary" or "degenerate"
    n_max_used: Optional[int] = None
    evaluations: int = 0

    @property
    def boundary(self) -> bool:
        return self.flag == "boundary"


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, xtol: float = 1e-5):
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x), n_evals)``."""
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    evals = 2
    while b - a > xtol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
        evals += 1
    x = 0.5 * (a + b)
    return x, f(x), evals + 1


def _safe(f):
    def wrapped(x):
        try:
            return f(x)
        except CVDistillError:
            return -math.inf

    return wrapped


def _negativity_truncation(params, bracket, tol):
    needed = []
    for x in (bracket[0], 0.5 * (bracket[0] + bracket[1]), bracket[1]):
        try:
            needed.append(converge_truncation(distill(with_r_prime(params, x)), tol).n_max)
        except CVDistillError:
            continue
    if not needed:
        raise InvalidParameter("E_N is undefined everywhere in the bracket")
    return max(needed) + 2


def objective_function(params: ProtocolParams, objective: str, n_max: int = None):
    """``f(r')`` for a named objective; E_N uses the fixed truncation ``n_max``."""
    if objective == "p_succ":
        return _safe(lambda x: distill(with_r_prime(params, x)).p_succ)
    if objective == "fidelity":
        return _safe(lambda x: teleport_fidelity_mixture(distill(with_r_prime(params, x))).value)
    if objective == "E_N":
        if n_max is None:
            raise InvalidParameter("E_N objective needs a truncation")
        return _safe(lambda x: log_negativity_value(mixture_to_fock(distill(with_r_prime(params, x)), n_max)))
    raise InvalidParameter(f"unknown objective {objective!r}")


def optimize_r_prime(
    params: ProtocolParams,
    objective: Union[str, Callable[[float], float]] = "E_N",
    bracket=(0.0, 0.3),
    tol: float = DEFAULT_TOL,
    grid_points: int = 21,
    xtol: float = 1e-5,
    n_max: Optional[int] = None,
) -> OptimizationResult:
    """Maximise an objective over the symmetric local squeezing ``r'``.

    A coarse grid picks the best cell, golden-section search refines it.
    An optimum at a bracket edge is flagged ``"boundary"``; ``r' = 0`` at
    the lower edge means plain photon subtraction wins.  A flat objective
    returns the bracket midpoint flagged ``"degenerate"``.

    Args:
        params: protocol template; its ``r'`` is ignored.
        objective: ``"E_N"``, ``"p_succ"``, ``"fidelity"`` or a callable.
        bracket: ``(lo, hi)`` search interval for ``r'``.
        tol: truncation tolerance for the E_N objective.
        grid_points: size of the coarse pre-scan.
        xtol: final bracket width of the golden-section stage.
        n_max: fixed truncation for E_N; chosen automatically when ``None``.
    """
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise InvalidParameter("bracket needs lo < hi")
    used = None
    if callable(objective):
        f = objective
    else:
        if objective == "E_N":
            used = n_max if n_max is not None else _negativity_truncation(params, (lo, hi), tol)
        f = objective_function(params, objective, used)

    grid = np.linspace(lo, hi, grid_points)
    vals = np.array([f(x) for x in grid])
    evals = len(grid)
    finite = vals[np.isfinite(vals)]
    if finite.size == 0:
        raise InvalidParameter("objective undefined on the whole bracket")
    if np.ptp(finite) <= 1e-14 * max(1.0, np.max(np.abs(finite))):
        mid = 0.5 * (lo + hi)
        return OptimizationResult(mid, float(f(mid)), "degenerate", used, evals + 1)

    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid_points - 1)]
    x, fx, n = golden_section_max(f, a, b, xtol)
    evals += n
    if vals[0] >= fx or x - lo < 1e-4:
        return OptimizationResult(lo, float(vals[0]), "boundary", used, evals)
    if vals[-1] >= fx or hi - x < 1e-4:
        return OptimizationResult(hi, float(vals[-1]), "boundary", used, evals)
    if used is not None:
        conv = converge_truncation(distill(with_r_prime(params, x)), tol)
        fx, used = conv.log_negativity, max(used, conv.n_max)
    return OptimizationResult(float(x), float(fx), "interior", used, evals)


def find_threshold(
    eta: float = 1.0,
    r_range=(0.02, 0.4),
    objective: str = "fidelity",
    T: float = 0.95,
    bracket=(0.0, 0.5),
    resolution: float = 5e-3,
    tol: float = DEFAULT_TOL,
) -> float:
    """Smallest ``r`` at which the optimal ``r'`` collapses to zero.

    Bisects between an ``r`` with an interior optimum and one with the
    boundary optimum ``r' < 1e-3``.

    Raises:
        NoTransitionError: both ends of ``r_range`` behave the same way.
    """
    lo, hi = map(float, r_range)

    def collapsed(r):
        res = optimize_r_prime(ProtocolParams.symmetric(r, 0.0, T, eta), objective, bracket, tol)
        return res.r_prime < 1e-3

    if collapsed(lo) or not collapsed(hi):
        raise NoTransitionError(f"no transition to r'_opt = 0 inside r in [{lo}, {hi}]")
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if collapsed(mid):
            hi = mid
        else:
            lo = mid
    return hi


# --------------------------------------------------------------------------
# random local unitaries


@dataclass(frozen=True)
class SearchReport:
    baseline: ExperimentRecord
    samples: tuple
    seed: Optional[int]

    @property
    def max_E_N(self) -> float:
        return max((s.E_N for s in self.samples if s.ok), default=math.nan)

    @property
    def max_p_succ(self) -> float:
        return max((s.p_succ for s in self.samples if s.ok), default=math.nan)

    def excess(self) -> tuple:
        """How far the best sample exceeds the zero-angle baseline (E_N, p_succ)."""
        return self.max_E_N - self.baseline.E_N, self.max_p_succ - self.baseline.p_succ

    def baseline_maximal(self, tol: float = 1e-9) -> bool:
        de, dp = self.excess()
        return de <= tol and dp <= tol

    @property
    def verdict(self) -> str:
        return "baseline maximal" if self.baseline_maximal() else "baseline exceeded"


def draw_angles(n_samples: int, seed: int) -> np.ndarray:
    """``(n_samples, 4)`` angles uniform on ``[0, 2 pi)`` from a counter-based Philox stream."""
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.uniform(0.0, 2.0 * np.pi, size=(n_samples, 4))


def random_unitary_search(
    r: float,
    T: float = 0.95,
    n_samples: int = 500,
    seed: int = 0,
    magnitude: Optional[float] = None,
    eta: float = 1.0,
    n_max: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    angles: Optional[np.ndarray] = None,
    jobs: int = 1,
) -> SearchReport:
    """Compare random local unitaries ``U(m, theta, phi)`` against ``theta = phi = 0``.

    The squeezing magnitude ``m`` defaults to the TMSS parameter ``r``.  All
    samples share one truncation (the baseline's converged ``n_max`` plus a
    margin of 4) so E_N values are directly comparable.

    Args:
        angles: explicit ``(n, 4)`` angle array replacing the random draw.
    """
    if n_samples < 1:
        raise InvalidParameter("n_samples must be >= 1")
    m = r if magnitude is None else magnitude
    base_params = ProtocolParams(r=r, r_prime_a=m, r_prime_b=m, T=T, eta=eta, angles=(0.0, 0.0, 0.0, 0.0))
    if n_max is None:
        n_max = converge_truncation(distill(base_params), tol).n_max + 4
    baseline = evaluate_point(base_params, -1, tol, n_max)
    drawn = draw_angles(n_samples, seed) if angles is None else np.atleast_2d(np.asarray(angles, dtype=float))
    tasks = [(dataclasses.replace(base_params, angles=tuple(a)), i, tol, n_max) for i, a in enumerate(drawn)]
    return SearchReport(baseline, tuple(run_points(tasks, jobs)), seed if angles is None else None)


# --------------------------------------------------------------------------
# phase space vs brute-force Fock comparison

VALIDATION_AXES = {
    "r": (0.05, 0.1, 0.2),
    "r_prime": (0.0, 0.1, 0.2),
    "T": (0.8, 0.9, 0.95),
    "eta": (1.0, 0.5),
}
QUICK_AXES = {"r": (0.05, 0.2), "r_prime": (0.0, 0.2), "T": (0.9,), "eta": (1.0, 0.5)}
VALIDATION_TOL = 1e-6


@dataclass(frozen=True)
class ValidationResult:
    params: ProtocolParams
    p_rel_dev: float
    rho_max_dev: float
    status: str = "ok"

    @property
    def passed(self) -> bool:
        return self.status == "ok" and self.p_rel_dev <= VALIDATION_TOL and self.rho_max_dev <= VALIDATION_TOL


def validation_grid(quick: bool = False) -> list:
    axes = QUICK_AXES if quick else VALIDATION_AXES
    return [
        ProtocolParams.symmetric(r, rp, T, eta)
        for r in axes["r"]
        for rp in axes["r_prime"]
        for T in axes["T"]
        for eta in axes["eta"]
    ]


def validate_point(params: ProtocolParams, n_max: int = 10, perturb: float = 0.0) -> ValidationResult:
    """Compare the phase-space pipeline with the Fock oracle at one point.

    Args:
        perturb: added to the weight of the first vacuum-projection term; a
            test hook that must make the comparison fail.
    """
    from .distiller import GaussianMixture
    from .oracle import simulate_distillation_fock

    try:
        mixture = distill(params)
        if perturb:
            w = list(mixture.weights)
            w[1] += perturb
            mixture = GaussianMixture(tuple(w), mixture.cms)
        rho_ps = mixture_to_fock(mixture, n_max)
        rho_or, p_or = simulate_distillation_fock(params, n_max)
        p_dev = abs(mixture.p_succ - p_or) / abs(p_or)
        rho_dev = float(np.max(np.abs(rho_ps.elements - rho_or.elements)))
        return ValidationResult(params, p_dev, rho_dev)
    except (CVDistillError, ArithmeticError) as exc:
        return ValidationResult(params, math.inf, math.inf, f"error: {exc}")


def _validate_star(args):
    return validate_point(*args)


def validate(grid: Sequence[ProtocolParams], n_max: int = 10, perturb: float = 0.0, jobs: int = 1) -> list:
    return parallel_map(_validate_star, [(p, n_max, perturb) for p in grid], jobs)


# --------------------------------------------------------------------------
# per-point figure rows


def gaussian_baselines(params: ProtocolParams) -> dict:
    """E_N and fidelity of the undistilled (damped) resource state."""
    from .distiller import resource_cm
    from .metrics import log_negativity_gaussian, teleport_fidelity_gaussian

    V = resource_cm(params)
    return {"E_N": log_negativity_gaussian(V).value, "fidelity": teleport_fidelity_gaussian(V).value}


def enhanced_vs_plain(task) -> ExperimentRecord:
    """Row at ``r' = r`` with plain photon subtraction and the Gaussian resource alongside.

    Args:
        task: ``(index, r, T, eta, tol)``.
    """
    index, r, T, eta, tol = task
    rec = evaluate_point(ProtocolParams.symmetric(r, r, T, eta), index, tol)
    plain = evaluate_point(ProtocolParams.symmetric(r, 0.0, T, eta), index, tol)
    base = gaussian_baselines(rec.params)
    extra = {"E_N_plain": plain.E_N, "E_N_gaussian": base["E_N"]}
    status = rec.status
    if rec.ok and not plain.ok:
        status = f"plain {plain.status}"
    return dataclasses.replace(rec, extra=extra, status=status)


def fidelity_optimum(task) -> ExperimentRecord:
    """Row holding the fidelity-optimal ``r'`` for one ``r``.

    Args:
        task: ``(index, r, T, eta, tol, bracket)``.
    """
    index, r, T, eta, tol, bracket = task
    start = time.perf_counter()
    template = ProtocolParams.symmetric(r, 0.0, T, eta)
    try:
        opt = optimize_r_prime(template, "fidelity", bracket, tol)
        plain = teleport_fidelity_mixture(distill(template)).value
    except CVDistillError as exc:
        return ExperimentRecord(index, template, status=f"error: {exc}")
    rec = evaluate_point(with_r_prime(template, opt.r_prime), index, tol)
    extra = {
        "fidelity_plain": plain,
        "fidelity_gaussian": gaussian_baselines(template)["fidelity"],
        "optimum": opt.flag,
    }
    return dataclasses.replace(rec, extra=extra, wall_time=time.perf_counter() - start)
