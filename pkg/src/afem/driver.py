"""The adaptive loop SOLVE -> ESTIMATE -> MARK -> REFINE and its telemetry."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional, Union

import numpy as np

from .estimator import Indicators, indicators, write_indicators
from .fem import FeFunction, FeSpace, energy_error
from .marking import dorfler_mark
from .mesh import Triangulation, format_mesh, read_mesh, refine
from .problems import ProblemSpec, Variant, catalog
from .solver import EigenConfig, NewtonConfig, SolverConfig, SolverError, solve

__all__ = [
    "AfemConfig", "IterationRecord", "AfemTrace", "AfemFailure", "run",
    "fit_loglog", "fit_rate", "contraction_ratios", "complexity_report",
    "efficiency_indices", "fitted_c1", "summarize", "write_trace_csv",
    "read_trace_csv", "replay_mesh", "TRACE_COLUMNS",
]

log = logging.getLogger(__name__)

TRACE_COLUMNS = ["k", "elements", "dofs", "eta", "osc", "energy_error", "lambda",
                 "lambda_error", "marked", "solver_iters", "wall_ms"]


class AfemFailure(RuntimeError):
    """A SOLVE step failed; ``trace`` holds the iterations completed so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class AfemConfig:
    problem: Union[str, ProblemSpec]
    degree: int = 1
    theta: float = 0.5
    bisections: int = 1
    max_dofs: Optional[int] = 100_000
    tol: Optional[float] = None
    gamma: Optional[float] = None
    uniform: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    eigen: EigenConfig = field(default_factory=EigenConfig)
    out: Optional[str] = None
    dump_indicators: bool = False
    record_timing: bool = False
    audit: bool = True
    max_iterations: int = 500
    window: Optional[int] = None

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.bisections < 1:
            raise ValueError("bisections must be at least 1")
        if self.max_dofs is None and self.tol is None:
            raise ValueError("set max_dofs and/or tol as a stopping criterion")
        if self.max_dofs is not None and self.max_dofs < 1:
            raise ValueError("max_dofs must be positive")
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @property
    def problem_spec(self) -> ProblemSpec:
        if isinstance(self.problem, ProblemSpec):
            return self.problem
        return catalog(self.problem)

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, ProblemSpec):
                v = v.name
            elif f.name in ("solver", "newton", "eigen"):
                v = asdict(v)
            out[f.name] = v
        return out


@dataclass
class IterationRecord:
    k: int
    elements: int
    dofs: int
    eta: float
    osc: float
    energy_error: Optional[float] = None
    lam: Optional[float] = None
    lam_error: Optional[float] = None
    marked: int = 0
    solver_iters: int = 0
    wall_ms: Optional[float] = None
    newton_steps: Optional[int] = None
    newton_residuals: Optional[List[float]] = None


@dataclass
class AfemTrace:
    config: dict
    records: List[IterationRecord] = field(default_factory=list)
    marks: List[np.ndarray] = field(default_factory=list)
    initial_mesh: Optional[Triangulation] = None
    final_mesh: Optional[Triangulation] = None
    solution: Optional[FeFunction] = None
    status: str = "ok"
    conformity_audits: int = 0

    def column(self, name):
        attr = {"lambda": "lam", "lambda_error": "lam_error"}.get(name, name)
        return [getattr(r, attr) for r in self.records]

    @property
    def has_exact(self) -> bool:
        return bool(self.records) and all(r.energy_error is not None for r in self.records)


# -- analysis -----------------------------------------------------------------

def fit_loglog(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least 3 points to fit a rate")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("rate fitting needs positive data")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _window(n, window):
    if window is None:
        return n // 2
    return max(0, n - int(window))


def fit_rate(trace, x="dofs", y="eta", window=None) -> float:
    """Slope of ``y`` against ``x`` over the trailing window (default: last half)."""
    xs = trace.column(x) if isinstance(trace, AfemTrace) else trace[x]
    ys = trace.column(y) if isinstance(trace, AfemTrace) else trace[y]
    start = _window(len(xs), window)
    xs, ys = xs[start:], ys[start:]
    if any(v is None for v in ys):
        raise ValueError(f"column {y!r} is not available for this run")
    return fit_loglog(xs, ys)


def fitted_c1(trace: AfemTrace) -> float:
    """Run maximum of ``|u - u_k|_a^2 / eta_k^2``."""
    return max(r.energy_error ** 2 / r.eta ** 2 for r in trace.records if r.eta > 0)


def efficiency_indices(trace: AfemTrace):
    return [r.eta / r.energy_error for r in trace.records if r.energy_error]


def contraction_ratios(trace, gamma: float):
    """``rho_k = (e_{k+1}^2 + gamma eta_{k+1}^2) / (e_k^2 + gamma eta_k^2)``.

    ``trace`` is an :class:`AfemTrace` or a sequence of ``(e_k, eta_k)``.
    The sequence stops at the first vanishing composite.
    """
    if isinstance(trace, AfemTrace):
        if not trace.has_exact:
            raise ValueError("contraction needs the exact energy error")
        pairs = [(r.energy_error, r.eta) for r in trace.records]
    else:
        pairs = list(trace)
    comp = [e * e + gamma * n * n for e, n in pairs]
    out = []
    for a, b in zip(comp[:-1], comp[1:]):
        if a == 0:
            break
        out.append(b / a)
    return out


def complexity_report(trace: AfemTrace):
    """Per-iteration ``(#T_k - #T_0) / sum_{j<k} #M_j`` and a DOF/estimator table."""
    recs = trace.records
    ratios = []
    marked = 0
    for k in range(1, len(recs)):
        marked += recs[k - 1].marked
        ratios.append((recs[k].elements - recs[0].elements) / marked)
    table = [(r.dofs, r.elements, r.eta, r.energy_error) for r in recs]
    return {"ratios": ratios, "table": table}


def summarize(trace: AfemTrace) -> dict:
    """Fitted slopes, contraction and complexity diagnostics."""
    window = trace.config.get("window")
    out = {"status": trace.status, "iterations": len(trace.records)}
    slopes = {}
    if len(trace.records) >= 6:
        slopes["eta_vs_dofs"] = fit_rate(trace, "dofs", "eta", window)
        if trace.has_exact:
            slopes["energy_error_vs_dofs"] = fit_rate(trace, "dofs", "energy_error", window)
        lam_err = trace.column("lambda_error")
        if all(v is not None and v > 0 for v in lam_err):
            slopes["lambda_error_vs_dofs"] = fit_rate(trace, "dofs", "lambda_error", window)
    out["slopes"] = slopes
    gamma = trace.config.get("gamma")
    if not trace.has_exact:
        out["gamma"] = 1.0 if gamma is None else gamma
    if trace.has_exact and len(trace.records) >= 2:
        source = "user"
        if gamma is None:
            gamma, source = fitted_c1(trace), "fitted C1 = max |u-u_k|_a^2 / eta_k^2 (empirical surrogate)"
        rho = contraction_ratios(trace, gamma)
        out["gamma"] = gamma
        out["gamma_source"] = source
        out["contraction_ratios"] = rho
        if rho:
            out["contraction_geometric_mean"] = float(np.exp(np.mean(np.log(rho))))
            out["contraction_fraction_below_one"] = float(np.mean(np.array(rho) < 1))
        eff = efficiency_indices(trace)[-10:]
        out["efficiency_band"] = max(eff) / min(eff)
    rep = complexity_report(trace)
    out["complexity_ratios"] = rep["ratios"]
    out["complexity_ratio_max"] = max(rep["ratios"]) if rep["ratios"] else None
    out["config"] = trace.config
    return out


# -- persistence --------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_trace_csv(trace: AfemTrace, path, timing=False):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace.records:
            w.writerow([_fmt(v) for v in (
                r.k, r.elements, r.dofs, r.eta, r.osc, r.energy_error, r.lam,
                r.lam_error, r.marked, r.solver_iters, r.wall_ms if timing else None)])


def read_trace_csv(path) -> dict:
    """Columns of a trace CSV as lists of floats (``None`` for empty cells)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
        header = rows[0].keys() if rows else []
    cols = {name: [(float(r[name]) if r[name] != "" else None) for r in rows]
            for name in header}
    return cols


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def persist(trace: AfemTrace, out_dir, timing=False):
    os.makedirs(out_dir, exist_ok=True)
    write_trace_csv(trace, os.path.join(out_dir, "trace.csv"), timing)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_jsonable(summarize(trace)), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if trace.initial_mesh is not None:
        with open(os.path.join(out_dir, "mesh_0.txt"), "w") as fh:
            fh.write(format_mesh(trace.initial_mesh))
    with open(os.path.join(out_dir, "marks.json"), "w") as fh:
        json.dump({"bisections": trace.config["bisections"],
                   "marked": [m.tolist() for m in trace.marks]}, fh)
        fh.write("\n")
    if trace.final_mesh is not None:
        with open(os.path.join(out_dir, "final_mesh.txt"), "w") as fh:
            fh.write(format_mesh(trace.final_mesh))


def replay_mesh(trace_dir, iteration: int) -> Triangulation:
    """Regenerate mesh ``T_k`` from the stored initial mesh and markings."""
    mesh = read_mesh(os.path.join(trace_dir, "mesh_0.txt"))
    with open(os.path.join(trace_dir, "marks.json")) as fh:
        data = json.load(fh)
    marks = data["marked"]
    if not 0 <= iteration <= len(marks):
        raise ValueError(f"iteration must lie in [0, {len(marks)}]")
    for m in marks[:iteration]:
        mesh = refine(mesh, np.asarray(m, dtype=np.int64), data["bisections"])
    return mesh


# -- the loop -----------------------------------------------------------------

def _num_dofs(mesh: Triangulation, degree):
    return mesh.num_vertices + (mesh.num_edges if degree == 2 else 0)


def run(cfg: AfemConfig) -> AfemTrace:
    """Run the adaptive loop until a stopping criterion is met.

    The loop stops when the estimator vanishes or falls below ``cfg.tol``,
    or when the next mesh would exceed ``cfg.max_dofs``.  With ``cfg.out``
    set the trace is written there, also after a failed SOLVE.
    """
    p = cfg.problem_spec
    mesh = p.initial_mesh()
    trace = AfemTrace(config=cfg.echo(), initial_mesh=mesh)
    exact = p.exact
    prev = None
    try:
        for k in range(cfg.max_iterations):
            tic = time.perf_counter()
            space = FeSpace(mesh, cfg.degree)
            u, lam, its, extra = solve(p, space, prev, cfg.solver, cfg.newton, cfg.eigen)
            ind: Indicators = indicators(p, u, lam)
            rec = IterationRecord(k=k, elements=mesh.num_elements, dofs=space.num_dofs,
                                  eta=ind.eta, osc=ind.osc, lam=lam, solver_iters=its)
            if p.variant is Variant.NONLINEAR:
                rec.newton_steps = extra.iterations
                rec.newton_residuals = list(extra.residuals)
            if exact is not None and exact.grad is not None:
                rec.energy_error = energy_error(exact.grad, u, p.coefficients)
            if lam is not None and exact is not None and exact.eigenvalue is not None:
                rec.lam_error = abs(lam - exact.eigenvalue)
            if cfg.dump_indicators and cfg.out:
                os.makedirs(cfg.out, exist_ok=True)
                write_indicators(ind, os.path.join(cfg.out, f"indicators_{k}.csv"))

            stop = ind.total_eta2 == 0.0 or (cfg.tol is not None and ind.eta <= cfg.tol)
            new_mesh = None
            if not stop:
                if cfg.uniform:
                    marked = np.arange(mesh.num_elements)
                else:
                    marked = dorfler_mark(ind.eta2, cfg.theta).marked
                new_mesh = refine(mesh, marked, cfg.bisections)
                if cfg.audit:
                    new_mesh.check_conformity()
                    trace.conformity_audits += 1
                if cfg.max_dofs is not None and _num_dofs(new_mesh, cfg.degree) > cfg.max_dofs:
                    stop = True
                else:
                    rec.marked = len(marked)
            rec.wall_ms = 1000.0 * (time.perf_counter() - tic)
            trace.records.append(rec)
            trace.final_mesh, trace.solution = mesh, u
            log.info("k=%d elements=%d dofs=%d eta=%.4e", k, rec.elements, rec.dofs, rec.eta)
            if stop:
                break
            trace.marks.append(marked)
            mesh, prev = new_mesh, u
    except SolverError as exc:
        trace.status = f"failed: {exc}"
        if cfg.out:
            persist(trace, cfg.out, cfg.record_timing)
        raise AfemFailure(str(exc), trace) from exc
    if cfg.out:
        persist(trace, cfg.out, cfg.record_timing)
    return trace
