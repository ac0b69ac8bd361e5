"""Scenario presets, parameter sweeps, and deterministic CSV output.

A scenario couples a model family to a sweep grid and a compute engine:

* ``steady``      Lindblad steady state + current/correlation observables
* ``cmf``         two-site cluster mean-field fixed point
* ``ground``      closed-system ground state (ED and/or free-fermion filling)
* ``steady+cmf``  both of the first two on the same grid

Re-running a scenario with identical configuration produces byte-identical
CSV: iteration orders are fixed, floats are written in shortest round-trip
form, and the wall_time_seconds column is zeroed unless timing is requested
(measured timings are inherently non-reproducible; they go to stdout).
"""

from __future__ import annotations

import hashlib
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .cmf import CmfNotConverged, CmfOptions, NonPositiveIterate, cmf_fixed_point
from .groundstate import DENSE_ED_MAX_SITES, dispersion_current, dispersion_energy, ground_state_ed
from .lattice import (DissipationSpec, HamiltonianParams, ModelSpec,
                      coeff_map, hamiltonian_terms, jump_terms, with_polar)
from .linalg import TensorSpace
from .observables import measure_correlations, measure_currents
from .solver import (DensityMatrix, EvolveOptions, LindbladGenerator, NotConverged,
                     SteadyStateResult, TracelessKernelError, default_evolve_options,
                     steady_state_evolution, steady_state_nullspace)

CSV_HEADER = ("run_id,scenario,L,boundary,J0,phi,lambda,mu,U,kappa,alpha,delta,range,"
              "eps_x,eps_zz,theta,r,observable,index,value,method,residual,wall_time_seconds")

SWEEP_AXES = ("phi", "kappa", "theta", "r", "epsilon_x", "epsilon_zz", "L", "alpha", "delta")


class ConfigError(ValueError):
    """Invalid or unknown scenario configuration."""


@dataclass(frozen=True)
class SweepAxis:
    name: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.name not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {self.name!r}; expected one of {SWEEP_AXES}")
        if len(self.values) < 1:
            raise ConfigError(f"sweep axis {self.name!r} needs at least one value")
        diffs = np.diff(self.values)
        if len(diffs) and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ConfigError(f"sweep axis {self.name!r} must be strictly monotone")

    @classmethod
    def from_spec(cls, name: str, values=None, start=None, stop=None, count=None) -> "SweepAxis":
        if values is not None:
            vals = tuple(float(v) for v in values)
        else:
            if start is None or stop is None or count is None:
                raise ConfigError(f"axis {name!r}: give `values` or (start, stop, count)")
            if int(count) < 1:
                raise ConfigError("count must be >= 1")
            vals = tuple(float(v) for v in np.linspace(float(start), float(stop), int(count)))
        return cls(name, vals)


@dataclass(frozen=True)
class SolverConfig:
    method: str = "auto"        # auto | nullspace | evolution
    tol: float | None = None
    t_max: float | None = None
    dt: float | None = None
    init: str = "mixed"         # mixed | cmf

    def __post_init__(self):
        if self.method not in ("auto", "nullspace", "evolution"):
            raise ConfigError(f"unknown solver method {self.method!r}")
        if self.init not in ("mixed", "cmf"):
            raise ConfigError(f"unknown evolution initial state {self.init!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    engine: str
    model: ModelSpec
    params: HamiltonianParams
    diss: DissipationSpec
    solver: SolverConfig
    sweep: tuple[SweepAxis, ...]
    pair: tuple[int, int] = (1, 2)
    ground_ed: bool = True

    def __post_init__(self):
        if self.engine not in ("steady", "cmf", "ground", "steady+cmf"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        names = [ax.name for ax in self.sweep]
        if len(set(names)) != len(names):
            raise ConfigError("sweep axes must be distinct")
        if ("theta" in names) != ("r" in names):
            raise ConfigError("polar sweeps need both `theta` and `r` axes")

    def run_id(self) -> str:
        return hashlib.sha256(repr(self).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ResultRow:
    run_id: str
    scenario: str
    L: int
    boundary: str
    J0: float
    phi: float
    lam: complex
    mu: float
    U: float
    kappa: float
    alpha: complex
    delta: complex
    range: int
    eps_x: float
    eps_zz: float
    theta: float | None
    r: float | None
    observable: str
    index: int
    value: float
    method: str
    residual: float
    wall_time_seconds: float


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, complex) or isinstance(x, np.complexfloating):
        z = complex(x)
        if z.imag == 0.0:
            return repr(float(z.real))
        return repr(z).strip("()")
    return repr(float(x))


def row_to_csv(row: ResultRow) -> str:
    fields = [row.run_id, row.scenario, row.L, row.boundary, row.J0, row.phi, row.lam,
              row.mu, row.U, row.kappa, row.alpha, row.delta, row.range, row.eps_x,
              row.eps_zz, row.theta, row.r, row.observable, row.index, row.value,
              row.method, row.residual, row.wall_time_seconds]
    return ",".join(_fmt(f) for f in fields)


@dataclass(frozen=True)
class GridPoint:
    index: int
    model: ModelSpec
    params: HamiltonianParams
    diss: DissipationSpec
    theta: float | None
    r: float | None


def resolve_grid(cfg: ScenarioConfig) -> list[GridPoint]:
    """Cartesian product of the sweep axes, row-major in the listed order."""
    axes = cfg.sweep if cfg.sweep else (SweepAxis("phi", (cfg.params.phi,)),)
    shapes = [len(ax.values) for ax in axes]
    points: list[GridPoint] = []
    for flat in range(int(np.prod(shapes))):
        idx = np.unravel_index(flat, shapes)
        model, params, diss = cfg.model, cfg.params, cfg.diss
        theta = r = None
        for ax, i in zip(axes, idx):
            v = ax.values[i]
            if ax.name == "phi":
                params = replace(params, phi=v)
            elif ax.name == "kappa":
                diss = replace(diss, kappa=v)
            elif ax.name == "epsilon_x":
                params = replace(params, eps_x=v)
            elif ax.name == "epsilon_zz":
                params = replace(params, eps_zz=v)
            elif ax.name == "L":
                model = replace(model, L=int(v))
            elif ax.name == "alpha":
                diss = replace(diss, alpha=v)
            elif ax.name == "delta":
                diss = replace(diss, delta=v)
            elif ax.name == "theta":
                theta = v
            elif ax.name == "r":
                r = v
        if theta is not None:
            diss = with_polar(diss, r, theta)
        points.append(GridPoint(flat, model, params, diss, theta, r))
    return points


# -- steady-state engine -------------------------------------------------------

def _polarized_candidates(diss: DissipationSpec, space: TensorSpace) -> list[np.ndarray]:
    """All-down / all-up product states, loss- or gain-dominated first."""
    D = space.dim
    down = np.zeros((D, D), dtype=complex)
    down[D - 1, D - 1] = 1.0                      # descending basis: last = all-down
    up = np.zeros((D, D), dtype=complex)
    up[0, 0] = 1.0
    c = coeff_map(diss)
    loss = c.Gamma_minus + diss.kappa
    return [down, up] if loss >= c.Gamma_plus else [up, down]


def _cmf_product_state(model: ModelSpec, params: HamiltonianParams,
                       diss: DissipationSpec) -> np.ndarray | None:
    """Cluster-product initial guess for the evolution solver."""
    try:
        cluster = cmf_fixed_point(replace(params, J0=0.0, phi=0.0, lam=0.0,
                                          eps_x=0.0, eps_zz=0.0), diss).rho.matrix
    except (CmfNotConverged, NonPositiveIterate, ValueError):
        return None
    rho = np.array([[1.0]], dtype=complex)
    for _ in range(model.L // 2):
        rho = np.kron(rho, cluster)
    if model.L % 2:
        site = np.einsum("abcb->ac", cluster.reshape(2, 2, 2, 2))
        rho = np.kron(rho, site)
    return rho / np.trace(rho).real


def solve_steady_point(model: ModelSpec, params: HamiltonianParams, diss: DissipationSpec,
                       solver: SolverConfig) -> SteadyStateResult:
    """Steady state with the degenerate-kernel selection policy.

    When the null space is degenerate (the polarized limits alpha = 0 or
    delta = 0 host exactly stationary dark states) the reported state is the
    polarized product state if it is stationary to high precision, matching
    the limit of the unique steady states at nearby parameters; otherwise the
    solver falls back to evolution from the maximally mixed state.
    """
    space = model.space()
    gen = LindbladGenerator(space, hamiltonian_terms(model, params), jump_terms(model, diss))
    defaults = default_evolve_options(space, diss, params.mu)
    opts = EvolveOptions(dt=solver.dt, t_max=solver.t_max or defaults.t_max,
                         tol=solver.tol or defaults.tol)

    def evolve() -> SteadyStateResult:
        rho0 = None
        if solver.init == "cmf":
            rho0 = _cmf_product_state(model, params, diss)
        return steady_state_evolution(gen, rho0=rho0, opts=opts)

    if solver.method == "evolution" or (solver.method == "auto" and space.dim > 64):
        return evolve()
    try:
        res = steady_state_nullspace(gen)
    except TracelessKernelError:
        return evolve()
    if res.zero_eigen_degeneracy and res.zero_eigen_degeneracy > 1:
        for cand in _polarized_candidates(diss, space):
            resid = gen.residual(cand)
            if resid <= 1e-10:
                dm = DensityMatrix.from_matrix(cand, space)
                return SteadyStateResult(rho=dm, residual=resid, method="nullspace+limit",
                                         iterations=0,
                                         zero_eigen_degeneracy=res.zero_eigen_degeneracy)
        return evolve()
    return res


def _steady_rows(pt: GridPoint, cfg: ScenarioConfig) -> list[tuple[str, int, float, str, float]]:
    res = solve_steady_point(pt.model, pt.params, pt.diss, cfg.solver)
    rho = res.rho
    cur = measure_currents(rho, pt.model, pt.params, pt.diss)
    cor = measure_correlations(rho, pair=cfg.pair)
    rows: list[tuple[str, int, float, str, float]] = []
    for name, arr in (("current_J", cur.I_J), ("current_eta", cur.I_eta),
                      ("current_lambda", cur.I_lambda), ("current_xi", cur.I_xi)):
        for j, v in zip(cur.bonds, arr):
            rows.append((name, j, float(v), res.method, res.residual))
    for j, v in enumerate(cor.magnetization, start=1):
        rows.append(("magnetization_z", j, float(v), res.method, res.residual))
    rows.append(("negativity", 0, cor.negativity, res.method, res.residual))
    rows.append(("purity", 0, cor.purity, res.method, res.residual))
    rows.append(("entropy", 0, cor.entropy, res.method, res.residual))
    return rows


def _cmf_rows(pt: GridPoint, cfg: ScenarioConfig) -> list[tuple[str, int, float, str, float]]:
    res = cmf_fixed_point(pt.params, pt.diss, CmfOptions())
    rho = res.rho
    cor = measure_correlations(rho, pair=(1, 2))
    eta_abs = abs(complex(pt.diss.alpha) ** 2 - complex(pt.diss.delta) ** 2)
    normalized = res.current / eta_abs if eta_abs > 1e-12 else float("nan")
    rows = [("cmf_current", 0, res.current, "cmf", res.fixed_point_residual),
            ("cmf_current_normalized", 0, normalized, "cmf", res.fixed_point_residual)]
    for j, v in enumerate(cor.magnetization, start=1):
        rows.append(("cmf_magnetization_z", j, float(v), "cmf", res.fixed_point_residual))
    rows.append(("cmf_negativity", 0, cor.negativity, "cmf", res.fixed_point_residual))
    rows.append(("cmf_purity", 0, cor.purity, "cmf", res.fixed_point_residual))
    rows.append(("cmf_entropy", 0, cor.entropy, "cmf", res.fixed_point_residual))
    return rows


def _ground_rows(pt: GridPoint, cfg: ScenarioConfig) -> list[tuple[str, int, float, str, float]]:
    rows: list[tuple[str, int, float, str, float]] = []
    p = pt.params
    if cfg.ground_ed:
        if pt.model.L > DENSE_ED_MAX_SITES:
            raise ConfigError(f"ground_ed requires L <= {DENSE_ED_MAX_SITES}; "
                              "disable ED for larger sizes")
        gs = ground_state_ed(pt.model.L, p.J0, p.phi, p.lam, p.mu)
        method = "ed" if not gs.degenerate else "ed-degenerate"
        rows += [("gs_energy", 0, gs.energy, method, 0.0),
                 ("gs_current", 0, gs.current, method, 0.0),
                 ("gs_entropy_12", 0, gs.entropy_12, method, 0.0),
                 ("gs_gap", 0, gs.gap, method, 0.0)]
    if p.lam == 0 and p.mu == 0:
        disp = dispersion_energy(pt.model.L, p.J0, p.phi)
        rows += [("dispersion_energy", 0, disp.energy, "dispersion", 0.0),
                 ("dispersion_current", 0, dispersion_current(pt.model.L, p.J0, p.phi),
                  "dispersion", 0.0)]
    return rows


_FAILURES = (NotConverged, CmfNotConverged, NonPositiveIterate, TracelessKernelError)


def evaluate_point(pt: GridPoint, cfg: ScenarioConfig) -> list[ResultRow]:
    """All result rows of one grid point; failures yield flagged NaN rows."""
    run_id = cfg.run_id()
    t0 = time.perf_counter()
    raw: list[tuple[str, int, float, str, float]] = []
    try:
        if cfg.engine in ("steady", "steady+cmf"):
            raw += _steady_rows(pt, cfg)
        if cfg.engine in ("cmf", "steady+cmf"):
            raw += _cmf_rows(pt, cfg)
        if cfg.engine == "ground":
            raw += _ground_rows(pt, cfg)
    except _FAILURES as exc:
        resid = getattr(exc, "residual", float("nan"))
        raw = [("failed", 0, float("nan"), "failed", float(resid))]
    wall = time.perf_counter() - t0
    p, d = pt.params, pt.diss
    return [ResultRow(run_id=run_id, scenario=cfg.scenario, L=pt.model.L,
                      boundary=pt.model.boundary, J0=p.J0, phi=p.phi, lam=p.lam,
                      mu=p.mu, U=p.U, kappa=d.kappa, alpha=d.alpha, delta=d.delta,
                      range=d.range, eps_x=p.eps_x, eps_zz=p.eps_zz, theta=pt.theta,
                      r=pt.r, observable=name, index=idx, value=val, method=method,
                      residual=resid, wall_time_seconds=wall)
            for (name, idx, val, method, resid) in raw]


def sweep(cfg: ScenarioConfig, workers: int = 1,
          progress: Callable[[int, int], None] | None = None) -> list[ResultRow]:
    """Evaluate the grid; results merge in grid order regardless of completion order."""
    points = resolve_grid(cfg)
    results: list[list[ResultRow] | None] = [None] * len(points)
    if workers <= 1:
        for pt in points:
            results[pt.index] = evaluate_point(pt, cfg)
            if progress:
                progress(pt.index + 1, len(points))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(evaluate_point, pt, cfg): pt.index for pt in points}
            done = 0
            for fut, idx in futures.items():
                results[idx] = fut.result()
                done += 1
                if progress:
                    progress(done, len(points))
    rows: list[ResultRow] = []
    for chunk in results:
        rows.extend(chunk or [])
    return rows


def write_csv(rows: Sequence[ResultRow], path: Path, timing: bool = False) -> None:
    """Atomic CSV write (schema v1 header); wall times are zeroed unless `timing`."""
    path = Path(path)
    lines = [CSV_HEADER]
    for row in rows:
        if not timing:
            row = replace(row, wall_time_seconds=0.0)
        lines.append(row_to_csv(row))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


@dataclass(frozen=True)
class RunReport:
    csv_path: Path
    svg_paths: tuple[Path, ...]
    n_rows: int
    n_failed: int
    wall_time_seconds: float


def run_scenario(cfg: ScenarioConfig, out_dir: Path, workers: int = 1,
                 timing: bool = False,
                 progress: Callable[[int, int], None] | None = None) -> RunReport:
    """Run a scenario: deterministic CSV plus one SVG per observable per axis."""
    from .svg import emit_svg

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rows = sweep(cfg, workers=workers, progress=progress)
    csv_path = out_dir / f"{cfg.scenario}.csv"
    write_csv(rows, csv_path, timing=timing)
    svg_paths = []
    axes = [ax.name for ax in cfg.sweep]
    observables = sorted({r.observable for r in rows if r.observable != "failed"})
    for obs in observables:
        for axis in axes:
            doc = emit_svg(rows, axis, obs)
            if doc is None:
                continue
            svg_path = out_dir / f"{cfg.scenario}_{obs}_vs_{axis}.svg"
            tmp = svg_path.with_name(svg_path.name + ".tmp")
            tmp.write_text(doc, encoding="utf-8")
            os.replace(tmp, svg_path)
            svg_paths.append(svg_path)
    n_failed = sum(1 for r in rows if r.observable == "failed")
    return RunReport(csv_path=csv_path, svg_paths=tuple(svg_paths), n_rows=len(rows),
                     n_failed=n_failed, wall_time_seconds=time.perf_counter() - t0)


# -- presets -------------------------------------------------------------------

def _minimal(alpha: float, delta: float, rng: int = 1) -> DissipationSpec:
    return DissipationSpec.minimal_model(alpha, delta, rng)


def preset_registry() -> dict[str, tuple[str, Callable[[], ScenarioConfig]]]:
    """Scenario id -> (description, config factory)."""
    reg: dict[str, tuple[str, Callable[[], ScenarioConfig]]] = {}

    def add(name, desc, factory):
        reg[name] = (desc, factory)

    add("fig2", "flux-driven ring with local loss: current/negativity vs phi",
        lambda: ScenarioConfig(
            scenario="fig2", engine="steady",
            model=ModelSpec(L=4), params=HamiltonianParams(J0=1.5, lam=0.5, mu=1.0),
            diss=DissipationSpec(kappa=0.1), solver=SolverConfig(),
            sweep=(SweepAxis.from_spec("phi", start=0.0, stop=8 * math.pi, count=129),)))

    add("fig2_kappa", "flux ring: current and negativity over the (kappa, phi) map",
        lambda: ScenarioConfig(
            scenario="fig2_kappa", engine="steady",
            model=ModelSpec(L=4), params=HamiltonianParams(J0=1.5, lam=0.5, mu=1.0),
            diss=DissipationSpec(kappa=0.1), solver=SolverConfig(),
            sweep=(SweepAxis("kappa", (0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0)),
                   SweepAxis.from_spec("phi", start=0.0, stop=2 * math.pi, count=33))))

    add("fig3", "cluster mean-field maps over the (alpha, delta) plane at mu = 1",
        lambda: ScenarioConfig(
            scenario="fig3", engine="cmf",
            model=ModelSpec(L=2), params=HamiltonianParams(mu=1.0),
            diss=_minimal(1.0, 0.5), solver=SolverConfig(),
            sweep=(SweepAxis.from_spec("alpha", start=0.0, stop=2.0, count=81),
                   SweepAxis.from_spec("delta", start=0.0, stop=2.0, count=81))))

    add("fig4", "exact vs cluster mean-field on the polar (r, theta) grid, L = 4",
        lambda: ScenarioConfig(
            scenario="fig4", engine="steady+cmf",
            model=ModelSpec(L=4), params=HamiltonianParams(mu=1.0),
            diss=_minimal(1.0, 0.0), solver=SolverConfig(),
            sweep=(SweepAxis("r", (1.0, 2.0, 5.0)),
                   SweepAxis.from_spec("theta", start=0.0, stop=math.pi / 2, count=25))))

    add("fig5_ring", "bath-induced ring current vs size, alpha=2 delta=1.5",
        lambda: ScenarioConfig(
            scenario="fig5_ring", engine="steady",
            model=ModelSpec(L=3), params=HamiltonianParams(mu=1.0),
            diss=_minimal(2.0, 1.5),
            solver=SolverConfig(method="evolution", init="cmf", tol=1e-7, t_max=500.0),
            sweep=(SweepAxis("L", (3, 4, 5, 6, 7, 8)),)))

    add("fig5_chain", "open-chain current profile vs size, alpha=2 delta=1",
        lambda: ScenarioConfig(
            scenario="fig5_chain", engine="steady",
            model=ModelSpec(L=6, boundary="open"), params=HamiltonianParams(mu=1.0),
            diss=_minimal(2.0, 1.0),
            solver=SolverConfig(method="evolution", init="cmf", tol=1e-7, t_max=500.0),
            sweep=(SweepAxis("L", (6, 8, 10)),)))

    add("fig6_sx", "transverse-field perturbation of the minimal model (theta scan)",
        lambda: ScenarioConfig(
            scenario="fig6_sx", engine="steady",
            model=ModelSpec(L=4), params=HamiltonianParams(mu=1.0),
            diss=_minimal(1.0, 0.0), solver=SolverConfig(),
            sweep=(SweepAxis("epsilon_x", (0.1, 0.2, 0.3)),
                   SweepAxis("r", (1.0,)),
                   SweepAxis.from_spec("theta", start=0.0, stop=math.pi / 2, count=25))))

    add("fig6_zz", "Ising zz perturbation of the minimal model (theta scan)",
        lambda: ScenarioConfig(
            scenario="fig6_zz", engine="steady",
            model=ModelSpec(L=4), params=HamiltonianParams(mu=1.0),
            diss=_minimal(1.0, 0.0), solver=SolverConfig(),
            sweep=(SweepAxis("epsilon_zz", (0.1, 0.2, 0.3)),
                   SweepAxis("r", (1.0,)),
                   SweepAxis.from_spec("theta", start=0.0, stop=math.pi / 2, count=25))))

    add("fig6_nnn", "next-to-nearest-neighbor bath: nearest-bond current vs size",
        lambda: ScenarioConfig(
            scenario="fig6_nnn", engine="steady",
            model=ModelSpec(L=4), params=HamiltonianParams(mu=1.0),
            diss=_minimal(2.0, 1.0, rng=2), solver=SolverConfig(method="evolution"),
            sweep=(SweepAxis("L", (4, 5, 6, 7)),)))

    add("fig7", "closed-ring ground state: current, energy, two-site entropy vs phi",
        lambda: ScenarioConfig(
            scenario="fig7", engine="ground",
            model=ModelSpec(L=4), params=HamiltonianParams(J0=1.0),
            diss=DissipationSpec(), solver=SolverConfig(),
            sweep=(SweepAxis.from_spec("phi", start=-math.pi, stop=math.pi, count=33),)))

    add("fig7_scaling", "free-fermion flux current vs size (dispersion filling only)",
        lambda: ScenarioConfig(
            scenario="fig7_scaling", engine="ground", ground_ed=False,
            model=ModelSpec(L=8), params=HamiltonianParams(J0=1.0),
            diss=DissipationSpec(), solver=SolverConfig(),
            sweep=(SweepAxis("L", (8, 12, 16, 20)),
                   SweepAxis.from_spec("phi", start=-math.pi, stop=math.pi, count=33))))

    return reg


def load_preset(name: str) -> ScenarioConfig:
    reg = preset_registry()
    if name not in reg:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(sorted(reg))}")
    return reg[name][1]()
