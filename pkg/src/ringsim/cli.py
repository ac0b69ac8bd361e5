"""Command-line interface: run scenario presets or TOML-configured sweeps.

Commands::

    ringsim run --scenario fig2 --out results/ [--config custom.toml]
                [--set hamiltonian.mu=0.5 ...] [--workers N] [--timing]
    ringsim list-scenarios
    ringsim validate --config custom.toml

Exit codes: 0 success, 2 configuration error, 3 solver failure (partial CSV
is retained with the failed rows flagged).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .experiments import (ConfigError, ScenarioConfig, SolverConfig, SweepAxis,
                          load_preset, preset_registry, run_scenario)
from .lattice import DissipationSpec, HamiltonianParams, ModelSpec

_MODEL_KEYS = {"L", "boundary", "kind", "n_max"}
_HAM_KEYS = {"J0", "phi", "lam", "mu", "U", "eps_x", "eps_zz"}
_DISS_KEYS = {"kappa", "alpha", "beta", "gamma", "delta", "range", "minimal"}
_SOLVER_KEYS = {"method", "tol", "t_max", "dt", "init"}
_SWEEP_KEYS = {"axis", "values", "start", "stop", "count"}
_OBS_KEYS = {"pair"}
_GROUND_KEYS = {"ed"}
_TOP_KEYS = {"scenario", "engine", "model", "hamiltonian", "dissipation", "solver",
             "sweep", "observables", "ground"}

_COMPLEX_FIELDS = {"lam", "alpha", "beta", "gamma", "delta"}


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _coerce(key: str, value):
    if key in _COMPLEX_FIELDS and isinstance(value, str):
        try:
            return complex(value)
        except ValueError as exc:
            raise ConfigError(f"cannot parse complex value {value!r} for {key}") from exc
    return value


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Plain nested-dict form of a scenario (the TOML schema)."""
    return {
        "scenario": cfg.scenario,
        "engine": cfg.engine,
        "model": {"L": cfg.model.L, "boundary": cfg.model.boundary,
                  "kind": cfg.model.kind, "n_max": cfg.model.n_max},
        "hamiltonian": {k: v for k, v in asdict(cfg.params).items()},
        "dissipation": {k: v for k, v in asdict(cfg.diss).items()},
        "solver": {k: v for k, v in asdict(cfg.solver).items() if v is not None},
        "sweep": [{"axis": ax.name, "values": list(ax.values)} for ax in cfg.sweep],
        "observables": {"pair": list(cfg.pair)},
        "ground": {"ed": cfg.ground_ed},
    }


def config_from_dict(data: dict) -> ScenarioConfig:
    """Strictly validated ScenarioConfig from the nested-dict schema."""
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a table")
    _check_keys(data, _TOP_KEYS, "the top level")
    try:
        scenario = data.get("scenario")
        if not scenario:
            raise ConfigError("a scenario id is required (key `scenario` or --scenario)")
        engine = data.get("engine", "steady")

        model_d = dict(data.get("model", {}))
        _check_keys(model_d, _MODEL_KEYS, "[model]")
        model = ModelSpec(**model_d)

        ham_d = {k: _coerce(k, v) for k, v in dict(data.get("hamiltonian", {})).items()}
        _check_keys(ham_d, _HAM_KEYS, "[hamiltonian]")
        params = HamiltonianParams(**ham_d)

        diss_d = {k: _coerce(k, v) for k, v in dict(data.get("dissipation", {})).items()}
        _check_keys(diss_d, _DISS_KEYS, "[dissipation]")
        diss = DissipationSpec(**diss_d)

        solver_d = dict(data.get("solver", {}))
        _check_keys(solver_d, _SOLVER_KEYS, "[solver]")
        solver = SolverConfig(**solver_d)

        sweep_list = data.get("sweep", [])
        if isinstance(sweep_list, dict):
            sweep_list = [sweep_list]
        axes = []
        for entry in sweep_list:
            entry = dict(entry)
            _check_keys(entry, _SWEEP_KEYS, "[[sweep]]")
            if "axis" not in entry:
                raise ConfigError("every [[sweep]] entry needs an `axis`")
            axes.append(SweepAxis.from_spec(entry["axis"], entry.get("values"),
                                            entry.get("start"), entry.get("stop"),
                                            entry.get("count")))

        obs_d = dict(data.get("observables", {}))
        _check_keys(obs_d, _OBS_KEYS, "[observables]")
        pair = tuple(int(p) for p in obs_d.get("pair", (1, 2)))
        if len(pair) != 2:
            raise ConfigError("observables.pair must list exactly two sites")

        ground_d = dict(data.get("ground", {}))
        _check_keys(ground_d, _GROUND_KEYS, "[ground]")

        return ScenarioConfig(scenario=scenario, engine=engine, model=model,
                              params=params, diss=diss, solver=solver,
                              sweep=tuple(axes), pair=pair,
                              ground_ed=bool(ground_d.get("ed", True)))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _deep_update(base: dict, overlay: dict) -> dict:
    for k, v in overlay.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_update(base[k], v)
        else:
            base[k] = v
    return base


def _parse_set_value(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if "," in text:
        return [_parse_set_value(part) for part in text.split(",")]
    return text


def _apply_set(data: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    path, _, raw = assignment.partition("=")
    keys = path.strip().split(".")
    value = _parse_set_value(raw.strip())
    node = data
    for i, k in enumerate(keys[:-1]):
        if k == "sweep":
            # address a sweep axis by name: sweep.<axis>.<field>=...
            axes = node.setdefault("sweep", [])
            name = keys[i + 1]
            for entry in axes:
                if entry.get("axis") == name:
                    node = entry
                    break
            else:
                entry = {"axis": name}
                axes.append(entry)
                node = entry
            keys = keys[i + 2:]
            if not keys:
                raise ConfigError(f"--set sweep.{name} needs a field (values/start/stop/count)")
            for k2 in keys[:-1]:
                node = node.setdefault(k2, {})
            leaf = keys[-1]
            if leaf in ("start", "stop", "count") and "values" in node:
                vals = node.pop("values")
                node.setdefault("start", vals[0])
                node.setdefault("stop", vals[-1])
                node.setdefault("count", len(vals))
            if leaf == "values":
                for k2 in ("start", "stop", "count"):
                    node.pop(k2, None)
                value = value if isinstance(value, list) else [value]
            node[leaf] = value
            return
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set path {path!r} does not address a table")
    node[keys[-1]] = value


def build_config(scenario: str | None, config_path: str | None,
                 overrides: list[str]) -> ScenarioConfig:
    data: dict = {}
    if scenario:
        data = config_to_dict(load_preset(scenario))
    if config_path:
        try:
            with open(config_path, "rb") as fh:
                file_data = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(str(exc)) from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {config_path}: {exc}") from exc
        data = _deep_update(data, file_data) if data else file_data
    if not data:
        raise ConfigError("provide --scenario and/or --config")
    for assignment in overrides:
        _apply_set(data, assignment)
    return config_from_dict(data)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="ringsim",
                                     description="dissipative ring-lattice current simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write CSV/SVG results")
    p_run.add_argument("--scenario", help="preset id (see list-scenarios)")
    p_run.add_argument("--config", help="TOML configuration file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration key (repeatable)")
    p_run.add_argument("--workers", type=int, default=1, help="sweep worker threads")
    p_run.add_argument("--timing", action="store_true",
                       help="write measured wall times into the CSV "
                            "(breaks byte-reproducibility)")

    sub.add_parser("list-scenarios", help="list the scenario presets")

    p_val = sub.add_parser("validate", help="validate a configuration file")
    p_val.add_argument("--config", required=True)
    p_val.add_argument("--scenario", help="preset the file overlays")

    args = parser.parse_args(argv)

    if args.command == "list-scenarios":
        reg = preset_registry()
        width = max(len(k) for k in reg)
        for name in sorted(reg):
            print(f"{name:<{width}}  {reg[name][0]}")
        return 0

    if args.command == "validate":
        try:
            cfg = build_config(args.scenario, args.config, [])
        except ConfigError as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            return 2
        print(f"ok: scenario {cfg.scenario!r} ({cfg.engine}), "
              f"{len(cfg.sweep)} sweep axis/axes")
        return 0

    # run
    try:
        cfg = build_config(args.scenario, args.config, args.set)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    def progress(done: int, total: int) -> None:
        if done == total or done % 25 == 0:
            print(f"  [{cfg.scenario}] {done}/{total} grid points", file=sys.stderr)

    report = run_scenario(cfg, Path(args.out), workers=args.workers,
                          timing=args.timing, progress=progress)
    print(f"wrote {report.csv_path} ({report.n_rows} rows) and "
          f"{len(report.svg_paths)} SVG file(s) in {report.wall_time_seconds:.1f}s")
    if report.n_failed:
        print(f"solver failure on {report.n_failed} grid point(s); "
              "failed rows are flagged in the CSV", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
