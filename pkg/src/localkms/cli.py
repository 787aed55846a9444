"""Batch driver: ``localkms run <config>`` and ``localkms describe <state> <config>``.

Config is a JSON file::

    {
      "seed": 0,
      "output_dir": "out",
      "states": [{"name": "hb", "variant": "hotbang", "gamma": 1.0}],
      "checks": [{"kind": "lte", "state": "hb", "points": [[1, 0, 0, 0]], "orders": [4]}]
    }

Check kinds and their optional fields:

``lte``            points, orders, mode (sharp|mixed), grid, tolerance
``lkms``           points, beta, tolerance (detailed balance), periodicity_tolerance, cluster_tolerance
``affine_beta``    samples (count), apex, tolerance
``mixed_measure``  points, order, grid, tolerance
``kg_residual``    h (list), pairs, mass, tolerance
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, lkms, lte
from .balanced import N_MAX
from .errors import ConfigInvalid, LocalKMSError, UnknownState
from .minkowski import as_beta
from .states import HotBang, Kms, StateSpec, state_from_dict, state_to_dict
from .thermo import stress_energy, theta

CHECK_KINDS = ("lte", "lkms", "affine_beta", "mixed_measure", "kg_residual")
DEFAULT_TOL = {
    "lte": lte.DEFAULT_TOL,
    "lkms": lkms.DETAILED_BALANCE_TOL,
    "affine_beta": 1e-6,
    "mixed_measure": 1e-6,
    "kg_residual": 1e-3,
}
THREADS_ENV = "LOCALKMS_THREADS"


# ---------------------------------------------------------------- config


@dataclass
class CheckSpec:
    index: int
    kind: str
    state: str
    params: dict


@dataclass
class RunConfig:
    states: dict
    checks: list
    output_dir: Path
    seed: int = 0
    raw: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _four_vectors(value, path: str) -> list:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(path, "expected a list of four-vectors") from exc
    if arr.ndim != 2 or arr.shape[1] != 4 or len(arr) == 0:
        raise ConfigInvalid(path, "expected a non-empty list of four-vectors")
    return [row for row in arr]


def _positive(value, path: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(path, "expected a number") from exc
    if not v > 0:
        raise ConfigInvalid(path, "must be positive")
    return v


def parse_config(data: dict, output_dir=None, seed=None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigInvalid("<root>", "expected an object")
    states = {}
    for i, entry in enumerate(data.get("states", [])):
        path = f"states[{i}]"
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigInvalid(path, "state needs a name")
        name = entry["name"]
        if name in states:
            raise ConfigInvalid(f"{path}.name", f"duplicate state name {name!r}")
        body = {k: v for k, v in entry.items() if k != "name"}
        try:
            states[name] = state_from_dict(body)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(path, str(exc)) from exc
    checks = []
    for i, entry in enumerate(data.get("checks", [])):
        path = f"checks[{i}]"
        if not isinstance(entry, dict):
            raise ConfigInvalid(path, "expected an object")
        kind = entry.get("kind")
        if kind not in CHECK_KINDS:
            raise ConfigInvalid(f"{path}.kind", f"unknown check kind {kind!r}")
        name = entry.get("state")
        if name not in states:
            raise ConfigInvalid(f"{path}.state", f"undefined state {name!r}")
        params = {k: v for k, v in entry.items() if k not in ("kind", "state")}
        for key in ("tolerance", "periodicity_tolerance", "cluster_tolerance"):
            if key in params:
                params[key] = _positive(params[key], f"{path}.{key}")
        if "points" in params:
            params["points"] = _four_vectors(params["points"], f"{path}.points")
        elif kind in ("lte", "lkms", "mixed_measure"):
            raise ConfigInvalid(f"{path}.points", "required")
        if kind == "mixed_measure" and not params.get("grid"):
            raise ConfigInvalid(f"{path}.grid", "required and non-empty")
        if kind == "lte":
            orders = params.get("orders", [N_MAX])
            if any(int(n) != n or not 0 <= n <= N_MAX for n in orders):
                raise ConfigInvalid(f"{path}.orders", f"orders must lie in 0..{N_MAX}")
        if kind == "kg_residual":
            hs = params.get("h", [1e-2])
            params["h"] = [_positive(h, f"{path}.h[{j}]") for j, h in enumerate(hs)]
        checks.append(CheckSpec(i, kind, name, params))
    out = output_dir if output_dir is not None else data.get("output_dir", "localkms-out")
    return RunConfig(states, checks, Path(out), int(seed if seed is not None else data.get("seed", 0)), data)


def load_config(path, output_dir=None, seed=None) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid("<root>", f"invalid JSON: {exc}") from exc
    return parse_config(data, output_dir, seed)


# ---------------------------------------------------------------- serialisation


def _fmt(x: float) -> str:
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits; non-finite -> null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj)) if math.isfinite(obj) else "null"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def _write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


# ---------------------------------------------------------------- check runners


class _Context:
    def __init__(self, config: RunConfig, spec: CheckSpec, tol_scale: float, figures: bool):
        self.config = config
        self.spec = spec
        self.tol_scale = tol_scale
        self.figures = figures
        self.rng = np.random.default_rng([config.seed, spec.index])
        self.artifacts: list[str] = []

    def tol(self, key: str = "tolerance", default: float | None = None) -> float:
        base = self.spec.params.get(key, DEFAULT_TOL[self.spec.kind] if default is None else default)
        return base * self.tol_scale

    def stem(self, label: str) -> Path:
        return self.config.output_dir / f"check{self.spec.index:02d}_{self.spec.kind}_{label}"

    def csv(self, label: str, header, rows) -> Path:
        path = _write_csv(self.stem(label).with_suffix(".csv"), header, rows)
        self.artifacts.append(path.name)
        return path

    def figure(self, draw, label: str, *args, **kwargs):
        if self.figures:
            path = draw(*args, path=self.stem(label).with_suffix(".png"), **kwargs)
            self.artifacts.append(path.name)


def _run_lte(state: StateSpec, ctx: _Context) -> list[dict]:
    p = ctx.spec.params
    mode = p.get("mode", "sharp")
    grid = [as_beta(b) for b in p["grid"]] if p.get("grid") else None
    out = []
    for q in p["points"]:
        for order in p.get("orders", [N_MAX]):
            rep = lte.check_lte(state, q, int(order), ctx.tol(), mode=mode, grid=grid)
            out.append({"inputs": {"q": q, "order": int(order), "mode": mode}, "result": rep.to_dict(),
                        "verdict": rep.verdict, "reason": rep.reason})
    return out


def _run_lkms(state: StateSpec, ctx: _Context) -> list[dict]:
    from .plotting import cluster_figure, ladder_figure

    p = ctx.spec.params
    out = []
    for i, q in enumerate(p["points"]):
        rep = lkms.check_lkms(
            state, q, p.get("beta"),
            seed=int(ctx.rng.integers(2**31)),
            tol_balance=ctx.tol(),
            tol_periodicity=ctx.tol("periodicity_tolerance", lkms.PERIODICITY_TOL),
            tol_cluster=ctx.tol("cluster_tolerance", lkms.CLUSTER_TOL),
        )
        if rep.cluster_profile is not None:
            ctx.csv(f"p{i}_cluster", ["t", "sigma", "abs_w", "fitted_rate"], rep.cluster_profile.rows())
            ctx.figure(cluster_figure, f"p{i}_cluster", rep.cluster_profile)
        if rep.periodicity_ladder:
            ctx.csv(f"p{i}_periodicity", ["eta", "upper_residual", "lower_residual"], rep.periodicity_ladder)
            ctx.figure(ladder_figure, f"p{i}_periodicity", rep.periodicity_ladder,
                       xlabel="eta", ylabel="sup |mismatch|", title="boundary periodicity ladder")
        out.append({"inputs": {"q": q, "beta": p.get("beta")}, "result": rep.to_dict(),
                    "verdict": rep.verdict, "reason": rep.reason})
    return out


def _run_affine(state: StateSpec, ctx: _Context) -> list[dict]:
    p = ctx.spec.params
    count = int(p.get("samples", 8))
    apex = p.get("apex", [0.0, 0.0, 0.0, 0.0])
    samples = lte.forward_cone_samples(ctx.rng, count, apex)
    fit = lte.check_affine_beta_detailed(state, samples)
    ok = fit.residual <= ctx.tol()
    ctx.csv("samples", ["q0", "q1", "q2", "q3", "beta0", "beta1", "beta2", "beta3"],
            [list(q) + list(b) for q, b in zip(samples, fit.betas)])
    return [{"inputs": {"samples": count, "apex": apex},
             "result": {"c": fit.c, "b": fit.b, "residual": fit.residual},
             "verdict": "pass" if ok else "fail", "reason": ""}]


def _run_mixed(state: StateSpec, ctx: _Context) -> list[dict]:
    p = ctx.spec.params
    grid = [as_beta(b) for b in p["grid"]]
    order = int(p.get("order", N_MAX))
    out = []
    for q in p["points"]:
        fit = lte.fit_mixed_measure_detailed(state, q, order, grid)
        feasible = fit.residual <= lte.FEASIBILITY_THRESHOLD
        ok = feasible and fit.residual <= ctx.tol()
        result = {
            "residual": fit.residual,
            "raw_residual": fit.raw_residual,
            "measure": [{"beta": b.vector, "weight": w} for b, w in fit.measure.atoms],
        }
        out.append({"inputs": {"q": q, "order": order}, "result": result,
                    "verdict": "pass" if ok else "fail", "reason": "" if feasible else "Infeasible"})
    return out


def _run_kg(state: StateSpec, ctx: _Context) -> list[dict]:
    from .plotting import ladder_figure

    p = ctx.spec.params
    pairs = p.get("pairs")
    pairs = [tuple(np.asarray(v, dtype=float) for v in pr) for pr in pairs] if pairs else lkms.standard_kg_pairs()
    mass = float(p.get("mass", state.mass))
    rows = [(h, lkms.kg_residual(state, pairs, h, mass)) for h in p["h"]]
    ctx.csv("ladder", ["h", "kg_residual"], rows)
    if len(rows) > 1:
        ctx.figure(ladder_figure, "ladder", rows, xlabel="h", ylabel="kg residual", title="Klein-Gordon residual")
    ok = all(r <= ctx.tol() for _, r in rows)
    return [{"inputs": {"h": p["h"], "mass": mass, "pairs": len(pairs)},
             "result": {"residuals": [r for _, r in rows]},
             "verdict": "pass" if ok else "fail", "reason": ""}]


_RUNNERS = {
    "lte": _run_lte,
    "lkms": _run_lkms,
    "affine_beta": _run_affine,
    "mixed_measure": _run_mixed,
    "kg_residual": _run_kg,
}


def _execute(config: RunConfig, spec: CheckSpec, tol_scale: float, figures: bool) -> list[dict]:
    ctx = _Context(config, spec, tol_scale, figures)
    state = config.states[spec.state]
    start = time.perf_counter()
    try:
        items = _RUNNERS[spec.kind](state, ctx)
    except LocalKMSError as exc:
        items = [{"inputs": {}, "result": {}, "verdict": "fail", "reason": f"{type(exc).__name__}: {exc}"}]
    wall = time.perf_counter() - start
    records = []
    for item in items:
        records.append({
            "check": spec.index,
            "kind": spec.kind,
            "state": spec.state,
            "inputs": item["inputs"],
            "residuals": item["result"],
            "verdict": item["verdict"],
            "reason": item["reason"],
            "artifacts": list(ctx.artifacts),
            "wall_time": wall / len(items),
            "version": __version__,
            "config_hash": config.digest,
            "seed": config.seed,
        })
    return records


def run(config: RunConfig, tol_scale: float = 1.0, figures: bool = True, threads: int | None = None):
    """Run every check; returns (exit_status, records).  Records keep config order."""
    if not tol_scale > 0:
        raise ConfigInvalid("--tolerance-scale", "must be positive")
    config.output_dir.mkdir(parents=True, exist_ok=True)
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    if threads > 1 and not figures:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda s: _execute(config, s, tol_scale, figures), config.checks))
    else:  # pyplot is not thread-safe
        chunks = [_execute(config, s, tol_scale, figures) for s in config.checks]
    records = [r for chunk in chunks for r in chunk]
    (config.output_dir / "summary.json").write_text(dumps({
        "version": __version__,
        "config_hash": config.digest,
        "seed": config.seed,
        "records": records,
    }) + "\n")
    status = 0 if records and all(r["verdict"] == "pass" for r in records) else 1
    return status, records


# ---------------------------------------------------------------- describe


def describe(name: str, config: RunConfig, point=(1.0, 0.0, 0.0, 0.0)) -> str:
    if name not in config.states:
        raise UnknownState(name)
    state = config.states[name]
    data = state_to_dict(state)
    lines = [f"state: {name}", f"variant: {data.pop('variant')}"]
    lines += [f"{k}: {v}" for k, v in data.items()]
    q = np.asarray(point, dtype=float)
    beta = None
    if isinstance(state, Kms):
        beta = state.beta
    elif isinstance(state, HotBang):
        beta = state.local_beta(q)
        lines.append(f"reference point q: ({', '.join(_short(c) for c in q)})")
        lines.append(f"beta(q) = ({', '.join(_short(c) for c in beta.vector)})")
    if beta is not None:
        lines.append(f"Theta = {_short(theta(beta, state.mass))}")
        if state.mass == 0.0:
            lines.append(f"E_00 = {_short(stress_energy(beta)[0, 0])}")
    return "\n".join(lines)


def _short(x: float) -> str:
    return format(float(x), ".10g")


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="localkms", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the checks of a config file")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--tolerance-scale", type=float, default=1.0)
    p_run.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    p_desc = sub.add_parser("describe", help="summarise one state of a config file")
    p_desc.add_argument("state")
    p_desc.add_argument("config")
    p_desc.add_argument("--point", type=float, nargs=4, default=[1.0, 0.0, 0.0, 0.0])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "describe":
            print(describe(args.state, load_config(args.config), args.point))
            return 0
        config = load_config(args.config, args.output_dir, args.seed)
        status, records = run(config, args.tolerance_scale, figures=not args.no_figures)
    except ConfigInvalid as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return 2
    except UnknownState as exc:
        print(f"unknown state {exc}", file=sys.stderr)
        return 2
    passed = sum(r["verdict"] == "pass" for r in records)
    print(f"{passed}/{len(records)} checks passed; report in {config.output_dir / 'summary.json'}")
    return status


if __name__ == "__main__":
    sys.exit(main())
