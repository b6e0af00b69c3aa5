"""Command-line harness: classify, simulate, certify, counterexample, report.

Every subcommand reads one JSON config (validated against CONFIG_SCHEMA),
writes its artifacts into --out, and records them in manifest_<command>.json.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import __version__
from .bounds import (
    certify,
    default_lambda_grid,
    default_time_grid,
    hyperbolic_crossover,
)
from .coefficients import (
    Coefficient,
    ConstantModulation,
    GluedBlock,
    inverse_time_modulation,
    make_constant,
    make_dgcs,
    make_glued,
    make_no_way,
)
from .counterexample import (
    activation_step,
    atomic_sample,
    band_sample,
    build_schedule,
    prepare,
    verify_growth,
)
from .errors import WaveGecError
from .mode_dynamics import (
    IntegratorConfig,
    ModeState,
    closed_form_dgcs,
    closed_form_no_way,
    integrate_mode,
)
from .rates import (
    PROFILE_SCHEMA,
    classify_power,
    envelope_trend,
    fast_growth_profile,
    profile_from_json,
)

log = logging.getLogger("wavegec")

_GRID = {
    "oneOf": [
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
        {
            "type": "object",
            "required": ["geomspace"],
            "properties": {"geomspace": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}},
        },
    ]
}

_COEFF = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["constant", "no_way", "dgcs", "activation", "schedule"]},
        "name": {"type": "string"},
        "c_inf": {"type": "number", "exclusiveMinimum": 0},
        "m": {"type": "number", "exclusiveMinimum": 0},
        "lambda": {"type": "number", "exclusiveMinimum": 0},
        "eps": {"oneOf": [{"type": "number"}, {"const": "inverse_time"}]},
        "A": {"type": "number"},
        "L": {"type": "number"},
        "K": {"type": "integer", "minimum": 1},
        "horizon": {"type": "number"},
        "lambda_block": {"type": "number"},
    },
}

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "wavegec experiment config",
    "type": "object",
    "properties": {
        "class": PROFILE_SCHEMA,
        "fast_growth": {"type": "boolean"},
        "integrator": {
            "type": "object",
            "properties": {
                "eta": {"type": "number", "minimum": 10},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "atol": {"type": "number", "exclusiveMinimum": 0},
                "max_step": {"type": ["number", "null"]},
                "lambda_cap": {"type": "number"},
                "step_cap": {"type": "integer"},
                "compiled": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "classify": {
            "type": "object",
            "properties": {"horizon": {"type": "number"}, "times": _GRID},
        },
        "simulate": {
            "type": "object",
            "required": ["runs"],
            "properties": {
                "runs": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["coefficient", "lambda", "t_start", "t_end"],
                        "properties": {
                            "coefficient": _COEFF,
                            "lambda": {"type": "number", "exclusiveMinimum": 0},
                            "t_start": {"type": "number"},
                            "t_end": {"type": "number"},
                            "data": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                            "closed_form": {"type": "boolean"},
                            "points": {"type": "integer", "minimum": 2},
                        },
                    },
                }
            },
        },
        "certify": {
            "type": "object",
            "required": ["coefficients"],
            "properties": {
                "coefficients": {"type": "array", "items": _COEFF, "minItems": 1},
                "lambdas": _GRID,
                "times": _GRID,
                "slack": {"type": "number", "minimum": 0},
            },
        },
        "counterexample": {
            "type": "object",
            "properties": {
                "K": {"type": "integer", "minimum": 1, "maximum": 3},
                "lambda0": {"type": "number", "minimum": 0},
                "horizon_cap": {"type": "number"},
                "bands": {"type": "boolean"},
            },
        },
        "workers": {"type": "integer", "minimum": 1},
        "horizon": {"type": "number"},
    },
}


# ---------------------------------------------------------------------------
# Config and output helpers
# ---------------------------------------------------------------------------


def load_config(path: str) -> dict[str, Any]:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        pointer = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"config invalid at {pointer}: {exc.message} (see `wavegec schema`)") from exc
    return doc


class UsageError(Exception):
    pass


def config_hash(doc: dict[str, Any]) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _grid(spec: Any, default: np.ndarray) -> np.ndarray:
    if spec is None:
        return default
    if isinstance(spec, dict):
        lo, hi, n = spec["geomspace"]
        return np.geomspace(lo, hi, int(n))
    return np.asarray(spec, dtype=float)


def _fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) for v in row])


def _plain(obj: Any) -> Any:
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def write_json(path: str, doc: Any) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_plain)
        fh.write("\n")


class Run:
    """Collects artifacts and margins for the manifest."""

    def __init__(self, out: str, command: str, config: dict[str, Any]) -> None:
        self.out = out
        self.command = command
        self.config = config
        self.files: list[str] = []
        self.margins: dict[str, float] = {}
        self.started = time.perf_counter()
        os.makedirs(out, exist_ok=True)

    def path(self, name: str) -> str:
        self.files.append(name)
        return os.path.join(self.out, name)

    def finish(self) -> dict[str, Any]:
        files = []
        for name in sorted(set(self.files)):
            with open(os.path.join(self.out, name), "rb") as fh:
                files.append({"file": name, "sha256": hashlib.sha256(fh.read()).hexdigest()})
        manifest = {
            "command": self.command,
            "config_hash": config_hash(self.config),
            "version": __version__,
            "files": files,
            "worst_margins": self.margins,
            "wall_clock_seconds": time.perf_counter() - self.started,
            "deterministic": True,
        }
        mpath = os.path.join(self.out, f"manifest_{self.command}.json")
        write_json(mpath, manifest)
        return manifest


def _class(config: dict[str, Any]):
    if config.get("fast_growth"):
        from .rates import ClassParams

        cls = config.get("class", {})
        params = ClassParams(
            t0=0.0, lambda1=float(cls.get("lambda1", 1.0)), lambda2=float(cls.get("lambda2", 4.0))
        )
        return params, fast_growth_profile()
    if "class" not in config:
        raise UsageError("config needs a 'class' section")
    return profile_from_json(config["class"])


def _integrator(config: dict[str, Any]) -> IntegratorConfig:
    return IntegratorConfig.from_dict(config.get("integrator", {}))


def _coefficient(spec: dict[str, Any], config: dict[str, Any]) -> tuple[Coefficient, float, dict[str, Any]]:
    """Coefficient, the frequency scale for default grids, and extra metadata."""
    kind = spec["kind"]
    if kind == "constant":
        return make_constant(spec.get("c_inf", 1.0)), 1.0, {}
    if kind == "no_way":
        return make_no_way(), 1.0, {}
    if kind == "dgcs":
        eps = spec.get("eps", 0.1)
        mod = inverse_time_modulation() if eps == "inverse_time" else ConstantModulation(float(eps))
        return make_dgcs(spec.get("m", 1.0), spec["lambda"], mod), spec["lambda"], {}
    params, profile = _class(config)
    setup = prepare(profile, params)
    if kind == "activation":
        blk, ver = activation_step(spec.get("A", profile.t0 + 1), spec.get("L", 4.0), 0.0, setup)
        glued = make_glued(setup.c_inf, [GluedBlock(blk.a, blk.b, blk.coeff)], profile.t0)
        return glued, blk.lam, {"block": blk.to_dict(), "verification": ver.to_dict() if ver else None}
    sched = build_schedule(spec.get("K", 2), setup, _integrator(config), verify=False, energies=False)
    return sched.coeff, sched.blocks[0].lam, {"schedule": [b.to_dict() for b in sched.blocks]}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_classify(config: dict[str, Any], run: Run, horizon: float | None) -> dict[str, Any]:
    params, profile = _class(config)
    doc: dict[str, Any] = {"profile": profile.to_dict(), "params": params.to_dict()}
    if profile.form is not None:
        cls = classify_power(profile.form.beta, profile.form.alpha)
        doc["classification"] = cls.summary()
        doc["gec"] = cls.gec
    else:
        h = horizon or config.get("classify", {}).get("horizon", profile.t0 + 10.0)
        trend = envelope_trend(profile, h)
        doc["classification"] = "GEC" if trend["trend"] == "bounded" else "growing envelope"
        doc["trend"] = trend
        times = _grid(config.get("classify", {}).get("times"), default_time_grid(profile.t0, h))
        cross = hyperbolic_crossover(profile, params, times)
        doc["crossover"] = cross.to_dict()
        write_csv(
            run.path("crossover.csv"),
            ["t", "hyperbolic_exponent", "log_envelope", "ratio"],
            zip(cross.times, cross.classical, cross.envelope, cross.ratio),
        )
    write_json(run.path("classification.json"), doc)
    print(doc["classification"])
    return doc


def cmd_simulate(config: dict[str, Any], run: Run, horizon: float | None) -> dict[str, Any]:
    section = config.get("simulate")
    if not section:
        raise UsageError("config needs a 'simulate' section")
    cfg = _integrator(config)
    summary = []
    for idx, spec in enumerate(section["runs"]):
        coeff, _, _ = _coefficient(spec["coefficient"], config)
        lam = float(spec["lambda"])
        t_start = float(spec["t_start"])
        t_end = float(horizon or spec["t_end"])
        u0, v0 = spec.get("data", [0.0, coeff.c_inf**0.25])
        n = int(spec.get("points", 201))
        kind = spec["coefficient"]["kind"]
        if kind == "no_way":
            times = np.geomspace(t_start, t_end, n)
        else:
            times = np.linspace(t_start, t_end, n)
        trace = integrate_mode(coeff, lam, ModeState(t_start, u0, v0, lam), t_end, cfg, times=times)
        header = ["t", "u", "v", "e_kow", "e_tar", "tarama_ok"]
        cols = [trace.t, trace.u, trace.v, trace.e_kow, trace.e_tar, trace.tarama_ok]
        if spec.get("closed_form"):
            if kind == "no_way":
                w, wp = closed_form_no_way(trace.t)
            elif kind == "dgcs":
                c = spec["coefficient"]
                eps = c.get("eps", 0.1)
                mod = inverse_time_modulation() if eps == "inverse_time" else ConstantModulation(float(eps))
                w, wp = closed_form_dgcs(c.get("m", 1.0), lam, mod, t_start, trace.t)
            else:
                raise UsageError(f"no closed form for coefficient kind {kind!r}")
            header += ["w_closed", "w_prime_closed"]
            cols += [np.asarray(w), np.asarray(wp)]
        name = spec["coefficient"].get("name", f"{kind}_{idx}")
        write_csv(run.path(f"trace_{name}.csv"), header, zip(*cols))
        summary.append({
            "name": name, "lambda": lam, "steps": trace.steps, "route": trace.route,
            "final_e_kow": float(trace.e_kow[-1]), "max_error": trace.max_error,
        })
    doc = {"runs": summary}
    write_json(run.path("simulate.json"), doc)
    return doc


def cmd_certify(config: dict[str, Any], run: Run, horizon: float | None, workers: int) -> dict[str, Any]:
    section = config.get("certify")
    if not section:
        raise UsageError("config needs a 'certify' section")
    params, profile = _class(config)
    cfg = _integrator(config)
    results = []
    for idx, spec in enumerate(section["coefficients"]):
        coeff, lam_block, meta = _coefficient(spec, config)
        lam_block = spec.get("lambda_block", lam_block)
        h = horizon or spec.get("horizon") or config.get("horizon") or _default_horizon(coeff, profile.t0)
        lams = _grid(section.get("lambdas"), default_lambda_grid(lam_block))
        ts = _grid(section.get("times"), default_time_grid(profile.t0, h))
        report = certify(coeff, profile, params, lams, ts, cfg, section.get("slack", 0.05), workers)
        name = spec.get("name", f"{spec['kind']}_{idx}")
        report.to_csv(run.path(f"certify_{name}.csv"))
        write_json(run.path(f"certify_{name}.json"), {**report.to_dict(), **meta})
        run.margins[f"certify_{name}"] = report.worst_margin
        results.append({"name": name, "passed": report.passed, "worst_margin": report.worst_margin})
        print(f"{name}: {'PASS' if report.passed else 'FAIL'} worst margin {report.worst_margin:.6g}")
    doc = {"results": results}
    write_json(run.path("certify.json"), doc)
    return doc


def _default_horizon(coeff: Coefficient, t0: float) -> float:
    ends = [b for _, b in (coeff.support or ())]
    if len(ends) > 1:
        return coeff.support[1][0] + 100.0
    return max([t0 + 100.0, *[e + 1.0 for e in ends]])


def cmd_counterexample(config: dict[str, Any], run: Run, horizon: float | None) -> dict[str, Any]:
    section = config.get("counterexample", {})
    params, profile = _class(config)
    cfg = _integrator(config)
    setup = prepare(profile, params, section.get("lambda0", 0.0), section.get("horizon_cap", 1e12))
    sched = build_schedule(section.get("K", 2), setup, cfg)
    sample = band_sample(sched, cfg) if section.get("bands") else atomic_sample(sched)
    growth = verify_growth(sched, sample, cfg)
    sched.to_json(run.path("schedule.json"))
    sched.to_csv(run.path("schedule.csv"))
    write_json(run.path("growth.json"), growth.to_dict())
    rows = []
    for blk, row in zip(sched.blocks, growth.rows):
        rows.append([
            row.k, blk.A, blk.a, blk.b, blk.lam, blk.M_b, math.log(row.energy_b),
            math.log(row.required), row.log_margin, row.passed,
        ])
    write_csv(
        run.path("growth.csv"),
        ["k", "A_k", "a_k", "b_k", "lambda_k", "M_b", "log_energy", "log_envelope", "margin", "pass"],
        rows,
    )
    run.margins["growth"] = min((r.log_margin for r in growth.rows), default=math.nan)
    print(f"k_min = {growth.k_min}")
    return growth.to_dict()


def cmd_report(run: Run) -> dict[str, Any]:
    names = sorted(f for f in os.listdir(run.out) if f.endswith((".json", ".csv")))
    names = [n for n in names if not n.startswith(("manifest_", "summary", "overlay_", "plot_"))]
    lines = [f"artifacts: {len(names)}"]
    for name in names:
        if name.startswith("certify_") and name.endswith(".json"):
            with open(os.path.join(run.out, name)) as fh:
                doc = json.load(fh)
            csv_name = name[:-5] + ".csv"
            _overlay(run, csv_name)
            lines.append(f"{name}: passed={doc['passed']} worst_margin={doc['worst_margin']:.6g}")
        if name == "growth.json":
            with open(os.path.join(run.out, name)) as fh:
                doc = json.load(fh)
            rows = [
                [r["k"], math.log(r["energy_b"]), math.log(r["required"]), r["passed"]]
                for r in doc["rows"]
            ]
            write_csv(run.path("plot_growth.csv"), ["k", "log_energy", "log_envelope", "pass"], rows)
            lines.append(f"growth: k_min={doc['k_min']}")
    with open(run.path("summary.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return {"artifacts": len(names), "lines": lines}


def _overlay(run: Run, csv_name: str) -> None:
    src = os.path.join(run.out, csv_name)
    if not os.path.exists(src):
        return
    with open(src) as fh:
        rows = list(csv.DictReader(fh))
    out = [[r["data_set"], r["lambda"], r["t"], r["ratio"], r["lower"], r["envelope"]] for r in rows]
    with open(run.path("overlay_" + csv_name[len("certify_"):]), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["data_set", "lambda", "t", "ratio", "lower", "upper"])
        w.writerows(out)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavegec", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("classify", "simulate", "certify", "counterexample", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config (see `wavegec schema`)")
        p.add_argument("--out", default="wavegec_out", help="output directory")
        p.add_argument("--workers", type=int, default=None, help="worker threads for sweeps")
        p.add_argument("--horizon", type=float, default=None, help="override the time horizon")
        p.add_argument(
            "--seedless", action="store_true",
            help="no-op: every run is deterministic and uses no random seed",
        )
        p.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("schema", help="print the config JSON schema")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=2, sort_keys=True))
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        config = load_config(args.config) if args.config else {}
        if args.command != "report" and not args.config:
            raise UsageError(f"{args.command} needs --config")
        run = Run(args.out, args.command, config)
        workers = args.workers or config.get("workers", 1)
        if args.command == "classify":
            cmd_classify(config, run, args.horizon)
        elif args.command == "simulate":
            cmd_simulate(config, run, args.horizon)
        elif args.command == "certify":
            cmd_certify(config, run, args.horizon, workers)
        elif args.command == "counterexample":
            cmd_counterexample(config, run, args.horizon)
        else:
            cmd_report(run)
        run.finish()
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except WaveGecError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
