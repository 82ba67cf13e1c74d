"""Command-line entry point: experiments, region checks, Sperner tables and sweep data.

Exit codes: 0 success, 1 experiment-level failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
SEED_ENV = "MDLAB_SEED"
SCHEMA_BASE = "https://mdlab.local/schemas/v1/"
EXAMPLE_PARAMS = {"vecsource": ("delta", 0.1), "vecbin": ("p", 0.1), "scalar": ("d0", 0.035)}
CONFIG_FIELDS = ("n", "trials", "seed", "eps", "rate_pad", "best_of", "workers", "params")


class UsageError(Exception):
    """Bad arguments, unreadable input or a schema violation (exit 2)."""


# JSON, schemas and hashing ----------------------------------------------------


def _plain(value):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    return value


def dumps(doc) -> str:
    return json.dumps(_plain(doc), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def git_blob_sha1(data: bytes) -> str:
    """Content hash in git's blob format, so ``git hash-object`` on the config gives the same value."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _registry():
    from referencing import Registry, Resource

    files = resources.files("mdlab") / "schemas"
    pairs = []
    for entry in files.iterdir():
        if entry.name.endswith(".json"):
            pairs.append((SCHEMA_BASE + entry.name, Resource.from_contents(json.loads(entry.read_text(encoding="utf-8")))))
    return Registry().with_resources(pairs)


def validate(doc, schema: str) -> None:
    from jsonschema import Draft202012Validator

    registry = _registry()
    validator = Draft202012Validator(registry.contents(SCHEMA_BASE + schema), registry=registry)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    specific = [e for e in errors if e.validator != "unevaluatedProperties"]
    errors = specific or errors
    if errors:
        lines = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise UsageError(f"{schema} violation:\n  " + "\n  ".join(lines))


def read_json(path: str, schema: str) -> tuple[dict, bytes]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path} is not valid UTF-8 JSON: {exc}") from exc
    validate(doc, schema)
    return doc, raw


# outputs and manifest ---------------------------------------------------------


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config_path: str | None
    config_sha1: str
    seed: int | None
    timestamp: str
    outputs: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "argv": self.argv,
            "config_path": self.config_path,
            "config_sha1": self.config_sha1,
            "seed": self.seed,
            "timestamp": self.timestamp,
            "outputs": self.outputs,
        }


class Outputs:
    """Writes into one directory, refusing to overwrite unless forced; records every file in the manifest."""

    def __init__(self, directory: str, force: bool, manifest: RunManifest, names: Sequence[str]):
        self.dir = Path(directory)
        self.force = force
        self.manifest = manifest
        clashes = [n for n in [*names, "manifest.json"] if (self.dir / n).exists()]
        if clashes and not force:
            raise UsageError(f"refusing to overwrite {', '.join(str(self.dir / n) for n in clashes)} (use --force)")
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, name: str) -> Path:
        path = self.dir / name
        self.manifest.outputs.append(str(path))
        return path

    def json(self, name: str, doc) -> None:
        self._path(name).write_text(dumps(doc), encoding="utf-8")

    def csv(self, name: str, columns: Sequence[str], rows: Sequence[dict]) -> None:
        with self._path(name).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\r\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _csv_cell(row.get(k)) for k in columns})

    def finish(self) -> None:
        (self.dir / "manifest.json").write_text(dumps(self.manifest.to_dict()), encoding="utf-8")


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value)) if math.isfinite(value) else ""
    return value


def _manifest(args, raw: bytes | None, seed: int | None) -> RunManifest:
    if raw is None:
        raw = dumps({k: v for k, v in sorted(vars(args).items()) if k not in ("handler", "force", "out")}).encode()
    return RunManifest(
        command=args.command,
        argv=list(args.argv),
        config_path=getattr(args, "config", None),
        config_sha1=git_blob_sha1(raw),
        seed=seed,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def _seed(args, config_seed: int) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return int(config_seed)


def _experiment_config(doc: dict, args):
    from mdlab.experiments import ExperimentConfig

    values = {k: doc[k] for k in CONFIG_FIELDS if k in doc}
    values["seed"] = _seed(args, values.get("seed", 0))
    if getattr(args, "workers", None) is not None:
        values["workers"] = args.workers
    try:
        return ExperimentConfig.from_dict(values)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _report_doc(report) -> dict:
    doc = report.to_dict()
    # worker count never changes results, so it stays out of the report
    doc["config"] = {k: v for k, v in doc["config"].items() if k != "workers"}
    return doc


# commands -------------------------------------------------------------------------


def cmd_sperner(args) -> int:
    from mdlab.sperner import codebook_tables

    if not 1 <= args.l <= 5:
        raise UsageError("--l must lie in [1, 5]")
    tables = codebook_tables(args.l)
    if args.out is None:
        sys.stdout.write(dumps(tables))
        return EXIT_OK
    out = Outputs(args.out, args.force, _manifest(args, None, None), ["sperner.json"])
    out.json("sperner.json", tables)
    out.finish()
    sys.stdout.write(dumps({"l": args.l, "count": tables["count"]}))
    return EXIT_OK


def cmd_simulate(args) -> int:
    from mdlab.experiments import run_scalar, run_vecbin, run_vecsource

    doc, raw = read_json(args.config, "simulate.json")
    name, default = EXAMPLE_PARAMS[args.example]
    others = {k for k, _ in EXAMPLE_PARAMS.values()} - {name}
    stray = sorted(others & set(doc))
    if stray:
        raise UsageError(f"{args.example} does not take {stray}")
    value = float(doc.get(name, default))
    cfg = _experiment_config(doc, args)
    runner = {"vecsource": run_vecsource, "vecbin": run_vecbin, "scalar": run_scalar}[args.example]
    files = ["report.json", "trials.csv"] + (["sweep.csv"] if "sweep_n" in doc else [])
    out = Outputs(args.out, args.force, _manifest(args, raw, cfg.seed), files)
    report = runner(value, cfg)
    out.json("report.json", _report_doc(report))
    out.csv("trials.csv", report.csv_columns(), report.rows)
    if "sweep_n" in doc:
        rows = []
        for n in doc["sweep_n"]:
            rep = runner(value, cfg.replace(n=int(n)))
            for decoder, d in rep.distortions.items():
                rows.append({"n": int(n), "decoder": decoder, "distortion": d, "half_width": rep.half_widths.get(decoder)})
        out.csv("sweep.csv", ["n", "decoder", "distortion", "half_width"], rows)
    out.finish()
    sys.stdout.write(dumps({"experiment": report.experiment, "distortions": report.distortions, "checks": report.checks}))
    return EXIT_OK


def _load_spec(path: str):
    from mdlab.region import RegionSpec
    from mdlab.region.catalog import sum_source_stage2_spec

    doc, raw = read_json(path, "region_spec.json")
    try:
        if "catalog" in doc:
            return sum_source_stage2_spec(float(doc.get("delta", 0.1))), raw
        return RegionSpec.from_dict(doc), raw
    except (KeyError, ValueError) as exc:
        raise UsageError(f"invalid region spec: {exc}") from exc


def cmd_region(args) -> int:
    from mdlab.region import RdVector, bounds_for, check_membership, project_region

    spec, raw = _load_spec(args.spec)
    system = bounds_for(spec)
    if args.action == "check":
        if args.vector is None:
            raise UsageError("region check needs --vector")
        vdoc, vraw = read_json(args.vector, "rd_vector.json")
        try:
            vector = RdVector.from_dict(vdoc)
        except ValueError as exc:
            raise UsageError(f"invalid RD vector: {exc}") from exc
        if vector.l != spec.l:
            raise UsageError(f"vector has {vector.l} descriptions, spec has {spec.l}")
        verdict = check_membership(system, vector.assignment(), exact=True if args.exact else None)
        result = {"kind": spec.kind, "vector": vector.to_dict(), **verdict.to_dict()}
        raw = raw + vraw
    else:
        keep = args.keep.split(",") if args.keep else None
        rows = project_region(system, keep)
        result = {"kind": spec.kind, "inequalities": [r.to_dict() for r in rows], "text": [str(r) for r in rows]}
    if args.out is not None:
        out = Outputs(args.out, args.force, _manifest(args, raw, None), [f"{args.action}.json"])
        out.json(f"{args.action}.json", result)
        out.finish()
    sys.stdout.write(dumps(result))
    return EXIT_OK


def cmd_figd(args) -> int:
    from mdlab.experiments import figd_sweep

    try:
        res = figd_sweep(args.d0, args.step, refine=args.refine, mode=args.mode)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Outputs(args.out, args.force, _manifest(args, None, None), ["figd.csv", "summary.json"])
    rows = [{**r, "max_value": r["max_value"] if math.isfinite(r["max_value"]) else None} for r in res.surface_rows()]
    out.csv("figd.csv", ["alpha0", "beta0", "max_value"], rows)
    out.json("summary.json", res.summary())
    out.finish()
    sys.stdout.write(dumps({k: v for k, v in res.summary().items() if k != "x3_law"}))
    return EXIT_OK


def _lemma_setup(doc: dict, args, packing: bool):
    from mdlab.codes import build_shared_inner_pair
    from mdlab.experiments import diagonal_pmf, pattern_pmf
    from mdlab.infotheory import JointPmf

    cfg = _experiment_config(doc, args)
    q = int(doc.get("q", 2))
    try:
        pair = build_shared_inner_pair(q, cfg.n, int(doc["k"]), int(doc["l"]), int(doc["l_prime"]), int(doc.get("code_seed", cfg.seed)))
        if "pmf" in doc:
            pmf = JointPmf.from_dict(doc["pmf"])
        elif "pattern_weights" in doc:
            pmf = pattern_pmf(doc["pattern_weights"])
        elif packing or "erasure" in doc:
            pmf = diagonal_pmf(float(doc.get("erasure", 0.5)))
        else:
            pmf = pattern_pmf({"point": 0.1, "u_fixed": 0.15, "v_fixed": 0.15, "sum_fixed": 0.3, "free": 0.3})
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    names = tuple(doc.get("variables", ["X", "U", "V"]))
    return cfg, pair, pmf, names


def _lemma_outputs(args, raw, cfg, report) -> int:
    out = Outputs(args.out, args.force, _manifest(args, raw, cfg.seed), ["report.json", "trials.csv"])
    out.json("report.json", _report_doc(report))
    out.csv("trials.csv", report.csv_columns(), report.rows)
    out.finish()
    sys.stdout.write(dumps({"experiment": report.experiment, "rates": report.rates, "stats": report.stats}))
    return EXIT_OK


def cmd_covering(args) -> int:
    from mdlab.experiments import covering_mc

    doc, raw = read_json(args.config, "covering.json")
    cfg, pair, pmf, names = _lemma_setup(doc, args, packing=False)
    return _lemma_outputs(args, raw, cfg, covering_mc(pair, pmf, cfg, names=names))


def cmd_packing(args) -> int:
    from mdlab.experiments import packing_mc, random_linear_binning, setup_rng

    doc, raw = read_json(args.config, "covering.json")
    cfg, pair, pmf, names = _lemma_setup(doc, args, packing=True)
    rng = setup_rng(int(doc.get("bin_seed", cfg.seed)), 7)
    bins = []
    for code, key in zip(pair.codes, ("rho1", "rho2")):
        rows = round(float(doc.get(key, 0.325)) * cfg.n / math.log2(pair.q))
        if rows > code.k:
            raise UsageError(f"{key} asks for {rows} bin symbols but the code has only {code.k} message symbols")
        bins.append(random_linear_binning(code.k, rows, pair.q, rng))
    return _lemma_outputs(args, raw, cfg, packing_mc(pair, tuple(bins), pmf, cfg, names=names))


# parser ---------------------------------------------------------------------------


def _outputs(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--out", required=required, help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--seed", type=int, help=f"master seed (overrides {SEED_ENV} and the config)")
    p.add_argument("--workers", type=int, help="worker processes for independent trials")
    _outputs(p, True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sperner", help="list Sperner families and decoded/ancestor tables")
    p.add_argument("--l", type=int, required=True, help="number of descriptions (1..5)")
    _outputs(p, False)
    p.set_defaults(handler=cmd_sperner)

    p = sub.add_parser("simulate", help="run a worked-example Monte Carlo experiment")
    p.add_argument("example", choices=sorted(EXAMPLE_PARAMS))
    _experiment_flags(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("region", help="membership check or projection of a region system")
    p.add_argument("action", choices=["check", "project"])
    p.add_argument("--spec", required=True, help="region spec JSON")
    p.add_argument("--vector", help="RD vector JSON (check only)")
    p.add_argument("--exact", action="store_true", help="decide with rational arithmetic")
    p.add_argument("--keep", help="comma-separated variables kept by the projection (default: rates and distortions)")
    _outputs(p, False)
    p.set_defaults(handler=cmd_region)

    p = sub.add_parser("figd", help="grid sweep of the two-auxiliary objective; writes plot-ready CSV")
    p.add_argument("--d0", type=float, default=0.035)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--refine", action="store_true", help="polish the grid maximum with Nelder-Mead")
    p.add_argument("--mode", choices=["distortion", "rate"], default="distortion", help="target fixing the X3 law")
    _outputs(p, True)
    p.set_defaults(handler=cmd_figd)

    p = sub.add_parser("covering-mc", help="covering success frequency of a shared-inner code pair")
    _experiment_flags(p)
    p.set_defaults(handler=cmd_covering)

    p = sub.add_parser("packing-mc", help="packing error frequency with linear bins")
    _experiment_flags(p)
    p.set_defaults(handler=cmd_packing)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    from mdlab.experiments import EnumerationCapExceeded, ExperimentError
    from mdlab.region import CapExceeded, ConditioningError, ProjectionBlowup

    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"mdlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CapExceeded, ProjectionBlowup) as exc:
        print(f"mdlab: {exc}; the projection is too large, use a pointwise check (`mdlab region check`)", file=sys.stderr)
        return EXIT_FAILURE
    except (ExperimentError, EnumerationCapExceeded, ConditioningError) as exc:
        print(f"mdlab: experiment failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
