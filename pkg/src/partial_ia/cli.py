"""
Command-line entry point.

Subcommands
-----------
run            execute an experiment config and write CSV, JSON summary and manifest
selfcheck      feasibility cross-check on random instances plus the 5-pair golden case
dump-channels  serialize one generated drop to JSON
feascheck      read a freedom/constraint instance from JSON and print all verdicts

Exit codes: 0 success, 1 validation error, 2 runtime or numerical error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Optional

import numpy as np

from .channels import gen_fig3_example, realization_to_dict
from .errors import ConfigError, InvalidInputError
from .evaluation import (ExperimentConfig, generate_drop, run_experiment, summarize,
                         write_csv)
from .feasibility import (BRUTE_FORCE_MAX_K, FreedomConstraintInstance,
                          brute_force_proper, flow_check, tree_check)

logger = logging.getLogger("partial_ia")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

PRESETS = {
    "fig3-example": dict(model="fig3", K=5, Nt=2, Nr=2, d_max=1, drops=1,
                         snr_db=[0.0, 20.0, 40.0, 60.0], schemes=["proposed"],
                         name="fig3-example"),
    "fig7-desk": dict(model="geometric", K=8, Nt=6, Nr=6, d_max=2, area_km=10.0,
                      L_km=5.0, S_km=3.0, pair_radius_km=1.0, drops=20,
                      snr_db=[0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
                      schemes=["proposed", "bl1", "bl2", "bl3", "bl4", "bl5"],
                      name="fig7-desk"),
    "fig8-desk": dict(model="geometric", K=8, Nt=6, Nr=6, d_max=3, area_km=10.0,
                      S_km=2.5, pair_radius_km=1.0, drops=20, snr_db=[40.0],
                      seed=8, schemes=["proposed"], sweep_param="L_km",
                      sweep_values=[2.0, 4.0, 6.0, 8.0], name="fig8-desk"),
    "fig9-desk": dict(model="geometric", K=8, Nt=6, Nr=6, d_max=3, area_km=10.0,
                      L_km=5.0, pair_radius_km=1.0, drops=20, snr_db=[40.0],
                      seed=8, schemes=["proposed"], sweep_param="S_km",
                      sweep_values=[1.0, 2.0, 3.0, 4.0], name="fig9-desk"),
}


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    version: str
    wall_times: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical (key-sorted, compact) JSON of the config."""
    text = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def load_config_doc(source: str) -> dict:
    """Read a preset name, a ``.toml`` file or a ``.json`` file."""
    if source in PRESETS:
        return dict(PRESETS[source])
    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"no preset or readable file named {source!r} "
                          f"(presets: {', '.join(PRESETS)})")
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    else:
        import tomli
        try:
            doc = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a table of config fields")
    return doc


def load_config(source: str, seed: Optional[int] = None) -> ExperimentConfig:
    doc = load_config_doc(source)
    if seed is not None:
        doc["seed"] = seed
    return ExperimentConfig.from_dict(doc)


def cmd_run(args) -> int:
    config = load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    times = {}
    t0 = time.perf_counter()
    records = run_experiment(config, jobs=args.jobs)
    times["experiment"] = time.perf_counter() - t0
    for scheme in config.schemes:
        times[f"design:{scheme}"] = sum(r.wall_time for r in records
                                        if r.scheme == scheme and r.snr_db == config.snr_db[0])
    csv_path, summary_path = out / "results.csv", out / "summary.json"
    t1 = time.perf_counter()
    write_csv(records, csv_path)
    summary = summarize(records, config)
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    times["write"] = time.perf_counter() - t1
    manifest = RunManifest(config_hash(config), config.seed, tool_version(), times,
                           [str(csv_path), str(summary_path)])
    manifest_path = out / "manifest.json"
    manifest.outputs.append(str(manifest_path))
    manifest_path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    seen = set()
    for r in records:
        key = (r.sweep_value, r.drop, r.scheme)
        if key in seen:
            continue
        seen.add(key)
        where = "" if r.sweep_value is None else f" {config.sweep_param}={r.sweep_value:g}"
        print(f"drop {r.drop}{where} {r.scheme}: D* = {{{','.join(map(str, r.d))}}} "
              f"leakage = {r.leakage:.3e}")
    if "dof" in summary:
        for key, val in summary["dof"].items():
            print(f"dof[{key}] = {val:.3f}")
    print(f"wrote {csv_path}, {summary_path}, {manifest_path}")
    return EXIT_OK


def _golden_check() -> list:
    from .stage1 import design_subspaces, init_streams, removal_gains, stage1_run
    from .stage2 import stage2_run

    topo, real = gen_fig3_example(seed=0)
    a = stage1_run(topo, real, 1)
    problems = []
    if a.d != (1, 1, 0, 1, 1):
        problems.append(f"golden D* = {a.d}, expected (1, 1, 0, 1, 1)")
    d0 = init_streams(topo, real, 1)
    s_t, s_r = design_subspaces(topo, d0, "proposed")
    gains = removal_gains(d0, s_t, s_r, topo).tolist()
    if gains != [3.0, 3.0, 6.0, 3.0, 3.0]:
        problems.append(f"golden first-removal gains {gains}, expected [3, 3, 6, 3, 3]")
    _, rep = stage2_run(a, real, seed=0)
    if rep.total > 1e-10:
        problems.append(f"golden leakage {rep.total:.3e} > 1e-10")
    return problems


def run_selfcheck(instances: int = 200, seed: int = 0, corrupt: bool = False):
    """``(ok, lines)`` for the feasibility cross-check and the golden case."""
    rng = np.random.default_rng(seed)
    lines, ok = [], True
    disagreements = 0
    try:
        for i in range(instances):
            K = int(rng.integers(1, 5))
            c = rng.integers(0, 5, (K, K))
            np.fill_diagonal(c, 0)
            if corrupt and i == 0 and K > 1:
                c[0, 1] = -1
            if corrupt and i == 0 and K == 1:
                c = np.array([[-1]])
            inst = FreedomConstraintInstance(rng.integers(0, 5, K), rng.integers(0, 5, K), c)
            verdicts = {brute_force_proper(inst).proper, tree_check(inst).proper,
                        flow_check(inst)}
            disagreements += len(verdicts) > 1
    except InvalidInputError as exc:
        return False, [f"FAIL instance invariant violated: {exc}"]
    if disagreements:
        ok = False
        lines.append(f"FAIL feasibility checkers disagree on {disagreements}/{instances} instances")
    else:
        lines.append(f"PASS feasibility checkers agree on {instances} random instances")
    problems = _golden_check()
    if problems:
        ok = False
        lines.extend(f"FAIL {p}" for p in problems)
    else:
        lines.append("PASS 5-pair golden case: D* = {1,1,0,1,1}, gains [3,3,6,3,3], leakage <= 1e-10")
    return ok, lines


def cmd_selfcheck(args) -> int:
    t0 = time.perf_counter()
    ok, lines = run_selfcheck(args.instances, args.seed or 0, corrupt=args.corrupt)
    for line in lines:
        print(line)
    print(f"selfcheck {'passed' if ok else 'failed'} in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_dump_channels(args) -> int:
    config = load_config(args.config, args.seed)
    scene, _, real = generate_drop(config, args.drop)
    doc = realization_to_dict(real, scene)
    out = Path(args.out)
    if out.suffix.lower() != ".json":
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"drop_{args.drop}.json"
    out.write_text(json.dumps(doc) + "\n")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_feascheck(args) -> int:
    path = Path(args.instance)
    try:
        inst = FreedomConstraintInstance.from_json(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read instance {path}: {exc}") from None
    tree = tree_check(inst, verbose=args.verbose)
    for line in tree.trace:
        print(f"trace {line}")
    print(f"tree_check: {'proper' if tree.proper else 'improper'} (steps={tree.steps})")
    if not tree.proper:
        G_T, G_R = tree.witness
        print(f"  witness G_T={sorted(G_T)} G_R={sorted(G_R)}")
    print(f"flow_check: {'proper' if flow_check(inst) else 'improper'}")
    if inst.K <= BRUTE_FORCE_MAX_K:
        bf = brute_force_proper(inst)
        print(f"brute_force: {'proper' if bf.proper else 'improper'}")
    else:
        print(f"brute_force: skipped (K > {BRUTE_FORCE_MAX_K})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", action="store_true", help="debug logging")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--jobs", type=int, default=None,
                        help="worker processes for drops (default: all CPUs)")

    p = argparse.ArgumentParser(prog="partial-ia", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run an experiment")
    r.add_argument("--config", required=True, help="TOML/JSON path or preset name")
    r.add_argument("--out", default="out", help="output directory")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("selfcheck", parents=[common], help="built-in consistency checks")
    s.add_argument("--instances", type=int, default=200)
    s.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_selfcheck)

    d = sub.add_parser("dump-channels", parents=[common], help="serialize a drop")
    d.add_argument("--config", required=True)
    d.add_argument("--drop", type=int, default=0)
    d.add_argument("--out", default="out", help="directory or .json file")
    d.set_defaults(func=cmd_dump_channels)

    f = sub.add_parser("feascheck", parents=[common], help="check a JSON instance")
    f.add_argument("instance", help="JSON with v_t, v_r and c")
    f.set_defaults(func=cmd_feascheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # numerical or other runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
