"""Command-line front end: kernel dumps, audit suites, construction runs.

Exit codes (stable): 0 success / all checks pass, 1 usage or config error,
2 budget or coverage limit, 3 audit found failures, 4 internal certification
failure (implementation bug).  All output files are deterministic for a
fixed config + seed; wall-clock timing goes to stdout only.
"""

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import audit as audit_mod
from .construct import (
    ConvexWitness,
    DEFAULT_TERM_CAP,
    dense_example,
    single_target_extend,
    replay_trace,
    take_prefix,
    run_target_plan,
    simultaneous_construct,
)
from .errors import BudgetExceededError, CertificationError, CesaroError, CoverageError
from .exact import decstr, frac, fracstr
from .kernel import KernelCache
from .space import GroundSet, IndexSet, Space

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BUDGET = 2
EXIT_AUDIT_FAILED = 3
EXIT_CERTIFICATION = 4

CONFIG_SCHEMA = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _point_cfg(raw):
    return tuple(frac(c) for c in raw)


def load_config(path) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    if cfg.get("schema") != CONFIG_SCHEMA:
        raise ValueError(f"config schema must be {CONFIG_SCHEMA}")
    return cfg


def space_from_config(cfg: dict) -> Space:
    sp = cfg.get("space", {})
    d = int(sp.get("dimension", 1))
    weights = tuple(frac(w) for w in sp.get("seminorm_weights", ["1"] * d))
    return Space(d, weights)


def ground_from_config(cfg: dict, d: int) -> GroundSet:
    g = cfg.get("ground_set", {"kind": "lattice", "scale": "1"})
    if g["kind"] == "lattice":
        return GroundSet.lattice(d, frac(g.get("scale", "1")))
    return GroundSet.explicit([_point_cfg(p) for p in g["points"]])


def index_set_from_config(cfg: dict) -> IndexSet:
    idx = cfg.get("index_set", {"kind": "all"})
    if idx["kind"] == "all":
        return IndexSet("all")
    return IndexSet("progression", int(idx.get("offset", 1)), int(idx.get("stride", 1)))


def budgets_from_config(cfg: dict) -> tuple[KernelCache, int]:
    b = cfg.get("budgets", {})
    if "kernel_k_max" in b or "kernel_n_max" in b:
        cache = KernelCache(int(b.get("kernel_k_max", 6)), int(b.get("kernel_n_max", 400)))
    else:
        cache = KernelCache.from_env()
    return cache, int(b.get("term_cap", DEFAULT_TERM_CAP))


def growth_from_config(raw) -> callable:
    raw = raw or {"kind": "power", "base": 4}
    kind = raw.get("kind", "power")
    if kind == "power":
        base = int(raw.get("base", 4))
        return lambda n: base**n
    if kind == "constant":
        value = int(raw.get("value", 1))
        return lambda n: value
    if kind == "linear":
        return lambda n: n
    if kind == "tower":  # n ** n^3; representable, astronomically long blocks
        return lambda n: n ** (n**3)
    raise ValueError(f"unknown growth kind {kind!r}")


# ---------------------------------------------------------------------------
# kernel subcommand
# ---------------------------------------------------------------------------

def cmd_kernel(args) -> int:
    cache = KernelCache.from_env()
    rows = [cache.row(args.k, n) for n in range(1, args.n + 1)]
    if args.format == "csv":
        lines = []
        for n, row in enumerate(rows, start=1):
            lines.append(",".join([str(n)] + [fracstr(e) for e in row]))
        text = "\n".join(lines) + "\n"
    else:
        payload = {
            "k": args.k,
            "rows": {str(n): [fracstr(e) for e in row] for n, row in enumerate(rows, 1)},
        }
        text = _json_text(payload)
    if args.out:
        _write_text(args.out, text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# audit subcommand
# ---------------------------------------------------------------------------

def cmd_audit(args) -> int:
    cache = KernelCache.from_env()
    suite = args.suite
    if suite == "kernel":
        report = audit_mod.audit_kernel(args.k_max, args.n_max, cache)
    elif suite == "oracle":
        report = audit_mod.audit_oracle(args.samples, args.seed, cache=cache)
    elif suite == "abel":
        report = audit_mod.audit_abel(args.samples, args.seed)
    elif suite == "prop412":
        report = audit_mod.audit_unit_interval(args.samples, args.n_max, args.seed, cache)
    else:  # argparse choices already forbid this
        raise ValueError(f"unknown suite {suite!r}")
    if args.out:
        _write_text(args.out, _json_text(report.to_json(include_timing=args.timing)))
        print(f"wrote {args.out}")
    print(
        f"suite={report.suite} checked={report.checked} passed={report.passed} "
        f"failed={report.failed} wall_ms={report.wall_time_ms:.1f}"
    )
    for ce in report.counterexamples:
        print(f"  counterexample: {ce}")
    return EXIT_OK if report.failed == 0 else EXIT_AUDIT_FAILED


# ---------------------------------------------------------------------------
# construct subcommand
# ---------------------------------------------------------------------------

def _trajectory_rows(trace: dict, space: Space):
    from .construct import seq_from_trace
    from .sequences import iterate_at

    seq = seq_from_trace(trace)
    n = trace["final_index"]
    targets = [_point_cfg(t) for t in trace["targets"]]
    rows = []
    for idx, k in enumerate(trace["ks"]):
        value = iterate_at(k, seq, n)
        target = targets[idx]
        dist = space.metric(value, target)
        row = {"n": n, "k": k}
        for i, c in enumerate(value, start=1):
            row[f"coord_{i}"] = fracstr(c)
            row[f"coord_{i}_dec"] = decstr(c)
        row["target_id"] = idx
        row["metric_distance"] = fracstr(dist)
        row["metric_distance_dec"] = decstr(dist)
        rows.append(row)
    return rows


def _write_trajectory(path, rows, d: int) -> None:
    fields = ["n", "k"]
    for i in range(1, d + 1):
        fields += [f"coord_{i}", f"coord_{i}_dec"]
    fields += ["target_id", "metric_distance", "metric_distance_dec"]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _print_summary(trace: dict, space: Space, epsilon) -> None:
    print(f"certified epsilon: {fracstr(frac(epsilon))} ({decstr(frac(epsilon))})")
    print("level  n        metric_distance        seminorm_distances")
    for dist in trace["distances"]:
        semis = " ".join(dist["seminorms"])
        print(
            f"{dist['level']:<6} {trace['final_index']:<8} "
            f"{dist['metric']} ({decstr(frac(dist['metric']))})  [{semis}]"
        )


def cmd_construct(args) -> int:
    cfg = load_config(args.config)
    space = space_from_config(cfg)
    ground = ground_from_config(cfg, space.dimension)
    index_set = index_set_from_config(cfg)
    cache, term_cap = budgets_from_config(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.mode == "thm42":
        targets = [_point_cfg(t) for t in cfg["targets"]]
        epsilon = frac(cfg["epsilon"])
        result = simultaneous_construct(
            [], targets, epsilon, index_set, space, ground, cache, term_cap
        )
        trace = result.trace
        _write_text(out_dir / "trace.json", _json_text(trace))
        _write_trajectory(out_dir / "trajectory.csv", _trajectory_rows(trace, space), space.dimension)
        _print_summary(trace, space, epsilon)
        replay = replay_trace(trace, space, cache)
        print(f"replay matches recorded distances: {replay['matches']}")
        print(f"n = {result.n} (admissible: {index_set.contains(result.n)})")
        return EXIT_OK

    if args.mode == "lemma33":
        epsilon = frac(cfg["epsilon"])
        witness = ConvexWitness(tuple(
            (frac(c), _point_cfg(p)) for c, p in cfg["witness"]["atoms"]
        ))
        result = single_target_extend(
            [], witness, epsilon, int(cfg["k"]), space, ground, term_cap
        )
        trace = result.trace
        _write_text(out_dir / "trace.json", _json_text(trace))
        _write_trajectory(out_dir / "trajectory.csv", _trajectory_rows(trace, space), space.dimension)
        print(f"n0 = {result.n0}")
        _print_summary(trace, space, epsilon)
        return EXIT_OK

    if args.mode == "thm41":
        plan = [[_point_cfg(t) for t in entry["targets"]] for entry in cfg["plan"]]
        result = run_target_plan(plan, index_set, space, ground, cache, term_cap)
        payload = {"schema": 1, "kind": "thm41", "schedule": result.schedule,
                   "entries": result.traces}
        _write_text(out_dir / "trace.json", _json_text(payload))
        rows = []
        for trace in result.traces:
            rows.extend(_trajectory_rows(trace, space))
        _write_trajectory(out_dir / "trajectory.csv", rows, space.dimension)
        print(f"schedule: {result.schedule}")
        for lam, trace in enumerate(result.traces, start=1):
            _print_summary(trace, space, Fraction(1, lam))
        return EXIT_OK

    if args.mode == "dense":
        dense_cfg = cfg.get("dense", {})
        enumeration = [_point_cfg(p) for p in dense_cfg["enumeration"]]
        growth = growth_from_config(dense_cfg.get("growth"))
        terms = int(dense_cfg.get("terms", 2000))
        ks = [int(k) for k in dense_cfg.get("ks", [1, 2])]
        target_count = int(dense_cfg.get("target_count", min(5, len(enumeration))))
        targets = enumeration[:target_count]
        seq = take_prefix(dense_example(enumeration, growth), terms)
        table = audit_mod.audit_density(seq, targets, ks, space)
        payload = {
            "schema": 1,
            "kind": "dense",
            "note": ("empirical closeness audit at desk-scale growth; "
                     "not a density proof"),
            "terms": len(seq),
            "table": table,
        }
        _write_text(out_dir / "density.json", _json_text(payload))
        rows = []
        for entry in table:
            if entry["length"] != len(seq):
                continue
            rows.append(entry)
        print(f"dense example: {len(seq)} terms (empirical audit, not a density proof)")
        print("k      target  min_metric             at_index")
        for entry in rows:
            print(f"{entry['k']:<6} {entry['target_id']:<7} "
                  f"{entry['min_metric']} ({decstr(frac(entry['min_metric']))})  {entry['at_index']}")
        return EXIT_OK

    raise ValueError(f"unknown mode {args.mode!r}")


def build_parser() -> _Parser:
    parser = _Parser(prog="cesaro", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_kernel = sub.add_parser("kernel", help="dump kernel rows of T^k")
    p_kernel.add_argument("--k", type=int, required=True)
    p_kernel.add_argument("--n", type=int, required=True, help="rows 1..n")
    p_kernel.add_argument("--format", choices=("csv", "json"), default="csv")
    p_kernel.add_argument("--out", default=None)
    p_kernel.set_defaults(func=cmd_kernel)

    p_audit = sub.add_parser("audit", help="run a verification suite")
    p_audit.add_argument("--suite", choices=sorted(audit_mod.SUITES), required=True)
    p_audit.add_argument("--k-max", dest="k_max", type=int, default=4)
    p_audit.add_argument("--n-max", dest="n_max", type=int, default=120)
    p_audit.add_argument("--samples", type=int, default=500)
    p_audit.add_argument("--seed", type=int, default=0)
    p_audit.add_argument("--out", default=None)
    p_audit.add_argument("--timing", action="store_true",
                         help="include wall time in the report file")
    p_audit.set_defaults(func=cmd_audit)

    p_con = sub.add_parser("construct", help="run a construction from a config")
    p_con.add_argument("--mode", choices=("dense", "lemma33", "thm42", "thm41"),
                       required=True)
    p_con.add_argument("--config", required=True)
    p_con.add_argument("--out-dir", dest="out_dir", default=".")
    p_con.set_defaults(func=cmd_construct)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on usage errors and --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (BudgetExceededError, CoverageError) as exc:
        print(f"budget/coverage: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except CertificationError as exc:
        print(f"certification failure (bug): {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except (ValueError, KeyError, OSError, json.JSONDecodeError, CesaroError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
