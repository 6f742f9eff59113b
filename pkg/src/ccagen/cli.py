"""Command line: ``ccagen {generate,verify,bft,convert,bench}``.

Exit codes: 0 ok, 1 verification failure, 2 unsatisfiable model,
3 resource or row budget exceeded, 64 usage / input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .constraints import generate_bft
from .engine import SearchConfig, generate
from .errors import ModelError, ResourceLimit, UnsatisfiableModel
from .model import SutModel, parse_casa, parse_native, serialize_native, to_casa, tuple_to_native
from .verifier import verify

EXIT_OK, EXIT_VERIFY, EXIT_UNSAT, EXIT_RESOURCE, EXIT_USAGE = 0, 1, 2, 3, 64
SEED_ENV = "CCAGEN_SEED"
CASA_SUFFIXES = (".model", ".citmodel")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------- helpers


def load_model(path: str, casa_constraints: str | None = None, fmt: str = "auto"
               ) -> tuple[SutModel, int | None]:
    """Load a model; returns the model and the strength stored in CASA files (else None)."""
    p = Path(path)
    if fmt == "auto":
        fmt = "casa" if casa_constraints or p.suffix in CASA_SUFFIXES else "native"
    text = p.read_text()
    if fmt == "native":
        return parse_native(text), None
    if casa_constraints is None:
        sibling = p.with_suffix(".constraints")
        casa_constraints = str(sibling) if sibling.exists() else None
    ctext = Path(casa_constraints).read_text() if casa_constraints else ""
    return parse_casa(text, ctext, name=p.stem)


def array_to_csv(model: SutModel, rows, numeric: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([p.name for p in model.parameters])
    for r in rows:
        w.writerow([int(v) for v in r] if numeric else model.labels(r))
    return buf.getvalue()


def csv_to_array(model: SutModel, text: str, numeric: bool = False) -> list[list[int]]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ModelError("array CSV is empty") from None
    names = [p.name for p in model.parameters]
    if header != names:
        raise ModelError(f"CSV header {header} does not match model parameters {names}")
    rows = []
    for line, cells in enumerate(reader, 2):
        if not cells:
            continue
        if len(cells) != model.k:
            raise ModelError(f"expected {model.k} cells, got {len(cells)}", line)
        if numeric:
            try:
                rows.append([int(c) for c in cells])
            except ValueError:
                raise ModelError("non-integer cell in numeric CSV", line) from None
        else:
            rows.append([model.value_index(p, c) for p, c in enumerate(cells)])
    return rows


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def config_from_args(args, t: int, seed: int) -> SearchConfig:
    try:
        return SearchConfig(t=t, initial_n=args.initial_n, iterations=args.iterations,
                            i_rows=args.i_rows, n1_probability=args.n1_probability,
                            stagnation_limit=args.stagnation_limit, max_rows=args.max_rows,
                            retry_cap=args.retry_cap, seed=seed, prune=args.prune)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def run_verified(model: SutModel, config: SearchConfig):
    """Generate and verify; the report carries the verification summary."""
    array, report = generate(model, config)
    tic = time.perf_counter()
    check = verify(array.rows, model, config.t, "bft")
    report.timings["verify"] = time.perf_counter() - tic
    report.verification = {"verdict": check.verdict, "covered": check.covered,
                           "valid_tuples": check.valid_tuples, "missing": len(check.missing),
                           "violations": len(check.violations),
                           "redundant_rows": len(check.redundant_rows)}
    return array, report, check


# --------------------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    model, casa_t = load_model(args.model, args.casa_constraints, args.format)
    t = args.t if args.t is not None else (casa_t or 2)
    if t < 2:
        raise UsageError("strength below 2 is not supported")
    if t > model.k:
        raise UsageError(f"strength {t} exceeds the number of parameters ({model.k})")
    seed = args.seed if args.seed is not None else default_seed()
    config = config_from_args(args, t, seed)

    array, report, check = run_verified(model, config)
    if casa_t is not None:
        report.metadata["casa_strength"] = casa_t
    text = array_to_csv(model, array.rows, args.numeric)
    report_json = json.dumps(report.to_dict(), indent=2) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
        if args.report:
            Path(args.report).write_text(report_json)
    else:
        out = Path(args.out)
        out.write_text(text)
        Path(args.report or out.with_suffix(".report.json")).write_text(report_json)
    print(f"{model.name}: t={t} seed={seed} size={report.final_size} "
          f"verdict={check.verdict} time={report.wall_time:.2f}s", file=sys.stderr)
    return EXIT_OK if check.passed else EXIT_VERIFY


def cmd_verify(args) -> int:
    model, casa_t = load_model(args.model, args.casa_constraints, args.format)
    t = args.t if args.t is not None else (casa_t or 2)
    if t < 2:
        raise UsageError("strength below 2 is not supported")
    rows = csv_to_array(model, Path(args.array).read_text(), args.numeric)
    report = verify(rows, model, t, args.mode)
    print(json.dumps(report.to_dict(model), indent=2))
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_bft(args) -> int:
    model, _ = load_model(args.model, args.casa_constraints, args.format)
    bft = generate_bft(model)
    print(json.dumps([tuple_to_native(model, ft) for ft in bft.tuples], indent=2))
    return EXIT_OK


def cmd_convert(args) -> int:
    if (args.from_format, args.to_format) == ("casa", "native"):
        model, _ = load_model(args.model, args.casa_constraints, "casa")
        text = serialize_native(model)
        if args.out in (None, "-"):
            sys.stdout.write(text)
        else:
            Path(args.out).write_text(text)
        return EXIT_OK
    if (args.from_format, args.to_format) == ("native", "casa"):
        if not args.out:
            raise UsageError("--out STEM is required for casa output")
        model, _ = load_model(args.model, None, "native")
        model_text, cons_text = to_casa(model, args.t or 2)
        Path(args.out + ".model").write_text(model_text)
        Path(args.out + ".constraints").write_text(cons_text)
        return EXIT_OK
    raise UsageError(f"unsupported conversion {args.from_format} -> {args.to_format}")


def discover_models(directory: str) -> list[tuple[str, str | None, str]]:
    """(model path, constraints path or None, format) for every model in ``directory``."""
    found = []
    for p in sorted(Path(directory).iterdir()):
        if p.suffix == ".json":
            found.append((str(p), None, "native"))
        elif p.suffix in CASA_SUFFIXES:
            cons = p.with_suffix(".constraints")
            found.append((str(p), str(cons) if cons.exists() else None, "casa"))
    return found


def _bench_job(job: dict) -> dict:
    model, _ = load_model(job["model"], job["constraints"], job["format"])
    config = SearchConfig(**job["config"])
    out = {"model": model.name, "seed": config.seed}
    try:
        array, report, check = run_verified(model, config)
    except (UnsatisfiableModel, ResourceLimit) as exc:
        out.update(ok=False, error=f"{type(exc).__name__}: {exc}")
        return out
    out.update(ok=True, size=report.final_size, time=report.wall_time, verified=check.passed)
    if job["save_arrays"]:
        out["csv"] = array_to_csv(model, array.rows, job["numeric"])
    return out


def summarize(results: list[dict]) -> dict:
    """Aggregate per-model run results into the bench summary."""
    by_model: dict[str, list[dict]] = {}
    for r in results:
        by_model.setdefault(r["model"], []).append(r)
    summary = {}
    for name, runs in by_model.items():
        good = [r for r in runs if r["ok"]]
        sizes = [r["size"] for r in good]
        entry = {"runs": len(runs), "seeds": [r["seed"] for r in runs],
                 "failures": [{"seed": r["seed"], "error": r["error"]} for r in runs if not r["ok"]],
                 "all_verified": bool(good) and len(good) == len(runs) and all(r["verified"] for r in good)}
        if sizes:
            entry.update(min=min(sizes), median=statistics.median(sizes), max=max(sizes),
                         mean=statistics.fmean(sizes),
                         mean_time=statistics.fmean(r["time"] for r in good), sizes=sizes)
        summary[name] = entry
    return summary


def cmd_bench(args) -> int:
    models = discover_models(args.models)
    if not models:
        raise UsageError(f"no model files found in {args.models}")
    if args.runs < 1 or args.jobs < 1:
        raise UsageError("--runs and --jobs must be positive")
    jobs = []
    for path, cons, fmt in models:
        model, casa_t = load_model(path, cons, fmt)
        t = args.t if args.t is not None else (casa_t or 2)
        for i in range(args.runs):
            config = config_from_args(args, t, args.seed_base + i)
            jobs.append({"model": path, "constraints": cons, "format": fmt,
                         "config": vars(config), "save_arrays": args.save_arrays,
                         "numeric": args.numeric})
    if args.jobs == 1:
        results = [_bench_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bench_job, jobs))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(results)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "runs", "min", "median", "max", "mean", "mean_time", "all_verified"])
        for name, e in summary.items():
            w.writerow([name, e["runs"], e.get("min", ""), e.get("median", ""), e.get("max", ""),
                        f"{e['mean']:.2f}" if "mean" in e else "",
                        f"{e['mean_time']:.3f}" if "mean_time" in e else "", e["all_verified"]])
    if args.save_arrays:
        for r in results:
            if "csv" in r:
                (out / f"{r['model']}.seed{r['seed']}.csv").write_text(r["csv"])
    for name, e in summary.items():
        print(f"{name}: runs={e['runs']} min={e.get('min')} median={e.get('median')} "
              f"max={e.get('max')} verified={e['all_verified']}", file=sys.stderr)
    failed = any("min" not in e for e in summary.values())
    unverified = any(r["ok"] and not r["verified"] for r in results)
    return EXIT_VERIFY if failed or unverified else EXIT_OK


# --------------------------------------------------------------------------- parser


def _model_args(p):
    p.add_argument("--model", required=True, help="native JSON model or CASA model file")
    p.add_argument("--casa-constraints", help="CASA constraints file (implies --format casa)")
    p.add_argument("--format", choices=("auto", "native", "casa"), default="auto")


def _search_args(p):
    d = SearchConfig()
    p.add_argument("--initial-n", type=int, default=d.initial_n,
                   help="initial rows (default: largest valid-tuple count of any combination)")
    p.add_argument("--iterations", type=int, default=d.iterations,
                   help=f"tabu steps per outer round (default {d.iterations})")
    p.add_argument("--i-rows", type=int, default=d.i_rows,
                   help="accepted moves per neighborhood call (default: current row count)")
    p.add_argument("--n1-probability", type=float, default=d.n1_probability,
                   help=f"chance of choosing N1 over N2 (default {d.n1_probability})")
    p.add_argument("--stagnation-limit", type=int, default=d.stagnation_limit,
                   help=f"non-improving steps before a row is added (default {d.stagnation_limit})")
    p.add_argument("--max-rows", type=int, default=d.max_rows, help=f"row budget (default {d.max_rows})")
    p.add_argument("--retry-cap", type=int, default=d.retry_cap,
                   help=f"random-row rejection cap (default {d.retry_cap})")
    p.add_argument("--prune", action="store_true", help="drop redundant rows after the search")
    p.add_argument("--numeric", action="store_true", help="CSV cells are value indices, not labels")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ccagen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="build a constrained covering array")
    _model_args(g)
    g.add_argument("--t", type=int, help="interaction strength (default: CASA file value or 2)")
    g.add_argument("--seed", type=int, help=f"RNG seed (default: ${SEED_ENV} or 0)")
    g.add_argument("--out", help="CSV output path ('-' or omitted: stdout)")
    g.add_argument("--report", help="RunReport JSON path (default: <out>.report.json)")
    _search_args(g)
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("verify", help="check coverage and validity of an array CSV")
    _model_args(v)
    v.add_argument("--array", required=True)
    v.add_argument("--t", type=int)
    v.add_argument("--mode", choices=("bft", "initial"), default="bft")
    v.add_argument("--numeric", action="store_true")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bft", help="print the closed base forbidden tuple set")
    _model_args(b)
    b.set_defaults(func=cmd_bft)

    c = sub.add_parser("convert", help="translate between CASA and native model files")
    _model_args(c)
    c.add_argument("--from", dest="from_format", choices=("casa", "native"), required=True)
    c.add_argument("--to", dest="to_format", choices=("casa", "native"), required=True)
    c.add_argument("--out", help="native: output path; casa: output stem (.model/.constraints)")
    c.add_argument("--t", type=int, help="strength written to the CASA model file (default 2)")
    c.set_defaults(func=cmd_convert)

    h = sub.add_parser("bench", help="repeat generation over a directory of models")
    h.add_argument("--models", required=True, help="directory of .json / .model(+.constraints) files")
    h.add_argument("--t", type=int)
    h.add_argument("--runs", type=int, default=30)
    h.add_argument("--seed-base", type=int, default=0)
    h.add_argument("--jobs", type=int, default=1)
    h.add_argument("--out", default="bench-out", help="output directory")
    h.add_argument("--save-arrays", action="store_true", help="also write every run's CSV")
    _search_args(h)
    h.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ccagen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, OSError) as exc:
        print(f"ccagen: input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnsatisfiableModel as exc:
        print(f"ccagen: unsatisfiable model: {exc}", file=sys.stderr)
        return EXIT_UNSAT
    except ResourceLimit as exc:
        print(f"ccagen: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
