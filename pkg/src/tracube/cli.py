"""Command-line front end: ``tracube <command> ...``.

Exit codes: 0 success, 1 verification mismatch, 2 usage error,
3 I/O error or corrupted store.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from . import container
from .errors import BuildError, CorruptStoreError, NotFoundError
from .events import Tracks
from .ingest import DEFAULT_GAP_THRESHOLD, GridConfig, SynthParams, gen_synthetic, interpolate_gaps, normalize, parse_csv
from .oracle import OracleStore
from .query import QueryEngine, ids_for
from .store import StoreConfig, build_store
from .workload import SUITES, make_queries, oracle_anchor, run_engine, run_oracle

log = logging.getLogger("tracube")

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
RAW_HEADER = ["id", "t", "x", "y", "z"]
CELL_HEADER = ["id", "instant", "cx", "cy", "cz"]


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


# -- argument helpers ---------------------------------------------------------


def _int_list(text: str, n: int | None = None, what: str = "value") -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad {what} list {text!r}") from None
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"{what} needs {n} comma-separated integers")
    return vals


def _box(text: str) -> tuple[int, ...]:
    box = tuple(_int_list(text, 6, "box"))
    if any(box[a] > box[a + 3] for a in range(3)):
        raise argparse.ArgumentTypeError("box corners must satisfy x1<=x2, y1<=y2, z1<=z2")
    return box


def _float_triple(text: str) -> tuple[float, float, float]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad triple {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("need three comma-separated numbers")
    return vals  # type: ignore[return-value]


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def pool_size(requested: int | None = None) -> int:
    """Thread count: the request (default: CPU count), capped by TRACUBE_THREADS."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("TRACUBE_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer TRACUBE_THREADS=%r", cap)
    return max(1, n)


# -- input loading ------------------------------------------------------------


def read_tracks(
    path: str,
    grid: GridConfig | None = None,
    side: int | None = None,
    interpolate: bool = False,
    gap_threshold: int = DEFAULT_GAP_THRESHOLD,
) -> Tracks:
    """Load either a raw ``id,t,x,y,z`` file or a cell-event ``id,instant,cx,cy,cz`` file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    first = next(csv.reader(io.StringIO(text)), [])
    header = [h.strip().lower() for h in first]
    try:
        if header == RAW_HEADER:
            grid = grid or GridConfig()
            if side is not None:
                grid.side = side
            records, rejected = parse_csv(io.StringIO(text))
            if rejected:
                log.warning("%s: %d malformed lines skipped", path, rejected)
            tracks = normalize(records, grid, gap_threshold)
        elif header == CELL_HEADER:
            tracks = Tracks.read_csv(io.StringIO(text), side=side)
        else:
            raise InputError(f"{path}: unknown header {first!r}; want {','.join(RAW_HEADER)} or {','.join(CELL_HEADER)}")
    except BuildError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if interpolate:
        tracks = interpolate_gaps(tracks, gap_threshold)
    return tracks


def _load_store(path: str):
    try:
        return container.load(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _grid_from(args) -> GridConfig:
    try:
        return GridConfig(origin=args.origin, cell_size=args.cell_size, step=args.step)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# -- commands -----------------------------------------------------------------


def cmd_build(args, out: TextIO) -> int:
    config = StoreConfig(period=args.period, k=args.k, side=args.side)
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    tracks = read_tracks(args.input, _grid_from(args), args.side, args.interpolate, args.gap_threshold)
    t0 = time.perf_counter()
    try:
        store = build_store(tracks, config)
    except BuildError as exc:
        raise InputError(str(exc)) from exc
    try:
        size = container.save(store, args.out)
    except OSError as exc:
        raise InputError(f"cannot write {args.out}: {exc}") from exc
    ratio = size / (4 * store.header.n_records) if store.header.n_records else float("nan")
    print(
        f"built {args.out}: {store.n_objects} objects, {store.n_instants} instants, "
        f"{size} bytes, ratio {ratio:.4f}, {time.perf_counter() - t0:.2f}s",
        file=out,
    )
    return EXIT_OK


def _cell_fields(cell) -> list:
    return list(cell) if cell is not None else ["", "", ""]


def cmd_query(args, out: TextIO) -> int:
    store = _load_store(args.store)
    engine = QueryEngine(store, prune=not args.no_prune)
    writer = csv.writer(out, lineterminator="\n")
    T = store.n_instants

    def obj_index() -> int:
        if args.object is None:
            raise UsageError(f"query {args.kind} needs --object")
        o = store.object_index(args.object)
        if o is None:
            raise NotFoundError(f"unknown object {args.object!r}")
        return o

    def instant(v: int | None, flag: str) -> int:
        if v is None:
            raise UsageError(f"query {args.kind} needs {flag}")
        if not 0 <= v < T:
            raise UsageError(f"{flag} {v} outside [0, {T})")
        return v

    def need_box():
        if args.box is None:
            raise UsageError(f"query {args.kind} needs --box")
        return args.box

    if args.kind == "position":
        o, t = obj_index(), instant(args.t, "--t")
        writer.writerow(["id", "instant", "cx", "cy", "cz"])
        writer.writerow([args.object, t, *_cell_fields(engine.position(o, t))])
    elif args.kind == "trajectory":
        o = obj_index()
        t_s, t_e = instant(args.t_from, "--from"), instant(args.t_to, "--to")
        if t_s > t_e:
            raise UsageError("--from must not exceed --to")
        writer.writerow(["id", "instant", "cx", "cy", "cz"])
        for t, cell in engine.trajectory(o, t_s, t_e):
            writer.writerow([args.object, t, *_cell_fields(cell)])
    elif args.kind == "slice":
        box, t = need_box(), instant(args.t, "--t")
        writer.writerow(["id", "cx", "cy", "cz"])
        hits = engine.time_slice(box, t, with_positions=True)
        for o, cell in sorted(hits):
            writer.writerow([store.header.ids[o], *cell])
    else:
        box = need_box()
        t_s, t_e = instant(args.t_from, "--from"), instant(args.t_to, "--to")
        if t_s > t_e:
            raise UsageError("--from must not exceed --to")
        writer.writerow(["id"])
        for ext in ids_for(store, engine.time_interval(box, t_s, t_e)):
            writer.writerow([ext])
    return EXIT_OK


def cmd_stats(args, out: TextIO) -> int:
    info = container.stats(_load_store(args.store))
    if args.json:
        json.dump(info, out, indent=2)
        out.write("\n")
        return EXIT_OK
    for key in ("objects", "instants", "records", "period", "side", "snapshots", "rules", "log_symbols", "codewords"):
        print(f"{key:12s} {info[key]}", file=out)
    print(f"{'max_speed':12s} {','.join(map(str, info['max_speed']))}", file=out)
    for name, size in info["sections"].items():
        print(f"  {name:10s} {size:>12d} bytes", file=out)
    print(f"{'total':12s} {info['total_bytes']} bytes", file=out)
    print(f"{'baseline':12s} {info['baseline_bytes']} bytes", file=out)
    print(f"{'ratio':12s} {info['ratio']:.5f}", file=out)
    return EXIT_OK


def cmd_sweep(args, out: TextIO) -> int:
    periods = args.periods
    if any(d < 2 for d in periods):
        raise UsageError("periods must be >= 2")
    tracks = read_tracks(args.input, _grid_from(args), args.side, args.interpolate, args.gap_threshold)
    rows = []
    for d in periods:
        try:
            store = build_store(tracks, StoreConfig(period=d, k=args.k, side=args.side))
        except BuildError as exc:
            raise InputError(str(exc)) from exc
        info = container.stats(store)
        rows.append({"period": d, **{k: info[k] for k in ("total_bytes", "baseline_bytes", "ratio", "rules", "snapshots")}})
    if args.json:
        json.dump(rows, out, indent=2)
        out.write("\n")
        return EXIT_OK
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["period", "total_bytes", "baseline_bytes", "ratio", "rules", "snapshots"])
    for r in rows:
        writer.writerow([r["period"], r["total_bytes"], r["baseline_bytes"], f"{r['ratio']:.5f}", r["rules"], r["snapshots"]])
    return EXIT_OK


def verify_store(
    store,
    oracle: OracleStore,
    n: int,
    seed: int,
    threads: int = 1,
    suites: Sequence[str] = tuple(SUITES),
    prune_modes: Sequence[bool] = (True, False),
) -> dict[str, int]:
    """Mismatch count per suite (and per pruning mode) against the oracle."""
    rng = np.random.default_rng(seed)
    anchor = oracle_anchor(oracle)
    engines = {mode: QueryEngine(store, prune=mode) for mode in prune_modes}
    report: dict[str, int] = {}
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for suite in suites:
            kind = SUITES[suite][0]
            queries = make_queries(suite, n, rng, store.n_objects, store.n_instants, store.side, anchor)
            expect = [run_oracle(oracle, q) for q in queries]
            for mode, engine in engines.items():
                if not mode and kind not in ("slice", "interval"):
                    continue
                got = list(pool.map(lambda q, e=engine: run_engine(e, q), queries))
                label = suite if mode else f"{suite}/no-prune"
                report[label] = sum(g != e for g, e in zip(got, expect))
    return report


def cmd_verify(args, out: TextIO) -> int:
    tracks = read_tracks(args.input, _grid_from(args), args.side, args.interpolate, args.gap_threshold)
    store = _load_store(args.store)
    if (tracks.n_objects, tracks.n_instants) != (store.n_objects, store.n_instants):
        print(
            f"shape mismatch: input has {tracks.n_objects} objects x {tracks.n_instants} instants, "
            f"store has {store.n_objects} x {store.n_instants}",
            file=out,
        )
        return EXIT_MISMATCH
    if list(tracks.ids) != list(store.header.ids):
        print("object id dictionary differs between input and store", file=out)
        return EXIT_MISMATCH
    oracle = OracleStore(tracks)
    report = verify_store(store, oracle, args.queries, args.seed, pool_size(args.threads))
    bad = 0
    for label, miss in report.items():
        print(f"{label:28s} {args.queries:>7d} queries  {miss:>6d} mismatches", file=out)
        bad += miss
    print("OK" if not bad else f"FAILED: {bad} mismatches", file=out)
    return EXIT_OK if not bad else EXIT_MISMATCH


def cmd_gen(args, out: TextIO) -> int:
    params = SynthParams(
        objects=args.objects,
        instants=args.instants,
        side=args.side,
        segment_min=args.segment[0],
        segment_max=args.segment[1],
        speed=args.speed,
        gap_prob=args.gap_prob,
        gap_min=args.gap_length[0],
        gap_max=args.gap_length[1],
        seed=args.seed,
    )
    try:
        params.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    tracks = gen_synthetic(params)
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            tracks.write_csv(fh)
    except OSError as exc:
        raise InputError(f"cannot write {args.out}: {exc}") from exc
    print(f"wrote {args.out}: {tracks.n_objects} objects, {tracks.n_records()} events", file=out)
    return EXIT_OK


def cmd_bench(args, out: TextIO) -> int:
    store = _load_store(args.store)
    engine = QueryEngine(store)
    rng = np.random.default_rng(args.seed)
    queries = make_queries(args.suite, args.queries, rng, store.n_objects, store.n_instants, store.side)

    def timed(q) -> float:
        t0 = time.perf_counter()
        run_engine(engine, q)
        return time.perf_counter() - t0

    threads = pool_size(args.threads)
    wall = time.perf_counter()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        lat = np.asarray(list(pool.map(timed, queries))) * 1e3
    wall = time.perf_counter() - wall
    result = {
        "suite": args.suite,
        "queries": len(queries),
        "threads": threads,
        "period": store.period,
        "mean_ms": float(lat.mean()) if lat.size else 0.0,
        "p50_ms": float(np.percentile(lat, 50)) if lat.size else 0.0,
        "p95_ms": float(np.percentile(lat, 95)) if lat.size else 0.0,
        "p99_ms": float(np.percentile(lat, 99)) if lat.size else 0.0,
        "wall_s": wall,
    }
    if args.json:
        json.dump(result, out, indent=2)
        out.write("\n")
    else:
        for k, v in result.items():
            print(f"{k:8s} {v:.3f}" if isinstance(v, float) else f"{k:8s} {v}", file=out)
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _add_input_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="raw id,t,x,y,z CSV or cell-event id,instant,cx,cy,cz CSV")
    p.add_argument("--side", type=int, help="grid side in cells (default: padded from the data)")
    p.add_argument("--interpolate", action="store_true", help="fill absences of --gap-threshold instants or more")
    p.add_argument("--gap-threshold", type=_positive, default=DEFAULT_GAP_THRESHOLD, metavar="N")
    p.add_argument("--origin", type=_float_triple, default=(0.0, 0.0, 0.0), help="raw input only: grid origin x,y,z")
    p.add_argument("--cell-size", type=_float_triple, default=(5000.0, 5000.0, 100.0), help="raw input only: cell size x,y,z")
    p.add_argument("--step", type=float, default=15.0, help="raw input only: seconds per instant")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tracube", description="Compressed 3D trajectory store.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a store from an input CSV")
    _add_input_options(p)
    p.add_argument("--out", required=True)
    p.add_argument("--period", type=int, default=120, help="instants between snapshots (default 120)")
    p.add_argument("--k", type=int, default=2)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser(
        "query",
        help="run one query",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        description=(
            "Output CSV schemas:\n"
            "  position, trajectory: id,instant,cx,cy,cz (empty cells when absent)\n"
            "  slice:                id,cx,cy,cz\n"
            "  interval:             id"
        ),
    )
    p.add_argument("kind", choices=["position", "trajectory", "slice", "interval"])
    p.add_argument("--store", required=True)
    p.add_argument("--object", help="external object id")
    p.add_argument("--box", type=_box, help="x1,y1,z1,x2,y2,z2 (inclusive cells)")
    p.add_argument("--t", type=int, help="query instant")
    p.add_argument("--from", dest="t_from", type=int)
    p.add_argument("--to", dest="t_to", type=int)
    p.add_argument("--no-prune", action="store_true", help="disable expanded-region and MBB pruning")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("stats", help="component sizes and compression ratio")
    p.add_argument("--store", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser(
        "sweep",
        help="compression ratio per snapshot period",
        description="CSV output: period,total_bytes,baseline_bytes,ratio,rules,snapshots",
    )
    _add_input_options(p)
    p.add_argument("--periods", type=lambda s: _int_list(s, what="period"), default=[120, 240, 360, 720])
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="randomized query suites against the brute-force oracle")
    _add_input_options(p)
    p.add_argument("--store", required=True)
    p.add_argument("--queries", type=_positive, default=200, help="queries per suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", help="write a synthetic cell-event corpus")
    p.add_argument("--objects", type=int, default=100)
    p.add_argument("--instants", type=int, default=5000)
    p.add_argument("--side", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--segment", type=lambda s: _int_list(s, 2, "segment"), default=[60, 600], help="min,max straight-run length")
    p.add_argument("--speed", type=_float_triple, default=(1.0, 1.0, 0.5), help="max cells/instant per axis")
    p.add_argument("--gap-prob", type=float, default=0.002)
    p.add_argument("--gap-length", type=lambda s: _int_list(s, 2, "gap length"), default=[2, 90])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser(
        "bench",
        help="query latency for one suite",
        description="Suites: " + ", ".join(s for s in SUITES),
    )
    p.add_argument("--store", required=True)
    p.add_argument("--suite", choices=list(SUITES), required=True)
    p.add_argument("--queries", type=_positive, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def run(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"tracube: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotFoundError as exc:
        print(f"tracube: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, CorruptStoreError, OSError) as exc:
        print(f"tracube: error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
