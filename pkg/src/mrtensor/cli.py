"""Command-line interface: ``mrtensor <command> [options]``.

Exit status is 0 on success, 2 on usage errors, a container-specific code
(see :mod:`mrtensor.io`) for malformed files and 1 for any other failure.
"""

import argparse
import csv
import io as _stdio
import math
import sys

from . import dense, experiments, io
from .ms import level_norms, ms_reconstruct, ms_storage, stability_margin


class CLIError(Exception):
    code = 1


def _parse_ranks(text):
    try:
        ranks = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CLIError(f"--ranks expects comma-separated integers, got {text!r}") from None
    if not ranks or any(r < 0 for r in ranks):
        raise CLIError(f"--ranks expects non-negative integers, got {text!r}")
    return ranks


def _parse_sweep(text):
    try:
        a, b = (int(t) for t in text.split(":"))
    except ValueError:
        raise CLIError(f"--rank-sweep expects a:b, got {text!r}") from None
    if a < 1 or b < a:
        raise CLIError(f"--rank-sweep needs 1 <= a <= b, got {text!r}")
    return list(range(a, b + 1))


def _int_like(text):
    # accepts 1000000 as well as 1e6
    value = float(text)
    if value != int(value):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return int(value)


def _fmt(x):
    return format(float(x), ".10g")


def _load(args, bs, L):
    T = io.load_input(args.input)
    policy = "crop" if getattr(args, "crop", False) else "pad" if getattr(args, "pad", False) else None
    if L is None:
        return T, None
    T, note = io.fit_to_grid(T, bs, L, policy)
    return T, note


def _resolve_levels(args):
    ranks = _parse_ranks(args.ranks) if args.ranks else None
    L = args.levels
    if L is None and ranks is not None:
        L = len(ranks) - 1
    return ranks, L


def cmd_compress(args, out):
    if (args.ranks is None) == (args.rank is None):
        raise CLIError("give exactly one of --ranks and --rank")
    ranks, L = _resolve_levels(args)
    T, note = _load(args, args.bs, L)
    if L is None:
        L = dense.max_levels(T.shape, args.bs)
    if ranks is None:
        ranks = [args.rank] * (L + 1)
    if len(ranks) != L + 1:
        raise CLIError(f"--ranks has {len(ranks)} entries but --levels {L} needs {L + 1}")
    X, trace = experiments.ms_compress(
        T, ranks, bs=args.bs, L=L, fmt=args.base_format, max_iter=args.max_iter,
        seed=args.seed, restructured=args.restructured,
    )
    io.write_archive(args.output, X)
    if note:
        print(f"input adjusted: {note}", file=out)
    err = experiments.relative_error(T, ms_reconstruct(X))
    report = ms_storage(X)
    print(f"wrote {args.output}: relative error {_fmt(err)}, compression ratio {_fmt(report.ratio)}, "
          f"{trace.iterations} iterations", file=out)


def cmd_decompress(args, out):
    X = io.read_archive(args.input)
    io.write_tensor(args.output, ms_reconstruct(X))
    print(f"wrote {args.output}: shape {X.shape}", file=out)


def cmd_info(args, out):
    X = io.read_archive(args.input)
    report = ms_storage(X)
    norms = level_norms(X)
    print(f"base format: {X.fmt}", file=out)
    print(f"grid: shape {X.shape}, bs {X.bs}, L {X.L}", file=out)
    for k, (P, params, nrm) in enumerate(zip(X.levels, report.level_params, norms)):
        ranks = P.ranks if X.fmt == "tt" else P.rank
        print(f"level {k}: shape {X.grid.level_shape(k)}, ranks {ranks}, parameters {params}, "
              f"norm {_fmt(nrm)}", file=out)
    print(f"total parameters: {report.total_params}", file=out)
    print(f"dense elements: {report.dense_elements}", file=out)
    print(f"compression ratio: {_fmt(report.ratio)}", file=out)
    print(f"stability margin: {_fmt(stability_margin(X))}", file=out)


def cmd_error(args, out):
    T = io.read_tensor(args.original)
    X = io.read_archive(args.compressed)
    if T.shape != X.shape:
        raise CLIError(f"shape mismatch: original {T.shape}, compressed {X.shape}")
    print(f"relative error: {format(experiments.relative_error(T, ms_reconstruct(X)), '.17g')}", file=out)


def _write_csv(path, header, rows, out):
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    text = buf.getvalue()
    if path in (None, "-"):
        out.write(text)
    else:
        io.atomic_write(path, text.encode())


def cmd_bench(args, out):
    ranks = _parse_sweep(args.rank_sweep)
    T, note = _load(args, args.bs, args.levels)
    L = args.levels if args.levels is not None else dense.max_levels(T.shape, args.bs)
    rows = experiments.rank_sweep(
        T, ranks, bs=args.bs, L=L, fmt=args.base_format, max_iter=args.max_iter,
        seed=args.seed, timing=not args.no_timing,
    )
    table = [
        [r.method, r.rank, format(r.relative_error, ".17g"), format(r.compression_ratio, ".17g"),
         format(r.seconds, ".6f")]
        for r in rows
    ]
    _write_csv(args.csv, ["method", "rank", "relative_error", "compression_ratio", "seconds"], table, out)
    if args.csv not in (None, "-"):
        if note:
            print(f"input adjusted: {note}", file=out)
        print(f"wrote {args.csv}: {len(table)} rows", file=out)


def cmd_demo_multiscale(args, out):
    ns = []
    n = 8
    while n <= args.n:
        ns.append(n)
        n *= 2
    if not ns or ns[-1] != args.n:
        raise CLIError(f"--n must be a power of two >= 8, got {args.n}")
    rows = experiments.motivating_scaling(ns, d=args.d)
    header = ["n", "ms_relative_error", "cp2_relative_error", "seconds"]
    if args.csv is not None:
        _write_csv(args.csv, header, [[n, _fmt(a), _fmt(b), format(s, ".6f")] for n, a, b, s in rows], out)
        return
    print(" ".join(f"{h:>18}" for h in header), file=out)
    for n, a, b, s in rows:
        print(f"{n:>18} {_fmt(a):>18} {_fmt(b):>18} {s:>18.3f}", file=out)


def cmd_demo_closedness(args, out):
    if args.n_max < 10:
        raise CLIError(f"--n-max must be >= 10, got {args.n_max}")
    print(f"{'n':>10} {'error':>14} {'closed_form':>14} {'coarse_norm':>14}", file=out)
    for n, numeric, closed, coarse in experiments.closedness_rows(args.n_max):
        print(f"{n:>10} {numeric:>14.6e} {closed:>14.6e} {coarse:>14.6e}", file=out)


def cmd_demo_convergence(args, out):
    trace, summary = experiments.local_convergence(n=args.n, seed=args.seed, max_iter=args.max_iter)
    if args.csv is not None:
        rows = []
        for k in sorted(trace.level_errors):
            for i, (e, en, dn) in enumerate(zip(trace.level_errors[k], trace.e_norms[k], trace.d_norms[k]), 1):
                rows.append([k, i, _fmt(e), _fmt(en), _fmt(dn)])
        _write_csv(args.csv, ["level", "iteration", "level_error", "e_norm", "d_norm"], rows, out)
        return
    for k in sorted(summary):
        err, ratio = summary[k]
        shown = "n/a" if math.isnan(ratio) else f"{ratio:.4f}"
        print(f"level {k}: final error {err:.3e}, geometric ratio (iterations 5-25) {shown}", file=out)


def cmd_demo_bound(args, out):
    res, err, constant = experiments.bound_report(args.n, d=args.d)
    for k, (delta, nrm) in enumerate(zip(res.deltas, res.term_norms)):
        print(f"term {k} (finest first): delta {delta:.6e}, norm {nrm:.6e}", file=out)
    print(f"bound: {res.bound:.6e}", file=out)
    print(f"true error: {err:.6e}", file=out)
    print(f"large-n bound: {constant:.4f} * pi / n * norm of the coarsest term", file=out)


def build_parser():
    p = argparse.ArgumentParser(prog="mrtensor", description="Multiresolution low-rank tensor compression.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", help="decompose a tensor or PGM image into an MRTC archive")
    c.add_argument("--input", required=True)
    c.add_argument("--base-format", choices=("tt", "cp"), default="tt")
    c.add_argument("--bs", type=int, default=2)
    c.add_argument("--levels", type=int)
    c.add_argument("--ranks")
    c.add_argument("--rank", type=int)
    c.add_argument("--max-iter", type=int, default=10)
    c.add_argument("--restructured", action="store_true")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--output", required=True)
    fit = c.add_mutually_exclusive_group()
    fit.add_argument("--crop", action="store_true", help="centre-crop to a divisible shape")
    fit.add_argument("--pad", action="store_true", help="centre-pad (edge values) to a divisible shape")
    c.set_defaults(func=cmd_compress)

    d = sub.add_parser("decompress", help="reconstruct an archive to a dense MRT0 tensor")
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    d.set_defaults(func=cmd_decompress)

    i = sub.add_parser("info", help="summarise an archive")
    i.add_argument("--input", required=True)
    i.set_defaults(func=cmd_info)

    e = sub.add_parser("error", help="relative Frobenius error of an archive")
    e.add_argument("--original", required=True)
    e.add_argument("--compressed", required=True)
    e.set_defaults(func=cmd_error)

    b = sub.add_parser("bench", help="rank sweep against the single-grid baseline")
    b.add_argument("--input", required=True)
    b.add_argument("--base-format", choices=("tt", "cp"), default="tt")
    b.add_argument("--bs", type=int, default=2)
    b.add_argument("--levels", type=int)
    b.add_argument("--rank-sweep", required=True)
    b.add_argument("--max-iter", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--csv", default="-")
    b.add_argument("--no-timing", action="store_true", help="write 0 in the seconds column")
    fit = b.add_mutually_exclusive_group()
    fit.add_argument("--crop", action="store_true")
    fit.add_argument("--pad", action="store_true")
    b.set_defaults(func=cmd_bench)

    demo = sub.add_parser("demo", help="reference experiments")
    ds = demo.add_subparsers(dest="demo", required=True)
    m = ds.add_parser("multiscale", help="three-scale tensor: MS-CP versus rank-2 CP")
    m.add_argument("--d", type=int, default=3)
    m.add_argument("--n", type=int, default=64)
    m.add_argument("--csv", nargs="?", const="-")
    m.set_defaults(func=cmd_demo_multiscale)
    cl = ds.add_parser("closedness", help="converging sequence with diverging components")
    cl.add_argument("--n-max", type=_int_like, default=10**6)
    cl.set_defaults(func=cmd_demo_closedness)
    cv = ds.add_parser("convergence", help="level-by-level local convergence on an exact instance")
    cv.add_argument("--n", type=int, default=64)
    cv.add_argument("--seed", type=int, default=0)
    cv.add_argument("--max-iter", type=int, default=150)
    cv.add_argument("--csv", nargs="?", const="-")
    cv.set_defaults(func=cmd_demo_convergence)
    bd = ds.add_parser("bound", help="a-priori bound versus the true error")
    bd.add_argument("--d", type=int, default=3)
    bd.add_argument("--n", type=int, default=64)
    bd.set_defaults(func=cmd_demo_bound)
    return p


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        args.func(args, out)
    except (io.ArchiveError, io.PGMError, CLIError) as exc:
        print(f"mrtensor: error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, OSError, MemoryError, IndexError) as exc:
        print(f"mrtensor: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
