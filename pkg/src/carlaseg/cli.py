"""Command-line front end: ``fit``, ``segment``, ``compare`` and ``synth``.

Exit codes: 0 success, 1 unreadable input or I/O failure, 2 a fit finished but
was flagged (EM collapse, LM stall, degenerate thresholds), 64 bad usage.
"""

from __future__ import annotations

import argparse
import io
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .baselines import EmConfig, LmConfig, fit_em, fit_lm, random_init
from .carla import write_density_csv
from .gmm import DEFAULT_OMEGA, Mixture, load_mixture_json, parse_components
from .histogram import (
    NormalizedHistogram,
    compute_histogram,
    histogram_to_csv,
    read_histogram_csv,
    synth_histogram,
)
from .imageio import GrayImage, PgmError, read_pgm, render_segmentation, save_pgm, write_pgm
from .segmenter import FitReport, LaConfig, fit_la, report_to_json, trace_to_csv

EXIT_OK = 0
EXIT_IO = 1
EXIT_FLAGGED = 2
EXIT_USAGE = 64

METHODS = ("la", "em", "lm")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- loading


def load_input(path: str) -> tuple[NormalizedHistogram, GrayImage | None]:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        if p.suffix.lower() == ".pgm" or raw[:2] in (b"P2", b"P5"):
            img = read_pgm(raw)
            return compute_histogram(img), img
        return read_histogram_csv(p), None
    except (PgmError, ValueError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _load_init(path: str, k: int) -> Mixture:
    try:
        mix = load_mixture_json(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a mixture JSON ({exc})") from None
    if mix.k != k:
        raise UsageError(f"--init has {mix.k} components but --classes is {k}")
    return mix


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise InputError(f"cannot write {path}: {exc.strerror or exc}") from None


# ---------------------------------------------------------------- fitting


_LA_ONLY = ("gw", "gh", "window", "snapshots")


def _check_method_flags(args) -> None:
    if args.method == "la":
        if args.init is not None:
            raise UsageError("--init does not apply to --method la (the automata start uniform)")
    else:
        given = [f"--{n}" for n in _LA_ONLY if getattr(args, n, None) is not None]
        if given:
            raise UsageError(f"{', '.join(given)} only apply to --method la")
    if args.classes < 1 or (args.method == "la" and args.classes < 2):
        raise UsageError("--classes must be >= 2 for la and >= 1 for em/lm")
    if args.iterations < 1:
        raise UsageError("--iterations must be >= 1")


def run_method(method: str, hist: NormalizedHistogram, k: int, *, iterations: int, seed: int,
               omega: float, init: Mixture | None = None, g_w: float = 0.02, g_h: float = 0.3,
               window: int = 25, snapshot_iters=()) -> FitReport:
    if method == "la":
        cfg = LaConfig(k=k, iterations=iterations, g_w=g_w, g_h=g_h, omega=omega, window_m=window, seed=seed)
        return fit_la(hist, cfg, snapshot_iters=snapshot_iters)
    if method == "em":
        return fit_em(hist, k, EmConfig(max_iter=iterations, init=init, omega=omega))
    if method == "lm":
        return fit_lm(hist, k, LmConfig(max_iter=iterations, init=init, omega=omega))
    raise UsageError(f"unknown method {method!r}")


def _fit_from_args(args, hist: NormalizedHistogram) -> FitReport:
    _check_method_flags(args)
    init = _load_init(args.init, args.classes) if args.init else None
    snaps = ()
    if getattr(args, "snapshots", None):
        try:
            snaps = [int(s) for s in args.snapshots.split(",") if s.strip()]
        except ValueError:
            raise UsageError("--snapshots takes comma-separated iteration numbers") from None
        if not args.snapshot_dir:
            raise UsageError("--snapshots needs --snapshot-dir")
    try:
        report = run_method(
            args.method, hist, args.classes, iterations=args.iterations, seed=args.seed,
            omega=args.omega, init=init,
            g_w=args.gw if args.gw is not None else 0.02,
            g_h=args.gh if args.gh is not None else 0.3,
            window=args.window if args.window is not None else 25,
            snapshot_iters=snaps,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.trace:
        _write_text(args.trace, trace_to_csv(report))
    if snaps:
        out = Path(args.snapshot_dir)
        out.mkdir(parents=True, exist_ok=True)
        for (name, it), dens in sorted(report.snapshots.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            write_density_csv(dens, out, name, it)
    return report


def _flagged(report: FitReport) -> bool:
    return bool(report.flags)


def cmd_fit(args) -> int:
    hist, _ = load_input(args.input)
    report = _fit_from_args(args, hist)
    _write_text(args.out, report_to_json(report))
    for f in report.flags:
        print(f"warning: {f}", file=sys.stderr)
    return EXIT_FLAGGED if _flagged(report) else EXIT_OK


def _labels_for(spec: str, report: FitReport) -> list[int]:
    k = report.mixture.k
    if spec == "means":
        mu = np.sort(report.mixture.mu)
        return [int(v) for v in np.clip(np.floor(mu + 0.5), 0, 255)]
    if spec == "indices":
        return list(range(k))
    if spec.startswith("levels:"):
        try:
            levels = [int(v) for v in spec[len("levels:"):].split(",")]
        except ValueError:
            raise UsageError(f"bad --labels {spec!r}") from None
        if len(levels) != k or any(not 0 <= v <= 255 for v in levels):
            raise UsageError(f"--labels levels needs {k} gray levels in [0, 255]")
        return levels
    raise UsageError(f"--labels must be means, indices or levels:a,b,..., got {spec!r}")


def cmd_segment(args) -> int:
    if not args.input.lower().endswith(".pgm"):
        raise UsageError("segment needs a .pgm image")
    hist, img = load_input(args.input)
    if args.labels not in ("means", "indices") and not args.labels.startswith("levels:"):
        raise UsageError(f"--labels must be means, indices or levels:a,b,..., got {args.labels!r}")
    occupied = hist.occupied_levels()
    if occupied < args.classes:
        print(
            f"error: image has {occupied} distinct gray level(s); cannot separate {args.classes} classes",
            file=sys.stderr,
        )
        return EXIT_FLAGGED
    report = _fit_from_args(args, hist)
    if report.thresholds is None:
        _write_text(args.out, report_to_json(report))
        print(f"error: {'; '.join(report.flags) or 'no thresholds'}", file=sys.stderr)
        return EXIT_FLAGGED
    labels = _labels_for(args.labels, report)
    seg = render_segmentation(img, report.thresholds, labels)
    seg_path = args.seg or str(Path(args.input).with_name(Path(args.input).stem + "_seg.pgm"))
    try:
        save_pgm(seg, seg_path)
    except OSError as exc:
        raise InputError(f"cannot write {seg_path}: {exc.strerror or exc}") from None
    _write_text(args.out, report_to_json(report))
    for f in report.flags:
        print(f"warning: {f}", file=sys.stderr)
    return EXIT_FLAGGED if _flagged(report) else EXIT_OK


# ---------------------------------------------------------------- compare


def _compare_cell(job):
    method, run, seed, hist_bins, k, iterations, omega, init_d, la_kw = job
    hist = NormalizedHistogram(np.asarray(hist_bins))
    init = Mixture.from_arrays(*init_d) if init_d is not None else None
    t0 = time.perf_counter()
    try:
        rep = run_method(method, hist, k, iterations=iterations, seed=seed, omega=omega, init=init, **la_kw)
    except Exception as exc:  # a failed run becomes a flagged row
        return method, run, seed, None, f"failed: {exc}", init, 0.0
    return method, run, seed, rep, None, init, (time.perf_counter() - t0) * 1000.0


def _fmt(v) -> str:
    return repr(float(v))


def compare_rows(args, hist: NormalizedHistogram) -> tuple[list[str], list[list[str]], dict]:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if not methods or bad:
        raise UsageError(f"--methods must list la, em and/or lm; got {args.methods!r}")
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    k = args.classes
    if k < 2:
        raise UsageError("--classes must be >= 2")
    mode = args.init_mode
    fixed = None
    if mode.startswith("fixed:"):
        fixed = _load_init(mode[len("fixed:"):], k)
    elif mode not in ("shared-random", "per-run-random"):
        raise UsageError("--init-mode must be shared-random, per-run-random or fixed:<json>")

    la_kw = {"g_w": args.gw, "g_h": args.gh, "window": args.window}
    jobs = []
    for mi, method in enumerate(methods):
        for run in range(args.repeats):
            seed = args.seed + run
            init = None
            if method != "la":
                if fixed is not None:
                    init = fixed
                elif mode == "shared-random":
                    init = random_init(np.random.default_rng([args.seed, run]), k)
                else:
                    init = random_init(np.random.default_rng([args.seed, run, mi + 1]), k)
            init_d = (init.p, init.mu, init.sigma) if init is not None else None
            jobs.append((method, run, seed, hist.bins, k, args.iterations, args.omega, init_d,
                         la_kw if method == "la" else {}))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_compare_cell, jobs))
    else:
        results = [_compare_cell(j) for j in jobs]

    header = ["method", "run", "seed", "final_J", "iters_converge", "wall_millis"]
    header += [f"{kind}{i + 1}" for i in range(k) for kind in ("p", "mu", "sigma")]
    header += ["flags"]
    header += [f"init_{kind}{i + 1}" for i in range(k) for kind in ("p", "mu", "sigma")]
    rows = []
    estimates: dict[str, list[np.ndarray]] = {m: [] for m in methods}
    for method, run, seed, rep, err, init, millis in results:
        row = [method, str(run), str(seed)]
        if rep is None:
            row += ["", "", ""] + [""] * (3 * k) + [err]
        else:
            srt = rep.mixture.sorted_by_mu()
            vals = np.column_stack([srt.p, srt.mu, srt.sigma]).reshape(-1)
            estimates[method].append(vals)
            wall = _fmt(round(millis, 3)) if args.timing else "0.0"
            row += [_fmt(rep.final_J), str(rep.iterations_to_converge), wall]
            row += [_fmt(v) for v in vals]
            row += [";".join(f.replace(",", " ") for f in rep.flags)]
        if init is not None:
            row += [_fmt(v) for c in init.components for v in (c.p, c.mu, c.sigma)]
        else:
            row += [""] * (3 * k)
        rows.append(row)
    return header, rows, estimates


def summary_csv(estimates: dict, k: int) -> str:
    names = [f"{kind}{i + 1}" for i in range(k) for kind in ("p", "mu", "sigma")]
    lines = ["method,param,n,mean,std"]
    for method, vals in estimates.items():
        if not vals:
            continue
        arr = np.array(vals)
        std = arr.std(axis=0, ddof=1) if len(arr) > 1 else np.zeros(arr.shape[1])
        for j, name in enumerate(names):
            lines.append(f"{method},{name},{len(arr)},{_fmt(arr[:, j].mean())},{_fmt(std[j])}")
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> int:
    hist, _ = load_input(args.input)
    header, rows, estimates = compare_rows(args, hist)
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(r) + "\n")
    _write_text(args.out, buf.getvalue())
    summary = summary_csv(estimates, args.classes)
    if args.summary:
        _write_text(args.summary, summary)
    elif args.out and args.out != "-":
        out = Path(args.out)
        _write_text(str(out.with_name(out.stem + "_summary.csv")), summary)
    else:
        sys.stdout.write("\n" + summary)
    return EXIT_OK


# ---------------------------------------------------------------- synth


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--image must be WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise UsageError("--image dimensions must be positive")
    return w, h


def sample_image(hist: NormalizedHistogram, width: int, height: int, seed: int) -> GrayImage:
    """Pixels drawn i.i.d. from the histogram's gray-level distribution."""
    rng = np.random.default_rng(seed)
    pix = rng.choice(hist.bins.size, size=width * height, p=hist.bins)
    return GrayImage(width=width, height=height, pixels=pix.astype(np.uint8))


def cmd_synth(args) -> int:
    try:
        mix = parse_components(args.spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    total = float(mix.p.sum())
    if abs(total - 1.0) > 0.05:
        raise UsageError(f"component priors sum to {total:g}; must be within 0.05 of 1")
    hist = synth_histogram(mix)
    _write_text(args.out, histogram_to_csv(hist))
    if args.image:
        if not args.pgm:
            raise UsageError("--image needs --pgm <path>")
        w, h = _parse_size(args.image)
        img = sample_image(hist, w, h, args.seed)
        try:
            Path(args.pgm).write_bytes(write_pgm(img))
        except OSError as exc:
            raise InputError(f"cannot write {args.pgm}: {exc.strerror or exc}") from None
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_fit_flags(p):
    p.add_argument("input", help="PGM image or gray,h histogram CSV")
    p.add_argument("--method", choices=METHODS, default="la")
    p.add_argument("--classes", type=int, default=4, help="number of pixel classes K")
    p.add_argument("--iterations", type=int, default=2000, help="iteration limit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gw", type=float, default=None, help="neighborhood width factor (la, default 0.02)")
    p.add_argument("--gh", type=float, default=None, help="neighborhood height factor (la, default 0.3)")
    p.add_argument("--omega", type=float, default=DEFAULT_OMEGA, help="prior-sum penalty weight")
    p.add_argument("--window", type=int, default=None, help="reference window size (la, default 25)")
    p.add_argument("--init", default=None, help="initial mixture JSON (em/lm)")
    p.add_argument("--trace", default=None, help="write per-iteration iter,J,best_J CSV here")
    p.add_argument("--out", default=None, help="report JSON path (default stdout)")
    p.add_argument("--snapshots", default=None, help="la: iterations at which to dump densities, e.g. 0,500,2000")
    p.add_argument("--snapshot-dir", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="carlaseg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a mixture to an image or histogram")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("segment", help="fit, threshold and write the segmented image")
    _add_fit_flags(p)
    p.add_argument("--seg", default=None, help="segmented PGM path (default <input>_seg.pgm)")
    p.add_argument("--labels", default="means", help="means | indices | levels:a,b,...")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("compare", help="repeated runs of several fitters, CSV report")
    p.add_argument("input")
    p.add_argument("--methods", default="la,em,lm")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-mode", default="shared-random")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--omega", type=float, default=DEFAULT_OMEGA)
    p.add_argument("--gw", type=float, default=0.02)
    p.add_argument("--gh", type=float, default=0.3)
    p.add_argument("--window", type=int, default=25)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--timing", action=argparse.BooleanOptionalAction, default=True,
                   help="record wall_millis (--no-timing writes 0.0 for byte-stable output)")
    p.add_argument("--out", default=None, help="rows CSV path (default stdout)")
    p.add_argument("--summary", default=None, help="summary CSV path (default <out>_summary.csv)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="histogram CSV (and optional sampled PGM) from a mixture")
    p.add_argument("spec", help="components as 'p,mu,sigma;p,mu,sigma;...'")
    p.add_argument("--out", default=None, help="histogram CSV path (default stdout)")
    p.add_argument("--image", default=None, help="also sample a WxH image")
    p.add_argument("--pgm", default=None, help="path of the sampled image")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"carlaseg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"carlaseg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
