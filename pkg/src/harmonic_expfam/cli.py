"""Command-line interface: fit, eval, crossval, posterior, map, export-grid.

Reports go to stdout as ``key=value`` lines or TSV; diagnostics go to
stderr.  Flag problems exit with status 2 before any file is touched,
runtime failures exit with status 1.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import math
import sys
import time


from . import __version__
from .bayes_rotation import DEFAULT_REFINE_STEPS, map_rotation, posterior, posterior_grid, sphere_analyze
from .data_io import ModelFile, export_grid, read_grid, read_model, read_points, write_model
from .expfam import DEFAULT_OVERSAMPLE, density_grid, empirical_moments, log_partition, log_unnormalized
from .optimize import FitConfig, cross_validate, fit_map
from .special_functions import Manifold

DEFAULT_SEED = 0
DEFAULT_FOLDS = 5

log = logging.getLogger("harmonic_expfam")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Parsing


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="harmonic-expfam", description="Harmonic exponential family densities on S1, S2 and SO(3).")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, threads=True):
        sp.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        if threads:
            sp.add_argument("--threads", type=int, default=None, help="BLAS/FFT thread limit")

    fit = sub.add_parser("fit", help="MAP fit to a point file, write a model file")
    fit.add_argument("--manifold", choices=[m.value for m in Manifold], default="s2")
    fit.add_argument("--bandlimit", type=int, required=True)
    fit.add_argument("--oversample", type=float, default=DEFAULT_OVERSAMPLE)
    fit.add_argument("--reg", type=float, default=0.0, help="Plancherel regularization strength (0 disables)")
    fit.add_argument("--max-iter", type=int, default=500)
    fit.add_argument("--input", required=True, help="TSV point file")
    fit.add_argument("--output", required=True, help="model file to write")
    common(fit)

    ev = sub.add_parser("eval", help="per-point log-likelihood of a model on a point file")
    ev.add_argument("--model", required=True)
    ev.add_argument("--input", required=True)
    common(ev)

    cv = sub.add_parser("crossval", help="k-fold cross-validation over bandlimits and regularization strengths")
    cv.add_argument("--manifold", choices=[m.value for m in Manifold], default="s2")
    cv.add_argument("--bandlimit", type=_int_list, required=True, help="comma-separated bandlimits")
    cv.add_argument("--reg", type=_float_list, default=[0.0], help="comma-separated strengths")
    cv.add_argument("--oversample", type=float, default=DEFAULT_OVERSAMPLE)
    cv.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    cv.add_argument("--seed", type=int, default=DEFAULT_SEED)
    cv.add_argument("--input", required=True)
    cv.add_argument("--output", default=None, help="TSV report path (default stdout)")
    common(cv)

    def signal_pair(sp):
        sp.add_argument("--x", required=True, help="grid file of the observed (rotated) signal")
        sp.add_argument("--y", required=True, help="grid file of the reference signal")
        sp.add_argument("--sigma", type=float, required=True)
        sp.add_argument("--bandlimit", type=int, default=None, help="signal bandlimit (default B-1 of the grids)")
        sp.add_argument("--model", default=None, help="prior model file on SO3")

    po = sub.add_parser("posterior", help="conjugate posterior over rotations, written as a model file")
    signal_pair(po)
    po.add_argument("--output", required=True)
    common(po)

    mp = sub.add_parser("map", help="MAP rotation from a posterior model or a signal pair")
    mp.add_argument("--posterior", default=None, help="posterior model file (alternative to --x/--y)")
    mp.add_argument("--x", default=None)
    mp.add_argument("--y", default=None)
    mp.add_argument("--sigma", type=float, default=None)
    mp.add_argument("--bandlimit", type=int, default=None)
    mp.add_argument("--model", default=None, help="prior model file on SO3")
    mp.add_argument("--grid-bandlimit", type=int, default=None, help="search grid B (default 2L)")
    mp.add_argument("--refine-steps", type=int, default=DEFAULT_REFINE_STEPS)
    common(mp)

    eg = sub.add_parser("export-grid", help="normalized density of a model on a grid")
    eg.add_argument("--model", required=True)
    eg.add_argument("--grid-bandlimit", type=int, required=True)
    eg.add_argument("--output", default=None, help="grid file path (default stdout)")
    common(eg)
    return p


def validate(args) -> None:
    """Reject bad numeric flags before any I/O."""
    threads = getattr(args, "threads", None)
    if threads is not None and threads < 1:
        raise UsageError("--threads must be >= 1")
    cmd = args.command
    if cmd == "fit":
        if args.bandlimit < 1:
            raise UsageError("--bandlimit must be >= 1")
        if args.oversample < 1:
            raise UsageError("--oversample must be >= 1")
        if not args.reg >= 0:
            raise UsageError("--reg must be >= 0")
        if args.max_iter < 0:
            raise UsageError("--max-iter must be >= 0")
    elif cmd == "crossval":
        if not args.bandlimit or min(args.bandlimit) < 1:
            raise UsageError("--bandlimit needs one or more values >= 1")
        if not args.reg or min(args.reg) < 0 or not all(math.isfinite(a) for a in args.reg):
            raise UsageError("--reg values must be finite and >= 0")
        if args.oversample < 1:
            raise UsageError("--oversample must be >= 1")
        if args.folds < 2:
            raise UsageError("--folds must be >= 2")
    elif cmd in ("posterior", "map"):
        if cmd == "map" and args.posterior is not None:
            if args.x or args.y:
                raise UsageError("give either --posterior or --x/--y, not both")
        else:
            if not (args.x and args.y):
                raise UsageError("--x and --y are both required")
            if args.sigma is None or not args.sigma > 0 or not math.isfinite(args.sigma):
                raise UsageError("--sigma must be a positive number")
        if args.bandlimit is not None and args.bandlimit < 1:
            raise UsageError("--bandlimit must be >= 1")
        if cmd == "map":
            if args.refine_steps < 0:
                raise UsageError("--refine-steps must be >= 0")
            if args.grid_bandlimit is not None and args.grid_bandlimit < 2:
                raise UsageError("--grid-bandlimit must be >= 2")
    elif cmd == "export-grid":
        if args.grid_bandlimit < 1:
            raise UsageError("--grid-bandlimit must be >= 1")


# ---------------------------------------------------------------------------
# Commands


def _emit(out, **kv):
    for k, v in kv.items():
        if isinstance(v, float):
            v = repr(v)
        out.write(f"{k}={v}\n")


def _points(path, manifold):
    data = read_points(path, manifold)
    if data.discarded:
        log.info("discarded %d rows (%d missing, %d invalid)", data.discarded, data.missing, data.invalid)
    if data.points.shape[0] == 0:
        raise ValueError(f"no usable points in {path}")
    return data


def cmd_fit(args, out) -> int:
    manifold = Manifold.parse(args.manifold)
    data = _points(args.input, manifold)
    scheme = "plancherel" if args.reg > 0 else "none"
    cfg = FitConfig(L=args.bandlimit, oversample=args.oversample, alpha_reg=args.reg, reg_scheme=scheme, max_iter=args.max_iter)
    t0 = time.perf_counter()
    stats = empirical_moments(manifold, data.points, cfg.L)
    res = fit_map(stats, cfg)
    seconds = time.perf_counter() - t0
    if not res.converged:
        log.warning("fit did not converge: %s", res.message)
    write_model(ModelFile(res.eta, cfg.oversample, scheme, cfg.alpha_reg), args.output)
    train_ll = float(res.eta.eta @ stats.mean) - log_partition(res.eta, cfg.oversample)
    _emit(
        out,
        points=data.points.shape[0],
        discarded=data.discarded,
        parameters=res.eta.eta.size,
        train_loglik=train_ll,
        iterations=res.iterations,
        converged=str(res.converged).lower(),
        grad_norm=res.grad_norm,
        seconds=round(seconds, 3),
    )
    return 0


def cmd_eval(args, out) -> int:
    model = read_model(args.model)
    eta = model.eta
    data = _points(args.input, eta.manifold)
    ll = log_unnormalized(eta, data.points) - log_partition(eta, model.oversample)
    _emit(out, points=ll.size, mean_loglik=float(ll.mean()), std_loglik=float(ll.std()))
    return 0


CV_HEADER = ("L", "alpha_reg", "fold", "train_loglik", "test_loglik", "seconds")


def cmd_crossval(args, out) -> int:
    manifold = Manifold.parse(args.manifold)
    data = _points(args.input, manifold)
    template = FitConfig(L=max(args.bandlimit), oversample=args.oversample)
    rep = cross_validate(manifold, data.points, args.folds, args.bandlimit, args.reg, template=template, seed=args.seed)
    lines = ["\t".join(CV_HEADER)]
    for r in rep.records:
        lines.append("\t".join([str(r.L), repr(r.alpha_reg), str(r.fold), repr(r.train_ll), repr(r.test_ll), f"{r.seconds:.3f}"]))
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)
    for s in rep.summary():
        log.info("L=%d alpha_reg=%g test=%.4f+-%.4f train=%.4f", s["L"], s["alpha_reg"], s["test_mean"], s["test_std"], s["train_mean"])
    return 0


def _posterior_from_args(args):
    xs, ys = read_grid(args.x), read_grid(args.y)
    if xs.spec.manifold is not Manifold.S2 or ys.spec.manifold is not Manifold.S2:
        raise ValueError("signal grids must be on s2")
    L = args.bandlimit
    if L is None:
        L = min(xs.spec.B, ys.spec.B) - 1
    prior = None
    if args.model:
        prior = read_model(args.model).eta
        if prior.manifold is not Manifold.SO3:
            raise ValueError("prior model must be on so3")
    return posterior(prior, sphere_analyze(xs, L), sphere_analyze(ys, L), args.sigma)


def cmd_posterior(args, out) -> int:
    post = _posterior_from_args(args)
    write_model(ModelFile(post), args.output)
    _emit(out, bandlimit=post.L, parameters=post.eta.size)
    return 0


def cmd_map(args, out) -> int:
    post = read_model(args.posterior).eta if args.posterior else _posterior_from_args(args)
    if post.manifold is not Manifold.SO3:
        raise ValueError("posterior model must be on so3")
    B = args.grid_bandlimit or 2 * post.L
    g, value = map_rotation(post, B, args.refine_steps)
    a, b, c = g.coords
    _emit(out, alpha=float(a), beta=float(b), gamma=float(c), log_value=value)
    return 0


def cmd_export_grid(args, out) -> int:
    model = read_model(args.model)
    eta = model.eta
    f = posterior_grid(eta, args.grid_bandlimit) if eta.manifold is Manifold.SO3 else density_grid(eta, args.grid_bandlimit)
    if args.output:
        export_grid(f, args.output)
        log.info("integral=%r", f.integral())
    else:
        export_grid(f, out)
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "eval": cmd_eval,
    "crossval": cmd_crossval,
    "posterior": cmd_posterior,
    "map": cmd_map,
    "export-grid": cmd_export_grid,
}


def _thread_limit(n):
    if n is None:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        validate(args)
    except UsageError as e:
        parser.print_usage(stderr)
        stderr.write(f"harmonic-expfam: error: {e}\n")
        return 2
    handler = logging.StreamHandler(stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    root = logging.getLogger("harmonic_expfam")
    root.addHandler(handler)
    root.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        with _thread_limit(getattr(args, "threads", None)):
            return COMMANDS[args.command](args, stdout)
    except (OSError, ValueError, KeyError, ArithmeticError) as e:
        stderr.write(f"harmonic-expfam: error: {e}\n")
        return 1
    finally:
        root.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
