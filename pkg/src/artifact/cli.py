"""Command-line interface.

Every command writes ``manifest.json`` next to its outputs with the resolved
configuration, the argument vector and output checksums.  Errors are printed
as one JSON object on stderr; exit codes are 0 (success), 2 (invalid input)
and 3 (numerical failure).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .abrm import AbrmSpec, simulate_abrm
from .cgmm import CgmmConfig, CgmmProblem, SampleProblem, objective_surface, write_surface
from .dispersion import TweedieFamily
from .errors import NumericalError, ValidationError
from .fit import (
    FitResult,
    OptimizerSettings,
    fit_cgmm,
    fit_chain_ladder,
    fit_mle_gamma,
    parametric_bootstrap,
)
from .stable import StableFamily
from .triangle import chain_ladder, load_schedule_p, read_triangles, write_triangles

THREADS_ENV = "ARTIFACT_THREADS"
BUILTIN = "schedule-p"


def _default_threads():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError(f"{THREADS_ENV} must be positive")
    return n


def _load_triangles(path, premium=None, lobs=None):
    tris = load_schedule_p() if path == BUILTIN else read_triangles(path, premium)
    if lobs:
        missing = [lob for lob in lobs if lob not in tris]
        if missing:
            raise ValidationError(f"lines not in data: {', '.join(missing)}")
        tris = {lob: tris[lob] for lob in lobs}
    return list(tris.values())


def _family(args):
    if args.family == "tweedie":
        return TweedieFamily(args.power)
    return StableFamily(args.alpha)


def _config(args):
    return CgmmConfig(
        transform=args.transform,
        n_points=args.n_points,
        spacing=args.spacing,
        lam=args.lam,
        kernel_policy=args.kernel_policy,
        objective_scale=args.objective_scale,
        grid_scale=args.grid_scale,
        logdet_weight=args.logdet_weight,
        pooled=args.pooled,
    )


def _optimizer(args):
    return OptimizerSettings(n_starts=args.n_starts, perturb_sd=args.perturb_sd, penalty=args.penalty,
                             max_iter=args.max_iter)


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out_dir, command, argv, config, outputs, wall_time=None):
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "version": __version__,
        "argv": list(argv),
        "config": config,
        "outputs": {Path(p).name: _sha256(p) for p in outputs},
    }
    if wall_time is not None:
        manifest["wall_time"] = wall_time
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def _out_dir(path):
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output directory {p}: {exc.strerror}") from None
    if not os.access(p, os.W_OK):
        raise ValidationError(f"output directory {p} is not writable")
    return p


# ------------------------------------------------------------------ commands


def cmd_simulate(args, argv):
    out = _out_dir(args.out)
    if args.n < 0:
        raise ValidationError("n must be non-negative")
    spec = AbrmSpec.load(args.spec)
    seqs = np.random.SeedSequence(args.seed).spawn(args.n)
    files = []
    for r, seq in enumerate(seqs):
        tris = simulate_abrm(spec, np.random.default_rng(seq))
        path = out / f"triangle_{r + 1:04d}.csv"
        write_triangles(path, tris)
        files.append(path)
    _write_manifest(out, "simulate", argv, {"spec": spec.to_dict(), "n": args.n, "seed": args.seed}, files)
    return 0


def cmd_chainladder(args, argv):
    out = _out_dir(args.out)
    tris = _load_triangles(args.triangles, args.premium, args.lob)
    fpath, rpath = out / "factors.csv", out / "reserves.csv"
    with open(fpath, "w", newline="") as ff, open(rpath, "w", newline="") as fr:
        wf, wr = csv.writer(ff, lineterminator="\n"), csv.writer(fr, lineterminator="\n")
        wf.writerow(["lob", "development_year", "factor"])
        wr.writerow(["lob", "accident_year", "latest", "ultimate", "outstanding"])
        for tri in tris:
            cl = chain_ladder(tri)
            for j, f in enumerate(cl.dev_factors):
                wf.writerow([tri.lob, j + 1, repr(float(f))])
            for i in range(tri.n_ay):
                wr.writerow([tri.lob, i + 1, repr(float(cl.latest[i])), repr(float(cl.ultimate[i])),
                             repr(float(cl.outstanding_by_ay[i]))])
    _write_manifest(out, "chainladder", argv, {"triangles": args.triangles, "lob": args.lob}, [fpath, rpath])
    return 0


def cmd_estimate(args, argv):
    out = _out_dir(args.out)
    tris = _load_triangles(args.triangles, args.premium, args.lob)
    config = {"triangles": args.triangles, "lob": args.lob, "method": args.method, "seed": args.seed}
    if args.method == "cgmm":
        fam, cfg, opt = _family(args), _config(args), _optimizer(args)
        res = fit_cgmm(tris, fam, cfg, args.shock, opt, args.seed, pin=args.pin, threads=args.threads)
        config.update(res.settings)
    elif args.method == "mle-gamma":
        if len(tris) != 1:
            raise ValidationError("mle-gamma takes a single line; select one with --lob")
        res = fit_mle_gamma(tris[0])
    else:
        res = fit_chain_ladder(tris)
    path = out / "fit.json"
    res.to_json(path, timing=False)
    _write_manifest(out, "estimate", argv, config, [path], res.wall_time)
    if not res.converged:
        print(json.dumps({"warning": "no local solve reported convergence", "message": res.message}),
              file=sys.stderr)
    return 0


def cmd_bootstrap(args, argv):
    out = _out_dir(args.out)
    fitted = FitResult.load(args.fit)
    tris = _load_triangles(args.triangles, args.premium, args.lob or list(fitted.spec.lobs))
    mask = tris[0].mask
    if mask.shape != fitted.spec.shape:
        raise ValidationError("fit and triangles have different shapes")
    opt = _optimizer(args)
    summary = parametric_bootstrap(fitted, args.B, None, opt, args.seed, args.threads, not args.mean_only,
                                   mask=mask)
    jpath, cpath = out / "bootstrap.json", out / "bootstrap_ay.csv"
    summary.to_json(jpath)
    summary.write_ay_csv(cpath)
    config = {"fit": fitted.to_dict()["settings"], "B": args.B, "seed": args.seed,
              "process_variance": not args.mean_only, "optimizer": opt.to_dict()}
    _write_manifest(out, "bootstrap", argv, config, [jpath, cpath])
    return 0


def _grid(text):
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ValidationError(f"grid must be LO:HI:N, got {text!r}") from None
    if n < 1:
        raise ValidationError("grid needs at least one point")
    return np.linspace(lo, hi, n)


def cmd_surface(args, argv):
    out = _out_dir(args.out)
    cfg = _config(args)
    if args.sample is not None:
        try:
            x = np.loadtxt(args.sample, delimiter=",", ndmin=1)
        except (OSError, ValueError) as exc:
            raise ValidationError(f"cannot read sample {args.sample}: {exc}") from None
        fam = _family(args)
        problem = SampleProblem(x, fam, cfg)
        base = problem.theta0
    else:
        if args.fit is None:
            raise ValidationError("surface needs --fit with --triangles, or --sample")
        fitted = FitResult.load(args.fit)
        if fitted.method != "cgmm":
            raise ValidationError("surface needs a cgmm fit")
        tris = _load_triangles(args.triangles, args.premium, list(fitted.spec.lobs))
        s = fitted.settings
        problem = CgmmProblem(tris, fitted.spec.family, CgmmConfig.from_dict(s["config"]), s["shock"],
                              fitted.anchor, s.get("pin", "nu"))
        base = problem.layout.pack(fitted.spec)
    rows = objective_surface(problem, base, _axis(args.axis1), _axis(args.axis2), _grid(args.grid1),
                             _grid(args.grid2))
    path = out / "surface.csv"
    write_surface(path, rows)
    config = {"axis1": args.axis1, "axis2": args.axis2, "grid1": args.grid1, "grid2": args.grid2,
              "config": problem.config.to_dict()}
    _write_manifest(out, "surface", argv, config, [path])
    return 0


def _axis(a):
    return int(a) if a.isdigit() else a


# ---------------------------------------------------------------------- parser


def _add_data(p, required=True):
    p.add_argument("--triangles", required=required, default=BUILTIN if not required else None,
                   help=f"long-format triangle CSV, or '{BUILTIN}' for the bundled data")
    p.add_argument("--premium", help="premium CSV (carried, unused by estimation)")
    p.add_argument("--lob", action="append", help="restrict to this line (repeatable)")


def _add_model(p):
    p.add_argument("--family", choices=["tweedie", "stable"], default="tweedie")
    p.add_argument("--power", type=float, default=2.0, help="Tweedie power")
    p.add_argument("--alpha", type=float, default=1.8, help="stable tail index")
    p.add_argument("--transform", choices=["mgf", "cf"], default="mgf")
    p.add_argument("--n-points", type=int, help="quadrature points per line")
    p.add_argument("--spacing", choices=["uniform", "exponential"])
    p.add_argument("--lam", type=float, default=1e-7, help="Tikhonov parameter (relative)")
    p.add_argument("--kernel-policy", choices=["continuous", "fixed"], default="continuous")
    p.add_argument("--objective-scale", type=float)
    p.add_argument("--grid-scale", type=float, default=0.5)
    p.add_argument("--logdet-weight", type=float, default=0.25)
    p.add_argument("--pooled", action="store_true", help="pool all cells into one moment condition")


def _add_optimizer(p):
    p.add_argument("--n-starts", type=int, default=8)
    p.add_argument("--perturb-sd", type=float, default=0.2)
    p.add_argument("--penalty", type=float, default=0.0)
    p.add_argument("--max-iter", type=int, default=1000)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def build_parser():
    parser = _Parser(prog="artifact", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None, help=f"parallel tasks (default ${THREADS_ENV} or 1)")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", help="simulate triangles from a model JSON")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, default=1)
    common(p)

    p = sub.add_parser("chainladder", help="chain-ladder factors and reserves")
    _add_data(p)
    common(p)

    p = sub.add_parser("estimate", help="fit a model")
    _add_data(p)
    p.add_argument("--method", choices=["cgmm", "mle-gamma", "chain-ladder"], default="cgmm")
    p.add_argument("--shock", action="store_true", help="common shock across lines")
    p.add_argument("--pin", choices=["nu", "eta"], default="nu")
    _add_model(p)
    _add_optimizer(p)
    common(p)

    p = sub.add_parser("bootstrap", help="parametric bootstrap of a fit")
    _add_data(p)
    p.add_argument("--fit", required=True)
    p.add_argument("--B", type=int, default=200)
    p.add_argument("--mean-only", action="store_true", help="omit process variance of future cells")
    _add_optimizer(p)
    common(p)

    p = sub.add_parser("surface", help="objective on a 2-D parameter grid")
    _add_data(p, required=False)
    p.add_argument("--fit")
    p.add_argument("--sample", help="one-column CSV of an i.i.d. sample (mean, scale axes)")
    p.add_argument("--axis1", required=True)
    p.add_argument("--axis2", required=True)
    p.add_argument("--grid1", required=True, help="LO:HI:N")
    p.add_argument("--grid2", required=True, help="LO:HI:N")
    _add_model(p)
    common(p)
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "chainladder": cmd_chainladder,
    "estimate": cmd_estimate,
    "bootstrap": cmd_bootstrap,
    "surface": cmd_surface,
}


def _error(kind, exc, code):
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        if args.threads is None:
            args.threads = _default_threads()
        elif args.threads < 1:
            raise ValidationError("--threads must be positive")
        return COMMANDS[args.command](args, argv)
    except ValidationError as exc:
        return _error("validation", exc, 2)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _error("numerical", exc, 3)


if __name__ == "__main__":
    sys.exit(main())
