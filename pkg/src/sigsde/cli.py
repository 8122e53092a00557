"""Command-line entry point ``sigsde``.

Exit codes: 0 success, 1 other failure, 2 config error, 3 no real roots,
4 too many aborted trajectories.  ``SIGSDE_OUT_DIR`` overrides the output
directory and ``SIGSDE_THREADS`` the worker cap (flags win over both).
"""
import argparse
import csv
import logging
import os
import sys

from . import _backend
from .config import ConfigError, bundled_config, parse_config
from .driving_moments import expected_signature_bm_time, mc_expected_signature
from .estimator import AbortThresholdError, nonident_demo, run_experiment
from .picard_poly import picard_table, q_bound
from .sde_model import simulate_batch
from .shuffle_algebra import format_word, parse_word
from .signatures import PiecewiseLinearPath, path_signature
from .trajectory_io import read_trajectories, write_trajectories

log = logging.getLogger("sigsde")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NO_ROOTS, EXIT_ABORTS = 0, 1, 2, 3, 4


def _out_dir(args, default):
    if getattr(args, "out", None):
        return args.out
    return os.environ.get("SIGSDE_OUT_DIR") or default


def _load(args):
    return parse_config(args.config)


def _words_arg(cfg, args):
    if getattr(args, "word", None):
        return [parse_word(w) for w in args.word]
    return getattr(args, "words", None) or cfg.words


# ---------------------------------------------------------------- commands


def cmd_simulate(args):
    cfg = _load(args)
    N = args.N or cfg.N
    seed = cfg.seed if args.seed is None else args.seed
    values = cfg.true_params if cfg.theta.num_unknowns else None
    batch = simulate_batch(cfg.theta, cfg.T, cfg.dt, N, seed, values=values, trial=args.trial,
                           scheme=cfg.scheme, cap=cfg.cap)
    out = _out_dir(args, cfg.out_dir)
    target = out if args.per_file else os.path.join(out, "paths.csv")
    write_trajectories(target, batch.grid, batch.paths, per_file=args.per_file)
    print(f"wrote {N} trajectories to {target} ({batch.num_aborted} aborted)")
    return EXIT_OK


def cmd_sig(args):
    grid, paths = read_trajectories(args.infile)
    if not 0 <= args.sample < len(paths):
        raise ValueError(f"sample {args.sample} outside 0..{len(paths) - 1}")
    path = PiecewiseLinearPath(grid, paths[args.sample])
    text = "word;coefficient\n" + path_signature(path, 0, path.num_segments, args.level).to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_expected_sig(args):
    exact = expected_signature_bm_time(args.n, args.T, args.level)
    rows = [["word", "closed_form"]]
    if args.mc:
        mean, se = mc_expected_signature(args.n, args.T, args.level, args.mc, args.dt, args.seed)
        rows[0] += ["mc_mean", "mc_se"]
        for (w, c), m, s in zip(exact.items(), mean.coeffs, se.coeffs):
            rows.append([format_word(w), repr(c), repr(float(m)), repr(float(s))])
    else:
        rows += [[format_word(w), repr(c)] for w, c in exact.items()]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerows(rows)
    return EXIT_OK


def cmd_build_poly(args):
    cfg = _load(args)
    words = _words_arg(cfg, args)
    if isinstance(words, str):
        words = cfg.word_sets[words]
    if words is None:
        raise ConfigError("estimation.words", "no word set given")
    r = args.r or cfg.r
    theta = cfg.theta
    level = max(q_bound(r, len(w)) for w in words)
    drv = expected_signature_bm_time(theta.n, cfg.T, level)
    table = picard_table(theta)
    rows = []
    for w in words:
        p = table.moment_poly(r, w, drv)
        print(f"P_{r}^{format_word(w)} = {p}")
        for e, c in p.to_rows():
            rows.append([format_word(w), " ".join(str(a) for a in e), repr(c)])
    out = _out_dir(args, cfg.out_dir)
    os.makedirs(out, exist_ok=True)
    fn = os.path.join(out, "polys.csv")
    with open(fn, "w", newline="") as fh:
        wr = csv.writer(fh, delimiter=";")
        wr.writerow(["word", "exponents", "coefficient"])
        wr.writerows(rows)
    print(f"wrote {fn}")
    return EXIT_OK


def _estimate(cfg, args):
    words = _words_arg(cfg, args)
    over = {}
    if getattr(args, "N", None):
        over["N"] = args.N
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    est = cfg.estimation(words, **over)
    trials = args.trials or cfg.trials
    if getattr(args, "full", False):
        trials = 100
    report = run_experiment(est, cfg.theta, cfg.true_params, trials)
    out = _out_dir(args, cfg.out_dir)
    report.write_csv(out)
    label = words if isinstance(words, str) else ",".join(format_word(w) for w in est.words)
    print(f"{cfg.name} [{label}] {trials} trials, N={est.N}, r={est.r}")
    for k, (m, s) in enumerate(zip(report.mean, report.std)):
        print(f"  theta{k + 1}: mean {m:.6g}  std {s:.6g}  (true {cfg.true_params[k]:g})")
    if report.empty_trials:
        print(f"  {len(report.empty_trials)} trials without real roots (excluded)")
    if report.flagged_trials:
        print(f"  {len(report.flagged_trials)} trials flagged: many distinct roots")
    print(f"wrote roots.csv, summary.csv, moments.csv to {out}")
    if len(report.empty_trials) == trials:
        return EXIT_NO_ROOTS
    return EXIT_OK


def cmd_estimate(args):
    return _estimate(_load(args), args)


def cmd_experiment(args):
    cfg = bundled_config(args.number)
    if not args.out and not os.environ.get("SIGSDE_OUT_DIR"):
        args.out = cfg.out_dir
    return _estimate(cfg, args)


def cmd_nonident(args):
    res = nonident_demo(args.T, args.dt, args.seed)
    out = _out_dir(args, "out/nonident")
    write_trajectories(os.path.join(out, "path_a.csv"), res.grid, res.path_a)
    write_trajectories(os.path.join(out, "path_b.csv"), res.grid, res.path_b)
    print(f"distance at T={args.T:g}: {res.distance:.6g}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="sigsde", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="worker cap for compiled kernels")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate trajectories from a config")
    s.add_argument("--config", required=True)
    s.add_argument("--N", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--trial", type=int)
    s.add_argument("--out")
    s.add_argument("--per-file", action="store_true", help="one CSV per sample")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sig", help="signature of a trajectory CSV")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--level", type=int, required=True)
    s.add_argument("--sample", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sig)

    s = sub.add_parser("expected-sig", help="expected signature of (t, W)")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--level", type=int, required=True)
    s.add_argument("--mc", type=int, default=0, help="Monte Carlo sample size")
    s.add_argument("--dt", type=float, default=0.002)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_expected_sig)

    s = sub.add_parser("build-poly", help="print the moment polynomials P_r^I")
    s.add_argument("--config", required=True)
    s.add_argument("--words", help="word-set name from the config")
    s.add_argument("--word", action="append", help="explicit word, e.g. 0.1.1 (repeatable)")
    s.add_argument("--r", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_build_poly)

    for name, func in (("estimate", cmd_estimate), ("experiment", cmd_experiment)):
        s = sub.add_parser(name, help="run expected signature matching trials")
        if name == "estimate":
            s.add_argument("--config", required=True)
        else:
            s.add_argument("number", choices=["1", "2", "3"])
            s.add_argument("--full", action="store_true", help="100 trials")
        s.add_argument("--words", help="word-set name")
        s.add_argument("--word", action="append", help="explicit word (repeatable)")
        s.add_argument("--trials", type=int)
        s.add_argument("--N", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--out")
        s.set_defaults(func=func)

    s = sub.add_parser("nonident-demo", help="two parameter sets, one driver")
    s.add_argument("--T", type=float, default=0.3)
    s.add_argument("--dt", type=float, default=0.001)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_nonident)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads or os.environ.get("SIGSDE_THREADS")
    if threads:
        _backend.set_threads(int(threads))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AbortThresholdError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORTS
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
