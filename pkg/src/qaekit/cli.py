"""Command-line entry point: ``qaekit {oracle,train,prepare,validate}``.

Exit codes: 0 on success, 1 on runtime failures (I/O, bad config file),
2 on usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import __version__
from . import analytic, channels, mnistprep, sources
from . import train as training

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    """Fixed-point decimal with 12 significant digits."""
    x = float(x)
    if x == 0:
        return "0." + "0" * 11
    exp = int(f"{x:.11e}".split("e")[1])
    return f"{x:.{max(0, 11 - exp)}f}"


def _source(args) -> sources.SourceEnsemble:
    kind = args.source
    if kind == "phase":
        return sources.SourceEnsemble.phase(args.seed)
    if kind == "phase_extended":
        return sources.SourceEnsemble.phase_extended(args.n, args.seed)
    if kind == "haar":
        return sources.SourceEnsemble.haar(2 ** args.n, args.seed)
    if kind == "mu1":
        if args.epsilon is None:
            raise UsageError("--epsilon is required for source mu1")
        return sources.SourceEnsemble.mu1(2 ** args.n, args.epsilon, args.seed)
    if kind == "empirical":
        if args.path is None:
            raise UsageError("--path is required for source empirical")
        return sources.load_empirical(args.path, args.seed)
    raise UsageError(f"unknown source {kind!r}")


# ------------------------------------------------------------------ oracle

def oracle_haar_opt(args):
    print(fmt(analytic.haar_optimum(args.d, args.m)))


def oracle_mixture(args):
    print(fmt(analytic.haar_mixture_value(args.d, args.m, args.c)))


def oracle_iso_bound(args):
    print(fmt(analytic.isometric_upper_bound(_source(args), args.m)))


def oracle_gram(args):
    if args.witness is not None:
        t, gamma = analytic.NAMED_WITNESSES[args.witness]
    else:
        if args.t is None:
            raise UsageError("give --witness or --t")
        t, gamma = args.t, args.gamma
    rep = analytic.gram_witness(t, gamma)
    status = "feasible" if rep.feasible else "infeasible"
    print(f"{status} min_eig={fmt(rep.min_eigenvalue)}")


def oracle_concentration(args):
    rep = analytic.concentration_bound(_source(args), args.m)
    print(f"s_m={fmt(rep.s_m)} eta_m={fmt(rep.eta_m)} "
          f"ratio_bound={fmt(rep.lower_bound_ratio)} b_mu_lower={fmt(rep.b_mu_lower)}")


def oracle_reset_c(args):
    ch = channels.reset_channel(analytic.coordinate_projector(args.d, args.m), args.d)
    c = channels.first_order_coefficient(channels.block_decompose(ch), args.d)
    print(fmt(c))
    if args.save_channel:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        channels.save_channel(ch, Path(args.out_dir) / args.save_channel)


def oracle_fixed_encoder_gap(args):
    iso, noniso = analytic.fixed_encoder_gap(args.epsilon)
    print(f"isometric={fmt(iso)} nonisometric={fmt(noniso)}")


def oracle_five_point(args):
    if (args.encoder is None) != (args.decoder is None):
        raise UsageError("give both --encoder and --decoder, or neither")
    if args.encoder is None:
        enc, dec = analytic.phase_family_achiever()
    else:
        enc, dec = channels.load_channel(args.encoder), channels.load_channel(args.decoder)
    print(fmt(sources.five_point_phase_fidelity(enc, dec)))


ORACLES = {
    "haar-opt": oracle_haar_opt,
    "mixture": oracle_mixture,
    "iso-bound": oracle_iso_bound,
    "gram": oracle_gram,
    "concentration": oracle_concentration,
    "reset-c": oracle_reset_c,
    "fixed-encoder-gap": oracle_fixed_encoder_gap,
    "five-point": oracle_five_point,
}


# ------------------------------------------------------------------- train

def cmd_train(args):
    cfg_path = Path(args.config)
    try:
        raw = cfg_path.read_bytes()
    except OSError as exc:
        raise RuntimeError(f"cannot read config: {exc}") from exc
    spec = training.parse_descriptor(raw.decode())
    if args.seed is not None:
        spec = dataclasses.replace(spec, seeds=tuple(args.seed + i for i in range(len(spec.seeds))))
    if spec.path is not None:
        p = Path(spec.path)
        if not p.is_absolute():
            p = cfg_path.parent / p
        if not p.exists():
            raise RuntimeError(f"source file {p} does not exist")
        spec = dataclasses.replace(spec, path=str(p))
    out_dir = Path(args.out_dir)
    written: list[Path] = []
    try:
        result = training.run_experiment(spec)
        written = training.write_experiment(result, out_dir)
        manifest = out_dir / f"{spec.name}_manifest.json"
        written.append(manifest)
        manifest.write_text(json.dumps({
            "command": " ".join(["qaekit"] + args.argv),
            "config_digest": "sha256:" + hashlib.sha256(raw).hexdigest(),
            "seed": list(spec.seeds),
            "tool_version": __version__,
            "outputs": [str(p) for p in written],
        }, indent=2) + "\n")
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        for p in (out_dir / f"{spec.name}_{s}" for s in ("epochs.csv", "summary.csv",
                                                        "manifest.json")):
            p.unlink(missing_ok=True)
        raise
    for row in result.summary_rows():
        print(f"{row['arch']} final_test_mean={fmt(row['final_test_mean'])} "
              f"band=[{fmt(row['band_low'])}, {fmt(row['band_high'])}]")


# ----------------------------------------------------------------- prepare

def cmd_prepare(args):
    try:
        cfg = mnistprep.PrepConfig(args.n, args.k, args.head_energy)
    except mnistprep.PrepError as exc:
        raise UsageError(str(exc)) from exc
    if not Path(args.mnist_path).exists():
        raise RuntimeError(f"MNIST file {args.mnist_path} does not exist")
    states, heads = mnistprep.prepare_dataset(args.mnist_path, cfg, args.count)
    out = Path(args.out_dir) / args.out
    out.parent.mkdir(parents=True, exist_ok=True)
    sources.save_states(states, out)
    print(f"wrote {len(states)} states of dimension {cfg.d} to {out}")
    if args.audit:
        print(f"head_mass_fraction={fmt(mnistprep.head_mass_fraction(heads, cfg.head_energy))}")


# ---------------------------------------------------------------- validate

def cmd_validate(args):
    try:
        ch = channels.load_channel(args.channel)
    except (channels.ChannelError, ValueError) as exc:
        raise UsageError(f"cannot parse channel file: {exc}") from exc
    except OSError as exc:
        raise RuntimeError(str(exc)) from exc
    rep = channels.validate_cptp(ch)
    rank = channels.kraus_rank(channels.to_choi(ch))
    print(f"dim_in={ch.dim_in} dim_out={ch.dim_out} n_kraus={ch.n_kraus}")
    print(f"tp={str(rep.tp).lower()} cp={str(rep.cp).lower()} rank={rank}")


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base seed for all sampling")
    common.add_argument("--out-dir", default=".", help="directory for written files")
    common.add_argument("--threads", type=int, default=None, help="BLAS thread limit")

    ap = argparse.ArgumentParser(prog="qaekit", parents=[common],
                                 description="Quantum channel oracles and QAE training.")
    ap.add_argument("--version", action="version", version=f"qaekit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    orc = sub.add_parser("oracle", parents=[common], help="evaluate a closed-form quantity")
    osub = orc.add_subparsers(dest="oracle", required=True)

    p = osub.add_parser("haar-opt", parents=[common])
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--m", type=int, required=True)

    p = osub.add_parser("mixture", parents=[common])
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--c", type=float, required=True)

    for name in ("iso-bound", "concentration"):
        p = osub.add_parser(name, parents=[common])
        p.add_argument("--source", required=True,
                       choices=["phase", "phase_extended", "haar", "mu1", "empirical"])
        p.add_argument("--m", type=int, required=True)
        p.add_argument("--n", type=int, default=2)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--path")

    p = osub.add_parser("gram", parents=[common])
    p.add_argument("--witness", choices=sorted(analytic.NAMED_WITNESSES))
    p.add_argument("--t", type=float)
    p.add_argument("--gamma", type=float, default=0.0)

    p = osub.add_parser("reset-c", parents=[common])
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--save-channel", help="also write the reset channel to this file")

    p = osub.add_parser("fixed-encoder-gap", parents=[common])
    p.add_argument("--epsilon", type=float, required=True)

    p = osub.add_parser("five-point", parents=[common])
    p.add_argument("--encoder", help="encoder channel file (default: rank-two achiever)")
    p.add_argument("--decoder", help="decoder channel file")

    p = sub.add_parser("train", parents=[common], help="run a training experiment")
    p.add_argument("config", help="key = value experiment descriptor")

    p = sub.add_parser("prepare", parents=[common], help="MNIST images to a state file")
    p.add_argument("--mnist-path", required=True)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--head-energy", type=float, default=0.9)
    p.add_argument("--count", type=int, default=3000)
    p.add_argument("--out", default="mu2_states.txt")
    p.add_argument("--audit", action="store_true", help="report the head-mass fraction")

    p = sub.add_parser("validate", parents=[common], help="check a channel file")
    p.add_argument("channel")
    return ap


def _merge_globals(argv: list[str], ap: argparse.ArgumentParser) -> argparse.Namespace:
    # global flags may appear before or after the subcommand
    pre, _ = build_parser_globals().parse_known_args(argv)
    args = ap.parse_args(argv)
    for key in ("seed", "out_dir", "threads"):
        val = getattr(args, key)
        default = ap.get_default(key)
        if val == default and getattr(pre, key) != default:
            setattr(args, key, getattr(pre, key))
    return args


def build_parser_globals() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out-dir", default=".")
    g.add_argument("--threads", type=int, default=None)
    return g


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = _merge_globals(argv, ap)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    if args.seed is None and args.command != "train":
        args.seed = 0
    try:
        with threadpool_limits(limits=args.threads):
            if args.command == "oracle":
                ORACLES[args.oracle](args)
            elif args.command == "train":
                cmd_train(args)
            elif args.command == "prepare":
                cmd_prepare(args)
            else:
                cmd_validate(args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"qaekit: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ValueError, training.ConfigError) as exc:
        if args.command == "oracle":
            ap.print_usage(sys.stderr)
            print(f"qaekit: error: {exc}", file=sys.stderr)
            return USAGE_ERROR
        print(f"qaekit: error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except (RuntimeError, OSError) as exc:
        print(f"qaekit: error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
