"""Command-line harness: ``onlineboost {gen,run,sweep,regret}``.

Exit codes: 0 success, 1 configuration error, 2 runtime or numerical
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .data import DataError, StreamSpec, make_stream, write_csv
from .experiments import (
    ALGORITHMS,
    SWEEP_PARAMETERS,
    ConfigError,
    _write_rows,
    read_config_file,
    regret_curve,
    resolve_config,
    run_experiment,
    run_sweep,
    write_config_echo,
    write_experiment,
)

log = logging.getLogger("onlineboost")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3


def _add_stream_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stream", choices=["stationary", "duffing", "csv"])
    p.add_argument("--T", type=int, help="stream length (cap for csv)")
    p.add_argument("--noise-var", dest="noise_var", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--path", help="input csv (stream=csv)")
    p.add_argument("--has-header", dest="has_header", action="store_const", const=True)
    p.add_argument("--target-column", dest="target_column", type=int)
    p.add_argument("--seed", type=int)


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat 'key = value' settings file")
    p.add_argument("--algorithm", choices=sorted(ALGORITHMS))
    _add_stream_args(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    for name, kind in (("m", int), ("sigma-m2", float), ("c", float), ("K", int),
                       ("mu", float), ("mu-z", float), ("beta", float), ("v", float),
                       ("delta-floor", float)):
        p.add_argument(f"--{name}", dest=name.replace("-", "_"), type=kind)
    p.add_argument("--trace", action="store_const", const=True,
                   help="write lambda_trace.csv for the first trial")
    p.add_argument("--trace-every", dest="trace_every", type=int)
    p.add_argument("--out", type=Path, default=Path("out"))


_SETTING_KEYS = ("algorithm", "stream", "T", "noise_var", "rho", "path", "has_header",
                 "target_column", "seed", "trials", "workers", "m", "sigma_m2", "c", "K",
                 "mu", "mu_z", "beta", "v", "delta_floor", "trace", "trace_every")


def _settings(args) -> dict:
    settings = read_config_file(args.config) if args.config else {}
    for key in _SETTING_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def cmd_gen(args) -> int:
    spec = StreamSpec(kind=args.stream or "stationary", T=args.T or 1000,
                      noise_var=0.01 if args.noise_var is None else args.noise_var,
                      rho=0.5 if args.rho is None else args.rho, seed=args.seed or 0,
                      path=args.path, has_header=bool(args.has_header),
                      target_column=-1 if args.target_column is None else args.target_column)
    stream = make_stream(spec)
    write_csv(stream, args.out)
    print(f"wrote {len(stream)} samples to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = resolve_config(_settings(args))
    result = run_experiment(cfg)
    write_experiment(result, args.out)
    print(result.summary())
    return EXIT_OK


def _parse_grid(text: str) -> list[float]:
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None
    if not grid:
        raise ConfigError("sweep grid is empty")
    return grid


def cmd_sweep(args) -> int:
    cfg = resolve_config(_settings(args))
    grid = _parse_grid(args.grid)
    rows = run_sweep(cfg, args.parameter, grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "sweep.csv", "value,mse_mean,mse_std", (r[:3] for r in rows))
    write_config_echo(cfg, out / "config.txt")
    for value, mean, std, _ in rows:
        print(f"{args.parameter}={value:g}: MSE {mean:.6g} +/- {std:.6g}")
    return EXIT_OK


def cmd_regret(args) -> int:
    spec = StreamSpec(kind=args.stream or "stationary", T=2,
                      noise_var=0.01 if args.noise_var is None else args.noise_var,
                      rho=0.5 if args.rho is None else args.rho, path=args.path,
                      has_header=bool(args.has_header),
                      target_column=-1 if args.target_column is None else args.target_column)
    grid = [int(v) for v in _parse_grid(args.grid)]
    rows = regret_curve(spec, grid, v=args.v, seed=args.seed or 0, trials=args.trials)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "regret.csv", "T,regret,regret_over_lnT", rows)
    for T, regret, ratio in rows:
        print(f"T={T}: regret {regret:.6g}, regret/lnT {ratio:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onlineboost", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a stream to csv")
    _add_stream_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="multi-trial experiment")
    _add_experiment_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="one experiment per parameter value")
    _add_experiment_args(p)
    p.add_argument("--parameter", choices=SWEEP_PARAMETERS, required=True)
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("regret", help="online NM vs best fixed linear fit")
    _add_stream_args(p)
    p.add_argument("--grid", required=True, help="increasing stream lengths, comma-separated")
    p.add_argument("--v", type=float, default=0.01)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.set_defaults(func=cmd_regret)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        where = f" ({exc.filename})" if getattr(exc, "filename", None) else ""
        print(f"I/O error{where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except (DataError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
