"""Command-line entry point: ``qcompa {solve,sweep,validate,papr}``.

Negative values must be attached with ``=``, e.g. ``--gamma-db=-5,-1``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .baselines import ALGORITHMS
from .dual import SolverSettings
from .errors import InfeasibleTargetError, QCompError
from .experiments import (
    ENV_SEED,
    PAPR_ESTIMATORS,
    PRESETS,
    SWEEP_ALGORITHMS,
    compute_papr,
    load_sweep_spec,
    run_algorithm,
    run_sweep,
    trial_seed,
    write_outputs,
)
from .network import SCENARIOS, generate_instance, scenario_params
from .system import SystemConfig, db_to_linear


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _floats(text: str) -> list[float]:
    return [float(t) for t in _csv_list(text)]


def _env_int(name: str):
    value = os.environ.get(name)
    return int(value) if value else None


def _add_instance_args(p: argparse.ArgumentParser):
    p.add_argument("--scenario", choices=sorted(SCENARIOS), default="wideband")
    p.add_argument("--n-antennas", type=int, default=8)
    p.add_argument("--n-cells", type=int, default=3)
    p.add_argument("--n-users", type=int, default=2)
    p.add_argument("--n-subcarriers", type=int, default=16)
    p.add_argument("--bits", default="3", help="converter bits (1-5 or inf)")
    p.add_argument("--gamma-db", type=float, default=-1.0, help="SQINR target in dB")
    p.add_argument("--seed", type=int, default=None)


def _instance(args, seed_seq):
    params = scenario_params(args.scenario)
    _, channels = generate_instance(args.n_cells, args.n_users, args.n_antennas,
                                    args.n_subcarriers, params, seed_seq)
    config = SystemConfig(args.n_cells, args.n_users, args.n_antennas, args.n_subcarriers,
                          args.bits, params.noise_power_w(), float(db_to_linear(args.gamma_db)))
    return config, channels


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = _env_int(ENV_SEED)
    return 0 if env is None else env


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    seed = _seed(args)
    config, channels = _instance(args, trial_seed(seed, 0, 0))
    results = {}
    status = 0
    for alg in _csv_list(args.algorithms):
        if alg not in ALGORITHMS:
            raise SystemExit(f"unknown algorithm {alg!r}; choose from {ALGORITHMS}")
        try:
            if alg == "socp_oracle":
                from .socp import socp_oracle
                res = socp_oracle(config, channels)
            else:
                res = run_algorithm(alg, config, channels, SolverSettings())
            results[alg] = {"status": "ok", **res.to_dict(include_arrays=not args.brief)}
        except InfeasibleTargetError as exc:
            results[alg] = {"status": "infeasible", "message": str(exc)}
            status = 2
    doc = {"seed": seed, "scenario": args.scenario, "config": config.to_dict(),
           "results": results}
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    return status


def cmd_sweep(args) -> int:
    if args.config and args.preset:
        raise SystemExit("--config and --preset are mutually exclusive")
    spec = load_sweep_spec(args.config) if args.config else PRESETS[args.preset or "wideband-desk"]
    spec = spec.with_env()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.scenario:
        changes["scenario"] = args.scenario
    if args.bits:
        changes["bits"] = tuple(_csv_list(args.bits))
    if args.gamma_db:
        changes["gamma_db"] = tuple(_floats(args.gamma_db))
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.algorithms:
        changes["algorithms"] = tuple(_csv_list(args.algorithms))
    if args.write_trials:
        changes["write_trials"] = True
    if changes:
        spec = replace(spec, **changes)
    result = run_sweep(spec)
    written = write_outputs(result, args.out_dir)
    for row in result.summary():
        p0 = row["mean_p0_dbm"]
        print(f"{row['algorithm']:>9} bits={row['bits']:>3} gamma={row['gamma_db']:+6.2f} dB "
              f"converged={row['converged']}/{row['trials']} "
              f"mean_p0={'n/a' if p0 is None else f'{p0:.2f} dBm'}")
    print(f"wrote {len(written)} files to {args.out_dir}")
    return 0


def cmd_papr(args) -> int:
    seed = _seed(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["algorithm", "trial", "estimator", "papr_db"])
    algs = _csv_list(args.algorithms)
    for alg in algs:
        if alg not in SWEEP_ALGORITHMS:
            raise SystemExit(f"unknown algorithm {alg!r}; choose from {SWEEP_ALGORITHMS}")
    for trial in range(args.trials):
        config, channels = _instance(args, trial_seed(seed, 0, trial))
        for alg in algs:
            try:
                res = run_algorithm(alg, config, channels, SolverSettings())
                value = compute_papr(res.beamformers, config.quantizer, args.draws,
                                     np.random.SeedSequence(seed, spawn_key=(0, trial, 1)),
                                     args.estimator)
            except InfeasibleTargetError:
                value = math.nan
            w.writerow([alg, trial, args.estimator, repr(float(value))])
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_validate(args) -> int:
    from .validation import run_validation
    seed = _seed(args)
    lines, ok = run_validation(seed=seed, trials=args.trials)
    for line in lines:
        print(line)
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcompa", description=(
        "Quantization-aware coordinated multicell beamforming with per-antenna power "
        "minimization."))
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one random instance and print a JSON report")
    _add_instance_args(p)
    p.add_argument("--algorithms", default="qcomp_pa",
                   help=f"comma list from {', '.join(ALGORITHMS)}")
    p.add_argument("--brief", action="store_true", help="omit per-stream arrays")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="Monte-Carlo sweep over SQINR targets and resolutions")
    p.add_argument("--config", help="JSON sweep description")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--scenario", choices=sorted(SCENARIOS))
    p.add_argument("--bits", help="comma list, e.g. 3,inf")
    p.add_argument("--gamma-db", help="comma list in dB, e.g. --gamma-db=-5,-1,2")
    p.add_argument("--trials", type=int)
    p.add_argument("--algorithms", help=f"comma list from {', '.join(SWEEP_ALGORITHMS)}")
    p.add_argument("--write-trials", action="store_true", help="one JSON report per trial")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run the oracle and Monte-Carlo self-checks")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, default=5)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("papr", help="PAPR of each algorithm over random instances (CSV)")
    _add_instance_args(p)
    p.add_argument("--algorithms", default=",".join(SWEEP_ALGORITHMS))
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--estimator", choices=PAPR_ESTIMATORS, default="spatial")
    p.add_argument("--draws", type=int, default=200)
    p.add_argument("--out")
    p.set_defaults(func=cmd_papr)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (QCompError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
