"""Command-line interface.

Subcommands
-----------
estimate : one dataset -> one scatter matrix CSV
bench    : JSON experiment config -> aggregated results CSV
doa      : dataset or synthetic scenario -> pseudospectrum + peaks CSV

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bench import ExperimentConfig, run_experiment
from .exceptions import EstimationError, InvalidInputError
from .fileio import read_dictionary, read_samples, write_array, write_results_csv
from .kronecker import estimate_kronecker
from .linear import estimate_linear, structure_from_name, toeplitz_basis
from .rankone import RankOneDictionary, estimate_rank_one
from .simulate import (
    doa_cov,
    music_spectrum,
    sample_elliptical,
    sample_cov,
    ula_dictionary,
)
from .spiked import estimate_spiked
from .toeplitz import estimate_banded_toeplitz, estimate_toeplitz
from .tyler import MMSettings, tyler_unconstrained

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _settings(args) -> MMSettings:
    return MMSettings(tol=args.tol, max_iter=args.max_iter, record_trace=False)


def _load_dictionary(spec: str, k: int) -> RankOneDictionary:
    if spec.startswith("ula:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise InvalidInputError("ULA spec must look like ula:K:step_degrees")
        dict_k, step = int(parts[1]), float(parts[2])
        if dict_k != k:
            raise InvalidInputError(
                f"ULA spec dimension {dict_k} does not match the data dimension {k}"
            )
        return RankOneDictionary.augment(ula_dictionary(dict_k, step))
    atoms = read_dictionary(spec)
    if atoms.shape[0] != k:
        raise InvalidInputError(
            f"dictionary dimension {atoms.shape[0]} does not match the data dimension {k}"
        )
    return RankOneDictionary.augment(atoms)


def _cmd_estimate(args) -> int:
    samples = read_samples(args.input)
    settings = _settings(args)
    structure = args.structure
    if structure == "unconstrained":
        result = tyler_unconstrained(samples, settings)
    elif structure == "toeplitz":
        result = estimate_toeplitz(
            samples, settings, embedding_size=args.embedding_size, epsilon=args.epsilon
        )
    elif structure == "banded":
        if args.bandwidth is None:
            raise InvalidInputError("--structure banded requires --bandwidth")
        result = estimate_banded_toeplitz(
            samples,
            args.bandwidth,
            settings,
            embedding_size=args.embedding_size,
            epsilon=args.epsilon,
        )
    elif structure == "linear":
        struct = structure_from_name(args.basis, samples.k)
        result = estimate_linear(struct, samples, settings)
    elif structure == "rankone":
        if args.dictionary is None:
            raise InvalidInputError("--structure rankone requires --dictionary")
        dictionary = _load_dictionary(args.dictionary, samples.k)
        result = estimate_rank_one(dictionary, samples, settings, epsilon=args.epsilon)
    elif structure == "spiked":
        if args.spikes is None:
            raise InvalidInputError("--structure spiked requires --spikes")
        result = estimate_spiked(samples, args.spikes, settings)
    elif structure == "kronecker":
        if args.dims is None:
            raise InvalidInputError("--structure kronecker requires --dims p,q")
        try:
            p, q = (int(v) for v in args.dims.split(","))
        except ValueError:
            raise InvalidInputError("--dims must look like p,q") from None
        b_structure = toeplitz_basis(q) if args.b_structure == "toeplitz" else None
        method = {"gs": "gs", "mm": "mm"}[args.method]
        result = estimate_kronecker(
            samples, p, q, settings, method=method, b_structure=b_structure
        )
    else:  # pragma: no cover - argparse restricts choices
        raise InvalidInputError(f"unknown structure {structure!r}")

    write_array(args.out, result.scatter)
    print(
        f"wrote {args.out}: K={samples.k} termination={result.termination} "
        f"iterations={result.iterations}"
    )
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    overrides = {}
    for name in ("trials", "seed", "workers"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.timing:
        overrides["record_timing"] = True
    if overrides:
        raw = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
        raw.update(overrides)
        cfg = ExperimentConfig(**raw)
    output = args.out or cfg.output
    if output is None:
        raise InvalidInputError("no output path: pass --out or set 'output' in the config")
    rows = run_experiment(cfg, output=output)
    print(f"wrote {output}: {len(rows)} rows")
    return EXIT_OK


def _cmd_doa(args) -> int:
    settings = _settings(args)
    if args.input is not None:
        samples = read_samples(args.input)
    else:
        angles = [float(a) for a in args.scenario_angles.split(",")]
        R0 = doa_cov(args.scenario_k, angles, [args.scenario_power] * len(angles),
                     args.scenario_noise_var)
        samples = sample_elliptical(R0, args.scenario_n, args.seed)
        print(f"synthetic scenario: K={args.scenario_k} N={args.scenario_n} angles={angles}")
    if not samples.is_complex:
        raise InvalidInputError("DOA estimation needs complex samples")

    if args.estimator == "constrained":
        dictionary = RankOneDictionary.augment(ula_dictionary(samples.k, args.grid_step))
        scatter = estimate_rank_one(dictionary, samples, settings).scatter
    elif args.estimator == "tyler":
        scatter = tyler_unconstrained(samples, settings).scatter
    else:
        scatter = sample_cov(samples)

    result = music_spectrum(scatter, args.sources, None if args.eval_step is None
                            else np.arange(-90.0, 90.0 + args.eval_step / 2, args.eval_step))
    peaks = set(np.round(result.peak_angles_deg, 9))
    rows = [
        {
            "angle_deg": float(a),
            "pseudospectrum": float(v),
            "is_peak": int(round(float(a), 9) in peaks),
        }
        for a, v in zip(result.grid_deg, result.pseudospectrum)
    ]
    write_results_csv(args.out, rows, ["angle_deg", "pseudospectrum", "is_peak"])
    print(f"wrote {args.out}")
    print("peaks_deg:", ",".join(str(float(a)) for a in sorted(result.peak_angles_deg)))
    if result.short_peak_list:
        print("warning: fewer peaks than requested sources")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="structcov",
        description="Robust structured scatter-matrix estimation for heavy-tailed data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate one scatter matrix from a sample CSV")
    est.add_argument("--input", required=True, help="sample CSV, one sample per row")
    est.add_argument("--out", required=True, help="output scatter CSV")
    est.add_argument(
        "--structure",
        default="unconstrained",
        choices=["unconstrained", "toeplitz", "banded", "linear", "rankone", "spiked", "kronecker"],
    )
    est.add_argument("--basis", default="toeplitz",
                     help="linear structure preset: toeplitz, banded:<k>, diagonal, full, circulant")
    est.add_argument("--bandwidth", type=int, default=None)
    est.add_argument("--embedding-size", type=int, default=None, dest="embedding_size")
    est.add_argument("--dictionary", default=None,
                     help="dictionary CSV (one atom per row) or 'ula:K:step_degrees'")
    est.add_argument("--epsilon", type=float, default=0.0)
    est.add_argument("--spikes", type=int, default=None)
    est.add_argument("--dims", default=None, help="Kronecker factor sizes p,q")
    est.add_argument("--method", default="mm", choices=["gs", "mm"])
    est.add_argument("--b-structure", default=None, choices=["toeplitz"], dest="b_structure")
    est.add_argument("--tol", type=float, default=1e-8)
    est.add_argument("--max-iter", type=int, default=1000, dest="max_iter")
    est.set_defaults(func=_cmd_estimate)

    bench = sub.add_parser("bench", help="run a Monte Carlo experiment from a JSON config")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", default=None)
    bench.add_argument("--trials", type=int, default=None)
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--workers", type=int, default=None)
    bench.add_argument("--timing", action="store_true",
                       help="record mean wall time per estimator (breaks byte-level determinism)")
    bench.set_defaults(func=_cmd_bench)

    doa = sub.add_parser("doa", help="MUSIC direction-of-arrival pipeline")
    doa.add_argument("--input", default=None, help="complex sample CSV; omit for synthetic data")
    doa.add_argument("--out", required=True)
    doa.add_argument("--sources", type=int, required=True)
    doa.add_argument("--estimator", default="constrained",
                     choices=["constrained", "tyler", "scm"])
    doa.add_argument("--grid-step", type=float, default=5.0, dest="grid_step",
                     help="dictionary grid step in degrees")
    doa.add_argument("--eval-step", type=float, default=0.5, dest="eval_step",
                     help="pseudospectrum grid step in degrees")
    doa.add_argument("--seed", type=int, default=0)
    doa.add_argument("--scenario-k", type=int, default=15, dest="scenario_k")
    doa.add_argument("--scenario-n", type=int, default=20, dest="scenario_n")
    doa.add_argument("--scenario-angles", default="-10,10,15,35,40", dest="scenario_angles")
    doa.add_argument("--scenario-power", type=float, default=1.0, dest="scenario_power")
    doa.add_argument("--scenario-noise-var", type=float, default=0.1, dest="scenario_noise_var")
    doa.add_argument("--tol", type=float, default=1e-8)
    doa.add_argument("--max-iter", type=int, default=1000, dest="max_iter")
    doa.set_defaults(func=_cmd_doa)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except EstimationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
