"""
Command-line entry point.

    python3 app/main.py coeff --truth truth.txt --spec learner.txt
    python3 app/main.py curve --truth truth.txt --spec learner.txt --out curve.csv

Result lines go to standard output; diagnostics go to standard error.
Exit codes: 0 success, 1 invalid input, 2 infeasible computation,
3 numerical failure.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

# Add project root to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.experiments import CurveConfig, curve_summary, run_curve, run_gen_error, run_select
from app.props import JENSEN_REPLICATES, run_props
from config import settings
from data_ingestion.reader import read_dataset, read_experiment, read_params, read_spec, read_truth
from data_ingestion.writer import write_dataset
from stats.coefficients import theorem1_mu
from stats.divergence import empirical_kl, kl_full, sample_near_truth
from stats.errors import InfeasibleError, ModelError, NumericalError
from stats.evidence import Prior, log_evidence, stochastic_complexity
from stats.model_core import NetworkSpec, ParamSet, TrueModel, embed_truth, sample_dataset

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """Usage errors are invalid input, not the infeasible-computation code argparse would use."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _int_list(value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(',')]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from e


def _pick(flag, config: dict, key: str, default):
    """CLI flag, else config-file key, else the settings default."""
    if flag is not None:
        return flag
    return config.get(key, default)


def uniform_truth(states, spec: NetworkSpec) -> TrueModel:
    """Truth with the given hidden state counts over spec's observables; every table uniform."""
    true_spec = NetworkSpec(T=tuple(states), Y=spec.Y)
    return TrueModel(
        true_spec=true_spec,
        true_params=ParamSet(
            a=tuple(np.full(s, 1.0 / s) for s in true_spec.T),
            b=tuple(np.full((true_spec.n_cells, y), 1.0 / y) for y in true_spec.Y),
        ),
    )


def cmd_coeff(args) -> int:
    spec = read_spec(args.spec)
    truth = read_truth(args.truth) if args.truth else uniform_truth(args.true_states, spec)
    print(theorem1_mu(truth, spec).as_line())
    return EXIT_OK


def cmd_kl(args) -> int:
    truth = read_truth(args.truth)
    if args.params:
        spec, params = read_params(args.params)
    else:
        if not args.spec:
            raise ModelError("kl needs --spec unless --params is given")
        spec = read_spec(args.spec)
        if args.near_truth is not None:
            params = sample_near_truth(truth, spec, args.near_truth, args.seed)
        else:
            params = embed_truth(truth, spec)
    print(f"kl={kl_full(truth, spec, params)}")
    if args.data:
        data = read_dataset(args.data, spec)
        print(f"empirical_kl={empirical_kl(truth, spec, params, data)}")
    return EXIT_OK


def cmd_sample(args) -> int:
    truth = read_truth(args.truth)
    data = sample_dataset(truth, args.n, args.seed)
    write_dataset(data, args.out or 'data.csv')
    return EXIT_OK


def cmd_evidence(args) -> int:
    spec = read_spec(args.spec)
    data = read_dataset(args.data, spec)
    prior = Prior.uniform(spec, args.prior_alpha)
    result = log_evidence(spec, prior, data, method=args.method, draws=args.mc_draws, seed=args.seed)
    if args.truth:
        result = stochastic_complexity(result, read_truth(args.truth), data)
    print(result.as_line())
    return EXIT_OK


def cmd_curve(args) -> int:
    file_config = read_experiment(args.config) if args.config else {}
    config = CurveConfig(
        truth_path=Path(args.truth),
        spec_path=Path(args.spec),
        prior_alpha=_pick(args.prior_alpha, file_config, 'prior_alpha', settings.DEFAULT_PRIOR_ALPHA),
        ns=tuple(_pick(args.ns, file_config, 'ns', settings.DEFAULT_NS)),
        replicates=_pick(args.replicates, file_config, 'replicates', settings.DEFAULT_REPLICATES),
        method=_pick(args.method, file_config, 'method', settings.DEFAULT_METHOD),
        mc_draws=_pick(args.mc_draws, file_config, 'mc_draws', settings.DEFAULT_MC_DRAWS),
        seed=_pick(args.seed, file_config, 'seed', settings.DEFAULT_SEED),
        out_path=Path(args.out or 'curve.csv'),
    )
    curve = run_curve(config, workers=args.workers)
    report = theorem1_mu(read_truth(config.truth_path), read_spec(config.spec_path))
    print(curve_summary(curve, report))
    return EXIT_OK


def cmd_gen_error(args) -> int:
    truth, spec = read_truth(args.truth), read_spec(args.spec)
    seed = settings.DEFAULT_SEED if args.seed is None else args.seed
    report = run_gen_error(truth, spec, Prior.uniform(spec, args.prior_alpha), args.n, args.replicates, seed,
                           workers=args.workers)
    print(report.as_line())
    return EXIT_OK


def cmd_select(args) -> int:
    file_config = read_experiment(args.config) if args.config else {}
    result = run_select(
        args.truth,
        args.candidates,
        n=args.n,
        replicates=_pick(args.replicates, file_config, 'replicates', settings.DEFAULT_REPLICATES),
        seed=_pick(args.seed, file_config, 'seed', settings.DEFAULT_SEED),
        method=_pick(args.method, file_config, 'method', settings.DEFAULT_METHOD),
        draws=_pick(args.mc_draws, file_config, 'mc_draws', settings.DEFAULT_MC_DRAWS),
        prior_alpha=_pick(args.prior_alpha, file_config, 'prior_alpha', settings.DEFAULT_PRIOR_ALPHA),
        em_restarts=_pick(args.em_restarts, file_config, 'em_restarts', settings.EM_RESTARTS),
        out_path=args.out or 'select.csv',
        workers=args.workers,
    )
    for line in result.summary_lines():
        print(line)
    return EXIT_OK


def cmd_check_props(args) -> int:
    seed = settings.DEFAULT_SEED if args.seed is None else args.seed
    checks = run_props(seed, replicates=args.replicates)
    for check in checks:
        print(check.as_line())
    return EXIT_OK if all(check.passed for check in checks) else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help="master seed (default BNSC_SEED)")
    common.add_argument('--out', default=None, help="output file")
    common.add_argument('--workers', type=int, default=settings.WORKERS, help="worker processes for replicates")
    common.add_argument('--log-level', default=None, help="logging level (default BNSC_LOG_LEVEL)")

    parser = _Parser(prog='bnsc', description="Stochastic complexity of naive Bayesian networks with latent nodes")
    commands = parser.add_subparsers(dest='command', required=True)

    coeff = commands.add_parser('coeff', parents=[common], help="learning-coefficient bound mu and d/2")
    coeff.add_argument('--spec', required=True)
    source = coeff.add_mutually_exclusive_group(required=True)
    source.add_argument('--truth')
    source.add_argument('--true-states', type=_int_list, help="hidden state counts S of the truth, e.g. 1 or 2,3")
    coeff.set_defaults(handler=cmd_coeff)

    kl = commands.add_parser('kl', parents=[common], help="Kullback information at a learner parameter")
    kl.add_argument('--truth', required=True)
    kl.add_argument('--spec')
    point = kl.add_mutually_exclusive_group()
    point.add_argument('--params', help="learner shape and parameter tables")
    point.add_argument('--near-truth', type=float, metavar='EPS', help="sample a parameter within EPS of the truth")
    kl.add_argument('--data', help="also report the empirical Kullback information on this dataset")
    kl.set_defaults(handler=cmd_kl)

    sample = commands.add_parser('sample', parents=[common], help="draw a dataset from a truth")
    sample.add_argument('--truth', required=True)
    sample.add_argument('--n', type=int, required=True)
    sample.set_defaults(handler=cmd_sample)

    evidence = commands.add_parser('evidence', parents=[common], help="log marginal likelihood of a dataset")
    evidence.add_argument('--spec', required=True)
    evidence.add_argument('--data', required=True)
    evidence.add_argument('--truth', help="also report S and F against this truth")
    evidence.add_argument('--prior-alpha', type=float, default=settings.DEFAULT_PRIOR_ALPHA)
    evidence.add_argument('--method', choices=['exact', 'mc'], default=settings.DEFAULT_METHOD)
    evidence.add_argument('--mc-draws', type=int, default=settings.DEFAULT_MC_DRAWS)
    evidence.set_defaults(handler=cmd_evidence)

    curve = commands.add_parser('curve', parents=[common], help="learning curve of mean F(n) and its slope")
    curve.add_argument('--truth', required=True)
    curve.add_argument('--spec', required=True)
    curve.add_argument('--config', help="file with experiment keys")
    curve.add_argument('--ns', type=_int_list)
    curve.add_argument('--replicates', type=int)
    curve.add_argument('--method', choices=['exact', 'mc'])
    curve.add_argument('--mc-draws', type=int)
    curve.add_argument('--prior-alpha', type=float)
    curve.set_defaults(handler=cmd_curve)

    gen_error = commands.add_parser('gen-error', parents=[common], help="generalization error by both routes")
    gen_error.add_argument('--truth', required=True)
    gen_error.add_argument('--spec', required=True)
    gen_error.add_argument('--n', type=int, required=True)
    gen_error.add_argument('--replicates', type=int, default=settings.DEFAULT_REPLICATES)
    gen_error.add_argument('--prior-alpha', type=float, default=settings.DEFAULT_PRIOR_ALPHA)
    gen_error.set_defaults(handler=cmd_gen_error)

    select = commands.add_parser('select', parents=[common], help="compare selection criteria with the evidence")
    select.add_argument('--truth', required=True)
    select.add_argument('--candidates', nargs='+', required=True)
    select.add_argument('--n', type=int, required=True)
    select.add_argument('--config', help="file with experiment keys")
    select.add_argument('--replicates', type=int)
    select.add_argument('--method', choices=['exact', 'mc'])
    select.add_argument('--mc-draws', type=int)
    select.add_argument('--prior-alpha', type=float)
    select.add_argument('--em-restarts', type=int)
    select.set_defaults(handler=cmd_select)

    props = commands.add_parser('check-props', parents=[common], help="run the built-in bound checks")
    props.add_argument('--replicates', type=int, default=JENSEN_REPLICATES)
    props.set_defaults(handler=cmd_check_props)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )
    if args.seed is None and args.command in ('kl', 'sample', 'evidence'):
        args.seed = settings.DEFAULT_SEED
    try:
        return args.handler(args)
    except InfeasibleError as e:
        logger.error("%s", e)
        return EXIT_INFEASIBLE
    except NumericalError as e:
        logger.error("%s", e)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as e:
        # ModelError and pandas parse errors are ValueErrors
        logger.error("%s", e)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
