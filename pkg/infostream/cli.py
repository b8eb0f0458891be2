"""
Command-line entry point.

    infostream gen-dist zipf --n 1000 --param s=1.2 --out p.txt
    infostream gen-stream --dist p.txt --m 100000 --order shuffled --out s.txt
    infostream run f0-entropy --stream s.txt --eps 0.1 --eps0 0.05
    infostream run delta-test --dist p.txt --dist-q q.txt --eps 0.2 --trials 20
    infostream sweep sweep.json --workers 8 --out results.csv
    infostream exact --dist p.txt --dist-q q.txt --kind hellinger

Exit status is 0 on success, 2 on invalid input or a violated contract,
and 1 on I/O failure.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from infostream.constants import APP_NAME, APP_VERSION, LOG_LEVELS, load_config, setup_logging
from infostream.dist_core import KINDS, format_distribution, load_distribution
from infostream.errors import ContractViolation
from infostream.harness import (
    ALGOS, DIST_KINDS, STREAM_ALGOS, RunInputs, RunParams, SweepSpec, gen_dist, gen_stream, reports_json,
    run, write_dist,
)
from infostream.streaming.tokens import StreamOrder, load_stream, save_stream
from infostream.workers import run_sweep

logger = logging.getLogger(__name__)


def _key_value(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--n', type=int, help='Domain size')
    common.add_argument('--m', type=int, help='Stream length (tokens per distribution)')
    common.add_argument('--eps', type=float, default=0.1, help='Accuracy parameter (default: 0.1)')
    common.add_argument('--eps0', type=float, default=0.05, help='F0 sketch accuracy (default: 0.05)')
    common.add_argument('--eps-c', type=float, default=0.1,
                        help='Slack of the widened F0 sandwich (default: 0.1)')
    common.add_argument('--alpha', type=float, help='Heavy-item exponent')
    common.add_argument('--delta', type=float, default=0.05, help='Failure probability (default: 0.05)')
    common.add_argument('--seed', type=int, default=0, help='Random seed (default: 0)')
    common.add_argument('--order', choices=[o.value for o in StreamOrder], default=StreamOrder.AS_GIVEN.value,
                        help='Order of generated streams (default: as-given)')
    common.add_argument('--out', '-o', help='Output file (default: stdout)')
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog=APP_NAME,
        description='Sublinear and streaming estimators for entropy and f-divergences.',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__
    )
    parser.add_argument('--version', action='version', version=f"{APP_NAME} {APP_VERSION}")
    parser.add_argument('--config', '-c', help='Config file (JSON, or flat key = value)')
    parser.add_argument('--log-level', choices=list(LOG_LEVELS), help='Override the configured log level')
    sub = parser.add_subparsers(dest='command', required=True)

    p_dist = sub.add_parser('gen-dist', parents=[common], help='Write a distribution file')
    p_dist.add_argument('kind', choices=DIST_KINDS)
    p_dist.add_argument('--param', '-p', action='append', type=_key_value, default=[],
                        help='Family parameter, e.g. s=1.2, item=3, split=0.9, k=4, a=0.5, far=true')

    p_stream = sub.add_parser('gen-stream', parents=[common], help='Write a stream file')
    p_stream.add_argument('--dist', required=True, help='Distribution file for P')
    p_stream.add_argument('--dist-q', help='Distribution file for Q (two-distribution stream)')

    p_run = sub.add_parser('run', parents=[common], help='Run one estimator or tester')
    p_run.add_argument('algo', choices=list(ALGOS))
    _input_options(p_run)
    p_run.add_argument('--lower-bound', type=float, help='Known lower bound on the estimated quantity')
    p_run.add_argument('--iterations', type=int, help='Fixed iteration count')
    p_run.add_argument('--t', type=int, help='Samples per target for stream oracle simulation')
    p_run.add_argument('--max-length', type=int, help='Upper bound on the stream length')
    p_run.add_argument('--wrapped', choices=['entropy', 'distance'], default='entropy',
                       help='Algorithm run inside the stream oracle simulation')
    p_run.add_argument('--trials', type=int, help='Independent trials (seeds seed, seed+1, ...)')

    p_sweep = sub.add_parser('sweep', parents=[common], help='Run a sweep specification')
    p_sweep.add_argument('spec', help='Sweep specification (JSON)')
    p_sweep.add_argument('--trials', type=int, help='Override the trials per cell')
    p_sweep.add_argument('--workers', type=int, help='Worker processes (default: physical cores)')

    p_exact = sub.add_parser('exact', parents=[common], help='Exact entropy or divergence')
    _input_options(p_exact)
    return parser


def _input_options(parser: argparse.ArgumentParser):
    parser.add_argument('--dist', help='Distribution file for P')
    parser.add_argument('--dist-q', help='Distribution file for Q')
    parser.add_argument('--stream', help='Stream file')
    parser.add_argument('--kind', choices=[tag.value for tag in KINDS], default='js',
                        help='Divergence kind (default: js)')


def _emit(text: str, out: Optional[str]):
    if out:
        path = Path(out).expanduser()
        path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
        logger.info(f"Output: wrote {path}")
    else:
        print(text)


def _load_inputs(args, algo: str) -> RunInputs:
    p = load_distribution(args.dist) if args.dist else None
    q = load_distribution(args.dist_q) if args.dist_q else None
    stream = load_stream(args.stream) if args.stream else None
    if stream is None and algo in STREAM_ALGOS and p is not None:
        if args.m is None:
            raise ContractViolation(f"'{algo}' needs --stream, or --dist with --m")
        stream = gen_stream(p, args.m, args.order, args.seed, q)
    return RunInputs(p, q, stream)


def _run_params(args) -> RunParams:
    return RunParams(
        n=args.n, m=args.m, eps=args.eps, eps0=args.eps0, eps_c=args.eps_c, alpha=args.alpha,
        delta=args.delta, seed=args.seed, order=args.order, kind=args.kind,
        lower_bound=getattr(args, 'lower_bound', None), iterations=getattr(args, 'iterations', None),
        t=getattr(args, 't', None), max_length=getattr(args, 'max_length', None),
        wrapped=getattr(args, 'wrapped', 'entropy'),
    )


def cmd_gen_dist(args, config: Dict[str, Any]) -> int:
    if args.n is None:
        raise ContractViolation("gen-dist needs --n")
    params = dict(args.param)
    if args.kind == "hard-l1":
        params.setdefault("eps", args.eps)
    generated = gen_dist(args.kind, args.n, args.seed, **params)
    if args.out:
        for path in write_dist(generated, Path(args.out).expanduser()):
            print(path)
        return 0
    if generated.q is not None:
        raise ContractViolation("a distribution pair needs --out")
    sys.stdout.write(format_distribution(generated.p))
    return 0


def cmd_gen_stream(args, config: Dict[str, Any]) -> int:
    if args.m is None or not args.out:
        raise ContractViolation("gen-stream needs --m and --out")
    p = load_distribution(args.dist)
    q = load_distribution(args.dist_q) if args.dist_q else None
    stream = gen_stream(p, args.m, args.order, args.seed, q)
    print(save_stream(stream, Path(args.out).expanduser()))
    return 0


def cmd_run(args, config: Dict[str, Any]) -> int:
    inputs = _load_inputs(args, args.algo)
    params = _run_params(args)
    trials = args.trials or int(config.get("harness", {}).get("trials", 1))
    if trials < 1:
        raise ContractViolation(f"--trials must be at least 1, got {trials}")
    reports = [run(args.algo, inputs, params.replace(seed=params.seed + i), config) for i in range(trials)]
    if trials == 1:
        _emit(reports[0].to_json(), args.out)
    else:
        _emit(reports_json(reports), args.out)
    return 0


def cmd_sweep(args, config: Dict[str, Any]) -> int:
    spec = SweepSpec.load(Path(args.spec).expanduser())
    if args.trials:
        spec.trials = args.trials
    sink = run_sweep(spec, config, args.workers, Path(args.out) if args.out else None)
    if not args.out:
        sys.stdout.write(sink.text())
    return 0


def cmd_exact(args, config: Dict[str, Any]) -> int:
    report = run("exact", _load_inputs(args, "exact"), _run_params(args), config)
    _emit(json.dumps({"quantity": report.details["quantity"], "value": report.exact_value},
                     sort_keys=True), args.out)
    return 0


COMMANDS = {
    'gen-dist': cmd_gen_dist,
    'gen-stream': cmd_gen_stream,
    'run': cmd_run,
    'sweep': cmd_sweep,
    'exact': cmd_exact,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(Path(args.config) if args.config else None)
        setup_logging(config, args.log_level)
        return COMMANDS[args.command](args, config)
    except ValueError as e:
        # ContractViolation, bad config values, malformed JSON
        print(f"Error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
