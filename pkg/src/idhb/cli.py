"""Command-line entry point: ``idhb run | deepen | compare | verify | gen-bench``.

Exit codes: 0 success, 2 argument error, 3 I/O or parse error, 4 a referee
property failed.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path
from typing import List, Optional

from . import experiments
from .bench import (
    SamplerSpec,
    SyntheticBenchmark,
    TabularParseError,
    export_tabular,
    load_tabular,
    materialize,
)
from .core import ContractError, DomainError
from .hyperband import (
    MODES,
    ConfigStream,
    HbParams,
    RunState,
    SamplerExhausted,
    StateLoadError,
    continue_stream,
    deepen,
    incumbent,
    load_state,
    run_hb,
    save_state,
)

EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_REFEREE = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- benchmarks ---------------------------------------------------------------

_SPEC_FIELDS = {f.name: f.type for f in fields(SamplerSpec)}


def parse_synthetic(text: str, seed: int) -> SamplerSpec:
    """``synthetic`` or ``synthetic:alpha=0.5,eps=0.05``; the run seed is the default spec seed."""
    kwargs = {"seed": seed}
    _, _, rest = text.partition(":")
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        key = key.strip()
        if not eq or key not in _SPEC_FIELDS:
            raise CliError(f"bad synthetic benchmark option {item!r}; known keys: {sorted(_SPEC_FIELDS)}", EXIT_ARGS)
        try:
            kwargs[key] = int(value) if key == "seed" else float(value)
        except ValueError:
            raise CliError(f"option {key} needs a number, got {value!r}", EXIT_ARGS) from None
    try:
        return SamplerSpec(**kwargs)
    except DomainError as exc:
        raise CliError(str(exc), EXIT_ARGS) from None


def make_oracle(benchmark: str, seed: int):
    """Oracle plus the sampler limit (``None`` for an unbounded synthetic pool)."""
    if benchmark == "synthetic" or benchmark.startswith("synthetic:"):
        return SyntheticBenchmark(parse_synthetic(benchmark, seed)), None
    try:
        table = load_tabular(Path(benchmark).resolve())
    except FileNotFoundError:
        raise CliError(f"benchmark {benchmark!r} is neither 'synthetic[:k=v,...]' nor an existing file", EXIT_IO) from None
    except TabularParseError as exc:
        raise CliError(f"{benchmark}: {exc}", EXIT_IO) from None
    oracle = table.oracle(seed)
    return oracle, oracle.size


def oracle_from_description(desc: Optional[dict]):
    if not desc:
        raise CliError("state file does not record its benchmark; cannot continue it", EXIT_IO)
    kind = desc.get("kind")
    if kind == "synthetic":
        spec = SamplerSpec(**{k: v for k, v in desc.items() if k in _SPEC_FIELDS})
        oracle = SyntheticBenchmark(spec)
        if desc.get("round_digits") is not None:
            oracle = experiments.RoundedOracle(oracle, desc["round_digits"])
        return oracle, None
    if kind == "tabular":
        try:
            table = load_tabular(desc["path"])
        except (OSError, TabularParseError) as exc:
            raise CliError(f"cannot reopen tabular benchmark: {exc}", EXIT_IO) from None
        oracle = table.oracle(desc["seed"])
        return oracle, oracle.size
    raise CliError(f"unknown benchmark kind {kind!r} in state file", EXIT_IO)


# -- io helpers ---------------------------------------------------------------


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def _state_path(out: str, state: RunState) -> Path:
    return Path(out) / f"state_t{state.t}_R{state.R}.json"


def _summary(state: RunState, path: Path) -> str:
    inc = incumbent(state)
    return (
        f"t={state.t} R={state.R} eta={state.eta} incumbent={inc.config} loss={inc.loss:.6g} "
        f"level={inc.level} budget={state.ledger.total} B={state.params.B} state={path}"
    )


# -- commands -----------------------------------------------------------------


def cmd_run(args) -> int:
    try:
        params = HbParams(args.R, args.eta)
    except DomainError as exc:
        raise CliError(str(exc), EXIT_ARGS) from None
    oracle, limit = make_oracle(args.benchmark, args.seed)
    try:
        state = run_hb(params, ConfigStream(args.seed, limit=limit), oracle)
    except SamplerExhausted as exc:
        raise CliError(f"benchmark too small: {exc}", EXIT_ARGS) from None
    except DomainError as exc:
        raise CliError(str(exc), EXIT_ARGS) from None
    path = _state_path(args.out, state)
    _write(path, save_state(state))
    print(_summary(state, path))
    return EXIT_OK


def cmd_deepen(args) -> int:
    try:
        text = Path(args.state).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {args.state}: {exc}", EXIT_IO) from None
    try:
        prev = load_state(text)
    except StateLoadError as exc:
        raise CliError(f"{args.state}: {exc}", EXIT_IO) from None
    oracle, limit = oracle_from_description(prev.benchmark)
    try:
        new = deepen(prev, args.mode, continue_stream(prev, limit), oracle)
    except (SamplerExhausted, ContractError, DomainError) as exc:
        raise CliError(f"cannot deepen: {exc}", EXIT_ARGS) from None
    path = _state_path(args.out, new)
    _write(path, save_state(new))
    reused = experiments.reused_evaluations(prev, new)
    saved = sum(
        it.level for b in new.brackets for it in b.iterations for c in it.losses if (c, it.level) in prev.cache
    )
    print(_summary(new, path))
    print(f"reused_evals={reused} saved_units={saved} deepen_budget={new.ledger.total - prev.ledger.total}")
    if args.mode == "e":
        bad = experiments.eid_monotone_violations(prev, new)
        print(f"monotone_promotion_audit={'pass' if not bad else 'fail'}")
        if bad:
            print(json.dumps(bad), file=sys.stderr)
            return EXIT_REFEREE
    return EXIT_OK


def _parse_modes(text: str) -> List[str]:
    modes = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in modes if m not in experiments.COMPARE_MODES]
    if bad or len(set(modes)) != len(modes):
        raise CliError(f"--modes must be distinct entries of {','.join(experiments.COMPARE_MODES)}, got {text!r}", EXIT_ARGS)
    return modes


def cmd_compare(args) -> int:
    modes = _parse_modes(args.modes)
    if args.seeds < 0:
        raise CliError("--seeds must be >= 0", EXIT_ARGS)
    spec = parse_synthetic(args.benchmark, 0)
    try:
        HbParams(args.R0, args.eta)
        rows = experiments.compare(
            list(range(args.seeds)), args.R0, args.eta, modes, args.replay == "on", spec, args.jobs
        )
    except (DomainError, ValueError) as exc:
        raise CliError(str(exc), EXIT_ARGS) from None
    out = Path(args.out)
    _write(out / "comparison.csv", experiments.rows_to_csv(rows))
    agg = experiments.aggregate(rows)
    if agg:
        table = experiments.aggregate_table(agg)
        _write(out / "aggregate.csv", table)
        sys.stdout.write(table)
    print(f"rows={len(rows)} csv={out / 'comparison.csv'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.runs < 1:
        raise CliError("--runs must be >= 1", EXIT_ARGS)
    checks = experiments.run_suite(args.suite, args.runs)
    for check in checks:
        print(json.dumps(check.as_dict(), sort_keys=True, default=str))
    return EXIT_REFEREE if any(c.status == experiments.FAIL for c in checks) else EXIT_OK


def cmd_gen_bench(args) -> int:
    if args.n < 0 or args.Rcap < 1:
        raise CliError("--n must be >= 0 and --Rcap >= 1", EXIT_ARGS)
    try:
        spec = SamplerSpec(alpha=args.alpha, eps=args.eps, seed=args.seed)
    except DomainError as exc:
        raise CliError(str(exc), EXIT_ARGS) from None
    table = materialize(spec, args.n, args.Rcap)
    try:
        export_tabular(table, args.out, force=args.force)
    except FileExistsError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from None
    print(f"wrote {args.n} configs x {args.Rcap} fidelities to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idhb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="fresh Hyperband run; writes a state file")
    p.add_argument("--benchmark", default="synthetic", help="'synthetic[:key=value,...]' or a tabular CSV path")
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--eta", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("deepen", help="continue a state file at eta times the max size")
    p.add_argument("--state", required=True)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_deepen)

    p = sub.add_parser("compare", help="restart baseline vs the deepening modes over seeds")
    p.add_argument("--R0", type=int, default=16)
    p.add_argument("--eta", type=int, default=2)
    p.add_argument("--seeds", type=int, default=30, help="number of seeds, run as 0..n-1")
    p.add_argument("--modes", default="ih,e,p,d")
    p.add_argument("--replay", choices=("on", "off"), default="on")
    p.add_argument("--benchmark", default="synthetic")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="run the referee suites")
    p.add_argument("--suite", choices=experiments.SUITES, default="default")
    p.add_argument("--runs", type=int, default=100)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen-bench", help="tabulate a synthetic family as CSV")
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--Rcap", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_gen_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"idhb {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
