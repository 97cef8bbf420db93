"""Command-line front end: ``coso <subcommand> ...``.

Documents go to stdout (one per run in json mode), logs and errors to stderr.
Exit status: 0 on success, 1 on a domain error, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO

from coso.common.config import get_settings
from coso.common.errors import CosoError
from coso.common.ids import UserId, format_subset_key, normalize_user_id, parse_id_list, sorted_users
from coso.common.rationals import format_decimal, format_rational, lcm_of_denominators, parse_rational
from coso.common.schemas import CosoModel
from coso.entropy.service import EntropyOracle, load_instance_file
from coso.omniscience.schemas import MinRateDocument, RegionDocument
from coso.omniscience.service import (
    Model,
    RateVector,
    co_region_violations,
    min_sum_rate,
    min_sum_rate_aco,
    optimal_rate_vector,
)
from coso.par.schemas import par_document, psp_document
from coso.par.service import extract_psp, par
from coso.planner.export import export_plan_xlsx, export_psp_xlsx
from coso.planner.multistage import RecipientPolicy, UnknownPolicyError, multi_stage, parse_policy
from coso.planner.schemas import ComplimentaryDocument, SoPlan, TwoStageDocument, ValidationReport, load_plan
from coso.planner.service import complimentary_oracle, detect_complimentary, sort_subsets, two_stage
from coso.planner.tree import export_tree, information_hierarchy
from coso.planner.validation import validate_plan
from coso.sim.schemas import RecursiveTrace, SimReport
from coso.sim.service import CODINGS, instantiate, recursive_two_stage, simulate_plan

logger = logging.getLogger(__name__)

FORMATS = ("human", "json")


class UsageError(Exception):
    """A flag that parses but does not fit the instance or the other flags."""


def _configure_logging(verbosity: int) -> None:
    if verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = logging.INFO
    else:
        level = getattr(logging, get_settings().log_level.upper(), logging.WARNING)
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _rational_arg(text: str):
    try:
        return parse_rational(text)
    except CosoError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _id_list_arg(text: str) -> list[UserId]:
    try:
        return parse_id_list(text)
    except CosoError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _emit(out: TextIO, args: argparse.Namespace, document: CosoModel, human: str) -> None:
    if args.format == "json":
        out.write(document.model_dump_json(indent=2) + "\n")
    else:
        out.write(human if human.endswith("\n") else human + "\n")


def _load(args: argparse.Namespace) -> EntropyOracle:
    return load_instance_file(Path(args.instance))


def _ordering(args: argparse.Namespace, oracle: EntropyOracle) -> Optional[list[UserId]]:
    if args.ordering is None:
        return None
    if len(args.ordering) != len(oracle.ground_set) or set(args.ordering) != oracle.members:
        raise UsageError(f"--ordering {args.ordering} is not a permutation of {list(oracle.ground_set)}")
    return args.ordering


def _alpha_lb(args: argparse.Namespace):
    if args.alpha_lb is not None and args.model is Model.NCO and args.alpha_lb.denominator != 1:
        raise UsageError(f"--alpha-lb must be an integer for the nco model, got {format_rational(args.alpha_lb)}")
    return args.alpha_lb


def _policy(args: argparse.Namespace, oracle: EntropyOracle) -> RecipientPolicy:
    try:
        policy = parse_policy(args.policy, seed=args.seed)
    except UnknownPolicyError as exc:
        raise UsageError(str(exc)) from exc
    stray = [u for u in policy.recipients if u not in oracle.members]
    if stray:
        raise UsageError(f"--policy names users {stray} outside {list(oracle.ground_set)}")
    return policy


def _rates_text(rates: RateVector) -> str:
    return " ".join(f"r_{u}={format_decimal(rates[u])}" for u in rates)


def _partition_text(blocks) -> str:
    return " ".join(format_subset_key(b) for b in blocks)


def cmd_psp(args: argparse.Namespace, out: TextIO) -> None:
    oracle = _load(args)
    output = par(oracle, _ordering(args, oracle))
    chain = extract_psp(output)
    if args.xlsx:
        export_psp_xlsx(chain, Path(args.xlsx))
    document = par_document(output, chain) if args.profile else psp_document(chain)

    lines = [
        f"H(V) = {format_decimal(chain.full_entropy)}",
        "critical points: " + ", ".join(format_decimal(a) for a in chain.critical_points),
    ]
    for j in range(chain.p, -1, -1):
        blocks = _partition_text(chain.partition(j).ordered())
        lines.append(f"  P^({j}) = {blocks}   α^({j}) = {format_decimal(chain.alpha(j))}")
    for event in information_hierarchy(chain):
        parts = _partition_text(event.parts)
        lines.append(f"  merge at α={format_decimal(event.alpha)}: {parts} -> {format_subset_key(event.merged)}")
    lines.append(f"R_ACO(V) = {format_decimal(chain.min_sum_rate)}")
    _emit(out, args, document, "\n".join(lines))


def cmd_minrate(args: argparse.Namespace, out: TextIO) -> None:
    oracle = _load(args)
    subset = frozenset(args.subset) if args.subset else oracle.members
    value = min_sum_rate(oracle, subset, args.model, args.method)
    _, partition = min_sum_rate_aco(oracle, subset, args.method)
    rates = optimal_rate_vector(oracle, subset, args.model, _ordering(args, oracle))
    document = MinRateDocument(
        model=args.model,
        method=args.method,
        subset=sorted_users(subset),
        min_sum_rate=value,
        fundamental_partition=partition.as_lists(),
        optimal_rates=dict(rates.rates),
    )
    name = "R_NCO" if args.model is Model.NCO else "R_ACO"
    human = "\n".join(
        [
            f"{name}({format_subset_key(subset)}) = {format_decimal(value)}",
            f"fundamental partition: {_partition_text(partition.ordered())}",
            f"optimal rates: {_rates_text(rates)}",
        ]
    )
    _emit(out, args, document, human)


def _parse_rates(text: str, carrier: Sequence[UserId]) -> dict[UserId, object]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    keyed = ["=" in p for p in parts]
    try:
        if parts and all(keyed):
            return {normalize_user_id(k): parse_rational(v) for k, v in (p.split("=", 1) for p in parts)}
        if any(keyed):
            raise UsageError("rates must be all positional or all user=value")
        if len(parts) != len(carrier):
            raise UsageError(f"{len(parts)} rates given for {len(carrier)} users {list(carrier)}")
        return {u: parse_rational(v) for u, v in zip(carrier, parts)}
    except CosoError as exc:
        raise UsageError(str(exc)) from exc


def cmd_region_check(args: argparse.Namespace, out: TextIO) -> None:
    oracle = _load(args)
    subset = oracle.check_subset(args.subset) if args.subset else oracle.members
    carrier = [u for u in oracle.ground_set if u in subset]
    rates = RateVector.of(_parse_rates(args.rates, carrier))
    violated = co_region_violations(oracle, subset, rates)
    document = RegionDocument(
        subset=carrier,
        rates=dict(rates.rates),
        sum_rate=rates.total,
        in_region=not violated,
        violated=[sorted_users(c) for c in sort_subsets(violated)],
    )
    lines = [f"{_rates_text(rates)} (sum {format_decimal(rates.total)})"]
    if violated:
        lines.append("outside the CO region; r(C) < H(X) - H(X\\C) for " + _partition_text(sort_subsets(violated)))
    else:
        lines.append(f"inside the CO region of {format_subset_key(subset)}")
    _emit(out, args, document, "\n".join(lines))


def cmd_two_stage(args: argparse.Namespace, out: TextIO) -> None:
    oracle = _load(args)
    result = two_stage(oracle, _ordering(args, oracle), args.model, _alpha_lb(args))
    document: TwoStageDocument = result.to_document()
    if result.found:
        human = (
            f"complimentary subset C={format_subset_key(result.subset)} at prefix {result.prefix} "
            f"(α̲={format_decimal(result.alpha_lb)})\n"
            f"α̂ = {format_decimal(result.alpha_hat)}; {_rates_text(result.rates)}"
        )
    else:
        human = (
            f"no complimentary subset at α̲={format_decimal(result.alpha_lb)}; "
            f"global {result.model.value} rate {format_decimal(result.global_min_sum_rate)}\n"
            f"{_rates_text(result.global_rates)}"
        )
    _emit(out, args, document, human)


def _plan_text(plan: SoPlan) -> str:
    lines = [f"{plan.model.value} plan, policy {plan.policy}, ordering {plan.ordering}"]
    if plan.refined_ordering:
        lines.append(f"refined ordering {plan.refined_ordering}")
    for stage in plan.stages:
        lines.append(
            f"stage {stage.index} at α={format_decimal(stage.alpha)}: {_partition_text(stage.target_sets)}   "
            f"{stage.rates}"
        )
    lines.append(f"sum-rate {format_decimal(plan.final_rates.total)}")
    return "\n".join(lines)


def cmd_multi_stage(args: argparse.Namespace, out: TextIO) -> None:
    oracle = _load(args)
    plan = multi_stage(oracle, args.model, _ordering(args, oracle), _policy(args, oracle))
    if args.output:
        path = Path(args.output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(plan.model_dump_json(indent=2) + "\n", encoding="utf-8")
    if args.xlsx:
        export_plan_xlsx(plan, Path(args.xlsx))
    _emit(out, args, plan, _plan_text(plan))


def cmd_complimentary(args: argparse.Namespace, out: TextIO) -> None:
    oracle = _load(args)
    alpha_lb = _alpha_lb(args)
    if alpha_lb is None:
        found, method = complimentary_oracle(oracle, args.model), "oracle"
    else:
        found, method = detect_complimentary(oracle, alpha_lb, args.model, args.method), args.method
    subsets = sort_subsets(found)
    document = ComplimentaryDocument(
        model=args.model, method=method, alpha_lb=alpha_lb, subsets=[sorted_users(s) for s in subsets]
    )
    head = f"{len(subsets)} complimentary subsets ({args.model.value}, {method})"
    _emit(out, args, document, "\n".join([head, *(f"  {format_subset_key(s)}" for s in subsets)]))


def cmd_validate(args: argparse.Namespace, out: TextIO) -> Optional[int]:
    oracle = _load(args)
    plan = load_plan(Path(args.plan))
    report: ValidationReport = validate_plan(oracle, plan)
    lines = [
        f"{'PASS' if item.passed else 'FAIL'} {item.name}" + (f": {item.detail}" if item.detail else "")
        for item in report.items
    ]
    _emit(out, args, report, "\n".join(lines))
    if args.strict and not report.ok:
        return 1
    return None


def _recursive_block(oracle: EntropyOracle, model: Model) -> int:
    if model is Model.NCO:
        return 1
    return lcm_of_denominators(optimal_rate_vector(oracle, None, model).rates.values())


def cmd_simulate(args: argparse.Namespace, out: TextIO) -> None:
    oracle = _load(args)
    if args.recursive:
        block = args.block or _recursive_block(oracle, args.model)
        trace: RecursiveTrace
        trace, _ = recursive_two_stage(instantiate(oracle, block), args.model, args.coding, args.seed)
        lines = [
            f"round {r.round}: {'fused' if r.found else 'global'} {format_subset_key(r.subset)} "
            f"with {r.transmissions} packets, nodes now {r.users_after}"
            for r in trace.rounds
        ]
        lines.append(f"{trace.total_transmissions} packets at n={block}, omniscient={trace.omniscient}")
        _emit(out, args, trace, "\n".join(lines))
        return

    if args.plan is None:
        raise UsageError("simulate needs a PLAN unless --recursive is given")
    plan = load_plan(Path(args.plan))
    block = args.block or lcm_of_denominators(
        rate for stage in plan.stages for rate in stage.cumulative_rates.values()
    )
    report: SimReport = simulate_plan(
        instantiate(oracle, block), plan, args.coding, args.seed, keep_transcript=args.transcript
    )
    lines = [
        f"stage {s.index}: {s.rows_sent} packets from {s.senders}, decoded={s.decoded} (attempts {s.attempts})"
        for s in report.stages
    ]
    lines.append(
        f"{report.total_transmissions} packets at n={block} over GF({report.field}); "
        f"planned {format_rational(report.expected_transmissions)}"
    )
    _emit(out, args, report, "\n".join(lines))
    report.raise_for_failure()


def cmd_export_tree(args: argparse.Namespace, out: TextIO) -> None:
    tree = export_tree(load_plan(Path(args.plan)))
    if args.format == "dot":
        out.write(tree.to_dot())
        return
    _emit(out, args, tree, tree.to_text())


def _add_model(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", type=Model, choices=list(Model), default=Model.ACO, metavar="{aco,nco}")


def _add_ordering(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ordering", type=_id_list_arg, help="user ordering for PAR, e.g. 4,5,2,3,1")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logs")

    parser = argparse.ArgumentParser(prog="coso", description="Communication for omniscience and successive omniscience")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, handler, help_text: str, formats=FORMATS) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, parents=[common], help=help_text)
        cmd.add_argument("--format", choices=formats, default="human")
        cmd.set_defaults(handler=handler)
        return cmd

    cmd = command("psp", cmd_psp, "principal sequence of partitions")
    cmd.add_argument("instance")
    _add_ordering(cmd)
    cmd.add_argument("--profile", action="store_true", help="emit the full PAR rate profile in json mode")
    cmd.add_argument("--xlsx", help="also write the PSP to this workbook")

    cmd = command("minrate", cmd_minrate, "minimum sum-rate and an optimal rate vector")
    cmd.add_argument("instance")
    _add_model(cmd)
    _add_ordering(cmd)
    cmd.add_argument("--subset", type=_id_list_arg, help="carrier X (default: all users)")
    cmd.add_argument("--method", choices=("psp", "bruteforce"), default="psp")

    cmd = command("region-check", cmd_region_check, "test a rate vector against the CO region")
    cmd.add_argument("instance")
    cmd.add_argument("rates", help='rates in ground-set order ("1,1/2,0") or keyed ("4=2,5=0")')
    cmd.add_argument("--subset", type=_id_list_arg, help="carrier X (default: all users)")

    cmd = command("two-stage", cmd_two_stage, "find a complimentary subset and its optimal rates")
    cmd.add_argument("instance")
    _add_model(cmd)
    _add_ordering(cmd)
    cmd.add_argument("--alpha-lb", type=_rational_arg, help="lower bound on R(V), p/q")

    cmd = command("multi-stage", cmd_multi_stage, "plan successive omniscience over the PSP")
    cmd.add_argument("instance")
    _add_model(cmd)
    _add_ordering(cmd)
    cmd.add_argument("--policy", default="min-rate", help="min-rate, smallest-index, explicit:IDS or random[:SEED]")
    cmd.add_argument("--seed", type=int, default=0, help="seed for the random policy")
    cmd.add_argument("-o", "--output", help="also write the plan json to this path")
    cmd.add_argument("--xlsx", help="also write the plan to this workbook")

    cmd = command("complimentary", cmd_complimentary, "list complimentary subsets")
    cmd.add_argument("instance")
    _add_model(cmd)
    cmd.add_argument("--alpha-lb", type=_rational_arg, help="use the sufficient test at this bound")
    cmd.add_argument("--method", choices=("identity", "truncation"), default="identity")

    cmd = command("validate", cmd_validate, "check a plan against an instance")
    cmd.add_argument("instance")
    cmd.add_argument("plan")
    cmd.add_argument("--strict", action="store_true", help="exit 1 when any check fails")

    cmd = command("simulate", cmd_simulate, "run a plan (or the recursive two-stage scheme) on packets")
    cmd.add_argument("instance")
    cmd.add_argument("plan", nargs="?")
    _add_model(cmd)
    cmd.add_argument("--block", type=_positive_int, help="block length n (default: clears rate denominators)")
    cmd.add_argument("--coding", choices=CODINGS, default="deterministic")
    cmd.add_argument("--seed", type=int, default=0)
    cmd.add_argument("--recursive", action="store_true", help="fuse complimentary subsets round by round")
    cmd.add_argument("--transcript", action="store_true", help="include every transmitted row")

    cmd = command("export-tree", cmd_export_tree, "render a plan as a super-user tree", formats=(*FORMATS, "dot"))
    cmd.add_argument("plan")

    return parser


def run(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    _configure_logging(args.verbose)
    try:
        status = args.handler(args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"coso {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except CosoError as exc:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return status or 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
