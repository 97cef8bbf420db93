"""Report-only checks that a plan is an achievable, optimal SO."""

from __future__ import annotations

import logging
from fractions import Fraction

from coso.common.config import get_settings
from coso.common.ids import format_subset_key, sorted_users, subset_sort_key
from coso.entropy.service import EntropyOracle
from coso.omniscience.service import Model, co_region_violations, min_sum_rate
from coso.planner.schemas import SoPlan, ValidationItem, ValidationReport
from coso.planner.service import complimentary_oracle, is_complimentary_sufficient

logger = logging.getLogger(__name__)


def _chain(plan: SoPlan) -> ValidationItem:
    problems = []
    for prev, stage in zip(plan.stages, plan.stages[1:]):
        for target in prev.target_sets:
            if not any(target <= later for later in stage.target_sets):
                problems.append(f"stage {prev.index} target {format_subset_key(target)} not inside stage {stage.index}")
        if prev.target_sets == stage.target_sets:
            problems.append(f"stages {prev.index} and {stage.index} have the same targets")
    if plan.stages[-1].union != plan.users:
        problems.append(f"last stage covers {format_subset_key(plan.stages[-1].union)}, not V")
    return ValidationItem(name="chain", passed=not problems, detail="; ".join(problems))


def _complimentary(oracle: EntropyOracle, plan: SoPlan, total: Fraction) -> ValidationItem:
    proper = {t for stage in plan.stages for t in stage.target_sets if t != plan.users}
    if not proper:
        return ValidationItem(name="complimentary", passed=True, detail="no proper targets")
    if len(oracle.ground_set) <= get_settings().complimentary_bruteforce_limit:
        known = complimentary_oracle(oracle, plan.model)
        failing = [t for t in proper if t not in known]
        method = "exact"
    else:
        failing = [t for t in proper if not is_complimentary_sufficient(oracle, t, total, plan.model)]
        method = f"sufficiency at α̲={total}"
    detail = ", ".join(format_subset_key(t) for t in sorted(failing, key=subset_sort_key)) or method
    return ValidationItem(name="complimentary", passed=not failing, detail=detail)


def _local_omniscience(oracle: EntropyOracle, plan: SoPlan) -> ValidationItem:
    problems = []
    for stage in plan.stages:
        rates = stage.rates
        for target in stage.target_sets:
            bad = co_region_violations(oracle, target, rates.restricted(target))
            if bad:
                shown = ", ".join(format_subset_key(c) for c in bad[:3])
                problems.append(f"stage {stage.index} target {format_subset_key(target)}: r(C) too small for {shown}")
        idle = [u for u in plan.users - stage.union if rates[u] != 0]
        if idle:
            problems.append(f"stage {stage.index}: users {sorted_users(idle)} outside the targets transmit")
    return ValidationItem(name="local-omniscience", passed=not problems, detail="; ".join(problems))


def _monotonicity(plan: SoPlan) -> ValidationItem:
    problems = []
    for prev, stage in zip(plan.stages, plan.stages[1:]):
        dropped = [u for u in sorted_users(plan.users) if stage.rates[u] < prev.rates[u]]
        if dropped:
            problems.append(f"stage {stage.index} lowers the rates of {dropped}")
        for target in prev.target_sets:
            if stage.rates.sum(target) < prev.rates.sum(target):
                problems.append(f"stage {stage.index}: r({format_subset_key(target)}) decreases")
    return ValidationItem(name="monotonicity", passed=not problems, detail="; ".join(problems))


def _optimality(oracle: EntropyOracle, plan: SoPlan, total: Fraction) -> ValidationItem:
    final = plan.final_rates
    problems = []
    if final.total != total:
        problems.append(f"sum-rate {final.total} != minimum {total}")
    if co_region_violations(oracle, None, final):
        problems.append("final vector outside the CO region")
    return ValidationItem(name="optimality", passed=not problems, detail="; ".join(problems))


def _integrality(plan: SoPlan) -> ValidationItem:
    fractional = [stage.index for stage in plan.stages if not stage.rates.is_integral]
    detail = f"fractional rates at stages {fractional}" if fractional else ""
    return ValidationItem(name="integrality", passed=not fractional, detail=detail)


def validate_plan(oracle: EntropyOracle, plan: SoPlan) -> ValidationReport:
    """Itemized pass/fail for the achievability and optimality conditions; never raises on content."""
    if plan.users != oracle.members:
        report = ValidationReport(model=plan.model)
        report.items.append(
            ValidationItem(
                name="chain",
                passed=False,
                detail=f"plan users {sorted_users(plan.users)} differ from {list(oracle.ground_set)}",
            )
        )
        return report

    total = min_sum_rate(oracle, None, plan.model)
    report = ValidationReport(model=plan.model)
    report.items.append(_chain(plan))
    report.items.append(_complimentary(oracle, plan, total))
    report.items.append(_local_omniscience(oracle, plan))
    report.items.append(_monotonicity(plan))
    report.items.append(_optimality(oracle, plan, total))
    if plan.model is Model.NCO:
        report.items.append(_integrality(plan))
    if not report.ok:
        logger.warning("plan fails %s", ", ".join(item.name for item in report.failures()))
    return report
