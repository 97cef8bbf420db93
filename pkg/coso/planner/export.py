"""Tabular views of plans and PSPs, and their xlsx export."""

from pathlib import Path
from typing import Any, List

from coso.common.exporter import create_workbook, save_workbook
from coso.common.ids import format_subset_key, sorted_users
from coso.common.rationals import format_rational
from coso.par.service import Psp
from coso.planner.schemas import SoPlan
from coso.planner.tree import information_hierarchy


def plan_headers(plan: SoPlan) -> List[str]:
    return ["Stage", "Alpha", "Targets", "Sum rate"] + [f"r_{u}" for u in sorted_users(plan.users)]


def plan_to_rows(plan: SoPlan) -> List[List[Any]]:
    rows = []
    for stage in plan.stages:
        rates = stage.rates
        rows.append(
            [
                stage.index,
                format_rational(stage.alpha),
                " ".join(format_subset_key(t) for t in stage.target_sets),
                format_rational(rates.total),
            ]
            + [format_rational(rates[u]) for u in sorted_users(plan.users)]
        )
    return rows


def psp_to_rows(chain: Psp) -> List[List[Any]]:
    rows = []
    for j in range(chain.p, -1, -1):
        partition = chain.partition(j)
        rows.append([j, format_rational(chain.alpha(j)), " ".join(format_subset_key(b) for b in partition)])
    return rows


def export_plan_xlsx(plan: SoPlan, path: Path) -> Path:
    provenance = [
        ["model", plan.model.value],
        ["ordering", ",".join(str(u) for u in plan.ordering)],
        ["policy", plan.policy],
    ]
    if plan.refined_ordering:
        provenance.append(["refined ordering", ",".join(str(u) for u in plan.refined_ordering)])
    if plan.alpha_tilde:
        provenance.append(["integer alphas", ",".join(format_rational(a) for a in plan.alpha_tilde)])
    workbook = create_workbook(
        [
            ("Stages", plan_headers(plan), plan_to_rows(plan)),
            ("Provenance", ["Field", "Value"], provenance),
        ]
    )
    return save_workbook(workbook, path)


def export_psp_xlsx(chain: Psp, path: Path) -> Path:
    merges = [
        [format_rational(event.alpha), format_subset_key(event.merged), " ".join(format_subset_key(p) for p in event.parts)]
        for event in information_hierarchy(chain)
    ]
    workbook = create_workbook(
        [
            ("PSP", ["j", "Alpha", "Partition"], psp_to_rows(chain)),
            ("Merges", ["Alpha", "Merged block", "Parts"], merges),
        ]
    )
    return save_workbook(workbook, path)
