import json
import sys
from pathlib import Path

import pytest
from openpyxl import load_workbook

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from coso.omniscience.service import Model, min_sum_rate, min_sum_rate_aco  # noqa: E402
from coso.par.service import psp  # noqa: E402
from coso.planner.export import export_plan_xlsx, export_psp_xlsx, plan_to_rows  # noqa: E402
from coso.planner.multistage import (  # noqa: E402
    UnknownPolicyError,
    multi_stage,
    multi_stage_aco,
    multi_stage_nco,
    nco_levels,
    parse_policy,
    refined_ordering,
    stage_partitions,
)
from coso.planner.schemas import InvalidPlanError, load_plan  # noqa: E402
from coso.planner.service import (  # noqa: E402
    BoundTypeError,
    InvalidSubsetError,
    UnknownVariantError,
    complimentary_oracle,
    detect_complimentary,
    is_complimentary_sufficient,
    lower_bound,
    two_stage,
)
from coso.planner.tree import export_tree, information_hierarchy, node_name  # noqa: E402
from coso.planner.validation import validate_plan  # noqa: E402
from coso.partitions.service import Partition, restrict_blocks  # noqa: E402
from tests.instances import (  # noqa: E402
    EXAMPLE1_ACO_COMPLIMENTARY,
    EXAMPLE1_NCO_COMPLIMENTARY,
    ORDER_42531,
    ORDER_45123,
    ORDER_51423,
    example1,
    independent,
    q,
    random_instances,
    rational_table,
)


def _rates(plan):
    return [stage.rates.as_tuple() for stage in plan.stages]


def test_lower_bounds():
    oracle = example1()
    assert lower_bound(oracle, variant="singleton") == q("23/4")
    assert lower_bound(oracle) == 6
    assert lower_bound(oracle, Model.NCO, variant="singleton") == 6
    assert lower_bound(oracle) <= min_sum_rate(oracle)


def test_complimentary_oracle_of_worked_example():
    oracle = example1()
    assert complimentary_oracle(oracle) == EXAMPLE1_ACO_COMPLIMENTARY
    assert complimentary_oracle(oracle, "nco") == EXAMPLE1_NCO_COMPLIMENTARY


def test_detection_at_the_lower_bounds():
    oracle = example1()
    assert detect_complimentary(oracle, "23/4") == {frozenset({4, 5})}
    assert detect_complimentary(oracle, 6) == {frozenset({1, 4}), frozenset({4, 5}), frozenset({1, 4, 5})}
    assert detect_complimentary(oracle, 6, method="truncation") == detect_complimentary(oracle, 6)


def test_sufficiency_by_truncation():
    oracle = example1()
    assert is_complimentary_sufficient(oracle, {1, 4, 5}, 6, method="truncation")
    assert not is_complimentary_sufficient(oracle, {1, 4, 5}, "23/4", method="truncation")
    assert not is_complimentary_sufficient(oracle, {1, 2, 3, 4}, 6, method="truncation")


def test_sufficiency_rejects_bad_inputs():
    oracle = example1()
    with pytest.raises(InvalidSubsetError):
        is_complimentary_sufficient(oracle, {1}, 6)
    with pytest.raises(InvalidSubsetError):
        is_complimentary_sufficient(oracle, {1, 2, 3, 4, 5}, 6)
    with pytest.raises(BoundTypeError):
        is_complimentary_sufficient(oracle, {4, 5}, "23/4", model="nco")


def test_two_stage_finds_the_first_pair():
    result = two_stage(example1(), ORDER_42531)
    assert result.found
    assert result.alpha_lb == q("23/4")
    assert result.subset == frozenset({4, 5})
    assert result.prefix == 2
    assert result.alpha_hat == 4
    assert result.rates.rates == {4: 2, 5: 0}

    nco = two_stage(example1(), ORDER_42531, model="nco")
    assert nco.alpha_lb == 6
    assert nco.subset == frozenset({4, 5})
    assert nco.alpha_hat == 4
    assert nco.rates.rates == {4: 2, 5: 0}


def test_two_stage_stops_at_a_triple():
    result = two_stage(example1(), ORDER_51423, alpha_lb="25/4")
    assert result.subset == frozenset({1, 4, 5})
    assert result.prefix == 3
    assert result.alpha_hat == 6
    assert result.rates.as_tuple() == (1, 2, 2)
    document = result.to_document().model_dump(mode="json")
    assert document["found"] is True
    assert document["alpha_hat"] == "6"


def test_two_stage_without_a_complimentary_subset():
    oracle = independent(3)
    result = two_stage(oracle)
    assert not result.found
    assert result.global_min_sum_rate == 3
    assert result.global_rates.rates == {1: 1, 2: 1, 3: 1}
    assert len(result.par_output.snapshots) == 3
    # ties count as complimentary even though the sweep never merges them
    assert complimentary_oracle(oracle) == {frozenset({1, 2}), frozenset({1, 3}), frozenset({2, 3})}


def test_two_stage_rejects_fractional_integer_bound():
    with pytest.raises(BoundTypeError):
        two_stage(example1(), ORDER_42531, model="nco", alpha_lb="23/4")


def test_multi_stage_asymptotic_with_explicit_recipient():
    plan = multi_stage_aco(example1(), ORDER_42531, policy=parse_policy("explicit:4"))
    assert _rates(plan) == [
        (0, 0, 0, 2, 0),
        (1, 0, 0, 4, 0),
        (1, q("1/2"), q("1/2"), q("9/2"), 0),
    ]
    assert [stage.alpha for stage in plan.stages] == [4, 6, q("13/2")]
    assert [stage.targets for stage in plan.stages] == [[[4, 5]], [[1, 4, 5]], [[1, 2, 3, 4, 5]]]
    assert plan.policy == "explicit:4"
    assert validate_plan(example1(), plan).ok


def test_multi_stage_asymptotic_min_rate():
    plan = multi_stage(example1(), "aco", ORDER_42531)
    assert _rates(plan) == [
        (0, 0, 0, 2, 0),
        (1, 0, 0, 2, 2),
        (q("3/2"), q("1/2"), q("1/2"), 2, 2),
    ]
    assert plan.final_rates.total == q("13/2")
    assert validate_plan(example1(), plan).ok
    assert stage_partitions(plan)[0] == Partition.of([[4, 5], [1], [2], [3]])


def test_nco_levels_and_refined_ordering():
    oracle = example1()
    levels = nco_levels(oracle, psp(oracle, ORDER_42531))
    assert [(level.alpha, level.subset) for level in levels] == [
        (4, frozenset({4, 5})),
        (6, frozenset({1, 4, 5})),
        (7, frozenset({1, 2, 3, 4, 5})),
    ]
    assert refined_ordering(levels) == [4, 5, 1, 2, 3]


def test_multi_stage_integer_rates():
    oracle = example1()
    plan = multi_stage_nco(oracle, ORDER_42531, policy="explicit:4")
    assert plan.alpha_tilde == [4, 6, 7]
    assert plan.refined_ordering == [4, 5, 1, 2, 3]
    assert plan.reused_first_run is False
    assert plan.ordering == list(ORDER_42531)
    assert _rates(plan) == [(0, 0, 0, 2, 0), (1, 0, 0, 4, 0), (1, 1, 0, 5, 0)]
    report = validate_plan(oracle, plan)
    assert report.ok
    assert report.item("integrality").passed

    fair = multi_stage_nco(oracle, ORDER_42531)
    assert fair.final_rates.as_tuple() == (2, 1, 0, 2, 2)


def test_reused_first_run_still_records_the_refined_ordering():
    oracle = example1()
    plan = multi_stage_nco(oracle, ORDER_45123)
    assert plan.reused_first_run is True
    assert plan.ordering == list(ORDER_45123)
    assert plan.refined_ordering == [4, 5, 1, 2, 3]
    assert plan.alpha_tilde == [4, 6, 7]
    assert validate_plan(oracle, plan).ok


def test_nco_levels_on_a_fractional_source():
    oracle = rational_table()
    levels = nco_levels(oracle, psp(oracle))
    assert [(level.alpha, level.subset) for level in levels] == [
        (2, frozenset({1, 2})),
        (3, frozenset({1, 2, 3})),
    ]


def test_explicit_policy_falls_back_to_min_rate():
    plan = multi_stage_aco(example1(), ORDER_42531, policy="explicit:2")
    assert plan.stages[1].rates.as_tuple() == (1, 0, 0, 2, 2)


@pytest.mark.parametrize("text", ["fastest", "explicit", "random:x", "min-rate:3"])
def test_bad_policies(text):
    with pytest.raises(UnknownPolicyError):
        parse_policy(text)


def test_plan_round_trip_and_tampering():
    oracle = example1()
    plan = multi_stage_aco(oracle, ORDER_42531)
    text = plan.model_dump_json()
    again = load_plan(text)
    assert again.model_dump() == plan.model_dump()

    document = json.loads(text)
    document["stages"][2]["cumulative_rates"]["4"] = "1"
    report = validate_plan(oracle, load_plan(document))
    assert not report.ok
    assert not report.item("optimality").passed
    assert not report.item("monotonicity").passed


def test_plan_targets_must_cover_users():
    with pytest.raises(InvalidPlanError):
        load_plan({"model": "aco", "ordering": [1, 2], "stages": [{"index": 1, "alpha": "1", "targets": [[1]],
                                                                   "cumulative_rates": {"1": "0", "2": "0"}}]})
    with pytest.raises(InvalidPlanError):
        load_plan("{not json")


def test_plan_for_other_users_fails_validation():
    plan = multi_stage_aco(rational_table())
    report = validate_plan(example1(), plan)
    assert not report.ok
    assert report.failures()[0].name == "chain"


def test_information_hierarchy_and_tree():
    oracle = example1()
    events = information_hierarchy(psp(oracle))
    assert [(e.alpha, e.merged) for e in events] == [(4, [4, 5]), (6, [1, 4, 5]), (q("13/2"), [1, 2, 3, 4, 5])]
    assert events[1].parts == [[1], [4, 5]]

    tree = export_tree(multi_stage_aco(oracle, ORDER_42531))
    assert tree.root == "s12345"
    names = {node.name for node in tree.nodes}
    assert {"u4", "s45", "s145"} <= names
    dot = tree.to_dot()
    assert '"u4" -> "s45"' in dot
    assert '"s45" -> "s145"' in dot
    assert tree.to_text().startswith("s12345")
    assert node_name(["a", "bc"]) == "sa_bc"


def test_xlsx_exports(tmp_path):
    oracle = example1()
    plan = multi_stage_nco(oracle, ORDER_42531)
    assert plan_to_rows(plan)[2][:4] == [3, "7", "[1,2,3,4,5]", "7"]

    path = export_plan_xlsx(plan, tmp_path / "out" / "plan.xlsx")
    workbook = load_workbook(path)
    assert workbook.sheetnames == ["Stages", "Provenance"]
    assert workbook["Stages"]["A1"].value == "Stage"
    assert workbook["Stages"].max_row == 4

    chain_path = export_psp_xlsx(psp(oracle), tmp_path / "psp.xlsx")
    merges = load_workbook(chain_path)["Merges"]
    assert merges.max_row == 4
    assert merges["A4"].value == "13/2"


def test_detection_is_sound_and_monotone():
    for oracle in random_instances(100, seed=5, max_users=6):
        value, _ = min_sum_rate_aco(oracle)
        known = complimentary_oracle(oracle)
        singleton = lower_bound(oracle, variant="singleton")
        previous = set()
        for alpha_lb in sorted({singleton, lower_bound(oracle), value}):
            found = detect_complimentary(oracle, alpha_lb)
            assert found <= known
            assert previous <= found
            assert found == detect_complimentary(oracle, alpha_lb, method="truncation")
            previous = found
        if not detect_complimentary(oracle, singleton):
            assert not known


def test_two_stage_switch_point_matches_closed_form():
    for oracle in random_instances(100, seed=9, max_users=6):
        result = two_stage(oracle)
        if not result.found:
            continue
        local, _ = min_sum_rate_aco(oracle, result.subset)
        assert result.alpha_hat == oracle.full_entropy - oracle.entropy(result.subset) + local
        assert result.rates.total == result.alpha_hat - oracle.full_entropy + oracle.entropy(result.subset)


def test_random_plans_validate():
    for oracle in random_instances(100, seed=13, max_users=6):
        for model in ("aco", "nco"):
            plan = multi_stage(oracle, model)
            report = validate_plan(oracle, plan)
            assert report.ok, [item.detail for item in report.failures()]
            if model == "nco":
                assert plan.final_rates.is_integral


def test_integer_detection_is_sound_and_monotone():
    for oracle in random_instances(100, seed=31, max_users=6):
        target = min_sum_rate(oracle, None, Model.NCO)
        known = complimentary_oracle(oracle, Model.NCO)
        singleton = lower_bound(oracle, Model.NCO, variant="singleton")
        previous = set()
        for alpha_lb in sorted({singleton, lower_bound(oracle, Model.NCO), target}):
            found = detect_complimentary(oracle, alpha_lb, Model.NCO)
            assert found <= known
            assert previous <= found
            previous = found
        if not detect_complimentary(oracle, singleton, Model.NCO):
            assert not known


def test_asymptotic_complimentary_subsets_stay_complimentary_with_integer_rates():
    for oracle in random_instances(100, seed=37, max_users=6):
        assert complimentary_oracle(oracle, Model.ACO) <= complimentary_oracle(oracle, Model.NCO)


def test_merged_blocks_gain_rate_at_every_later_stage():
    for oracle in random_instances(100, seed=41, max_users=6):
        plan = multi_stage_aco(oracle)
        partitions = stage_partitions(plan)
        for k in range(1, len(plan.stages)):
            before, after = plan.stages[k - 1].rates, plan.stages[k].rates
            for target in plan.stages[k].target_sets:
                if target in partitions[k - 1].blocks:
                    continue
                for part in restrict_blocks(target, partitions[k - 1]):
                    if len(part) > 1:
                        assert sum(after[u] - before[u] for u in part) > 0


def test_unknown_variant_and_method():
    oracle = example1()
    with pytest.raises(UnknownVariantError):
        lower_bound(oracle, variant="loose")
    with pytest.raises(UnknownVariantError):
        detect_complimentary(oracle, 6, method="lp")
