import json
import sys
from fractions import Fraction
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from coso.common.cache import memo_size  # noqa: E402
from coso.common.errors import CosoError  # noqa: E402
from coso.entropy.schemas import SourceModel  # noqa: E402
from coso.entropy.service import (  # noqa: E402
    InvalidInstanceError,
    SubsetError,
    conditional_entropy,
    entropy,
    load_instance,
    load_instance_file,
    restrict,
    table_oracle,
    validate_oracle,
)
from tests.instances import DATA_DIR, example1  # noqa: E402


def test_bits_entropies_of_worked_example():
    oracle = example1()
    assert oracle.full_entropy == 10
    assert [oracle.entropy([u]) for u in range(1, 6)] == [5, 4, 4, 8, 6]
    assert oracle.entropy({4, 5}) == 8
    assert oracle.entropy({1, 4}) == 9
    assert oracle.entropy({1, 4, 5}) == 9
    assert oracle.entropy({1, 2, 3, 4}) == 10
    assert entropy(oracle, []) == 0


def test_conditional_entropy():
    oracle = example1()
    assert conditional_entropy(oracle, {2}, {1}) == 2
    assert conditional_entropy(oracle, {5}, {4}) == 0


def test_restrict_keeps_values_and_order():
    oracle = example1()
    sub = restrict(oracle, {5, 1, 4})
    assert sub.ground_set == (1, 4, 5)
    assert sub.full_entropy == 9
    assert sub.entropy({4, 5}) == oracle.entropy({4, 5})
    with pytest.raises(SubsetError):
        sub.entropy({2})


def test_subset_outside_ground_set_rejected():
    with pytest.raises(SubsetError):
        example1().entropy({1, 9})


def test_evaluations_are_memoized():
    oracle = example1()
    oracle.entropy({1, 2})
    oracle.entropy({1, 2})
    assert memo_size(oracle.source.namespace) == 1


def test_load_example_file():
    oracle = load_instance_file(DATA_DIR / "example1.json")
    assert oracle.model is SourceModel.BITS
    assert oracle.ground_set == (1, 2, 3, 4, 5)
    assert oracle.full_entropy == 10
    assert oracle.name == "example1"


def test_load_linear_file():
    oracle = load_instance_file(DATA_DIR / "linear4.json")
    assert oracle.model is SourceModel.LINEAR
    assert oracle.entropy({1}) == 2
    assert oracle.entropy({4}) == 1
    assert oracle.entropy({1, 2}) == 3
    assert oracle.entropy({1, 3}) == 4
    assert oracle.full_entropy == 4


def test_load_table_file():
    oracle = load_instance_file(DATA_DIR / "independent3.json")
    assert oracle.model is SourceModel.TABLE
    assert oracle.entropy({1, 3}) == 2
    assert validate_oracle(oracle).ok


def test_linear_identical_rows():
    oracle = load_instance(
        {"users": [1, 2, 3], "model": "linear", "linear": {"field": 2, "1": [[1, 1]], "2": [[1, 1]], "3": [[1, 1]]}}
    )
    assert all(oracle.entropy(s) == 1 for s in oracle.subsets(min_size=1))


def test_table_with_rational_entries():
    document = {
        "users": ["a", "b"],
        "model": "table",
        "table": {"[a]": "1/2", "[b]": "1/2", "[a,b]": "3/4"},
    }
    oracle = load_instance(json.dumps(document))
    assert oracle.ground_set == ("a", "b")
    assert oracle.full_entropy == Fraction(3, 4)


def test_zero_table_is_valid():
    oracle = table_oracle([1, 2], {frozenset({1}): 0, frozenset({2}): 0, frozenset({1, 2}): 0})
    report = validate_oracle(oracle)
    assert report.ok
    assert report.checked_subsets == 4


def test_monotonicity_violation_reported():
    oracle = table_oracle([1, 2], {frozenset({1}): 2, frozenset({2}): 2, frozenset({1, 2}): 1})
    report = validate_oracle(oracle)
    assert not report.ok
    assert "monotonicity" in {v.kind for v in report.violations}


def test_submodularity_violation_reported():
    oracle = table_oracle([1, 2], {frozenset({1}): 1, frozenset({2}): 1, frozenset({1, 2}): 3})
    kinds = {v.kind for v in validate_oracle(oracle).violations}
    assert kinds == {"submodularity"}


@pytest.mark.parametrize(
    "document",
    [
        {"users": [1, 2], "model": "table", "table": {"[1]": "1", "[1,2]": "1"}},
        {"users": [1, 2], "model": "table", "partial": True, "table": {"[1]": "1", "[2]": "1", "[1,2]": "1"}},
        {"users": [1, 2], "model": "table", "table": {"[1]": "x", "[2]": "1", "[1,2]": "1"}},
        {"users": [1], "model": "bits", "bits": {"1": ["a"]}},
        {"users": [1, 2], "model": "bits", "bits": {"1": ["a"]}},
        {"users": [1, 2], "model": "bits", "bits": {"1": ["a"], "2": ["b"], "3": ["c"]}},
        {"users": [1, 2], "model": "bits"},
        {"users": [1, 1], "model": "bits", "bits": {"1": ["a"]}},
        {"users": [1, 2], "model": "graph"},
        {"users": [1, 2], "model": "linear", "linear": {"field": 6, "1": [[1]], "2": [[1]]}},
        {"users": [1, 2], "model": "linear", "linear": {"field": 2, "1": [[1, 0]], "2": [[1]]}},
        {"users": [1, 2], "model": "linear", "linear": {"field": 2, "1": [[2]], "2": [[1]]}},
    ],
)
def test_malformed_instances_rejected(document):
    with pytest.raises(InvalidInstanceError):
        load_instance(document)


def test_unreadable_file_is_a_domain_error(tmp_path):
    with pytest.raises(CosoError):
        load_instance_file(tmp_path / "missing.json")
