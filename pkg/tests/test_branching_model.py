import json

import numpy as np
import pytest

from branchenv.model import (
    BranchingModel,
    OffspringLaw,
    ScheduleEntry,
    TailPolicy,
    dump_model,
    load_model,
    mean_matrices,
    mean_matrix,
    model_from_dict,
    model_to_dict,
)
from branchenv.model.branching_model import unique_laws
from branchenv.tools.errors import DomainError, ModelValidationError


@pytest.fixture
def law_a():
    return OffspringLaw.scalar({0: 0.5, 2: 0.5})


@pytest.fixture
def law_b():
    return OffspringLaw.scalar({0: 0.5, 3: 0.5})


@pytest.fixture
def switching_model(law_a, law_b):
    """
    Fixture to provide a model that uses law_a for n < 3 and law_b afterwards.
    """
    return BranchingModel(
        d=1,
        schedule=(ScheduleEntry(0, (law_a,)), ScheduleEntry(3, (law_b,))),
        name="switch",
    )


@pytest.fixture
def two_type_periodic():
    """
    Fixture to provide a period-2 two-type model.
    """
    even = (
        OffspringLaw.from_pairs([((0, 0), 0.5), ((2, 1), 0.3), ((1, 2), 0.2)]),
        OffspringLaw.from_pairs([((0, 0), 0.4), ((2, 2), 0.6)]),
    )
    odd = (
        OffspringLaw.from_pairs([((0, 0), 0.6), ((2, 2), 0.4)]),
        OffspringLaw.from_pairs([((0, 0), 0.5), ((1, 2), 0.25), ((2, 1), 0.25)]),
    )
    return BranchingModel.periodic([even, odd], name="period2")


def test_schedule_lookup(switching_model, law_a, law_b):
    """
    Test which law governs each generation under repeat_last.
    """
    assert [switching_model.law(n, 0) for n in range(6)] == [law_a] * 3 + [law_b] * 3
    assert switching_model.law(10**9, 0) == law_b
    assert switching_model.distinct_span() == 4
    assert switching_model.tail_start() == 3
    assert switching_model.tail_length() == 1
    with pytest.raises(DomainError):
        switching_model.laws_at(-1)
    with pytest.raises(DomainError):
        switching_model.law(0, 1)


def test_periodic_lookup(two_type_periodic):
    """
    Test the periodic tail and the mean matrices.
    """
    assert two_type_periodic.laws_at(5) == two_type_periodic.laws_at(1)
    assert two_type_periodic.laws_at(4) == two_type_periodic.laws_at(0)
    assert two_type_periodic.distinct_span() == 2
    assert two_type_periodic.tail_start() == 0
    assert two_type_periodic.tail_length() == 2

    A0 = mean_matrix(two_type_periodic, 0)
    assert A0 == pytest.approx(np.array([[0.8, 0.7], [1.2, 1.2]]))
    stack = mean_matrices(two_type_periodic, 0, 4)
    assert stack.shape == (4, 2, 2)
    assert np.array_equal(stack[2], A0)
    assert mean_matrices(two_type_periodic, 3, 3).shape == (0, 2, 2)


def test_schedule_validation(law_a):
    """
    Test the structural checks on schedules and tails.
    """
    with pytest.raises(ModelValidationError, match="first schedule start"):
        BranchingModel(1, (ScheduleEntry(1, (law_a,)),))
    with pytest.raises(ModelValidationError, match="strictly increasing"):
        BranchingModel(1, (ScheduleEntry(0, (law_a,)), ScheduleEntry(0, (law_a,))))
    with pytest.raises(ModelValidationError, match="expected 2"):
        BranchingModel(2, (ScheduleEntry(0, (law_a,)),))
    with pytest.raises(ModelValidationError):
        TailPolicy("cyclic")
    with pytest.raises(ModelValidationError):
        TailPolicy("periodic", 0)


def test_apply_pgf(two_type_periodic):
    """
    Test the stacked componentwise pgf application.
    """
    s = np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]])
    values = two_type_periodic.apply_pgf(0, s)
    assert values.shape == (3, 2)
    assert values[0] == pytest.approx([0.5, 0.4])
    assert values[1] == pytest.approx([1.0, 1.0])
    complement = two_type_periodic.apply_complement(0, 1.0 - s)
    assert complement == pytest.approx(1.0 - values)


def test_permute_types(two_type_periodic):
    """
    Test that relabelling types permutes the mean matrices.
    """
    swapped = two_type_periodic.permute_types([1, 0])
    for n in range(2):
        A = two_type_periodic.mean_matrix(n)
        assert swapped.mean_matrix(n) == pytest.approx(A[::-1, ::-1])
    with pytest.raises(DomainError):
        two_type_periodic.permute_types([0, 0])


def test_unique_laws(switching_model, two_type_periodic):
    """
    Test that only the first occurrence of each schedule entry is listed.
    """
    assert [n for n, _, _ in unique_laws(switching_model, 100)] == [0, 3]
    assert [(n, j) for n, j, _ in unique_laws(two_type_periodic, 100)] == [
        (0, 0),
        (0, 1),
        (1, 0),
        (1, 1),
    ]
    assert len(unique_laws(switching_model, 2)) == 1


def test_model_file_roundtrip(tmp_path, two_type_periodic):
    """
    Test writing and reading a model file.
    """
    path = dump_model(two_type_periodic, tmp_path / "model.json")
    loaded = load_model(path)
    assert loaded.name == "period2"
    assert loaded.tail == two_type_periodic.tail
    for n in range(2):
        assert loaded.laws_at(n) == two_type_periodic.laws_at(n)
    assert model_to_dict(loaded) == model_to_dict(two_type_periodic)


def test_model_file_provenance_is_ignored(tmp_path, law_a):
    """
    Test that a provenance block written with the model does not affect loading.
    """
    model = BranchingModel.constant([law_a], name="crit")
    path = dump_model(model, tmp_path / "crit.json", meta={"tool": "branchenv"})
    assert json.loads(path.read_text())["provenance"] == {"tool": "branchenv"}
    assert load_model(path).laws_at(0) == (law_a,)


def test_model_name_defaults_to_file_stem(tmp_path):
    """
    Test that unnamed model files take the file name.
    """
    path = tmp_path / "critical.json"
    path.write_text(
        json.dumps(
            {
                "d": 1,
                "schedule": [
                    {"start": 0, "laws": [[{"offspring": [0], "p": 0.5}, {"offspring": [2], "p": 0.5}]]}
                ],
                "tail": {"mode": "repeat_last"},
            }
        )
    )
    assert load_model(path).name == "critical"


@pytest.mark.parametrize(
    "document, message",
    [
        ({"d": 1, "schedule": [], "tail": {"mode": "repeat_last"}, "extra": 1}, "unknown field"),
        ({"d": 1, "tail": {"mode": "repeat_last"}}, "missing field"),
        (
            {
                "d": 1,
                "schedule": [{"start": 0, "laws": [[{"offspring": [0], "p": 0.5}, {"offspring": [2], "p": 0.4}]]}],
                "tail": {"mode": "repeat_last"},
            },
            "pmf mass 0.9 ≠ 1",
        ),
        (
            {
                "d": 1,
                "schedule": [{"start": 0, "laws": [[{"offspring": [0], "p": 1.0, "q": 0}]]}],
                "tail": {"mode": "repeat_last"},
            },
            "unknown field",
        ),
        (
            {
                "d": 1,
                "schedule": [{"start": 0, "laws": [[{"offspring": [0.5], "p": 1.0}]]}],
                "tail": {"mode": "repeat_last"},
            },
            "list of integers",
        ),
    ],
)
def test_model_from_dict_rejects(document, message):
    """
    Test the strict model-file parser.
    """
    with pytest.raises(ModelValidationError, match=message):
        model_from_dict(document)


def test_load_model_errors(tmp_path):
    """
    Test missing and malformed model files.
    """
    with pytest.raises(ModelValidationError, match="not found"):
        load_model(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ModelValidationError, match="malformed JSON"):
        load_model(bad)


def test_periodic_tail_after_transient(law_a, law_b):
    """
    Test a periodic tail that starts after a transient prefix.
    """
    law_c = OffspringLaw.scalar({0: 0.25, 1: 0.75})
    model = BranchingModel(
        d=1,
        schedule=(
            ScheduleEntry(0, (law_c,)),
            ScheduleEntry(4, (law_a,)),
            ScheduleEntry(5, (law_b,)),
        ),
        tail=TailPolicy("periodic", 2),
    )
    assert model.tail_start() == 4
    assert model.distinct_span() == 6
    assert [model.law(n, 0) for n in range(8)] == [law_c] * 4 + [law_a, law_b, law_a, law_b]
    assert model.law(100, 0) == law_a
    assert model.law(101, 0) == law_b
    assert mean_matrices(model, 0, 8)[:, 0, 0].tolist() == [0.75] * 4 + [1.0, 1.5, 1.0, 1.5]
    assert [n for n, _, _ in unique_laws(model, 100)] == [0, 4, 5]

    # Test that the model file keeps the tail
    loaded = model_from_dict(model_to_dict(model))
    assert [loaded.law(n, 0) for n in range(10)] == [model.law(n, 0) for n in range(10)]
