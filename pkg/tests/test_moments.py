import numpy as np
import pytest

from branchenv.model import (
    BranchingModel,
    OffspringLaw,
    covariance_sequence,
    mean_sequence,
    offspring_covariance,
)
from branchenv.model.skip import skip_window
from branchenv.tools.errors import DomainError


@pytest.fixture
def critical():
    return BranchingModel.constant([OffspringLaw.scalar({0: 0.5, 2: 0.5})], name="critical")


@pytest.fixture
def supercritical():
    return BranchingModel.constant([OffspringLaw.scalar({0: 0.5, 3: 0.5})], name="supercritical")


@pytest.fixture
def two_type():
    laws = (
        OffspringLaw.from_pairs([((0, 0), 0.5), ((2, 1), 0.3), ((1, 2), 0.2)]),
        OffspringLaw.from_pairs([((0, 0), 0.4), ((2, 2), 0.6)]),
    )
    return BranchingModel.constant(laws, name="two-type")


def enumerated_covariance(model, j, n):
    """Covariance of Z_n from the exact enumerated law of Z_n."""
    offspring, probs = skip_window(model, 0, n, cap=10**6)[j]
    x = offspring.astype(float)
    mean = probs @ x
    centered = x - mean
    return (centered * probs[:, None]).T @ centered


def test_offspring_covariance():
    """
    Test sigma^2 of a single law.
    """
    law = OffspringLaw.scalar({0: 0.5, 3: 0.5})
    assert offspring_covariance(law)[0, 0] == pytest.approx(2.25)


def test_mean_sequence(supercritical, two_type):
    """
    Test E Z_n = M_{0,n}^T Z_0.
    """
    means = mean_sequence(supercritical, [1], 5)
    assert means[:, 0] == pytest.approx(1.5 ** np.arange(6))

    A = two_type.mean_matrix(0)
    means = mean_sequence(two_type, [1, 2], 3)
    assert means[3] == pytest.approx(np.linalg.matrix_power(A.T, 3) @ np.array([1.0, 2.0]))

    with pytest.raises(DomainError):
        mean_sequence(two_type, [1], 3)


def test_covariance_closed_forms(critical, supercritical):
    """
    Test the recursion against the single-type closed forms.
    """
    # Test Var Z_n = n for critical binary splitting
    D = covariance_sequence(critical, 0, 6)
    assert [float(m[0, 0]) for m in D] == pytest.approx(list(range(7)))

    # Test Var Z_2 = sigma^2 m (m^2 - 1) / (m - 1) = 8.4375
    D = covariance_sequence(supercritical, 0, 2)
    assert D[1][0, 0] == pytest.approx(2.25)
    assert D[2][0, 0] == pytest.approx(8.4375)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_covariance_matches_enumeration(critical, supercritical, two_type, n):
    """
    Test D_n against the covariance of the enumerated law of Z_n.
    """
    for model in (critical, supercritical):
        assert covariance_sequence(model, 0, n)[n] == pytest.approx(
            enumerated_covariance(model, 0, n), rel=1e-12
        )
    if n <= 3:
        for j in range(2):
            assert covariance_sequence(two_type, j, n)[n] == pytest.approx(
                enumerated_covariance(two_type, j, n), rel=1e-10, abs=1e-12
            )


def test_covariance_is_symmetric_psd(two_type):
    """
    Test symmetry and positive semidefiniteness of every D_n.
    """
    for D in covariance_sequence(two_type, 1, 10):
        assert np.array_equal(D, D.T)
        assert np.linalg.eigvalsh(D).min() >= -1e-9


def test_covariance_domain(critical):
    with pytest.raises(DomainError):
        covariance_sequence(critical, 1, 3)
    with pytest.raises(DomainError):
        covariance_sequence(critical, 0, -1)
