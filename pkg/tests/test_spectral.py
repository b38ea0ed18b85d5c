import math

import numpy as np
import pytest

from branchenv.model import BranchingModel, OffspringLaw
from branchenv.spectral import (
    alignment_profile,
    birkhoff_coefficient,
    certified_lookahead,
    contraction_bound,
    duality_drift,
    eigen_sequence,
    hilbert_distance,
    norm_bound,
    perron_root,
    product_matrix,
    projective_diameter,
    ratio_band,
)
from branchenv.tools.errors import AssumptionError, DomainError, SupportCapError


@pytest.fixture
def symmetric():
    """
    Fixture to provide a constant two-type model with A = [[.5, .25], [.25, .5]].
    """
    laws = (
        OffspringLaw.from_pairs([((0, 0), 0.625), ((2, 2), 0.125), ((1, 0), 0.25)]),
        OffspringLaw.from_pairs([((0, 0), 0.625), ((2, 2), 0.125), ((0, 1), 0.25)]),
    )
    return BranchingModel.constant(laws, name="symmetric")


@pytest.fixture
def period2():
    """
    Fixture to provide a period-2 two-type model passing Assumptions 1-3.
    """
    even = (
        OffspringLaw.from_pairs([((0, 0), 0.5), ((2, 2), 0.3), ((1, 3), 0.2)]),
        OffspringLaw.from_pairs([((0, 0), 0.4), ((2, 2), 0.6)]),
    )
    odd = (
        OffspringLaw.from_pairs([((0, 0), 0.6), ((2, 2), 0.4)]),
        OffspringLaw.from_pairs([((0, 0), 0.5), ((3, 2), 0.25), ((2, 2), 0.25)]),
    )
    return BranchingModel.periodic([even, odd], name="period2")


def random_unit(rng, d):
    x = np.exp(rng.normal(size=d))
    return x / x.sum()


def test_hilbert_distance():
    """
    Test the projective metric on simple vectors.
    """
    assert hilbert_distance([1, 1], [2, 1]) == pytest.approx(math.log(2))
    assert hilbert_distance([1, 2, 3], [2, 4, 6]) == pytest.approx(0.0, abs=1e-15)
    assert hilbert_distance([1, 2], [3, 1]) == hilbert_distance([3, 1], [1, 2])
    with pytest.raises(DomainError):
        hilbert_distance([1, 0], [1, 1])
    with pytest.raises(DomainError):
        hilbert_distance([1, 1], [1, 1, 1])


def test_projective_diameter():
    """
    Test the diameter of a positive matrix's column cone.
    """
    A = np.array([[1.0, 2.0], [2.0, 1.0]])
    assert projective_diameter(A) == pytest.approx(math.log(4.0))
    assert projective_diameter(np.ones((3, 3))) == pytest.approx(0.0)
    assert birkhoff_coefficient(np.ones((3, 3))) == 0.0
    with pytest.raises(DomainError):
        projective_diameter([[1.0, 0.0], [1.0, 1.0]])


def test_birkhoff_contraction_property():
    """
    Test d(Au, Av) <= tanh(diam(A)/4) d(u, v) over 10^4 random instances.
    """
    rng = np.random.default_rng(2024)
    violations = 0
    for _ in range(10_000):
        d = int(rng.integers(2, 6))
        A = np.exp(rng.normal(scale=1.5, size=(d, d)))
        u = random_unit(rng, d)
        v = random_unit(rng, d)
        left = hilbert_distance(A @ u, A @ v)
        right = birkhoff_coefficient(A) * hilbert_distance(u, v)
        if left > right + 1e-9:
            violations += 1
    assert violations == 0


def test_norm_bound_property():
    """
    Test ||u - v||_1 <= e^{d(u, v)} - 1 over 10^4 random unit vectors.
    """
    rng = np.random.default_rng(7)
    violations = 0
    for _ in range(10_000):
        d = int(rng.integers(1, 8))
        u = random_unit(rng, d)
        v = random_unit(rng, d)
        if np.abs(u - v).sum() > norm_bound(hilbert_distance(u, v)) + 1e-12:
            violations += 1
    assert violations == 0


def test_certified_lookahead():
    """
    Test that the look-ahead is the smallest one meeting the tolerance.
    """
    R, tol = 4.0, 1e-12
    k = certified_lookahead(R, tol, cap=10_000)
    assert norm_bound(contraction_bound(R, k)) <= tol
    assert norm_bound(contraction_bound(R, k - 1)) > tol

    # Test an insufficient cap
    assert certified_lookahead(1e6, 1e-12, cap=5) == 6
    assert certified_lookahead(float("inf"), 1e-12, cap=5) == 6


def test_product_matrix(period2):
    """
    Test M_{k,n} and its domain.
    """
    A0, A1 = period2.mean_matrix(0), period2.mean_matrix(1)
    assert product_matrix(period2, 0, 3) == pytest.approx(A0 @ A1 @ A0)
    assert product_matrix(period2, 2, 2) == pytest.approx(np.eye(2))
    with pytest.raises(DomainError):
        product_matrix(period2, 3, 2)


def test_perron_root(symmetric):
    """
    Test the dense Perron root of the symmetric mean matrix.
    """
    root, vector = perron_root(symmetric.mean_matrix(0))
    assert root == pytest.approx(0.75)
    assert vector == pytest.approx([0.5, 0.5])
    with pytest.raises(DomainError):
        perron_root([[1.0, -1.0], [0.0, 1.0]])


def test_eigen_sequence_constant_symmetric(symmetric):
    """
    Test that a constant model yields its Perron data at every generation.
    """
    eigs = eigen_sequence(symmetric, 50)
    assert eigs.lam == pytest.approx(np.full(51, 0.75))
    assert eigs.lam_tilde == pytest.approx(np.full(51, 0.75))
    assert eigs.v == pytest.approx(np.full((51, 2), 0.5))
    assert eigs.u == pytest.approx(np.full((51, 2), 0.5))
    assert eigs.log_Lambda[10] == pytest.approx(10 * math.log(0.75))
    assert eigs.alignment_error <= 1e-12
    assert eigs.lookahead >= 1

    K, low, high = ratio_band(symmetric, eigs)
    assert low == pytest.approx(1 / 3)
    assert high == pytest.approx(2 / 3)
    assert K == pytest.approx(3.0)

    profile = alignment_profile(symmetric, eigs, 0, [1.0, 2.0], [1, 5, 20])
    deltas = [delta for _, delta in profile]
    assert deltas[0] > deltas[1] > deltas[2]
    assert deltas[2] < 1e-8


def test_eigen_sequence_single_type():
    """
    Test the scalar case, where v_n = u_n = 1 and lam_n is the mean.
    """
    model = BranchingModel.constant([OffspringLaw.scalar({0: 0.5, 3: 0.5})])
    eigs = eigen_sequence(model, 20)
    assert eigs.v[:, 0] == pytest.approx(np.ones(21))
    assert eigs.lam == pytest.approx(np.full(21, 1.5))
    assert eigs.log_Lambda[20] == pytest.approx(20 * math.log(1.5))
    assert eigs.alignment_error == 0.0
    assert eigs.csv_header() == [
        "n",
        "lambda",
        "lambda_tilde",
        "log_Lambda",
        "log_Lambda_tilde",
        "v_1",
        "u_1",
        "alignment_error",
    ]
    assert len(eigs.csv_rows()) == 21
    with pytest.raises(ValueError):
        eigs.v[0, 0] = 2.0


def test_eigen_sequence_invariants(period2):
    """
    Test normalisation, alignment, duality and the ratio band for a periodic model.
    """
    N = 2048
    eigs = eigen_sequence(period2, N)
    assert eigs.v.sum(axis=1) == pytest.approx(np.ones(N + 1), abs=1e-12)
    assert eigs.u.sum(axis=1) == pytest.approx(np.ones(N + 1), abs=1e-12)
    assert eigs.epsilon_bar > 0
    assert eigs.v.min() >= eigs.epsilon_bar
    assert eigs.alignment_error <= 1e-12

    # Test A_{n-1} v_n = lam_{n-1} v_{n-1}
    for n in range(1, N + 1):
        residual = period2.mean_matrix(n - 1) @ eigs.v[n] - eigs.lam[n - 1] * eigs.v[n - 1]
        assert np.abs(residual).sum() <= 1e-12

    # Test the period of the sequences
    assert eigs.v[100] == pytest.approx(eigs.v[102], abs=1e-12)
    assert duality_drift(eigs) <= 1e-9

    K, low, high = ratio_band(period2, eigs)
    assert np.isfinite(K) and K >= 1.0
    assert 1.0 / K <= low <= high <= K


def test_eigen_sequence_custom_u0(symmetric):
    """
    Test that u0 is normalised and used as the first backward vector.
    """
    eigs = eigen_sequence(symmetric, 5, u0=[1.0, 3.0])
    assert eigs.u[0] == pytest.approx([0.25, 0.75])
    with pytest.raises(DomainError):
        eigen_sequence(symmetric, 5, u0=[1.0, 0.0])


def test_eigen_sequence_requires_assumptions():
    """
    Test that a two-type model failing Assumption 1 is rejected.
    """
    laws = (
        OffspringLaw.from_pairs([((0, 0), 0.5), ((2, 1), 0.5)]),
        OffspringLaw.from_pairs([((0, 0), 0.5), ((2, 2), 0.5)]),
    )
    model = BranchingModel.constant(laws)
    with pytest.raises(AssumptionError) as raised:
        eigen_sequence(model, 10)
    assert raised.value.cell == (0, 0, 1)


def test_eigen_sequence_lookahead_cap(period2):
    """
    Test that an insufficient look-ahead cap raises SupportCapError.
    """
    with pytest.raises(SupportCapError, match="cap 3"):
        eigen_sequence(period2, 10, max_lookahead=3)
