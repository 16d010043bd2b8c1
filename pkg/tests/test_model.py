"""Core model: parameter validation, covariance structure, decompositions,
seeded sampling."""

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ccdp import (
    ChannelParams,
    InfeasibleRho,
    InvalidGain,
    InvalidM,
    InvalidPower,
    decompose_states,
    sample_states,
    state_covariance,
)
from ccdp.model import (
    NEGATIVE_PAIRWISE,
    POSITIVE_COMMON,
    TWO_USER_COMMON,
    normal_blocks,
)


# ---------------------------------------------------------------------------
# ChannelParams validation.
# ---------------------------------------------------------------------------

def test_valid_interior_point():
    p = ChannelParams(2, 10.0, 2.0, 0.0)
    assert p.c2 == 4.0
    assert p.rho_bar_plus == 1.0


def test_infeasible_rho_rejected():
    # eigenvalue 1+(M-1)rho = -0.2 < 0, confirmed by the eigen oracle below
    with pytest.raises(InfeasibleRho):
        ChannelParams(3, 10.0, 2.0, -0.6)
    assert np.linalg.eigvalsh(state_covariance(3, -0.6).entries).min() < 0


def test_boundary_rho_accepted_singular():
    p = ChannelParams(4, 5.0, 1.0, -1.0 / 3.0)
    cov = state_covariance(p.M, p.rho)
    assert cov.feasible and cov.singular


@pytest.mark.parametrize("args,exc", [
    ((1, 10.0, 2.0, 0.0), InvalidM),
    ((2, 0.0, 2.0, 0.0), InvalidPower),
    ((2, -1.0, 2.0, 0.0), InvalidPower),
    ((2, 10.0, -0.5, 0.0), InvalidGain),
    ((2, 10.0, 2.0, 1.5), InfeasibleRho),
    ((5, 10.0, 2.0, -0.3), InfeasibleRho),
])
def test_rejections(args, exc):
    with pytest.raises(exc):
        ChannelParams(*args)


def test_rho_bar_plus():
    assert ChannelParams(2, 1.0, 1.0, 0.75).rho_bar_plus == 0.25
    assert ChannelParams(2, 1.0, 1.0, -0.5).rho_bar_plus == 1.0


# ---------------------------------------------------------------------------
# StateCovariance: entries, spectrum, minors, feasibility.
# ---------------------------------------------------------------------------

def test_identity_case():
    cov = state_covariance(2, 0.0)
    assert np.array_equal(cov.entries, np.eye(2))
    assert cov.min_eigenvalue == 1.0
    assert cov.feasible and not cov.singular


def test_singular_boundary_m3():
    cov = state_covariance(3, -0.5)
    assert cov.feasible and cov.singular
    assert abs(cov.min_eigenvalue) <= 1e-12


def test_leading_minors_against_determinant_oracle():
    cov = state_covariance(5, 0.3)
    for m in range(1, 6):
        brute = np.linalg.det(cov.entries[:m, :m])
        closed = cov.leading_minor(m)
        # same closed form as (0.7)^m * (1 + 0.3*m/0.7)
        alt = 0.7 ** m * (1 + 0.3 * m / 0.7)
        assert abs(closed - brute) < 1e-12
        assert abs(closed - alt) < 1e-12


@settings(max_examples=60, deadline=None)
@given(M=st.integers(2, 12), rho=st.floats(-1.0, 1.0))
def test_spectrum_matches_solver(M, rho):
    cov = state_covariance(M, rho)
    solver = np.linalg.eigvalsh(cov.entries)
    assert np.allclose(np.sort(cov.eigenvalues()), solver, atol=1e-10)
    assert abs(cov.min_eigenvalue - solver.min()) < 1e-10


def test_feasibility_verdicts_agree_on_grid():
    # principal-minor verdict vs eigenvalue verdict, M in 2..16,
    # rho in [-1.2, 1.2] step 0.01, shared tolerance
    tol = 1e-9
    for M in range(2, 17):
        for rho in np.arange(-1.2, 1.2 + 1e-9, 0.01):
            cov = state_covariance(M, float(rho))
            minors_ok = all(cov.leading_minor(m) >= -tol for m in range(1, M + 1))
            eig_ok = np.linalg.eigvalsh(cov.entries).min() >= -tol
            assert minors_ok == eig_ok
            if abs(cov.min_eigenvalue) > tol:  # away from the boundary the
                assert cov.feasible == eig_ok  # reported verdict agrees too


# ---------------------------------------------------------------------------
# Decompositions: kinds, coefficients, exact Gram reconstruction.
# ---------------------------------------------------------------------------

def test_positive_common_weights():
    d = decompose_states(ChannelParams(3, 10.0, 1.0, 0.25))
    assert d.kind == POSITIVE_COMMON
    assert d.coefficients["common"] == pytest.approx(0.5, abs=1e-15)
    assert d.coefficients["private"] == pytest.approx(np.sqrt(0.75), abs=1e-15)


def test_two_user_zero_rho_is_pure_private():
    d = decompose_states(ChannelParams(2, 10.0, 1.0, 0.0))
    assert d.kind == TWO_USER_COMMON
    assert d.coefficients["common"] == 0.0
    assert np.array_equal(d.gram(), np.eye(2))


def test_negative_pairwise_boundary_residual_zero():
    d = decompose_states(ChannelParams(3, 10.0, 1.0, -0.5))
    assert d.kind == NEGATIVE_PAIRWISE
    assert d.coefficients["pairwise"] == pytest.approx(np.sqrt(0.5), abs=1e-15)
    assert d.coefficients["residual"] == 0.0


@pytest.mark.parametrize("M,rho", [
    (2, 0.5), (2, -0.8), (2, 1.0), (3, 0.25), (3, -0.5), (4, -1.0 / 3.0),
    (5, 0.3), (6, -0.12), (8, 0.9),
])
def test_gram_reconstruction_numeric(M, rho):
    d = decompose_states(ChannelParams(M, 1.0, 1.0, rho))
    target = state_covariance(M, rho).entries
    assert np.max(np.abs(d.gram() - target)) < 1e-14


@pytest.mark.parametrize("M,kind", [
    (2, TWO_USER_COMMON), (3, POSITIVE_COMMON), (5, POSITIVE_COMMON),
    (3, NEGATIVE_PAIRWISE), (5, NEGATIVE_PAIRWISE),
])
def test_gram_reconstruction_symbolic(M, kind):
    # exact, not merely numeric: the Gram must simplify to the covariance
    r = sp.symbols("r", positive=True)
    if kind == TWO_USER_COMMON:
        a, b = sp.sqrt(r), sp.sqrt(1 - r)
        W = sp.Matrix([[a, b, 0], [a, 0, b]])
        rho = r
    elif kind == POSITIVE_COMMON:
        W = sp.zeros(M, 1 + M)
        for m in range(M):
            W[m, 0] = sp.sqrt(r)
            W[m, 1 + m] = sp.sqrt(1 - r)
        rho = r
    else:
        pairs = [(i, j) for i in range(M) for j in range(i + 1, M)]
        W = sp.zeros(M, len(pairs) + M)
        for k, (i, j) in enumerate(pairs):
            W[i, k] = sp.sqrt(r)
            W[j, k] = -sp.sqrt(r)
        for m in range(M):
            W[m, len(pairs) + m] = sp.sqrt(1 - (M - 1) * r)
        rho = -r
    target = sp.Matrix(M, M, lambda i, j: 1 if i == j else rho)
    assert sp.simplify(W * W.T - target) == sp.zeros(M, M)


def test_negative_rho_uses_sign_flip_for_two_users():
    d = decompose_states(ChannelParams(2, 1.0, 1.0, -0.6))
    W, _ = d.mixing_matrix()
    assert W[0, 0] > 0 > W[1, 0]
    assert np.max(np.abs(d.gram() - state_covariance(2, -0.6).entries)) < 1e-14


# ---------------------------------------------------------------------------
# Sampling: determinism, shape, empirical covariance.
# ---------------------------------------------------------------------------

def test_single_row_finite():
    d = decompose_states(ChannelParams(3, 1.0, 1.0, 0.25))
    rows = sample_states(d, 1, seed=7)
    assert rows.shape == (1, 3) and np.all(np.isfinite(rows))


def test_sampling_bit_reproducible():
    d = decompose_states(ChannelParams(4, 1.0, 1.0, -0.2))
    a = sample_states(d, 200_000, seed=42)
    b = sample_states(d, 200_000, seed=42)
    assert np.array_equal(a, b)
    c = sample_states(d, 200_000, seed=43)
    assert not np.array_equal(a, c)


def test_blocks_are_independent_streams():
    # block content depends only on (seed, block index)
    blocks_a = [blk.copy() for _, blk in normal_blocks(100_000, 3, seed=5)]
    blocks_b = [blk.copy() for _, blk in normal_blocks(100_000, 3, seed=5)]
    for x, y in zip(blocks_a, blocks_b):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("M,rho", [(2, 0.5), (4, -1.0 / 3.0)])
def test_empirical_covariance_converges(M, rho):
    d = decompose_states(ChannelParams(M, 1.0, 1.0, rho))
    s = sample_states(d, 10**6, seed=11)
    emp = s.T @ s / len(s)
    assert np.max(np.abs(emp - state_covariance(M, rho).entries)) < 0.01


def test_sample_states_rejects_empty():
    d = decompose_states(ChannelParams(2, 1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        sample_states(d, 0, seed=1)
