import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from handsoff.experiments import CASES
from handsoff.plant import (
    InitialValueProblem,
    PlantSpec,
    StateSpace,
    balance_scaling,
    controllability_rank,
    is_normal,
    poly_from_roots,
    realize,
)


def _poly_oracle(roots):
    # numpy expands the product in complex arithmetic; drop the imaginary dust
    c = np.atleast_1d(np.poly(np.asarray(roots, dtype=complex)))
    assert np.max(np.abs(c.imag), initial=0.0) < 1e-9
    return c.real


# --- poly_from_roots -----------------------------------------------------

def test_poly_quadruple_origin():
    np.testing.assert_array_equal(poly_from_roots([0, 0, 0, 0]), [1, 0, 0, 0, 0])


def test_poly_conjugate_pair():
    c = poly_from_roots([-0.025 + 1j, -0.025 - 1j])
    np.testing.assert_allclose(c, [1, 0.05, 1.000625], rtol=0, atol=1e-15)
    assert c.dtype == float


def test_poly_empty():
    np.testing.assert_array_equal(poly_from_roots([]), [1.0])


def test_poly_unpaired_root_names_it():
    with pytest.raises(ValueError, match=r"\(1\+2j\)"):
        poly_from_roots([1 + 2j, 3.0])


def test_poly_rejects_mismatched_conjugate():
    with pytest.raises(ValueError):
        poly_from_roots([1 + 2j, 1 - 2.1j])


def test_poly_leading_coefficient_exactly_one():
    c = poly_from_roots([-5 + 1j, -5 - 1j, -0.3 + 2j, -0.3 - 2j, 4.0])
    assert c[0] == 1.0


@pytest.mark.parametrize("case", [1, 3, 5, 6, 7, 8, 9])
def test_poly_matches_numpy_oracle_on_benchmark_plants(case):
    spec = CASES[case].plant
    np.testing.assert_allclose(spec.denominator(), _poly_oracle(spec.poles), atol=1e-12)


_re = st.floats(-5, 5, allow_nan=False)
_im = st.floats(0.3, 5, allow_nan=False)


@st.composite
def separated_roots(draw):
    """Real roots and conjugate pairs with pairwise distance at least 0.2."""
    roots = []
    for _ in range(draw(st.integers(1, 4))):
        if draw(st.booleans()):
            cand = [complex(draw(_re), 0.0)]
        else:
            z = complex(draw(_re), draw(_im))
            cand = [z, z.conjugate()]
        if all(abs(c - r) >= 0.2 for c in cand for r in roots):
            roots.extend(cand)
    if not roots:
        roots = [complex(draw(_re), 0.0)]
    return roots


@settings(max_examples=80, deadline=None)
@given(separated_roots())
def test_poly_root_recovery(roots):
    recovered = np.roots(poly_from_roots(roots))
    left = list(recovered)
    for r in roots:
        k = int(np.argmin([abs(r - q) for q in left]))
        assert abs(left.pop(k) - r) <= 1e-6 * max(1.0, abs(r))


# --- PlantSpec / StateSpace / InitialValueProblem ---------------------------

def test_plant_must_be_strictly_proper():
    with pytest.raises(ValueError, match="strictly proper"):
        PlantSpec(poles=(-1,), zeros=(-2,))


def test_plant_numerator_carries_gain():
    np.testing.assert_allclose(PlantSpec(poles=(-1, -2), zeros=(3,), gain=2).numerator(), [2, -6])


def test_state_space_validation():
    with pytest.raises(ValueError):
        StateSpace(np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(ValueError):
        StateSpace(np.zeros((2, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        StateSpace([[np.inf]], [1.0])
    ss = StateSpace(np.eye(2), [1, 0])
    assert ss.n == 2
    with pytest.raises(ValueError):
        ss.A[0, 0] = 5.0


def test_ivp_validation():
    ss = StateSpace(np.eye(2), [1, 0])
    with pytest.raises(ValueError):
        InitialValueProblem(ss, [1.0], T=1.0)
    with pytest.raises(ValueError):
        InitialValueProblem(ss, [1.0, 1.0], T=0.0)
    with pytest.raises(ValueError):
        InitialValueProblem(ss, [1.0, 1.0], T=1.0, U_max=-1.0)


# --- realize ---------------------------------------------------------------

def test_realize_quadruple_integrator():
    ss = realize(PlantSpec(poles=(0, 0, 0, 0)))
    expected = np.diag(np.ones(3), -1)
    np.testing.assert_array_equal(ss.A, expected)
    np.testing.assert_array_equal(ss.B, [1, 0, 0, 0])


def test_realize_p2():
    ss = realize(CASES[3].plant)
    np.testing.assert_allclose(ss.A, [[-0.05, -1.000625], [1, 0]], atol=1e-15)
    np.testing.assert_array_equal(ss.B, [1, 0])


def test_realize_zeros_do_not_enter_canonical_form():
    a, b = realize(CASES[8].plant), realize(CASES[9].plant)
    assert a.A.tobytes() == b.A.tobytes()
    assert a.B.tobytes() == b.B.tobytes()


def test_realize_rejects_empty_plant():
    with pytest.raises(ValueError):
        realize(PlantSpec(poles=()))


def test_balanced_realization_matches_reference_example():
    # ss(tf([1 1], [1 3 3 2])) in Matlab returns this pair
    ss = realize(PlantSpec(poles=np.roots([1, 3, 3, 2]), zeros=(-1,)), balance=True)
    np.testing.assert_allclose(ss.A, [[-3, -1.5, -1], [2, 0, 0], [0, 1, 0]], atol=1e-12)
    np.testing.assert_allclose(ss.B, [1, 0, 0], atol=1e-12)


@pytest.mark.parametrize("case", list(CASES))
def test_balanced_is_power_of_two_similarity(case):
    spec = CASES[case].plant
    A0, B0 = realize(spec).A, realize(spec).B
    ss = realize(spec, balance=True)
    d = B0[0] / ss.B[0]
    assert np.log2(d) == round(np.log2(d))
    # same characteristic polynomial and controllability
    np.testing.assert_allclose(np.poly(ss.A), np.poly(A0), atol=1e-9)
    assert controllability_rank(ss) == spec.order


def test_balance_scaling_leaves_balanced_matrix_alone():
    np.testing.assert_array_equal(balance_scaling(np.ones((3, 3))), np.ones(3))


@settings(max_examples=60, deadline=None)
@given(separated_roots())
def test_realization_char_poly_matches_denominator(roots):
    spec = PlantSpec(poles=roots)
    for balance in (False, True):
        A = realize(spec, balance=balance).A
        # Faddeev-LeVerrier oracle, independent of eigenvalue accuracy
        n = A.shape[0]
        c = [1.0]
        M = np.zeros_like(A)
        for k in range(1, n + 1):
            M = A @ M + c[-1] * np.eye(n)
            c.append(-np.trace(A @ M) / k)
        np.testing.assert_allclose(c, spec.denominator(), atol=1e-9 * max(1, np.abs(c).max()))


@settings(max_examples=60, deadline=None)
@given(separated_roots())
def test_canonical_realization_is_controllable(roots):
    spec = PlantSpec(poles=roots)
    assert controllability_rank(realize(spec)) == spec.order


# --- controllability / normality -------------------------------------------

def test_rank_examples():
    assert controllability_rank(realize(CASES[1].plant)) == 4
    assert controllability_rank(StateSpace(np.zeros((2, 2)), [1, 0])) == 1
    assert controllability_rank(realize(CASES[7].plant)) == 6
    assert controllability_rank(StateSpace(np.zeros((2, 2)), [0, 0])) == 0


def test_is_normal_examples():
    assert is_normal(realize(CASES[3].plant))
    assert not is_normal(realize(CASES[1].plant))
    assert not is_normal(realize(CASES[8].plant))
    assert is_normal(realize(CASES[7].plant))
    assert not is_normal(StateSpace(np.eye(2), [1, 0]))  # uncontrollable
