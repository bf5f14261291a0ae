from fractions import Fraction as F

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qesode import params
from qesode.params import (
    GeneralProblem,
    QESLocus,
    SexticProblem,
    ThirdOrderProblem,
    alpha_from_g,
    alpha_qes,
    as_fraction,
    g_from_alpha,
    g_qes,
    kappa,
    wkb_factorisation_compatible,
)

rationals = st.fractions(
    min_value=F(-40), max_value=F(40), max_denominator=12
)


def test_alpha_qes_values():
    assert alpha_qes(1, 0) == -5
    assert alpha_qes(2, 0) == -9
    assert alpha_qes(1, F(-1, 2)) == -4


def test_g_from_alpha_values():
    assert g_from_alpha(-5, 0) == (F(3, 2), F(-3, 2), F(3))
    assert g_from_alpha(0, 0) == (F(1, 4), F(1), F(7, 4))


def test_alpha_from_g_values():
    assert alpha_from_g(F(3, 2), 3) == (F(-5), F(0))
    assert alpha_from_g(F(1, 4), F(7, 4)) == (F(0), F(0))


def test_g_qes_values():
    assert g_qes(1, 0) == (F(3, 2), F(-3, 2), F(3))
    adj = g_qes(2, 0, adjoint=True)
    assert adj == (F(-1, 2), F(11, 2), F(-2))
    assert adj[0] == adj[1] - 3 * 2


@given(alpha=rationals, l=rationals)
def test_round_trip_alpha_g(alpha, l):
    g0, g1, g2 = g_from_alpha(alpha, l)
    assert g0 + g1 + g2 == 3
    assert alpha_from_g(g0, g2) == (alpha, l)


@given(g0=rationals, g2=rationals)
def test_round_trip_g_alpha(g0, g2):
    alpha, l = alpha_from_g(g0, g2)
    back = g_from_alpha(alpha, l)
    assert back[0] == g0 and back[2] == g2


@given(J=st.integers(1, 8), l=rationals)
def test_qes_line_maps_to_qes_triple(J, l):
    assert g_from_alpha(alpha_qes(J, l), l) == g_qes(J, l)
    assert sum(g_qes(J, l)) == 3


@given(J=st.integers(1, 8), l=rationals)
def test_adjoint_triple_identities(J, l):
    base = g_qes(J, l)
    adj = g_qes(J, l, adjoint=True)
    assert adj == tuple(2 - g for g in base)
    assert adj[0] == adj[1] - 3 * J


def test_kappa_value_and_square():
    with mpmath.workprec(53):
        k = kappa()
        assert mpmath.almosteq(k, mpmath.mpf("0.769800358919501"), rel_eps=mpmath.mpf(1e-14))
    assert params.KAPPA_SQUARED == F(16, 27)
    assert F(4, 3) ** 2 / 3 == F(16, 27)


def test_kappa_scales_qes_pair():
    # the J = 2 double-limit pair times kappa is the sextic QES pair
    with mpmath.workprec(128):
        k = kappa()
        for l in (0, F(1, 2), 2):
            ebar = 3 * mpmath.sqrt(mpmath.mpf(3) / 2) * mpmath.sqrt(3 + 2 * mpmath.mpf(float(l)))
            e = 2 * mpmath.sqrt(2) * mpmath.sqrt(3 + 2 * mpmath.mpf(float(l)))
            assert mpmath.almosteq(k * ebar, e, rel_eps=mpmath.mpf(1e-30))


def test_third_order_invariants():
    p = ThirdOrderProblem(F(1, 4), 1, F(7, 4))
    assert p.G == 2 - p.e2
    assert p.L == -2 - p.e3 + p.e2
    adj = p.flipped()
    assert adj.exponents == (F(7, 4), F(1), F(1, 4))
    assert adj.G == p.G and adj.L_effective == -p.L
    with pytest.raises(ValueError):
        ThirdOrderProblem(1, 1, 2)


def test_third_order_boundary_exponent():
    p = ThirdOrderProblem.qes(2, 0)
    assert p.boundary_exponent == p.g1 == F(-7, 2)
    assert p.flipped().boundary_exponent == 2 - p.g0 == F(-1, 2)
    assert p.resonances() == [(1, 0, 2)]


def test_general_problem_validation():
    p = GeneralProblem(3, 1, (F(1, 4), 1, F(7, 4)))
    assert p.is_sorted
    assert p.boundary_exponent == 1
    assert p.decay_prefactor_power == F(-1)
    with pytest.raises(ValueError):
        GeneralProblem(3, 1, (1, 1, 2))
    q = GeneralProblem(3, 1, g_qes(1, 0))
    assert not q.is_sorted
    assert q.sorted_exponents() == (F(-3, 2), F(3, 2), F(3))


def test_qes_locus_validation():
    QESLocus(1, "third-order")
    with pytest.raises(ValueError):
        QESLocus(0, "third-order")
    with pytest.raises(ValueError):
        QESLocus(1, "nonsense")


def test_sextic_branch_flag():
    p = SexticProblem(-5, 0)
    assert p.boundary_exponent == 1
    q = SexticProblem(-5, F(-3, 2), regular=False)
    assert q.boundary_exponent == F(3, 2)
    irr = SexticProblem.irregular(2, 0)
    assert irr.alpha == 6 and irr.l == F(-5, 2)
    assert irr.boundary_exponent == F(-3, 2)
    assert irr.resonance_order() == 2


def test_wkb_factorisation_predicate():
    # factorised sextic ansatz works exactly on the QES lines
    for J in (1, 2, 3):
        for l in (0, F(1, 3)):
            p = SexticProblem(alpha_qes(J, l), l)
            assert wkb_factorisation_compatible(p, l + 1, 2 * J - 2)
    # third order: compatible only at g1 = 1 - 2J
    for J in (1, 2, 3):
        for l in (0, F(1, 3), 1):
            t = ThirdOrderProblem.qes(J, l)
            ok = wkb_factorisation_compatible(t, t.g1, 2 * J - 2)
            assert ok == (t.g1 == 1 - 2 * J)
    # irregular ansatz admissible iff l + 1/2 = -K
    for J in (1, 2):
        for K in (1, 2, 3):
            l = -F(1, 2) - K
            p = SexticProblem.irregular(J, l)
            assert wkb_factorisation_compatible(p, F(1, 2) - J, 2 * K - 2)
        for l in (0, 1):
            p = SexticProblem.irregular(J, l)
            ok = any(
                wkb_factorisation_compatible(p, F(1, 2) - J, 2 * K - 2) for K in range(1, 9)
            )
            assert not ok


@settings(max_examples=30)
@given(J=st.integers(1, 6), l=rationals)
def test_no_factorisation_off_the_line(J, l):
    t = ThirdOrderProblem.qes(J, l)
    if t.g1 != 1 - 2 * J:
        assert not wkb_factorisation_compatible(t, t.g1, 2 * J - 2)


def test_as_fraction_rejects_inexact():
    with pytest.raises(TypeError):
        as_fraction(0.5)
    with pytest.raises(ValueError):
        as_fraction("0.5")
    assert as_fraction("3/2") == F(3, 2)


def test_rational_str():
    assert params.rational_str(F(3, 2)) == "3/2"
    assert params.rational_str(F(-5)) == "-5"
