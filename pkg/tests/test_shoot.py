from fractions import Fraction as F

import mpmath
import pytest

from qesode import shoot
from qesode.frobenius import NonResonantProblemError
from qesode.params import GeneralProblem, SexticProblem, ThirdOrderProblem, kappa
from qesode.shoot import (
    BVPSpec,
    ScanWindowWarning,
    default_spec,
    irregular_spectrum_sextic,
    isospectral_report,
    spectrum_general,
    spectrum_sextic,
    spectrum_third,
)


@pytest.fixture(autouse=True)
def _prec():
    with mpmath.workprec(128):
        yield


def _tight(problem, k, **kw):
    kw.setdefault("prec_bits", 80)
    return default_spec(problem, k, **kw)


def test_sextic_qes_j1_contains_zero():
    prob = SexticProblem(-5, 0)
    spec = _tight(prob, 2)
    ev = spectrum_sextic(prob, 2, spec)
    assert any(abs(e.value) < mpmath.mpf(1e-9) for e in ev)
    assert [e.index for e in ev] == [0, 1]
    for e in ev:
        assert e.bracket[0] < e.value < e.bracket[1] or e.bracket[0] == e.bracket[1]


def test_sextic_regression_baselines():
    # first five levels of the alpha = 0, l = 0 problem, frozen from an
    # independent coarse-scan + bisection run at 96 bits
    baselines = [
        "4.3385987115124393388",
        "14.935169634907443442",
        "29.299645937400788466",
        "46.595211448533721842",
        "66.387281706593010768",
    ]
    prob = SexticProblem(0, 0)
    ev = spectrum_sextic(prob, 5, _tight(prob, 5, prec_bits=96))
    assert len(ev) == 5
    for e, ref in zip(ev, baselines):
        assert abs(e.value - mpmath.mpf(ref)) < mpmath.mpf(1e-9)
    for a, b in zip(ev, ev[1:]):
        assert a.value < b.value


def test_estimates_sorted_disjoint_and_certified():
    prob = SexticProblem(0, 0)
    ev = spectrum_sextic(prob, 3, _tight(prob, 3))
    vals = [e.value for e in ev]
    assert vals == sorted(vals)
    for a, b in zip(ev, ev[1:]):
        assert a.bracket[1] <= b.bracket[0]
    blob = ev[0].to_json()
    assert blob["method"] == "wronskian-shooting" and blob["prec_bits"] == 80


def test_mesh_and_precision_robustness():
    # moving the matching point by +-20% or raising the precision changes each
    # eigenvalue by less than its reported residual
    prob = SexticProblem(0, 0)
    base = spectrum_sextic(prob, 2, _tight(prob, 2))
    moved_up = spectrum_sextic(prob, 2, _tight(prob, 2, xm=1.2))
    moved_dn = spectrum_sextic(prob, 2, _tight(prob, 2, xm=0.8))
    finer = spectrum_sextic(prob, 2, _tight(prob, 2, prec_bits=112))
    for variant in (moved_up, moved_dn, finer):
        for a, b in zip(base, variant):
            assert abs(a.value - b.value) <= a.residual + b.residual


def test_scan_window_warning_partial_list():
    prob = SexticProblem(0, 0)
    spec = _tight(prob, 5, scan_stop=10.0)
    with pytest.warns(ScanWindowWarning):
        ev = spectrum_sextic(prob, 5, spec)
    assert 0 < len(ev) < 5


def test_resonant_sextic_redirected():
    prob = SexticProblem.irregular(2, 0)
    with pytest.raises(NonResonantProblemError):
        spectrum_sextic(prob, 2, _tight(prob, 2))


def test_spectrum_k0_and_isospec_empty():
    rep = isospectral_report(0, 0, 0)
    assert rep.pairs == () and rep.level_counts == (0, 0)


def test_continued_branch_spectrum():
    # l -> -1-l continuation: ℋ2(0, -3/2) with the x^(3/2) branch equals ℋ2(0, 1/2)
    cont = SexticProblem(0, F(-3, 2), regular=False)
    ref = SexticProblem(0, F(1, 2))
    ev_c = spectrum_sextic(cont, 2, _tight(cont, 2))
    ev_r = spectrum_sextic(ref, 2, _tight(ref, 2))
    for a, b in zip(ev_c, ev_r):
        assert abs(a.value - b.value) < mpmath.mpf(1e-12)


def test_adjoint_spectrum_matches_direct():
    # the adjoint problem (two decaying directions at infinity) carries the
    # same Ebar spectral parameter values as the direct problem
    direct = ThirdOrderProblem(F(1, 4), 1, F(7, 4))
    adj = direct.flipped()
    ev_d = spectrum_third(direct, 2, _tight(direct, 2))
    ev_a = spectrum_third(adj, 2, _tight(adj, 2))
    for a, b in zip(ev_d, ev_a):
        assert abs(a.value - b.value) < mpmath.mpf(1e-9)


def test_resonant_adjoint_spectrum_refused():
    adj = ThirdOrderProblem.qes(1, 0, adjoint=True)
    with pytest.raises(NonResonantProblemError):
        spectrum_third(adj, 2, _tight(adj, 2))


def test_general_chain_coordinates_nonzero_g0():
    gp = GeneralProblem(2, 3, (F(-1, 2), F(3, 2)))
    ev = spectrum_general(gp, 2, _tight(gp, 2))
    ref = SexticProblem(0, F(1, 2))
    ev_ref = spectrum_sextic(ref, 2, _tight(ref, 2))
    for a, b in zip(ev, ev_ref):
        assert abs(a.value - b.value) < mpmath.mpf(1e-9)


def test_biorthogonality_refuses_qes_triples():
    from qesode.params import g_qes

    with pytest.raises(ValueError, match="ordering"):
        shoot.biorthogonality_check(g_qes(2, 0), 1)


def test_irregular_spectrum_channels_smoke():
    ev = irregular_spectrum_sextic(1, 0, 2, default_spec(SexticProblem.irregular(1, 0), 2, prec_bits=96))
    assert ev[0].channel == "qes"
    assert abs(ev[0].value) < mpmath.mpf(1e-8)
    assert ev[1].channel == "regular"


def test_third_order_qes_j1_contains_zero():
    prob = ThirdOrderProblem.qes(1, 0)
    ev = spectrum_third(prob, 2, _tight(prob, 2, prec_bits=96))
    qes = [e for e in ev if e.channel == "qes"]
    assert len(qes) == 1 and abs(qes[0].value) < mpmath.mpf(1e-8)


def test_bvp_spec_point_ordering_validated():
    prob = SexticProblem(0, 0)
    with pytest.raises(ValueError, match="x0 < xm"):
        default_spec(prob, 2, x0=2.0, xm=1.0)
    with pytest.raises(ValueError, match="xm < xr"):
        default_spec(prob, 2, xm=1.0, xr=0.5)


def test_sample_eigenfunction_matches_closed_form():
    # at the first QES line the ground state is x exp(-x^4/4) exactly
    prob = SexticProblem(-5, 0)
    xs = ("0.5", "0.9", "1.4", "2.0")
    samples = shoot.sample_eigenfunction(prob, 0, _tight(prob, 1, prec_bits=96), xs)
    exact = [mpmath.mpf(x) * mpmath.exp(-mpmath.mpf(x) ** 4 / 4) for x in xs]
    peak = max(abs(v) for v in exact)
    sign = 1 if samples[0][1] * exact[0] > 0 else -1
    for (x, got), ref in zip(samples, exact):
        assert abs(sign * got - ref / peak) < mpmath.mpf(1e-12)


def test_third_order_mesh_robustness():
    prob = ThirdOrderProblem(F(1, 4), 1, F(7, 4))
    base = spectrum_third(prob, 1, _tight(prob, 1))
    moved = spectrum_third(prob, 1, _tight(prob, 1, xm=1.2))
    finer = spectrum_third(prob, 1, _tight(prob, 1, prec_bits=112))
    for variant in (moved, finer):
        assert abs(base[0].value - variant[0].value) <= base[0].residual + variant[0].residual


def test_irregular_deep_resonance_j4():
    # four QES channels at the 8-step resonance, against the exact roots
    ev = irregular_spectrum_sextic(4, 0, 4, None)
    qes = [e for e in ev if e.channel == "qes"]
    from qesode import bdpoly

    exact = bdpoly.qes_eigenvalues(4, 0, 80).values()
    assert len(qes) == 4
    for a, b in zip(qes, exact):
        assert abs(a.value - b) < mpmath.mpf(1e-8)


def test_fourth_order_resonant_qes_level():
    # n = 4 chain problem at the g0 - g1 = 4 resonance: the degree-1 family
    # member's root (zero) must appear in the spectrum, tagged as QES
    gp = GeneralProblem(4, 1, (F(7, 2), F(-1, 2), 1, 2))
    spec = default_spec(gp, 1, prec_bits=96, scan_start=-8.0, scan_stop=8.0)
    ev = spectrum_general(gp, 1, spec)
    assert ev and ev[0].channel == "qes"
    assert abs(ev[0].value) < mpmath.mpf(1e-8)
