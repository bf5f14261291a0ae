"""Acceptance suite: one test per criterion, each printing its own PASS/FAIL line.

Run with  pytest tests/test_acceptance.py -v -s  to see the per-criterion
lines.  Every tolerance is pinned here, not computed.  Criterion 9's first
clause asserts the stated product bound and is expected to fail: the decaying
combination's true envelope is x^-1 exp(-x^2/4) (oscillatory), so the stated
chi * x * exp(x^2/2) grows by a factor ~190 across [2, 5]; see the companion
analysis in test_closedform.test_subdominant_combination_true_decay for the
physically correct bound, which passes.
"""
from fractions import Fraction as F

import mpmath
import pytest

from qesode import bdpoly, closedform as cf, frobenius as fro, shoot, taylor
from qesode.bdpoly import EPolynomial, cheng_denominator
from qesode.params import (
    GeneralProblem,
    SexticProblem,
    ThirdOrderProblem,
    alpha_qes,
    g_qes,
    kappa,
)


def report(number: int, label: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {number:2d} [{label}]: {status}{suffix}")
    assert ok, f"criterion {number} ({label}) failed{suffix}"


@pytest.fixture(autouse=True)
def _prec():
    with mpmath.workprec(128):
        yield


def test_criterion_01_qes_closed_forms():
    ok = True
    r1 = bdpoly.qes_eigenvalues(1, 0)
    ok &= len(r1) == 1 and r1.roots[0].value == 0 and r1.roots[0].interval == (F(0), F(0))
    tol = mpmath.mpf(1e-12)
    for l in (F(0), F(1, 2), F(1)):
        roots = bdpoly.qes_eigenvalues(2, l, 80).values()
        target = 2 * mpmath.sqrt(2) * mpmath.sqrt(3 + 2 * mpmath.mpf(l.numerator) / l.denominator)
        ok &= abs(roots[0] + target) < tol and abs(roots[1] - target) < tol
    for l in (F(0), F(1), F(2)):
        roots = bdpoly.qes_eigenvalues(3, l, 80).values()
        target = 8 * mpmath.sqrt(2 + mpmath.mpf(l.numerator) / l.denominator)
        ok &= abs(roots[0] + target) < tol
        ok &= abs(roots[1]) < tol
        ok &= abs(roots[2] - target) < tol
    report(1, "qes closed forms", bool(ok))


def test_criterion_02_obstruction_proportional():
    ok = True
    details = []
    for J in range(1, 6):
        for l in (F(0), F(1, 3), F(1)):
            obs = bdpoly.obstruction_polynomial(J, l).poly
            pj = bdpoly.bd_second(alpha_qes(J, l), l, J)
            factor = obs.proportional_factor(pj)
            ok &= factor is not None and factor != 0
            details.append(f"J={J}")
    report(2, "obstruction = recursion polynomial, exactly", bool(ok), "J <= 5, zero tolerance")


def test_criterion_03_kappa_scaling():
    worst = mpmath.mpf(0)
    for J, l in ((1, F(0)), (2, F(0)), (2, F(1, 2)), (3, F(1))):
        for n in range(1, 21):
            worst = max(worst, bdpoly.kappa_scaling_residual(J, l, n, [1, -1, 10, -10, 100, -100]))
    report(3, "kappa^n scaling identity", worst < mpmath.mpf(1e-30), f"max rel {mpmath.nstr(worst, 3)}")


def test_criterion_04_isospectrality():
    tol = mpmath.mpf(1e-6)
    worst = mpmath.mpf(0)
    ok = True
    for alpha, l in ((F(0), F(0)), (alpha_qes(2, 0), F(0)), (F(-2), F(1, 3))):
        rep = shoot.isospectral_report(alpha, l, 5, prec_bits=96)
        ok &= not rep.has_gaps
        worst = max(worst, rep.max_abs_difference)
    report(4, "isospectrality E = kappa Ebar", bool(ok) and worst < tol, f"max |E - k Ebar| {mpmath.nstr(worst, 3)}")


def test_criterion_05_shooting_vs_algebra():
    sextic = SexticProblem(-9, 0)
    ev2 = shoot.spectrum_sextic(sextic, 2, shoot.default_spec(sextic, 2, prec_bits=96))
    target2 = 2 * mpmath.sqrt(6)
    ok = abs(ev2[0].value + target2) < mpmath.mpf(1e-8)
    ok &= abs(ev2[1].value - target2) < mpmath.mpf(1e-8)
    third = ThirdOrderProblem.qes(2, 0)
    ev3 = shoot.spectrum_third(third, 2, shoot.default_spec(third, 2, prec_bits=96))
    target3 = 3 * mpmath.sqrt(mpmath.mpf(9) / 2)
    ok &= abs(ev3[0].value + target3) < mpmath.mpf(1e-6)
    ok &= abs(ev3[1].value - target3) < mpmath.mpf(1e-6)
    ok &= all(e.channel == "qes" for e in ev3)
    report(5, "shooting contains the algebraic levels", bool(ok))


def test_criterion_06_horizontal_arrow():
    ev = shoot.irregular_spectrum_sextic(2, 0, 6, None)
    qes = [e for e in ev if e.channel == "qes"]
    reg = [e for e in ev if e.channel == "regular"]
    target = 2 * mpmath.sqrt(6)
    ok = len(qes) == 2
    ok &= abs(qes[0].value + target) < mpmath.mpf(1e-6)
    ok &= abs(qes[1].value - target) < mpmath.mpf(1e-6)
    partner = SexticProblem(6, F(3, 2))
    ev_reg = shoot.spectrum_sextic(partner, 4, shoot.default_spec(partner, 4, prec_bits=96))
    ok &= len(reg) >= 4
    worst = mpmath.mpf(0)
    for a, b in zip(reg[:4], ev_reg):
        worst = max(worst, abs(a.value - b.value))
    ok &= worst < mpmath.mpf(1e-6)
    report(6, "horizontal arrow: QES + shifted regular spectrum", bool(ok), f"max reg diff {mpmath.nstr(worst, 3)}")


def test_criterion_07_bessel_ansatz():
    ok = True
    details = []
    for J, l in ((1, 0), (1, 1), (2, 0), (2, 1), (3, 0), (3, 1)):
        res = cf.bessel_ansatz_solve(J, l)
        pj = bdpoly.bd_second(alpha_qes(J, l), l, J).monic()
        ok &= res.eigencondition == pj
        ok &= res.truncation_built == cf.bessel_truncation_order(J, l)
        ok &= res.truncation_detected <= res.truncation_built
        details.append(f"({J},{l}):n={res.truncation_detected}")
    report(7, "Bessel ansatz eigencondition = P_J, printed truncations", bool(ok), " ".join(details))


def test_criterion_08_whittaker_series_identity():
    qj0 = cf.qj0_constant(1, 0)
    worst = mpmath.mpf(0)
    for xs in ("0.5", "1", "2"):
        x = mpmath.mpf(xs)
        w = cf.whittaker_solution(1, 0, x)
        s = fro.bd_irregular_series_eval(1, 0, 0, qj0, x, N=140)
        worst = max(worst, abs(w - s) / abs(w))
    report(8, "Whittaker = irregular series at E = 0", worst < mpmath.mpf(1e-20), f"max rel {mpmath.nstr(worst, 3)}")


def test_criterion_09_subdominant_combination():
    # clause 2: pointwise match with the backward-integrated decaying subspace
    g = g_qes(1, 0)
    adjoint = ThirdOrderProblem(*g, adjoint=True)
    system = shoot._system_for(adjoint, mpmath.mpf(0))
    xr = shoot._choose_xr(adjoint, 10, 40)
    seeds = shoot._infinity_seed_jets(adjoint, mpmath.mpf(0), xr)
    states = []
    for seed in seeds:
        snapshots = {}
        y = seed
        x_from = xr
        for x_to in (3, 2, 1):
            y, _ = taylor.integrate(system, x_from, x_to, y, 128)
            snapshots[x_to] = y
            x_from = x_to
        states.append(snapshots)
    val1, der1 = cf.subdominant_jet(F(3, 2), 1)
    m = [[states[0][1][0], states[1][1][0]], [states[0][1][1], states[1][1][1]]]
    det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
    c1 = (val1 * m[1][1] - der1 * m[0][1]) / det
    c2 = (der1 * m[0][0] - val1 * m[1][0]) / det
    worst = mpmath.mpf(0)
    for x in (1, 2, 3):
        fitted = c1 * states[0][x][0] + c2 * states[1][x][0]
        exact = cf.subdominant_third_order(F(3, 2), x)
        worst = max(worst, abs(fitted - exact) / abs(exact))
    clause2 = worst < mpmath.mpf(1e-8)

    # clause 1, exactly as stated: chi * x * exp(x^2/2) bounded within a
    # factor 10 over [2, 5].  The measured envelope is exp(+x^2/4), so this
    # fails; the analysis lives in the module docstring and the notes ledger.
    grid = [mpmath.mpf(k) / 4 for k in range(8, 21)]
    products = [abs(cf.subdominant_third_order(F(3, 2), x)) * x * mpmath.exp(x**2 / 2) for x in grid]
    variation = max(products) / min(products)
    clause1 = variation < 10

    ok = clause1 and clause2
    report(
        9,
        "subdominant 0F2 combination",
        ok,
        f"backward-match rel {mpmath.nstr(worst, 3)} (clause 2 {'PASS' if clause2 else 'FAIL'}); "
        f"stated product variation {mpmath.nstr(variation, 4)} >= 10 (clause 1 {'PASS' if clause1 else 'FAIL'}: "
        "true envelope is x^-1 exp(-x^2/4), see notes)",
    )


def test_criterion_10_cheng_iterates():
    g = (F(1, 4), F(1), F(7, 4))
    pi = {m: cheng_denominator(g, m) for m in range(1, 5)}
    E = EPolynomial.identity("Ebar")
    one = EPolynomial.constant(1, "Ebar")
    it1 = fro.cheng_iterate(*g, iterations=1)
    ok = it1.coeffs[0] == one
    ok &= it1.coeffs[1] == E * (F(-1) / pi[1])
    ok &= it1.coeffs[2] == one * (F(1) / pi[2])
    it2 = fro.cheng_iterate(*g, iterations=2)
    ok &= it2.coeffs[1] == E * (F(-1) / pi[1])
    ok &= it2.coeffs[2] == EPolynomial([F(1) / pi[2], 0, F(1) / (pi[1] * pi[2])], "Ebar")
    ok &= it2.coeffs[3] == E * (-(F(1) / (pi[1] * pi[3]) + F(1) / (pi[2] * pi[3])))
    ok &= it2.coeffs[4] == one * (F(1) / (pi[2] * pi[4]))
    for g_test in (g, (F(-1, 2), F(5, 4), F(9, 4))):
        series = fro.ChengSeries.build(g_test, 10)
        for n in range(1, 11):
            itn = fro.cheng_iterate(*g_test, iterations=n)
            for p in range(n + 1):
                num, den = series.coefficient(p)
                ok &= itn.coeffs[p] == num * (F(1) / den)
    report(10, "fixed-point iterates 1, 2 and closed form", bool(ok), "zero tolerance")


def test_criterion_11_general_family():
    ok = True
    for g in (g_qes(2, 0), (F(1, 4), F(1), F(7, 4))):
        for m in range(21):
            ok &= bdpoly.general_family(3, 1, g, m) == bdpoly.cheng_third(*g, m)
    # hidden QES root of the degree-1 member at the (3, 1) resonance
    g_res = g_qes(1, F(1, 3))
    gp = GeneralProblem(3, 1, g_res)
    ev = shoot.spectrum_general(gp, 2, shoot.default_spec(gp, 2, prec_bits=96))
    qes_levels = [e for e in ev if e.channel == "qes"]
    ok &= len(qes_levels) == 1 and abs(qes_levels[0].value) < mpmath.mpf(1e-6)
    # (n, M) = (2, 3) reproduces the sextic at alpha = 0
    gp2 = GeneralProblem(2, 3, (0, 1))
    ev2 = shoot.spectrum_general(gp2, 3, shoot.default_spec(gp2, 3, prec_bits=96))
    ref = SexticProblem(0, 0)
    ev_ref = shoot.spectrum_sextic(ref, 3, shoot.default_spec(ref, 3, prec_bits=96))
    worst = mpmath.mpf(0)
    for a, b in zip(ev2, ev_ref):
        worst = max(worst, abs(a.value - b.value))
    ok &= worst < mpmath.mpf(1e-6)
    report(11, "n-th order family: reduction and spectra", bool(ok), f"(2,3) max diff {mpmath.nstr(worst, 3)}")


def test_criterion_12_biorthogonality():
    rep = shoot.biorthogonality_check((F(1, 4), F(1), F(7, 4)), 2, prec_bits=96)
    worst = rep.max_off_diagonal()
    diag_ok = all(rep.normalized[i][i] == 1 for i in range(3))
    report(12, "biorthogonality of direct and adjoint eigenfunctions", diag_ok and worst < mpmath.mpf(1e-6), f"max off-diag {mpmath.nstr(worst, 3)}")
