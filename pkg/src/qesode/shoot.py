"""Series-seeded shooting for the second-, third- and n-th order eigenproblems.

The eigenvalue condition is posed as a square matching problem at a midpoint
x_m: the boundary condition at the origin admits a d0-dimensional subspace of
local solutions (seeded by convergent Frobenius series, which for these
problems have infinite radius and are therefore evaluated *directly* at x_m),
while the boundary condition at infinity admits order - d0 decaying
directions, integrated backward from a point x_R where the exponential factor
has dropped by a prescribed number of decades (backward integration keeps the
decaying directions dominant, so seeding with the leading WKB jet is stable).
Eigenvalues are the zeros of the resulting order x order determinant,
bracketed by a sign scan in the energy and refined by Illinois iteration
inside exact brackets.

Resonant problems (indicial exponents differing by a multiple of the series
step, which is where the hidden QES sectors live) use a different functional:
the backward-integrated decaying solution is decomposed near the origin
against the local basis {resonant solution with its log channel, companion,
remaining exponents}, and the eigenvalue condition is the vanishing of the
total log coefficient a(E) * c(E).  Roots of the exact obstruction factor
c(E) are tagged as the QES channel; roots of the decomposition coefficient
a(E) reproduce the spectrum of the same equation with the regular boundary
behaviour.

Everything numeric carries its precision in bits; determinant evaluations at
different energies are independent.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from fractions import Fraction

import mpmath

from . import taylor
from .bdpoly import EPolynomial, isolate_real_roots
from .frobenius import (
    FrobeniusSolution,
    NonResonantProblemError,
    family_for,
    frobenius_series,
    resonant_pair,
)
from .params import (
    GeneralProblem,
    SexticProblem,
    ThirdOrderProblem,
    alpha_from_g,
    as_fraction,
    kappa,
)


class ShootingError(RuntimeError):
    """Integration or decomposition failed; the message carries diagnostics."""


class ScanWindowWarning(UserWarning):
    """The energy scan ended before the requested number of levels was found."""


@dataclass(frozen=True)
class BVPSpec:
    """Numerical posing of one boundary-value eigenproblem.

    ``origin_exponents`` spans the admissible subspace at the origin (d0 of
    them) and ``decay`` names the infinity behaviour used for backward seeds.
    The invariant d0 + (decaying directions) = ODE order makes the matching
    determinant square.  ``x0`` anchors quadrature and resonant decomposition;
    series seeds themselves are evaluated at the matching point x_m.  ``xr``
    of None means: choose adaptively so the exponential factor falls by
    ``decay_decades`` decades beyond the classical turning point.
    """

    origin_exponents: tuple[Fraction, ...]
    decay: str
    x0: float = 0.01
    xm: float = 1.0
    xr: float | None = None
    prec_bits: int = 128
    eigen_tol: mpmath.mpf = mpmath.mpf(1e-10)
    scan_start: float | None = None
    scan_stop: float | None = None
    scan_step: float | None = None
    decay_decades: int | None = None
    series_terms: int = 160

    def __post_init__(self):
        if not 0 < self.x0 < self.xm:
            raise ValueError("points must satisfy 0 < x0 < xm")
        if self.xr is not None and not self.xm < self.xr:
            raise ValueError("points must satisfy xm < xr")

    def tolerance_profile(self) -> dict:
        return {
            "prec_bits": self.prec_bits,
            "eigen_tol": float(self.eigen_tol),
            "decay_decades": self.decay_decades,
        }


@dataclass(frozen=True)
class EigenvalueEstimate:
    """A certified eigenvalue: bracketing interval, scaled residual, provenance."""

    value: mpmath.mpf
    bracket: tuple[mpmath.mpf, mpmath.mpf]
    residual: mpmath.mpf
    method: str
    index: int
    prec_bits: int
    channel: str | None = None
    suspected_multiple: bool = False

    def to_json(self) -> dict:
        out = {
            "value": mpmath.nstr(self.value, 24),
            "bracket": [mpmath.nstr(self.bracket[0], 24), mpmath.nstr(self.bracket[1], 24)],
            "residual": mpmath.nstr(self.residual, 5),
            "method": self.method,
            "index": self.index,
            "prec_bits": self.prec_bits,
        }
        if self.channel:
            out["channel"] = self.channel
        if self.suspected_multiple:
            out["suspected_multiple"] = True
        return out


# ---------------------------------------------------------------------------
# ODE systems and infinity seeds
# ---------------------------------------------------------------------------


def _sextic_system(problem: SexticProblem, E) -> taylor.LinearSystem:
    q = {6: Fraction(1), 2: problem.alpha, 0: -mpmath.mpf(E)}
    ll = problem.angular_coefficient
    if ll:
        q[-2] = ll
    return taylor.LinearSystem(2, (((1, {0: 1}),), ((0, q),)))


def _third_system(problem: ThirdOrderProblem, Ebar) -> taylor.LinearSystem:
    # phi''' = (+-Ebar) phi -+ x^3 phi + G phi'/x^2 - (L_eff + G) phi/x^3;
    # the x^-3 weight -(L_eff + G) equals e3 for the direct problem and the
    # adjoint-exponent product for the flipped one, so one formula serves both.
    G = problem.G
    L = problem.L_effective
    Ebar = mpmath.mpf(Ebar)
    if problem.adjoint:
        row = {0: -Ebar, 3: Fraction(1), -3: -(L + G)}
    else:
        row = {0: Ebar, 3: Fraction(-1), -3: -(L + G)}
    return taylor.LinearSystem(
        3, (((1, {0: 1}),), ((2, {0: 1}),), ((0, row), (1, {-2: G})))
    )


def _chain_system(problem: GeneralProblem, E) -> taylor.LinearSystem:
    n = problem.n
    sgn = problem.chain_sign
    rows = []
    for k in range(n - 1):
        rows.append(((k, {-1: problem.g[k] - k}), (k + 1, {0: Fraction(1)})))
    last = (
        (n - 1, {-1: problem.g[n - 1] - (n - 1)}),
        (0, {0: sgn * mpmath.mpf(E), problem.potential_power: Fraction(-sgn)}),
    )
    rows.append(last)
    return taylor.LinearSystem(n, tuple(rows))


def _system_for(problem, E) -> taylor.LinearSystem:
    if isinstance(problem, SexticProblem):
        return _sextic_system(problem, E)
    if isinstance(problem, ThirdOrderProblem):
        return _third_system(problem, E)
    if isinstance(problem, GeneralProblem):
        return _chain_system(problem, E)
    raise TypeError(f"no ODE system for {type(problem).__name__}")


def _chain_transform_rows(problem: GeneralProblem) -> list[list[dict]]:
    """Rows expressing the chain state v_k in terms of the derivative jet of psi.

    v_1 = psi and v_(k+1) = v_k' - ((g_(k-1) - (k-1))/x) v_k, so each row is a
    list of Laurent polynomials (one per derivative order) built recursively.
    """
    rows = [[{0: Fraction(1)}]]
    for k in range(problem.n - 1):
        prev = rows[-1]
        nxt = [dict() for _ in range(len(prev) + 1)]
        a = problem.g[k] - k
        for d, poly in enumerate(prev):
            for p, c in poly.items():
                # derivative of c x^p psi^(d): c' x^(p-1) psi^(d) + c x^p psi^(d+1)
                if p:
                    nxt[d][p - 1] = nxt[d].get(p - 1, Fraction(0)) + p * c
                nxt[d + 1][p] = nxt[d + 1].get(p, Fraction(0)) + c
                nxt[d][p - 1] = nxt[d].get(p - 1, Fraction(0)) - a * c
        rows.append(nxt)
    return rows


def _jet_to_chain(problem: GeneralProblem, jet: list, x) -> list:
    """Map (psi, psi', ..., psi^(n-1)) at x to the chain coordinates (v_1..v_n)."""
    x = mpmath.mpf(x)
    out = []
    for row in _chain_transform_rows(problem):
        acc = mpmath.mpf(0)
        for d, poly in enumerate(row):
            if d < len(jet):
                acc += jet[d] * _laurent_eval(
                    {p: mpmath.mpf(c.numerator) / c.denominator for p, c in poly.items()}, x
                )
        out.append(acc)
    return out


def _state_jet(problem, jet: list, x) -> list:
    """Derivative jet -> the coordinates the problem's first-order system evolves."""
    if isinstance(problem, GeneralProblem):
        return _jet_to_chain(problem, jet, x)
    return jet


def _laurent_diff(d: dict) -> dict:
    return {p - 1: p * c for p, c in d.items() if p != 0}


def _laurent_mul(a: dict, b: dict, floor: int = -14) -> dict:
    out: dict = {}
    for p, c in a.items():
        for q, d in b.items():
            if p + q >= floor:
                out[p + q] = out.get(p + q, 0) + c * d
    return out


def _laurent_eval(d: dict, x):
    return sum(c * x**p for p, c in d.items())


def _wkb_jets(sprime: dict, x, depth: int) -> list:
    """Jet (1, psi'/psi, psi''/psi, ...) for psi = exp(S), S' given as a Laurent poly."""
    laurents = [{0: 1}]
    for _ in range(depth - 1):
        prev = laurents[-1]
        nxt = _laurent_diff(prev)
        for p, c in _laurent_mul(prev, sprime).items():
            nxt[p] = nxt.get(p, 0) + c
        laurents.append(nxt)
    return [_laurent_eval(d, x) for d in laurents]


def _infinity_seed_jets(problem, E, x) -> list[list]:
    """Backward seeds at x = x_R, one per decaying direction, as real jets."""
    x = mpmath.mpf(x)
    if isinstance(problem, SexticProblem):
        a = mpmath.mpf(problem.wkb_power.numerator) / problem.wkb_power.denominator
        ll = problem.angular_coefficient
        c = (a * a - a - mpmath.mpf(ll.numerator) / ll.denominator) / 2 if ll else (a * a - a) / 2
        sp = {3: mpmath.mpf(-1), -1: a, -3: mpmath.mpf(E) / 2, -5: c}
        return [_wkb_jets(sp, x, 2)]
    if isinstance(problem, ThirdOrderProblem):
        if not problem.adjoint:
            sp = {1: mpmath.mpf(-1), -1: mpmath.mpf(-1), -2: mpmath.mpf(E) / 3}
            return [_wkb_jets(sp, x, 3)]
        omega = mpmath.expjpi(mpmath.mpf(2) / 3)
        sp = {1: omega, -1: mpmath.mpc(-1), -2: -mpmath.mpf(E) * omega / 3}
        jets = _wkb_jets(sp, x, 3)
        return [[v.real for v in jets], [v.imag for v in jets]]
    if isinstance(problem, GeneralProblem):
        a = problem.decay_prefactor_power
        sp = {problem.M: mpmath.mpf(-1), -1: mpmath.mpf(a.numerator) / a.denominator}
        return [_wkb_jets(sp, x, problem.n)]
    raise TypeError(f"no infinity seeds for {type(problem).__name__}")


def _choose_xr(problem, e_scale, decades: int) -> mpmath.mpf:
    """x_R where the decay factor is `decades` decades below its turning-point value."""
    if isinstance(problem, SexticProblem):
        k, c = 4, mpmath.mpf(0.25)
        tp = max(mpmath.mpf(1), abs(mpmath.mpf(e_scale)) ** (mpmath.mpf(1) / 6))
    elif isinstance(problem, ThirdOrderProblem):
        k = 2
        c = mpmath.mpf(0.25) if problem.adjoint else mpmath.mpf(0.5)
        tp = max(mpmath.mpf(1), abs(mpmath.mpf(e_scale)) ** (mpmath.mpf(1) / 3))
    elif isinstance(problem, GeneralProblem):
        k = problem.M + 1
        c = mpmath.mpf(1) / (problem.M + 1)
        tp = max(mpmath.mpf(1), abs(mpmath.mpf(e_scale)) ** (mpmath.mpf(1) / problem.potential_power))
    else:
        raise TypeError(f"no decay model for {type(problem).__name__}")
    target = tp**k + decades * mpmath.log(10) / c
    return target ** (mpmath.mpf(1) / k)


# ---------------------------------------------------------------------------
# origin-side jets: direct series evaluation (the series are entire)
# ---------------------------------------------------------------------------


def _series_jet(sol: FrobeniusSolution, x, depth: int) -> list:
    """Fast jet of a log-free series solution, incremental in the step power."""
    x = mpmath.mpf(x)
    step_pow = x**sol.step
    out = [mpmath.mpf(0)] * depth
    e0 = mpmath.mpf(sol.exponent.numerator) / sol.exponent.denominator
    for d in range(depth):
        xp = x ** (e0 - d)
        acc = mpmath.mpf(0)
        for m, cf in enumerate(sol.coefficients):
            e = sol.exponent + sol.step * m
            ff = 1
            for i in range(d):
                ff *= e - i
            if ff:
                c = cf if not isinstance(cf, Fraction) else mpmath.mpf(cf.numerator) / cf.denominator
                acc += c * (mpmath.mpf(ff.numerator) / ff.denominator if isinstance(ff, Fraction) else ff) * xp
            xp *= step_pow
        out[d] = acc
    return out


def _log_solution_jet(tilde: FrobeniusSolution, x, depth: int) -> list:
    """Jet of psi_tilde = S + c log(x) companion."""
    x = mpmath.mpf(x)
    base = _series_jet(tilde, x, depth)
    if not tilde.has_log:
        return base
    comp = _series_jet(tilde.log_companion, x, depth)
    c = tilde.log_coefficient
    c = mpmath.mpf(c.numerator) / c.denominator if isinstance(c, Fraction) else mpmath.mpf(c)
    logx = mpmath.log(x)
    for d in range(depth):
        extra = comp[d] * logx
        fact = mpmath.mpf(1)
        for i in range(1, d + 1):
            dlog = (-1) ** (i - 1) * fact / x**i
            extra += mpmath.binomial(d, i) * dlog * comp[d - i]
            fact *= i
        base[d] += c * extra
    return base


def _origin_series(problem, E, exponent, spec: BVPSpec, x_eval) -> FrobeniusSolution:
    """Series from one indicial root, long enough that its tail at x_eval is negligible."""
    family = family_for(problem, mpmath.mpf(E))
    N = 48
    target = mpmath.mpf(2) ** (-(spec.prec_bits - 8))
    while True:
        sol = frobenius_series(family, exponent, N=N)
        if sol.tail_ratio(x_eval) < target or N >= spec.series_terms * 4:
            return sol
        N = min(max(N * 2, N + 32), spec.series_terms * 4)


# ---------------------------------------------------------------------------
# matching determinant and root search
# ---------------------------------------------------------------------------


def _det(mat: list[list]) -> mpmath.mpf:
    n = len(mat)
    if n == 1:
        return mat[0][0]
    if n == 2:
        return mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]
    if n == 3:
        a, b, c = mat[0]
        d, e, f = mat[1]
        g, h, i = mat[2]
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    m = [row[:] for row in mat]
    det = mpmath.mpf(1)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(m[r][col]))
        if m[piv][col] == 0:
            return mpmath.mpf(0)
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        det *= m[col][col]
        inv = 1 / m[col][col]
        for r in range(col + 1, n):
            fac = m[r][col] * inv
            if fac:
                for cc in range(col, n):
                    m[r][cc] -= fac * m[col][cc]
    return det


def _normalized_columns(cols: list[list]) -> list[list]:
    out = []
    for col in cols:
        scale = max(abs(v) for v in col)
        if scale == 0:
            raise ShootingError("zero column in matching matrix")
        out.append([v / scale for v in col])
    return out


def _matching_value(problem, E, spec: BVPSpec, xr) -> mpmath.mpf:
    """Determinant of [origin-admissible jets | backward decaying jets] at x_m."""
    order = _system_for(problem, 0).size
    xm = mpmath.mpf(spec.xm)
    cols = []
    for s in spec.origin_exponents:
        sol = _origin_series(problem, E, s, spec, xm)
        cols.append(_state_jet(problem, _series_jet(sol, xm, order), xm))
    system = _system_for(problem, E)
    for seed in _infinity_seed_jets(problem, E, xr):
        try:
            y, _ = taylor.integrate(system, xr, xm, _state_jet(problem, seed, xr), spec.prec_bits)
        except Exception as exc:  # noqa: BLE001 - annotate with context
            raise ShootingError(f"backward integration failed at E = {E}: {exc}") from exc
        cols.append(y)
    cols = _normalized_columns(cols)
    return _det([[col[i] for col in cols] for i in range(order)])


def _illinois(F, a, b, fa, fb, tol, max_iter: int = 120):
    """Bracketed root refinement; returns (root, bracket, f(root), slope)."""
    a, b = mpmath.mpf(a), mpmath.mpf(b)
    side = 0
    froot = fa
    root = a
    for _ in range(max_iter):
        if b - a <= tol:
            break
        denom = fb - fa
        m = (a + b) / 2 if denom == 0 else (a * fb - b * fa) / denom
        if not (a < m < b):
            m = (a + b) / 2
        # guard against stalling at an endpoint
        width = b - a
        m = min(max(m, a + width / 64), b - width / 64)
        fm = F(m)
        if fm == 0:
            a = b = m
            froot = fm
            break
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
            if side == -1:
                fb /= 2
            side = -1
        else:
            b, fb = m, fm
            if side == 1:
                fa /= 2
            side = 1
        froot = fm
    root = (a + b) / 2
    slope = (fb - fa) / (b - a) if b > a else mpmath.mpf(1)
    return root, (a, b), froot, slope


def _scan_eigenvalues(F, spec: BVPSpec, k_max: int, label: str):
    """Walk the window, bracket sign changes, refine each; warn if the window runs out."""
    if k_max <= 0:
        return []
    start = mpmath.mpf(spec.scan_start)
    stop = mpmath.mpf(spec.scan_stop)
    step = mpmath.mpf(spec.scan_step)
    found = []
    e_prev = start
    f_prev = F(e_prev)
    e = start + step
    while e_prev < stop and len(found) < k_max:
        fe = F(e)
        if fe == 0 or (fe > 0) != (f_prev > 0):
            root, bracket, froot, slope = _illinois(F, e_prev, e, f_prev, fe, spec.eigen_tol)
            residual = abs(froot / slope) if slope else mpmath.mpf(0)
            residual = max(residual, (bracket[1] - bracket[0]) / 2)
            found.append(
                EigenvalueEstimate(
                    value=root,
                    bracket=bracket,
                    residual=residual,
                    method=label,
                    index=len(found),
                    prec_bits=spec.prec_bits,
                    suspected_multiple=abs(slope) < mpmath.mpf(1e-8) * max(abs(f_prev), abs(fe)),
                )
            )
        e_prev, f_prev = e, fe
        e = e + step
    if len(found) < k_max:
        warnings.warn(
            f"scan window [{float(start)}, {float(stop)}] yielded {len(found)} of "
            f"{k_max} requested levels; returning the partial list",
            ScanWindowWarning,
            stacklevel=2,
        )
    return found


def _check_disjoint_sorted(estimates):
    for a, b in zip(estimates, estimates[1:]):
        if not a.value < b.value or not a.bracket[1] <= b.bracket[0]:
            raise ShootingError("eigenvalue brackets overlap; decrease the scan step")


# ---------------------------------------------------------------------------
# spectrum drivers
# ---------------------------------------------------------------------------


def _sextic_scan_window(problem: SexticProblem, k_max: int) -> tuple[float, float, float]:
    alpha = problem.alpha
    lo = mpmath.mpf(-3)
    if alpha < 0:
        a = mpmath.mpf(alpha.numerator) / alpha.denominator
        vmin = (2 * a / 3) * mpmath.sqrt(-a / 3)
        lo = vmin * mpmath.mpf("1.1") - 3
    labs = abs(mpmath.mpf(problem.l.numerator) / problem.l.denominator)
    hi = 16 + 14 * mpmath.mpf(k_max) ** mpmath.mpf(1.5) + 3 * labs
    return (float(lo), float(hi), 1.0)


def default_spec(problem, k_max: int = 4, prec_bits: int = 128, **overrides) -> BVPSpec:
    """A reasonable BVPSpec for the given problem: exponent subspace, window, x_R policy."""
    if isinstance(problem, SexticProblem):
        exps = (problem.boundary_exponent,)
        lo, hi, st = _sextic_scan_window(problem, k_max)
        decay = "x^a exp(-x^4/4)"
    elif isinstance(problem, ThirdOrderProblem):
        e = problem.exponents
        # the admissible subspace follows the exponent *labels* (the analytic
        # continuation of the ordered configuration): g1 and g2 for the direct
        # problem, 2 - g0 alone for the adjoint
        exps = (e[0],) if problem.adjoint else tuple(sorted((e[1], e[2])))
        alpha, l = alpha_from_g(problem.g0, problem.g2)
        lo, hi, st = _sextic_scan_window(SexticProblem(alpha, l), k_max)
        k = float(kappa())
        lo, hi, st = lo / k, hi / k, st / k
        decay = "x^-1 exp(-x^2/2)" if not problem.adjoint else "x^-1 exp(-x^2/4) (pair)"
    elif isinstance(problem, GeneralProblem):
        exps = tuple(sorted(problem.g[1:]))
        if problem.n == 2 and problem.M == 3:
            lo, hi, st = _sextic_scan_window(SexticProblem(0, -problem.g[0]), k_max)
        elif problem.n == 3 and problem.M == 1:
            alpha, l = alpha_from_g(problem.g[0], problem.g[2])
            lo, hi, st = _sextic_scan_window(SexticProblem(alpha, l), k_max)
            k = float(kappa())
            lo, hi, st = lo / k, hi / k, st / k
        else:
            lo, hi, st = (-20.0, 60.0 + 25.0 * k_max, 1.5)
        decay = "x^((1-n)M/2) exp(-x^(M+1)/(M+1))"
    else:
        raise TypeError(f"no default spec for {type(problem).__name__}")
    decades = overrides.pop("decay_decades", None) or max(30, int(prec_bits * 0.30) + 10)
    spec = BVPSpec(
        origin_exponents=exps,
        decay=decay,
        prec_bits=prec_bits,
        scan_start=lo,
        scan_stop=hi,
        scan_step=st,
        decay_decades=decades,
    )
    return replace(spec, **overrides) if overrides else spec


def _resolve_spec(problem, k_max, spec, prec_bits=128) -> BVPSpec:
    if spec is None:
        return default_spec(problem, k_max, prec_bits)
    return spec


def _run_matching_spectrum(problem, k_max, spec, label):
    e_scale = max(abs(mpmath.mpf(spec.scan_start)), abs(mpmath.mpf(spec.scan_stop)))
    xr = mpmath.mpf(spec.xr) if spec.xr else _choose_xr(problem, e_scale, spec.decay_decades)

    def F(E):
        return _matching_value(problem, E, spec, xr)

    with mpmath.workprec(spec.prec_bits):
        found = _scan_eigenvalues(F, spec, k_max, label)
        _check_disjoint_sorted(found)
    return found


def spectrum_sextic(problem: SexticProblem, k_max: int, spec: BVPSpec | None = None):
    """First k_max eigenvalues of the sextic problem with the regular boundary condition.

    The matching function is the Wronskian of the origin-series solution and
    the backward-integrated decaying solution at x_m.  Resonant parameter
    points (boundary exponent the smaller of a resonant pair) must go through
    :func:`irregular_spectrum_sextic` instead.
    """
    if problem.resonance_order() is not None and problem.boundary_exponent == min(
        problem.indicial_exponents
    ):
        raise NonResonantProblemError(
            "boundary exponent is the small member of a resonant pair; "
            "use irregular_spectrum_sextic for the log-channel condition"
        )
    spec = _resolve_spec(problem, k_max, spec)
    return _run_matching_spectrum(problem, k_max, spec, "wronskian-shooting")


def spectrum_third(problem: ThirdOrderProblem, k_max: int, spec: BVPSpec | None = None):
    """First k_max eigenvalues Ebar of the third-order problem (or its adjoint).

    Ordered exponent triples use the 3x3 matching determinant.  At resonant
    triples (the hidden QES loci) the boundary exponent is the small member of
    a resonant pair and the log-channel condition a(E)c(E) = 0 is used, with
    each root tagged "qes" or "regular".
    """
    spec = _resolve_spec(problem, k_max, spec)
    beta = problem.boundary_exponent
    resonant = [(i, j, J) for (i, j, J) in problem.resonances() if problem.exponents[i] == beta]
    if resonant:
        if problem.adjoint:
            raise NonResonantProblemError(
                "resonant adjoint spectra are not posed here: the adjoint problem has "
                "two decaying directions, so the log-channel functional is not scalar"
            )
        return _log_channel_spectrum(problem, k_max, spec)
    return _run_matching_spectrum(problem, k_max, spec, "matching-determinant")


def spectrum_general(problem: GeneralProblem, k_max: int, spec: BVPSpec | None = None):
    """First k_max eigenvalues of the n-th order chain problem.

    The admissible origin subspace has dimension n-1 (all sorted exponents at
    or above the boundary label) and the single maximally-decaying direction
    is integrated backward.  Resonances involving the boundary exponent are
    delegated to the log-channel condition, exactly as for the third-order
    family.
    """
    spec = _resolve_spec(problem, k_max, spec)
    beta = problem.boundary_exponent
    step = problem.n
    resonant_J = None
    for other in problem.g:
        d = other - beta
        if d > 0 and d.denominator == 1 and int(d) % step == 0:
            resonant_J = int(d) // step
            break
    if resonant_J is not None:
        return _log_channel_spectrum(problem, k_max, spec)
    return _run_matching_spectrum(problem, k_max, spec, "matching-determinant")


# ---------------------------------------------------------------------------
# the log-channel (resonant / irregular) condition
# ---------------------------------------------------------------------------


def _log_channel_value(problem, E, spec: BVPSpec, xr, retries: int = 2):
    """(a(E), basis condition estimate): decompose the decaying solution near x0.

    The local basis is {psi_tilde (with log), companion, other exponents}; the
    decaying solution's coefficient along psi_tilde is a(E).  The total log
    content of the decaying solution is then a(E) * c(E).
    """
    order = _system_for(problem, 0).size
    beta_low, J = _resonant_low_and_J(problem)
    xd = mpmath.mpf(spec.x0)
    prec = spec.prec_bits
    cond = mpmath.inf
    for attempt in range(retries + 1):
        with mpmath.workprec(prec):
            family = family_for(problem, mpmath.mpf(E))
            N = max(32, spec.series_terms // 2)
            tilde, companion = resonant_pair(family, beta_low, J, N=N)
            basis = [
                _state_jet(problem, _log_solution_jet(tilde, xd, order), xd),
                _state_jet(problem, _series_jet(companion, xd, order), xd),
            ]
            for s in _other_exponents(problem, beta_low, J):
                sol = _origin_series(problem, E, s, spec, xd)
                basis.append(_state_jet(problem, _series_jet(sol, xd, order), xd))
            system = _system_for(problem, E)
            seeds = _infinity_seed_jets(problem, E, xr)
            if len(seeds) != 1:
                raise ShootingError("log-channel condition requires a single decaying direction")
            y, _ = taylor.integrate(system, xr, xd, _state_jet(problem, seeds[0], xr), prec)
            scales = [max(abs(v) for v in col) for col in basis]
            mat = [[basis[j][i] / scales[j] for j in range(order)] for i in range(order)]
            rhs = list(y)
            det_full = _det(mat)
            cond = _condition_estimate(mat, det_full)
            if cond > mpmath.mpf(2) ** (prec // 2) and attempt < retries:
                prec = prec * 3 // 2
                continue
            sol = _solve_linear(mat, rhs)
            a_coeff = sol[0] / scales[0]
            return a_coeff, cond
    raise ShootingError(
        f"decomposition stayed ill-conditioned after precision retries "
        f"(condition estimate {mpmath.nstr(cond, 4)} at {prec} bits)"
    )


def _condition_estimate(mat, det_value):
    norm = mpmath.mpf(0)
    for row in mat:
        norm = max(norm, sum(abs(v) for v in row))
    if det_value == 0:
        return mpmath.inf
    return norm ** len(mat) / abs(det_value)


def _solve_linear(mat, rhs):
    n = len(mat)
    m = [row[:] + [rhs[i]] for i, row in enumerate(mat)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(m[r][col]))
        if m[piv][col] == 0:
            raise ShootingError("singular decomposition basis")
        m[col], m[piv] = m[piv], m[col]
        inv = 1 / m[col][col]
        for r in range(n):
            if r != col and m[r][col]:
                fac = m[r][col] * inv
                for cc in range(col, n + 1):
                    m[r][cc] -= fac * m[col][cc]
    return [m[i][n] / m[i][i] for i in range(n)]


def _resonant_low_and_J(problem):
    if isinstance(problem, SexticProblem):
        J = problem.resonance_order()
        if J is None:
            raise NonResonantProblemError("problem is not resonant")
        return min(problem.indicial_exponents), J
    if isinstance(problem, ThirdOrderProblem):
        beta = problem.boundary_exponent
        for i, j, J in problem.resonances():
            if problem.exponents[i] == beta:
                return beta, J
        raise NonResonantProblemError("boundary exponent is not resonant")
    if isinstance(problem, GeneralProblem):
        beta = problem.boundary_exponent
        for other in problem.g:
            d = other - beta
            if d > 0 and d.denominator == 1 and int(d) % problem.n == 0:
                return beta, int(d) // problem.n
        raise NonResonantProblemError("boundary exponent is not resonant")
    raise TypeError


def _other_exponents(problem, beta_low, J):
    if isinstance(problem, SexticProblem):
        return []
    if isinstance(problem, ThirdOrderProblem):
        sigma = beta_low + 3 * J
        return [e for e in problem.exponents if e not in (beta_low, sigma)]
    sigma = beta_low + problem.n * J
    return [e for e in problem.g if e not in (beta_low, sigma)]


def _log_channel_spectrum(problem, k_max, spec, label="log-channel"):
    from .frobenius import resonant_log_coefficient

    c_poly = resonant_log_coefficient(problem)
    c_roots = isolate_real_roots(c_poly, spec.prec_bits) if c_poly.degree >= 1 else None
    e_scale = max(abs(mpmath.mpf(spec.scan_start)), abs(mpmath.mpf(spec.scan_stop)))
    xr = mpmath.mpf(spec.xr) if spec.xr else _choose_xr(problem, e_scale, spec.decay_decades)

    def F(E):
        a, _ = _log_channel_value(problem, E, spec, xr)
        return a * c_poly(mpmath.mpf(E))

    with mpmath.workprec(spec.prec_bits):
        found = _scan_eigenvalues(F, spec, k_max, label)
        _check_disjoint_sorted(found)
        tagged = []
        for est in found:
            channel = "regular"
            if c_roots is not None:
                for r in c_roots:
                    if abs(est.value - r.value) <= max(
                        mpmath.mpf(100) * est.residual, mpmath.mpf(100) * spec.eigen_tol
                    ):
                        channel = "qes"
                        break
            tagged.append(replace(est, channel=channel))
    return tagged


def irregular_spectrum_sextic(J: int, l, k_max: int, spec: BVPSpec | None = None):
    """Spectrum of the resonant sextic problem via the vanishing-log condition.

    The problem has alpha = 2J + 4l + 2 and boundary behaviour x^(-J+1/2) at
    the origin.  Zeros of the obstruction factor c(E) are the QES levels
    (tagged "qes"); zeros of the decomposition coefficient a(E) reproduce the
    spectrum of the same equation with the regular x^(J+1/2) behaviour
    (tagged "regular").
    """
    problem = SexticProblem.irregular(J, as_fraction(l))
    if spec is None:
        base = default_spec(problem, k_max)
        # QES levels can dip below the potential minimum; widen using the
        # root bound of the obstruction polynomial.
        from .frobenius import resonant_log_coefficient

        c_poly = resonant_log_coefficient(problem)
        bound = _fujiwara_bound(c_poly)
        spec = replace(base, scan_start=float(min(mpmath.mpf(base.scan_start), -bound - 2)))
    return _log_channel_spectrum(problem, k_max, spec)


def _fujiwara_bound(p: EPolynomial) -> mpmath.mpf:
    """Fujiwara's bound on the magnitude of any root of p."""
    n = p.degree
    lead = abs(p.leading)
    best = mpmath.mpf(0)
    for i, c in enumerate(p.coeffs[:-1]):
        if c:
            ratio = abs(c) / lead
            val = mpmath.mpf(ratio.numerator) / ratio.denominator
            best = max(best, val ** (mpmath.mpf(1) / (n - i)))
    return 2 * best


# ---------------------------------------------------------------------------
# isospectrality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IsospectralPair:
    index: int
    sextic: mpmath.mpf | None
    third: mpmath.mpf | None
    scaled_third: mpmath.mpf | None
    abs_difference: mpmath.mpf | None

    @property
    def relative_error(self) -> mpmath.mpf | None:
        if self.abs_difference is None:
            return None
        scale = max(abs(self.sextic), mpmath.mpf(1))
        return self.abs_difference / scale

    def to_json(self):
        f = lambda v: None if v is None else mpmath.nstr(v, 24)  # noqa: E731
        return {
            "index": self.index,
            "E_sextic": f(self.sextic),
            "Ebar_third": f(self.third),
            "kappa_Ebar": f(self.scaled_third),
            "abs_diff": f(self.abs_difference),
            "rel_diff": None if self.relative_error is None else mpmath.nstr(self.relative_error, 6),
        }


@dataclass(frozen=True)
class IsospectralReport:
    alpha: Fraction
    l: Fraction
    g: tuple[Fraction, Fraction, Fraction]
    pairs: tuple[IsospectralPair, ...]
    max_abs_difference: mpmath.mpf
    level_counts: tuple[int, int]

    @property
    def has_gaps(self) -> bool:
        return self.level_counts[0] != self.level_counts[1]

    def to_json(self):
        from .params import rational_str

        return {
            "alpha": rational_str(self.alpha),
            "l": rational_str(self.l),
            "g": [rational_str(v) for v in self.g],
            "pairs": [p.to_json() for p in self.pairs],
            "max_abs_difference": mpmath.nstr(self.max_abs_difference, 8),
            "level_counts": list(self.level_counts),
        }


def isospectral_report(alpha, l, k_max: int, spec_sextic=None, spec_third=None, prec_bits: int = 128):
    """Pair the sextic spectrum at (alpha, l) with the third-order spectrum at its image.

    Levels pair index-by-index as E_k = kappa * Ebar_k; a level-count mismatch
    produces explicit gap entries rather than a silent re-pairing.
    """
    from .params import g_from_alpha

    alpha = as_fraction(alpha)
    l = as_fraction(l)
    g = g_from_alpha(alpha, l)
    sextic = SexticProblem(alpha, l)
    third = ThirdOrderProblem(*g)
    if k_max <= 0:
        return IsospectralReport(alpha, l, g, (), mpmath.mpf(0), (0, 0))
    ev2 = spectrum_sextic(sextic, k_max, _resolve_spec(sextic, k_max, spec_sextic, prec_bits))
    ev3 = spectrum_third(third, k_max, _resolve_spec(third, k_max, spec_third, prec_bits))
    with mpmath.workprec(prec_bits):
        k = kappa()
        pairs = []
        worst = mpmath.mpf(0)
        for i in range(max(len(ev2), len(ev3))):
            e = ev2[i].value if i < len(ev2) else None
            b = ev3[i].value if i < len(ev3) else None
            sk = k * b if b is not None else None
            diff = abs(e - sk) if (e is not None and sk is not None) else None
            if diff is not None:
                worst = max(worst, diff)
            pairs.append(IsospectralPair(i, e, b, sk, diff))
    return IsospectralReport(alpha, l, g, tuple(pairs), worst, (len(ev2), len(ev3)))


# ---------------------------------------------------------------------------
# biorthogonality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BiorthogonalityReport:
    g: tuple[Fraction, Fraction, Fraction]
    eigenvalues: tuple
    raw: tuple
    normalized: tuple
    head_exponent: Fraction

    def max_off_diagonal(self) -> mpmath.mpf:
        worst = mpmath.mpf(0)
        n = len(self.normalized)
        for i in range(n):
            for j in range(n):
                if i != j:
                    worst = max(worst, abs(self.normalized[i][j]))
        return worst

    def to_json(self):
        from .params import rational_str

        return {
            "g": [rational_str(v) for v in self.g],
            "eigenvalues": [mpmath.nstr(v, 20) for v in self.eigenvalues],
            "raw": [[mpmath.nstr(v, 12) for v in row] for row in self.raw],
            "normalized": [[mpmath.nstr(v, 12) for v in row] for row in self.normalized],
            "head_exponent": rational_str(self.head_exponent),
        }


def _eigenfunction_data(problem, E, spec: BVPSpec, xr):
    """Combination coefficients of an eigenfunction at eigenvalue E.

    Returns (origin series list, origin coefficients, combined backward seed)
    with scales consistent across the matching point; the seed is in the
    coordinates the problem's first-order system evolves.
    """
    order = _system_for(problem, 0).size
    xm = mpmath.mpf(spec.xm)
    series = []
    cols = []
    for s in spec.origin_exponents:
        sol = _origin_series(problem, E, s, spec, xm)
        series.append(sol)
        cols.append(_state_jet(problem, _series_jet(sol, xm, order), xm))
    system = _system_for(problem, E)
    seeds = [_state_jet(problem, seed, xr) for seed in _infinity_seed_jets(problem, E, xr)]
    back_cols = []
    for seed in seeds:
        y, _ = taylor.integrate(system, xr, xm, seed, spec.prec_bits)
        back_cols.append(y)
    all_cols = cols + back_cols
    scales = [max(abs(v) for v in col) for col in all_cols]
    mat = [[all_cols[j][i] / scales[j] for j in range(order)] for i in range(order)]
    v = _nullvector(mat)
    origin_coeffs = [v[i] / scales[i] for i in range(len(cols))]
    inf_coeffs = [-v[len(cols) + i] / scales[len(cols) + i] for i in range(len(back_cols))]
    combined_seed = [
        sum(c * seed[k] for c, seed in zip(inf_coeffs, seeds)) for k in range(order)
    ]
    return series, origin_coeffs, combined_seed


def sample_eigenfunction(problem, E, spec: BVPSpec | None = None, xs=()):
    """Eigenfunction samples [(x, psi(x)), ...] at a certified eigenvalue E.

    Points at or below the matching point are evaluated from the origin-side
    series combination; points beyond it by backward integration of the
    matched decaying combination.  The function is normalised so its largest
    sampled magnitude is 1.  Only non-resonant boundary configurations are
    supported (the resonant channels are spectral tools, not plotting ones).
    """
    spec = _resolve_spec(problem, 1, spec)
    with mpmath.workprec(spec.prec_bits):
        E = mpmath.mpf(E)
        e_scale = abs(E) + 10
        xr = mpmath.mpf(spec.xr) if spec.xr else _choose_xr(problem, e_scale, spec.decay_decades)
        series, coeffs, seed = _eigenfunction_data(problem, E, spec, xr)
        xm = mpmath.mpf(spec.xm)
        inner = sorted(x for x in map(mpmath.mpf, xs) if x <= xm)
        outer = sorted((x for x in map(mpmath.mpf, xs) if x > xm), reverse=True)
        samples = {}
        for x in inner:
            if x <= 0:
                raise ValueError("sample points must be positive")
            samples[x] = _combo_jet(series, coeffs, x, 1)[0]
        system = _system_for(problem, E)
        state = seed
        x_from = xr
        for x in outer:
            if x >= xr:
                raise ValueError(f"sample point {x} is beyond the integration bound {xr}")
            state, _ = taylor.integrate(system, x_from, x, state, spec.prec_bits)
            samples[x] = state[0]
            x_from = x
        peak = max(abs(v) for v in samples.values()) if samples else mpmath.mpf(1)
        return [(x, samples[x] / peak) for x in sorted(samples)]


def _nullvector(mat):
    n = len(mat)
    m = [row[:] for row in mat]
    perm = list(range(n))
    used_rows = []
    for col in range(n - 1):
        piv = max(range(col, n), key=lambda r: abs(m[r][col]))
        if abs(m[piv][col]) == 0:
            break
        m[col], m[piv] = m[piv], m[col]
        inv = 1 / m[col][col]
        for r in range(col + 1, n):
            fac = m[r][col] * inv
            if fac:
                for cc in range(col, n):
                    m[r][cc] -= fac * m[col][cc]
    v = [mpmath.mpf(0)] * n
    v[n - 1] = mpmath.mpf(1)
    for r in range(n - 2, -1, -1):
        acc = -sum(m[r][c] * v[c] for c in range(r + 1, n))
        v[r] = acc / m[r][r] if m[r][r] else mpmath.mpf(0)
    return v


def _head_integral(series_a, coeffs_a, series_b, coeffs_b, x0):
    """Exact term-by-term integral of the two local series' product over (0, x0]."""
    total = mpmath.mpf(0)
    x0 = mpmath.mpf(x0)
    for sa, ca in zip(series_a, coeffs_a):
        for sb, cb in zip(series_b, coeffs_b):
            for ma, fa in enumerate(sa.coefficients):
                for mb, fb in enumerate(sb.coefficients):
                    e = (
                        sa.exponent
                        + sb.exponent
                        + sa.step * ma
                        + sb.step * mb
                    )
                    p = mpmath.mpf(e.numerator) / e.denominator + 1
                    fa_n = mpmath.mpf(fa.numerator) / fa.denominator if isinstance(fa, Fraction) else fa
                    fb_n = mpmath.mpf(fb.numerator) / fb.denominator if isinstance(fb, Fraction) else fb
                    total += ca * cb * fa_n * fb_n * x0**p / p
    return total


def biorthogonality_check(g, n_max: int, spec: BVPSpec | None = None, prec_bits: int = 128):
    """Inner-product matrix of direct and adjoint third-order eigenfunctions.

    Requires the ordered, integrable configuration g0 < g1 < g2 with
    g1 > -1/2; QES-locus triples violate the ordering (their radial problem is
    irregular) and are refused.  Integrals run term-exactly near the origin
    (integrand ~ x^(2-g0+g1)), by Taylor-product quadrature on [x0, xR], and
    the exponential tail beyond xR is dropped after an explicit bound.
    """
    g = tuple(as_fraction(v) for v in g)
    direct = ThirdOrderProblem(*g)
    if not direct.is_ordered:
        raise ValueError(
            "biorthogonality requires the ordering g0 < g1 < g2; QES-locus triples "
            "violate it (the radial problem is irregular) and have no finite norm"
        )
    if not direct.g1 > Fraction(-1, 2):
        raise ValueError("integrability requires g1 > -1/2")
    adjoint = direct.flipped()
    n_levels = n_max + 1
    d_spec = _resolve_spec(direct, n_levels, spec, prec_bits)
    ev = spectrum_third(direct, n_levels, d_spec)
    if len(ev) < n_levels:
        raise ShootingError("not enough direct levels found for the requested matrix size")
    a_spec = default_spec(adjoint, n_levels, prec_bits)
    with mpmath.workprec(prec_bits):
        e_scale = max(abs(e.value) for e in ev) + 10
        xr_d = _choose_xr(direct, e_scale, d_spec.decay_decades)
        xr_a = _choose_xr(adjoint, e_scale, a_spec.decay_decades)
        xr = max(xr_d, xr_a)
        x0 = mpmath.mpf(d_spec.x0)
        xm = mpmath.mpf(d_spec.xm)

        # refine each adjoint eigenvalue near the direct one, then extract data
        def adjoint_F(E):
            return _matching_value(adjoint, E, a_spec, xr)

        phi = []
        chi = []
        chi_params = []
        for est in ev:
            series, coeffs, seed = _eigenfunction_data(direct, est.value, d_spec, xr)
            phi.append((series, coeffs, seed))
            gap = min(
                [abs(est.value - other.value) for other in ev if other is not est] or [mpmath.mpf(2)]
            )
            delta = min(mpmath.mpf(0.2) * gap, mpmath.mpf(1))
            a, b = est.value - delta, est.value + delta
            fa, fb = adjoint_F(a), adjoint_F(b)
            if (fa > 0) == (fb > 0):
                raise ShootingError(
                    f"adjoint spectrum does not bracket the direct level {mpmath.nstr(est.value, 12)}"
                )
            root, _, _, _ = _illinois(adjoint_F, a, b, fa, fb, a_spec.eigen_tol)
            series_a, coeffs_a, seed_a = _eigenfunction_data(adjoint, root, a_spec, xr)
            chi.append((series_a, coeffs_a, seed_a))
            chi_params.append(root)

        raw = [[mpmath.mpf(0)] * n_levels for _ in range(n_levels)]
        for i in range(n_levels):
            for j in range(n_levels):
                chi_series, chi_coeffs, chi_seed = chi[i]
                phi_series, phi_coeffs, phi_seed = phi[j]
                total = _head_integral(chi_series, chi_coeffs, phi_series, phi_coeffs, x0)
                # forward piece [x0, xm] with both states stacked
                sys_c = _system_for(adjoint, chi_params[i])
                sys_p = _system_for(direct, ev[j].value)
                block = taylor.block_diagonal(sys_c, sys_p)
                seed0 = [
                    *_combo_jet(chi_series, chi_coeffs, x0, 3),
                    *_combo_jet(phi_series, phi_coeffs, x0, 3),
                ]
                y_mid, prods = taylor.integrate(
                    block, x0, xm, seed0, prec_bits, product_pairs=((0, 3),)
                )
                total += prods[(0, 3)]
                seed_r = [*chi_seed, *phi_seed]
                y_mid_b, prods_b = taylor.integrate(
                    block, xr, xm, seed_r, prec_bits, product_pairs=((0, 3),)
                )
                total -= prods_b[(0, 3)]
                raw[i][j] = total
        normalized = [
            [raw[i][j] / raw[i][i] for j in range(n_levels)] for i in range(n_levels)
        ]
    return BiorthogonalityReport(
        g,
        tuple(e.value for e in ev),
        tuple(tuple(row) for row in raw),
        tuple(tuple(row) for row in normalized),
        2 - g[0] + g[1],
    )


def _combo_jet(series, coeffs, x, depth):
    out = [mpmath.mpf(0)] * depth
    for sol, c in zip(series, coeffs):
        jet = _series_jet(sol, x, depth)
        for d in range(depth):
            out[d] += c * jet[d]
    return out
