"""Local series solutions at the origin, including logarithmic resonances.

Every problem family here has a regular singular point at x = 0 whose local
solutions step in a fixed power increment nu (2 for the sextic, 3 for the
third-order problem, n in general).  Writing the ODE as Op[psi] = 0 with

    Op[x^s] = I(s) x^(s-order) + (multiplication terms),

a series  psi = sum_m c_m x^(s + nu m)  obeys

    I(s + nu m) c_m = sum_lag w_lag c_(m-lag),

with exact rational I and lag weights that are at most linear in the energy.
When two indicial roots differ by nu*J the small-exponent solution generically
needs a logarithmic term: continuing it through the resonance by minimal
subtraction (the resonant coefficient is set to zero and the blocked part is
routed into log(x) times the companion solution) defines a canonical solution

    psi_tilde = sum_m u_m x^(rho + nu m) + c(E) log(x) * companion(x),

and the scalar c(E) is, as a polynomial in the energy, a rational multiple of
the degree-J obstruction polynomial: its zeros are the hidden QES eigenvalues.
The key operator identity, valid for every family because the power-shifting
part acts diagonally on powers, is

    T[log(x) x^s] = I'(s) x^(s-order) + log(x) T[x^s].

The module also houses the iterative fixed-point construction for the adjoint
third-order solution chi (exponent 2 - g0), its closed-form series with
cumulative denominator products, the regulated double-limit evaluation at the
J = 1 resonance, and the finite double-limit energies at J = 2.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import mpmath

from .bdpoly import EPolynomial, cheng_denominator, cheng_third_sequence
from .params import (
    GeneralProblem,
    SexticProblem,
    ThirdOrderProblem,
    as_fraction,
    g_qes,
)


class NonResonantProblemError(ValueError):
    """Raised when a resonance-only operation meets non-resonant parameters."""


class ResonantDenominatorError(ArithmeticError):
    """A series denominator vanished; carries the resonant power of x."""

    def __init__(self, power):
        self.power = power
        super().__init__(f"resonant denominator at power x^{power}; use the resonant machinery")


class ResonanceObstructionError(ArithmeticError):
    """The pure-power resonant series does not exist at this energy."""

    def __init__(self, obstruction):
        self.obstruction = obstruction
        super().__init__(
            "obstruction does not vanish at this energy "
            f"(value {obstruction}); a logarithmic term is unavoidable"
        )


class GammaPoleError(ValueError):
    """Series normalisation hit a Gamma-function pole (l = -n - 3/2)."""


def _num(value):
    """Coerce an exact rational to mpf at the current precision, pass others through."""
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    if isinstance(value, int):
        return mpmath.mpf(value)
    return value


@dataclass(frozen=True)
class SeriesFamily:
    """Recursion data for one ODE family at fixed parameters and energy.

    ``indicial`` maps an exact exponent to the exact indicial value I(s);
    ``lags`` holds (lag, weight) pairs so that series coefficients satisfy
    I(s + step*m) c_m = sum w_lag c_(m-lag).  Weights may be Fractions, mpf
    numbers, or EPolynomials (symbolic energy).
    """

    step: int
    order: int
    var: str
    indicial: Callable[[Fraction], Fraction]
    indicial_derivative: Callable[[Fraction], Fraction]
    lags: tuple[tuple[int, object], ...]

    def rhs(self, coeffs: Sequence, m: int):
        """sum of w_lag * coeffs[m - lag] over available lags."""
        total = None
        for lag, w in self.lags:
            if m - lag >= 0:
                term = w * coeffs[m - lag]
                total = term if total is None else total + term
        if total is None:
            total = coeffs[0] * 0  # zero of whichever arithmetic is in use
        return total


def _energy_weight(E, sign: int, var: str):
    """Weight sign*E in whichever arithmetic the energy is supplied."""
    if E is None:
        p = EPolynomial.identity(var)
        return p if sign > 0 else -p
    if isinstance(E, (int, Fraction)):
        return as_fraction(E) * sign
    return E * sign


def sextic_family(problem: SexticProblem, E) -> SeriesFamily:
    ll = problem.angular_coefficient
    alpha = problem.alpha

    def indicial(s: Fraction) -> Fraction:
        return s * (s - 1) - ll

    def indicial_derivative(s: Fraction) -> Fraction:
        return 2 * s - 1

    lags = ((1, _energy_weight(E, -1, "E")), (2, alpha), (4, Fraction(1)))
    return SeriesFamily(2, 2, "E", indicial, indicial_derivative, lags)


def third_family(problem: ThirdOrderProblem, Ebar) -> SeriesFamily:
    e0, e1, e2 = problem.exponents
    sign = -1 if problem.adjoint else 1

    def indicial(s: Fraction) -> Fraction:
        return (s - e0) * (s - e1) * (s - e2)

    def indicial_derivative(s: Fraction) -> Fraction:
        return (s - e0) * (s - e1) + (s - e0) * (s - e2) + (s - e1) * (s - e2)

    lags = ((1, _energy_weight(Ebar, sign, "Ebar")), (2, Fraction(-sign)))
    return SeriesFamily(3, 3, "Ebar", indicial, indicial_derivative, lags)


def chain_family(problem: GeneralProblem, E) -> SeriesFamily:
    gs = problem.g
    sign = problem.chain_sign

    def indicial(s: Fraction) -> Fraction:
        out = Fraction(1)
        for g in gs:
            out *= s - g
        return out

    def indicial_derivative(s: Fraction) -> Fraction:
        total = Fraction(0)
        for skip in range(len(gs)):
            part = Fraction(1)
            for k, g in enumerate(gs):
                if k != skip:
                    part *= s - g
            total += part
        return total

    lags = ((1, _energy_weight(E, sign, "E")), (1 + problem.M, Fraction(-sign)))
    return SeriesFamily(problem.n, problem.n, "E", indicial, indicial_derivative, lags)


def family_for(problem, E) -> SeriesFamily:
    if isinstance(problem, SexticProblem):
        return sextic_family(problem, E)
    if isinstance(problem, ThirdOrderProblem):
        return third_family(problem, E)
    if isinstance(problem, GeneralProblem):
        return chain_family(problem, E)
    raise TypeError(f"no series family for {type(problem).__name__}")


@dataclass(frozen=True)
class FrobeniusSolution:
    """Truncated local solution  sum_m c_m x^(exponent + step*m)  (+ log part).

    In the resonant case ``log_coefficient`` multiplies log(x) times the
    companion solution (which starts at the larger indicial root).  With
    log_coefficient = 0 the represented function picks up only the phase
    exp(2 pi i * exponent) under continuation once around the origin, so
    projective triviality is structural, not tested pointwise.
    """

    exponent: Fraction
    step: int
    coefficients: tuple
    order: int
    log_coefficient: object = Fraction(0)
    log_companion: "FrobeniusSolution | None" = None

    @property
    def has_log(self) -> bool:
        if isinstance(self.log_coefficient, EPolynomial):
            return not self.log_coefficient.is_zero
        return self.log_coefficient != 0

    def monodromy_factor(self):
        """Phase exp(2 pi i exponent) acquired around the origin, if single-valued."""
        if self.has_log:
            return None
        with mpmath.workprec(mpmath.mp.prec):
            return mpmath.expjpi(2 * mpmath.mpf(self.exponent.numerator) / self.exponent.denominator)

    def eval(self, x):
        return self.jet(x, 1)[0]

    def jet(self, x, depth: int):
        """Values (psi, psi', ..., psi^(depth-1)) at x > 0."""
        x = mpmath.mpf(x)
        out = []
        for d in range(depth):
            acc = mpmath.mpf(0)
            for m, c in enumerate(self.coefficients):
                e = self.exponent + self.step * m
                ff = Fraction(1)
                for i in range(d):
                    ff *= e - i
                if ff == 0:
                    continue
                acc += _num(c) * _num(ff) * x ** _num(e - d)
            out.append(acc)
        if not self.has_log:
            return out
        comp = self.log_companion.jet(x, depth)
        logx = mpmath.log(x)
        clog = _num(self.log_coefficient)
        for d in range(depth):
            extra = comp[d] * logx
            fact = mpmath.mpf(1)
            for i in range(1, d + 1):
                # i-th derivative of log(x): (-1)^(i-1) (i-1)! x^-i
                dlog = (-1) ** (i - 1) * fact * x ** (-i)
                extra += mpmath.binomial(d, i) * dlog * comp[d - i]
                fact *= i
            out[d] += clog * extra
        return out

    def tail_ratio(self, x) -> mpmath.mpf:
        """|last term| / max |term| at x; a truncation-quality diagnostic."""
        x = mpmath.mpf(x)
        mags = [
            abs(_num(c)) * x ** _num(self.exponent + self.step * m)
            for m, c in enumerate(self.coefficients)
        ]
        peak = max(mags) if mags else mpmath.mpf(0)
        return mags[-1] / peak if peak else mpmath.mpf(0)

    def to_json(self) -> dict:
        from .params import rational_str

        def coeff(c):
            return rational_str(c) if isinstance(c, Fraction) else mpmath.nstr(c, int(mpmath.mp.dps))

        out = {
            "exponent": rational_str(self.exponent),
            "step": self.step,
            "order": self.order,
            "coefficients": [coeff(c) for c in self.coefficients],
            "log_coefficient": coeff(self.log_coefficient)
            if not isinstance(self.log_coefficient, EPolynomial)
            else self.log_coefficient.to_json(),
        }
        if self.log_companion is not None:
            out["log_companion"] = self.log_companion.to_json()
        return out


def frobenius_series(family: SeriesFamily, exponent, N: int = 40) -> FrobeniusSolution:
    """Non-resonant series from the given indicial root, truncated after N steps.

    Coefficients inherit the arithmetic of the family weights (exact when the
    energy is exact or symbolic, mpf otherwise).  Hitting a vanishing indicial
    value raises ResonantDenominatorError naming the offending power.
    """
    exponent = as_fraction(exponent)
    symbolic = any(isinstance(w, EPolynomial) for _, w in family.lags)
    one = EPolynomial.constant(1, family.var) if symbolic else Fraction(1)
    coeffs = [one]
    for m in range(1, N + 1):
        denom = family.indicial(exponent + family.step * m)
        if denom == 0:
            raise ResonantDenominatorError(exponent + family.step * m)
        coeffs.append(family.rhs(coeffs, m) * (Fraction(1) / denom))
    return FrobeniusSolution(exponent, family.step, tuple(coeffs), N)


def resonant_pair(
    family: SeriesFamily, low_exponent, J: int, N: int = 40
) -> tuple[FrobeniusSolution, FrobeniusSolution]:
    """Minimal-subtraction continuation through a resonance of depth J steps.

    Returns (psi_tilde, companion): the companion is the plain series from the
    high root sigma = low + step*J, and psi_tilde continues the low-root series
    with u_J = 0 and log coefficient c = (sum w_lag u_(J-lag)) / I'(sigma).
    """
    rho = as_fraction(low_exponent)
    sigma = rho + family.step * J
    if family.indicial(sigma) != 0:
        raise NonResonantProblemError(
            f"exponents {rho} and {sigma} are not a resonant pair of this family"
        )
    companion = frobenius_series(family, sigma, N=N)
    v = companion.coefficients
    symbolic = any(isinstance(w, EPolynomial) for _, w in family.lags)
    one = EPolynomial.constant(1, family.var) if symbolic else Fraction(1)
    zero = EPolynomial([], family.var) if symbolic else Fraction(0)

    u = [one]
    for m in range(1, J):
        denom = family.indicial(rho + family.step * m)
        if denom == 0:
            raise ResonantDenominatorError(rho + family.step * m)
        u.append(family.rhs(u, m) * (Fraction(1) / denom))
    c_log = family.rhs(u, J) * (Fraction(1) / family.indicial_derivative(sigma))
    u.append(zero)  # minimal subtraction: no companion admixture in the power part
    for m in range(J + 1, N + 1):
        denom = family.indicial(rho + family.step * m)
        if denom == 0:
            raise ResonantDenominatorError(rho + family.step * m)
        correction = c_log * family.indicial_derivative(sigma + family.step * (m - J)) * v[m - J]
        u.append((family.rhs(u, m) - correction) * (Fraction(1) / denom))
    tilde = FrobeniusSolution(rho, family.step, tuple(u), N, c_log, companion)
    return tilde, companion


def recursion_residuals(family: SeriesFamily, solution: FrobeniusSolution):
    """Residual of the defining recursion at every generated order.

    Zero (exactly, for exact coefficients) below the truncation order; the
    log-channel correction is included for resonant solutions.
    """
    res = []
    u = solution.coefficients
    rho = solution.exponent
    J = None
    if solution.has_log or solution.log_companion is not None:
        J = (solution.log_companion.exponent - rho) // family.step
    for m in range(len(u)):
        lhs = family.indicial(rho + family.step * m) * u[m]
        rhs = family.rhs(u, m) if m else (u[0] * 0)
        if J is not None and m >= J:
            v = solution.log_companion.coefficients
            rhs = rhs - solution.log_coefficient * family.indicial_derivative(
                rho + family.step * m
            ) * v[m - int(J)]
        res.append(lhs - rhs if m else lhs)
    return res


def resonance_order_of(problem) -> tuple[Fraction, int]:
    """(low exponent, J) of the boundary-relevant resonance, or raise."""
    if isinstance(problem, SexticProblem):
        J = problem.resonance_order()
        if J is None:
            raise NonResonantProblemError(
                f"indicial roots {problem.indicial_exponents} do not differ by an even integer"
            )
        return (min(problem.indicial_exponents), J)
    if isinstance(problem, (ThirdOrderProblem, GeneralProblem)):
        if isinstance(problem, ThirdOrderProblem):
            exps = problem.exponents
            step = 3
        else:
            exps = problem.g
            step = problem.n
        pairs = []
        for i in range(len(exps)):
            for j in range(len(exps)):
                d = exps[j] - exps[i]
                if d > 0 and d.denominator == 1 and d % step == 0:
                    pairs.append((exps[i], int(d) // step))
        if not pairs:
            raise NonResonantProblemError(f"no resonant exponent pair among {exps}")
        if len(pairs) > 1:
            raise NonResonantProblemError(f"multiple resonant pairs among {exps}")
        return pairs[0]
    raise TypeError(f"no resonance analysis for {type(problem).__name__}")


def resonant_log_coefficient(problem, E=None):
    """Coefficient c(E) of log(x)*companion in the canonical resonant continuation.

    With E omitted the result is an exact polynomial in the energy variable; it
    is a nonzero rational multiple of the degree-J obstruction polynomial, so
    its zeros are the QES eigenvalues.  Numeric E gives the scalar value.
    """
    low, J = resonance_order_of(problem)
    family = family_for(problem, E)
    tilde, _ = resonant_pair(family, low, J, N=J)
    return tilde.log_coefficient


# ---------------------------------------------------------------------------
# series evaluation for the sextic families
# ---------------------------------------------------------------------------


def _check_gamma_poles(l: Fraction, N: int):
    shifted = l + Fraction(3, 2)
    if shifted.denominator == 1 and -N <= -int(shifted):
        k = -int(shifted)
        if 0 <= k <= N:
            raise GammaPoleError(f"Gamma pole at series order n = {k} (l = {rational_str(l)})")


def rational_str(q) -> str:
    from .params import rational_str as _rs

    return _rs(q)


def bd_series_eval(problem: SexticProblem, E, x, N: int = 60):
    """Factorised series solution of the sextic problem, evaluated at x > 0.

    psi = exp(-x^4/4) x^(l+1) sum_n (-1/4)^n p_n(E) / (n! Gamma(n+l+3/2)) x^(2n),
    truncated after N terms.  On the QES line with E a root of the degree-J
    recursion polynomial the sum terminates at n = J - 1 identically.  Raises
    GammaPoleError when l = -n - 3/2 for some n <= N.  The working precision
    is raised automatically if cancellation between partial sums exceeds 1e10.
    """
    l = problem.l
    _check_gamma_poles(l, N)
    alpha = problem.alpha
    j = -(alpha + 2 * l + 1) / 4
    x = mpmath.mpf(x)
    if x <= 0:
        raise ValueError("x must be positive")

    def attempt():
        pm2, pm1 = mpmath.mpf(1), _num(E)
        coef = 1 / mpmath.gamma(_num(l) + mpmath.mpf(3) / 2)
        total = coef * pm2
        peak = abs(total)
        coef *= (-(x**2) / 4) / (1 * _num(l + Fraction(3, 2)))
        total += coef * pm1
        peak = max(peak, abs(total))
        for n in range(2, N + 1):
            w = 16 * (n - 1) * (n - j - 1) * (n + l - Fraction(1, 2))
            pn = _num(E) * pm1 + _num(w) * pm2
            pm2, pm1 = pm1, pn
            coef *= (-(x**2) / 4) / (n * _num(l + n + Fraction(1, 2)))
            total += coef * pn
            peak = max(peak, abs(total))
        return total, peak

    total, peak = attempt()
    if total and peak / abs(total) > mpmath.mpf(10) ** 10:
        extra = int(mpmath.log(peak / abs(total), 2)) + 32
        with mpmath.workprec(mpmath.mp.prec + extra):
            total, _ = attempt()
            total = +total
    return mpmath.exp(-(x**4) / 4) * x ** _num(l + 1) * total


def bd_irregular_series_eval(J: int, l, E, QJ, x, N: int = 60, obstruction_tol=None):
    """Projectively trivial series of the irregular problem, evaluated at x > 0.

    psi = exp(-x^4/4) x^(-J+1/2) sum_n (-1/4)^n q_n(E)/n! x^(2n) with the free
    coefficient q_J set to QJ.  The pure-power series only exists where the
    obstruction polynomial vanishes; elsewhere ResonanceObstructionError
    reports the obstruction value.
    """
    l = as_fraction(l)
    x = mpmath.mpf(x)
    if x <= 0:
        raise ValueError("x must be positive")
    E = _num(E)
    if obstruction_tol is None:
        obstruction_tol = mpmath.mpf(2) ** (24 - mpmath.mp.prec)
    q = [mpmath.mpf(1)]
    for n in range(1, N + 1):
        w = _num(16 * (n - 1) * (n + l - Fraction(1, 2)))
        rhs = E * q[n - 1] + (w * q[n - 2] if n >= 2 else 0)
        if n == J:
            scale = max(mpmath.mpf(1), abs(E * q[n - 1]), abs(w * q[n - 2]) if n >= 2 else 0)
            if abs(rhs) > obstruction_tol * scale:
                raise ResonanceObstructionError(rhs)
            q.append(_num(QJ))
        else:
            q.append(rhs / (n - J))
    total = mpmath.mpf(0)
    coef = mpmath.mpf(1)
    for n in range(N + 1):
        total += coef * q[n]
        coef *= (-(x**2) / 4) / (n + 1)
    return mpmath.exp(-(x**4) / 4) * x ** _num(Fraction(1, 2) - J) * total


# ---------------------------------------------------------------------------
# the adjoint third-order fixed-point construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChengSeries:
    """Closed-form series for the adjoint solution from exponent 2 - g0.

    chi(x) = x^(2-g0) sum_n (-1)^n pbar_n(Ebar) x^(3n) / D_n  with the
    cumulative denominators D_n = prod_(j<=n) prod_k (3j - g0 + g_k).  Term n
    of the n-fold iterate of the fixed-point map agrees with this through
    x^(3n).  Any vanishing step factor is a resonance and is reported with its
    power.
    """

    g: tuple[Fraction, Fraction, Fraction]
    pbar: tuple[EPolynomial, ...]
    step_factors: tuple[Fraction, ...]
    denominators: tuple[Fraction, ...]
    order: int

    @property
    def exponent(self) -> Fraction:
        return 2 - self.g[0]

    @classmethod
    def build(cls, g, N: int) -> "ChengSeries":
        g = tuple(as_fraction(v) for v in g)
        if sum(g) != 3:
            raise ValueError("exponent triple must sum to 3")
        steps = []
        denoms = [Fraction(1)]
        for jj in range(1, N + 1):
            pi = cheng_denominator(g, jj)
            if pi == 0:
                raise ResonantDenominatorError(3 * jj)
            steps.append(pi)
            denoms.append(denoms[-1] * pi)
        pbar = tuple(cheng_third_sequence(*g, N))
        return cls(g, pbar, tuple(steps), tuple(denoms), N)

    def coefficient(self, n: int) -> tuple[EPolynomial, Fraction]:
        """(numerator polynomial in Ebar, exact denominator) of the x^(3n) term."""
        sign = -1 if n % 2 else 1
        return (self.pbar[n] * sign, self.denominators[n])

    def eval(self, Ebar, x):
        x = mpmath.mpf(x)
        Ebar = _num(Ebar)
        total = mpmath.mpf(0)
        term_scale = x**3
        pm2 = mpmath.mpf(1)
        pm1 = Ebar
        xpow = mpmath.mpf(1)
        for n in range(self.order + 1):
            if n == 0:
                p = pm2
            elif n == 1:
                p = pm1
            else:
                p = Ebar * pm1 + _num(cheng_denominator(self.g, n - 1)) * pm2
                pm2, pm1 = pm1, p
            total += ((-1) ** n) * p * xpow / _num(self.denominators[n])
            xpow *= term_scale
        return x ** _num(self.exponent) * total

    def to_json(self) -> dict:
        from .params import rational_str

        return {
            "g": [rational_str(v) for v in self.g],
            "exponent": rational_str(self.exponent),
            "order": self.order,
            "terms": [
                {
                    "numerator": (self.pbar[n] * (-1 if n % 2 else 1)).to_json(),
                    "denominator": rational_str(self.denominators[n]),
                }
                for n in range(self.order + 1)
            ],
        }


@dataclass(frozen=True)
class ChengIterate:
    """Finite iterate of the fixed-point map chi -> x^(2-g0) + L[(x^3 - Ebar) chi].

    ``coeffs[p]`` is the coefficient of x^(2-g0+3p) as an exact polynomial in
    the energy variable (or in the double-limit constant C when regulated).
    """

    g: tuple[Fraction, Fraction, Fraction]
    coeffs: tuple[EPolynomial, ...]
    iterations: int
    regulated: bool = False

    @property
    def exponent(self) -> Fraction:
        return 2 - self.g[0]

    def eval(self, value, x):
        x = mpmath.mpf(x)
        total = mpmath.mpf(0)
        for p, poly in enumerate(self.coeffs):
            total += poly(_num(value)) * x ** (3 * p)
        return x ** _num(self.exponent) * total


def cheng_iterate(g0, g1, g2, ebar=None, iterations: int = 1, regulated: bool = False) -> ChengIterate:
    """Iterates of the integral fixed-point map, exact in the energy variable.

    Starting from chi_0 = x^(2-g0), each application of chi -> x^(2-g0) +
    L[(x^3 - Ebar) chi] with L(x^p) = x^(p+3)/prod_k(p+1+g_k) adds three powers
    of x; iterate n is exact through x^(3n).  In regulated mode (for a triple
    with g0 - g1 = 3) the double limit Ebar -> 0 with Ebar/(3-g0+g1) -> C is
    substituted symbolically before any evaluation, so every coefficient stays
    finite and C appears linearly.
    """
    g = (as_fraction(g0), as_fraction(g1), as_fraction(g2))
    if sum(g) != 3:
        raise ValueError("exponent triple must sum to 3")
    var = "C" if regulated else "Ebar"
    max_p = 2 * iterations
    if regulated:
        if g[0] - g[1] != 3:
            raise NonResonantProblemError("regulated mode applies to triples with g0 - g1 = 3")
        mu1 = 3 - g[0] + g[2]
        c_coeff = EPolynomial([0, Fraction(-1) / (3 * mu1)], var)
    else:
        ebar_poly = (
            EPolynomial.identity(var) if ebar is None else EPolynomial.constant(as_fraction(ebar), var)
        )
    steps = {}
    for p in range(1, max_p + 1):
        pi = cheng_denominator(g, p)
        if pi == 0 and not (regulated and p == 1):
            raise ResonantDenominatorError(3 * p)
        steps[p] = pi
    one = EPolynomial.constant(1, var)
    zero = EPolynomial([], var)
    coeffs = [one]
    for _ in range(iterations):
        new = [one]
        for p in range(1, max_p + 1):
            older = coeffs[p - 2] if 0 <= p - 2 < len(coeffs) else zero
            if regulated:
                if p == 1:
                    new.append(c_coeff)
                else:
                    new.append(older * (Fraction(1) / steps[p]))
            else:
                prev = coeffs[p - 1] if p - 1 < len(coeffs) else zero
                new.append((older - ebar_poly * prev) * (Fraction(1) / steps[p]))
        coeffs = new
    return ChengIterate(g, tuple(coeffs), iterations, regulated)


def cheng_series_eval(g, ebar, x, N: int | None = None, regulated_C=None, tol=None):
    """Evaluate the adjoint fixed-point solution at x > 0 to a tail-bounded truncation.

    The truncation order is validated a posteriori: the last five term ratios
    must all be below 1/2 and the final term below tol times the running sum
    (terms decay super-geometrically at fixed x, so this terminates).  At a
    resonant triple the regulated double-limit value is used when
    ``regulated_C`` is supplied; otherwise the resonance is an error naming
    the power.  Precision is raised automatically under heavy cancellation.
    """
    g = tuple(as_fraction(v) for v in g)
    if sum(g) != 3:
        raise ValueError("exponent triple must sum to 3")
    x = mpmath.mpf(x)
    if x <= 0:
        raise ValueError("x must be positive")
    if tol is None:
        tol = mpmath.mpf(2) ** (8 - mpmath.mp.prec)
    if N is None:
        N = max(20, int(2 * x**3) + 20)

    regulated = regulated_C is not None
    if regulated:
        if g[0] - g[1] != 3:
            raise NonResonantProblemError("regulated mode applies to triples with g0 - g1 = 3")
        if ebar != 0:
            raise ValueError("the regulated double limit is taken at Ebar -> 0")

    def attempt():
        x3 = x**3
        if regulated:
            # fixed point of the regulated map: t_0 = 1, t_1 = -C/(3 mu1),
            # t_n = t_(n-2) / pi_n; the two parities decouple.
            mu1 = _num(3 - g[0] + g[2])
            prev = {0: mpmath.mpf(1), 1: -_num(regulated_C) / (3 * mu1)}
            terms = [prev[0], prev[1] * x3]
        else:
            ebar_n = _num(ebar)
            pm1, pm2 = ebar_n, mpmath.mpf(1)
            pi1 = cheng_denominator(g, 1)
            if pi1 == 0:
                raise ResonantDenominatorError(3)
            dcum = _num(pi1)
            terms = [mpmath.mpf(1), -pm1 * x3 / dcum]
        total = terms[0] + terms[1]
        peak = max(abs(terms[0]), abs(total))
        ratios = []
        n = 2
        xpow = x3 * x3
        while True:
            pin = cheng_denominator(g, n)
            if pin == 0:
                raise ResonantDenominatorError(3 * n)
            if regulated:
                tn = prev[n % 2] / _num(pin)
                prev[n % 2] = tn
                term = tn * xpow
            else:
                p = ebar_n * pm1 + _num(cheng_denominator(g, n - 1)) * pm2
                pm2, pm1 = pm1, p
                dcum = dcum * _num(pin)
                term = ((-1) ** n) * p * xpow / dcum
            total += term
            peak = max(peak, abs(total))
            prev_mag = abs(terms[-1]) if terms[-1] else mpmath.mpf("1e-999")
            ratios.append(abs(term) / prev_mag)
            terms.append(term)
            if (
                n >= max(N, 10)
                and len(ratios) >= 5
                and all(r < 0.5 for r in ratios[-5:])
                and abs(term) <= tol * max(abs(total), mpmath.mpf(1))
            ):
                break
            if n > 4000:
                raise RuntimeError("series did not satisfy the tail criterion by n = 4000")
            n += 1
            xpow *= x3
        return total, peak

    total, peak = attempt()
    if total and peak / abs(total) > mpmath.mpf(10) ** 10:
        extra = int(mpmath.log(peak / abs(total), 2)) + 32
        with mpmath.workprec(mpmath.mp.prec + extra):
            total, _ = attempt()
            total = +total
    return x ** _num(2 - g[0]) * total


def double_limit_Ebar(triple, l) -> tuple[mpmath.mpf, mpmath.mpf]:
    """The two finite double-limit energies at a J = 2 resonant triple.

    As g0 - g1 -> 6 the x^6 coefficient of the second iterate stays finite only
    along Ebar -> Ebar_pm with Ebar_pm^2 = 9 (3 - g0 + g2) = (27/2)(3 + 2l);
    these are the two QES levels of the third-order problem at J = 2.
    """
    l = as_fraction(l)
    expected = g_qes(2, l)
    got = tuple(as_fraction(v) for v in triple)
    if got != expected:
        raise ValueError(f"triple {got} is not the J = 2 QES triple {expected}")
    square = Fraction(27, 2) * (3 + 2 * l)
    if square < 0:
        raise ValueError("3 + 2l < 0: the double-limit pair is complex and out of scope")
    root = mpmath.sqrt(_num(square))
    return (root, -root)
