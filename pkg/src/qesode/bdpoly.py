"""Exact-rational polynomial recursions and certified real-root isolation.

Four three-term recursions generate, for each problem family, a sequence of
polynomials in the energy variable whose degree-J member's roots are the J
algebraically-known eigenvalues:

* ``bd_second``      p_n = E p_{n-1} + 16 (n-1)(n-j-1)(n+l-1/2) p_{n-2},
  with j = -(alpha + 2l + 1)/4, for the sextic problem;
* ``bd_irregular``   (n-J) q_n = E q_{n-1} + 16 (n-1)(n+l-1/2) q_{n-2}, whose
  n = J member is an obstruction polynomial rather than a definition and whose
  q_J remains a free symbol;
* ``cheng_third``    pbar_n = Ebar pbar_{n-1} + prod_k(3(n-1)-g0+g_k) pbar_{n-2}
  for the third-order problem;
* ``general_family`` the n-th order / x^(nM) potential generalisation, which
  reduces coefficient-for-coefficient to ``cheng_third`` at (n, M) = (3, 1).

Everything here is exact Fraction arithmetic; the only inexact step is the
final bisection refinement of isolated roots, and that is performed inside
exact rational brackets.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import mpmath

from .params import alpha_qes, as_fraction, rational_str


class RootCountError(RuntimeError):
    """A polynomial expected to be fully real-rooted was not."""


def _normalize(coeffs) -> tuple[Fraction, ...]:
    cs = [as_fraction(c) for c in coeffs]
    while cs and cs[-1] == 0:
        cs.pop()
    return tuple(cs)


class EPolynomial:
    """Univariate polynomial in the energy variable with exact rational coefficients.

    Coefficients are stored in ascending degree; the zero polynomial has an
    empty coefficient tuple.  ``var`` is a serialization tag ("E" or "Ebar"),
    not an algebraic namespace: arithmetic requires matching tags.
    """

    __slots__ = ("coeffs", "var")

    def __init__(self, coeffs, var: str = "E"):
        self.coeffs = _normalize(coeffs)
        self.var = var

    @classmethod
    def constant(cls, c, var: str = "E") -> "EPolynomial":
        return cls([as_fraction(c)], var)

    @classmethod
    def identity(cls, var: str = "E") -> "EPolynomial":
        """The polynomial equal to the variable itself."""
        return cls([0, 1], var)

    @property
    def degree(self) -> int:
        """Degree, with the convention that the zero polynomial has degree -1."""
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def leading(self) -> Fraction:
        if self.is_zero:
            raise ValueError("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def _check(self, other: "EPolynomial"):
        if self.var != other.var:
            raise ValueError(f"variable mismatch: {self.var!r} vs {other.var!r}")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EPolynomial)
            and self.var == other.var
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((self.var, self.coeffs))

    def __add__(self, other):
        if not isinstance(other, EPolynomial):
            other = EPolynomial.constant(other, self.var)
        self._check(other)
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] += c
        return EPolynomial(out, self.var)

    def __neg__(self):
        return EPolynomial([-c for c in self.coeffs], self.var)

    def __sub__(self, other):
        if not isinstance(other, EPolynomial):
            other = EPolynomial.constant(other, self.var)
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, EPolynomial):
            c = as_fraction(other)
            return EPolynomial([c * a for a in self.coeffs], self.var)
        self._check(other)
        if self.is_zero or other.is_zero:
            return EPolynomial([], self.var)
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return EPolynomial(out, self.var)

    __rmul__ = __mul__

    def shift_up(self) -> "EPolynomial":
        """Multiply by the variable."""
        if self.is_zero:
            return self
        return EPolynomial((Fraction(0),) + self.coeffs, self.var)

    def __call__(self, value):
        """Evaluate by Horner; exact for int/Fraction input, numeric otherwise."""
        exact = isinstance(value, (int, Fraction))
        if self.is_zero:
            return Fraction(0) if exact else mpmath.mpf(0)
        if exact:
            acc = self.coeffs[-1]
            for c in reversed(self.coeffs[:-1]):
                acc = acc * value + c
            return acc
        acc = mpmath.mpf(self.coeffs[-1].numerator) / self.coeffs[-1].denominator
        for c in reversed(self.coeffs[:-1]):
            acc = acc * value + mpmath.mpf(c.numerator) / c.denominator
        return acc

    def derivative(self) -> "EPolynomial":
        return EPolynomial(
            [i * c for i, c in enumerate(self.coeffs) if i >= 1], self.var
        )

    def divmod(self, divisor: "EPolynomial") -> tuple["EPolynomial", "EPolynomial"]:
        """Exact rational polynomial division with remainder."""
        self._check(divisor)
        if divisor.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        db = divisor.coeffs
        qdeg = len(rem) - len(db)
        if qdeg < 0:
            return EPolynomial([], self.var), EPolynomial(rem, self.var)
        quot = [Fraction(0)] * (qdeg + 1)
        inv_lead = 1 / divisor.leading
        for k in range(qdeg, -1, -1):
            c = rem[k + len(db) - 1] * inv_lead
            quot[k] = c
            if c:
                for i, d in enumerate(db):
                    rem[k + i] -= c * d
        return EPolynomial(quot, self.var), EPolynomial(rem, self.var)

    def divides(self, other: "EPolynomial") -> bool:
        _, r = other.divmod(self)
        return r.is_zero

    def monic(self) -> "EPolynomial":
        if self.is_zero:
            return self
        inv = 1 / self.leading
        return EPolynomial([c * inv for c in self.coeffs], self.var)

    def proportional_factor(self, other: "EPolynomial") -> Fraction | None:
        """Return rho with self = rho * other, or None if no such rational exists."""
        self._check(other)
        if self.is_zero or other.is_zero:
            return Fraction(0) if self.is_zero and not other.is_zero else None
        if self.degree != other.degree:
            return None
        rho = self.leading / other.leading
        return rho if self == other * rho else None

    def with_var(self, var: str) -> "EPolynomial":
        return EPolynomial(self.coeffs, var)

    def to_json(self) -> dict:
        return {"var": self.var, "coeffs": [rational_str(c) for c in self.coeffs]}

    def __repr__(self):
        if self.is_zero:
            return f"EPolynomial(0, var={self.var!r})"
        terms = []
        for i, c in enumerate(self.coeffs):
            if c:
                terms.append(f"{rational_str(c)}*{self.var}^{i}" if i else rational_str(c))
        return "EPolynomial(" + " + ".join(terms) + ")"


@dataclass(frozen=True)
class ObstructionPolynomial:
    """Degree-J polynomial whose vanishing unlocks a log-free resonant series.

    This is the right-hand side of the irregular recursion at its resonant
    index n = J, where the left-hand side vanishes identically; its J roots
    are the algebraically-known eigenvalues.
    """

    poly: EPolynomial
    J: int
    family: str = "irregular-sextic"

    def __post_init__(self):
        if self.poly.degree != self.J:
            raise ValueError(
                f"obstruction polynomial must have degree J = {self.J}, got {self.poly.degree}"
            )


@dataclass(frozen=True)
class FreeCoefficientPolynomial:
    """Polynomial of the irregular family beyond the resonant index.

    The recursion leaves q_J unspecified, and every later member is linear in
    it: value = pure + q_J * free.  ``substitute`` collapses the symbol.
    """

    pure: EPolynomial
    free: EPolynomial
    J: int

    def substitute(self, qj_value) -> EPolynomial:
        return self.pure + self.free * as_fraction(qj_value)


@dataclass(frozen=True)
class RealRoot:
    interval: tuple[Fraction, Fraction]
    value: mpmath.mpf
    multiplicity: int


@dataclass(frozen=True)
class RealRootSet:
    """All real roots of a rational polynomial, each certified by an exact bracket.

    Intervals are pairwise disjoint, each contains exactly one distinct root,
    and the refined value lies inside its interval.
    """

    roots: tuple[RealRoot, ...]

    def values(self) -> list[mpmath.mpf]:
        return [r.value for r in self.roots]

    @property
    def count_with_multiplicity(self) -> int:
        return sum(r.multiplicity for r in self.roots)

    def __len__(self):
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)

    def to_json(self) -> list[dict]:
        return [
            {
                "interval": [rational_str(r.interval[0]), rational_str(r.interval[1])],
                "value": mpmath.nstr(r.value, int(mpmath.mp.dps)),
                "multiplicity": r.multiplicity,
            }
            for r in self.roots
        ]


def polynomial_gcd(a: EPolynomial, b: EPolynomial) -> EPolynomial:
    while not b.is_zero:
        _, r = a.divmod(b)
        a, b = b, r
    if a.is_zero:
        return a
    return a.monic()


def squarefree_decomposition(p: EPolynomial) -> list[tuple[EPolynomial, int]]:
    """Yun's algorithm: p = prod f_k^k with the f_k squarefree and coprime."""
    if p.is_zero:
        raise ValueError("zero polynomial has no squarefree decomposition")
    if p.degree == 0:
        return []
    g = polynomial_gcd(p, p.derivative())
    if g.degree == 0:
        return [(p.monic(), 1)]
    out = []
    w, _ = p.divmod(g)
    y, _ = p.derivative().divmod(g)
    k = 1
    z = y - w.derivative()
    while not z.is_zero:
        f = polynomial_gcd(w, z)
        if f.degree > 0:
            out.append((f.monic(), k))
        w, _ = w.divmod(f)
        y, _ = z.divmod(f)
        z = y - w.derivative()
        k += 1
    if w.degree > 0:
        out.append((w.monic(), k))
    return out


def _sturm_chain(p: EPolynomial) -> list[EPolynomial]:
    chain = [p, p.derivative()]
    while not chain[-1].is_zero and chain[-1].degree > 0:
        _, r = chain[-2].divmod(chain[-1])
        if r.is_zero:
            break
        # normalize by a *positive* constant only: signs are the whole point
        chain.append(-r * (1 / abs(r.leading)))
    return [q for q in chain if not q.is_zero]


def _sign_variations(chain, x: Fraction) -> int:
    signs = []
    for q in chain:
        v = q(x)
        if v:
            signs.append(1 if v > 0 else -1)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _cauchy_bound(p: EPolynomial) -> Fraction:
    lead = abs(p.leading)
    return 1 + max(abs(c) for c in p.coeffs) / lead


def _isolate_squarefree(p: EPolynomial) -> list[tuple[Fraction, Fraction]]:
    """Disjoint rational intervals (a, b], one per real root of squarefree p."""
    if p.degree == 0:
        return []
    chain = _sturm_chain(p)
    bound = _cauchy_bound(p)
    intervals = []
    stack = [(-bound, bound, _sign_variations(chain, -bound), _sign_variations(chain, bound))]
    while stack:
        a, b, va, vb = stack.pop()
        n = va - vb
        if n == 0:
            continue
        if n == 1:
            intervals.append((a, b))
            continue
        mid = (a + b) / 2
        # Sturm counts on (a, mid] require a non-root endpoint only at `mid`
        # when it happens to be a root; nudge until p(mid) != 0.
        shift = (b - a) / 16
        while p(mid) == 0:
            mid += shift
            shift /= 2
        vm = _sign_variations(chain, mid)
        stack.append((a, mid, va, vm))
        stack.append((mid, b, vm, vb))
    intervals.sort()
    return intervals


def _refine_bisect(p: EPolynomial, lo: Fraction, hi: Fraction, eps: Fraction):
    """Shrink a bracket with a strict sign change until its width is <= eps."""
    flo = p(lo)
    if flo == 0:
        # (lo, hi] semantics: the left endpoint is never the bracketed root.
        raise ValueError("bracket endpoint is a root; isolation should have nudged it")
    fhi = p(hi)
    if fhi == 0:
        return hi, hi
    if (flo > 0) == (fhi > 0):
        raise ValueError("bracket does not straddle a sign change")
    while hi - lo > eps:
        mid = (lo + hi) / 2
        fm = p(mid)
        if fm == 0:
            return mid, mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return lo, hi


def isolate_real_roots(p: EPolynomial, precision: int = 64) -> RealRootSet:
    """Isolate every real root of p and refine each to ~2^-precision.

    Isolation is Sturm sign-variation counting on exact rationals applied to
    the squarefree part; multiplicities come from the squarefree decomposition.
    Refinement is exact bisection inside each isolating interval, so no root
    can be spurious or missed.  A degree-0 (or constant) input has no roots.
    """
    if p.is_zero:
        raise ValueError("cannot isolate roots of the zero polynomial")
    roots: list[RealRoot] = []
    # a root at the origin is a trailing zero coefficient; record it exactly
    zero_mult = 0
    while not p.is_zero and p.degree >= 1 and p.coeffs[0] == 0:
        p = EPolynomial(p.coeffs[1:], p.var)
        zero_mult += 1
    if zero_mult:
        roots.append(RealRoot((Fraction(0), Fraction(0)), mpmath.mpf(0), zero_mult))
    with mpmath.workprec(precision + 16):
        for factor, mult in squarefree_decomposition(p):
            for lo, hi in _isolate_squarefree(factor):
                scale = max(Fraction(1), abs(lo), abs(hi))
                eps = scale / (Fraction(2) ** precision)
                rlo, rhi = _refine_bisect(factor, lo, hi, eps)
                mid = (rlo + rhi) / 2
                value = mpmath.mpf(mid.numerator) / mid.denominator
                roots.append(RealRoot((rlo, rhi), value, mult))
    roots.sort(key=lambda r: r.value)
    return RealRootSet(tuple(roots))


# ---------------------------------------------------------------------------
# recursion families
# ---------------------------------------------------------------------------


def bd_second_sequence(alpha, l, n: int) -> list[EPolynomial]:
    """p_0 ... p_n of the sextic energy recursion, exact in E."""
    if n < 0:
        raise ValueError("n must be >= 0")
    alpha = as_fraction(alpha)
    l = as_fraction(l)
    j = -(alpha + 2 * l + 1) / 4
    E = EPolynomial.identity("E")
    seq = [EPolynomial.constant(1, "E")]
    if n >= 1:
        seq.append(E)
    for k in range(2, n + 1):
        w = 16 * (k - 1) * (k - j - 1) * (k + l - Fraction(1, 2))
        seq.append(E * seq[k - 1] + w * seq[k - 2])
    return seq


def bd_second(alpha, l, n: int) -> EPolynomial:
    """n-th polynomial of the sextic energy recursion (p_0 = 1, p_1 = E)."""
    return bd_second_sequence(alpha, l, n)[n]


def qes_eigenvalues(J: int, l, precision: int = 64) -> RealRootSet:
    """The J algebraic eigenvalues of the sextic at alpha = alpha_J.

    These are the real roots of the degree-J recursion polynomial.  The family
    is expected to be fully real-rooted; if isolation finds fewer than J real
    roots (counted with multiplicity) this raises rather than guessing.
    """
    if J < 1:
        raise ValueError("J must be a positive integer")
    p = bd_second(alpha_qes(J, l), l, J)
    roots = isolate_real_roots(p, precision)
    if roots.count_with_multiplicity != J:
        raise RootCountError(
            f"expected {J} real roots, found {roots.count_with_multiplicity}; "
            "a complex pair would signal a recursion bug or a genuinely complex locus"
        )
    return roots


def bd_factorisation_check(J: int, l, n_max: int) -> bool:
    """True iff the degree-J polynomial divides every later member exactly.

    On the QES line alpha = alpha_J the factor (n - J - 1) kills the second
    recursion term at n = J + 1, after which p_{n+J} = p_J * (cofactor); for
    generic alpha the divisibility fails.  Checked by exact division.
    """
    if n_max < J + 1:
        raise ValueError("n_max must be at least J + 1")
    seq = bd_second_sequence(alpha_qes(J, l), l, n_max)
    pj = seq[J]
    return all(pj.divides(seq[n]) for n in range(J, n_max + 1))


def bd_irregular(J: int, l, n: int, qj_value=None):
    """n-th member of the irregular (resonant) sextic family.

    For n < J this is a plain polynomial; at n = J the recursion's left side
    vanishes and the right side is returned as an :class:`ObstructionPolynomial`;
    for n > J the result carries the free coefficient q_J linearly, either
    symbolically (qj_value None) or substituted.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if J < 1:
        raise ValueError("J must be a positive integer")
    l = as_fraction(l)
    E = EPolynomial.identity("E")
    zero = EPolynomial([], "E")
    one = EPolynomial.constant(1, "E")

    # pairs (pure part, coefficient of the free symbol q_J)
    seq: list[tuple[EPolynomial, EPolynomial]] = [(one, zero)]
    obstruction = None
    for k in range(1, n + 1):
        w = 16 * (k - 1) * (k + l - Fraction(1, 2))
        prev1 = seq[k - 1]
        prev2 = seq[k - 2] if k >= 2 else (zero, zero)
        rhs = (E * prev1[0] + w * prev2[0], E * prev1[1] + w * prev2[1])
        if k == J:
            obstruction = ObstructionPolynomial(rhs[0], J)
            seq.append((zero, one))  # q_J itself: pure 0, unit symbol part
        else:
            inv = Fraction(1, k - J)
            seq.append((rhs[0] * inv, rhs[1] * inv))
    if n == J:
        return obstruction
    pure, free = seq[n]
    if free.is_zero:
        return pure
    if qj_value is not None:
        return pure + free * as_fraction(qj_value)
    return FreeCoefficientPolynomial(pure, free, J)


def obstruction_polynomial(J: int, l) -> ObstructionPolynomial:
    """The degree-J obstruction of the irregular family (n = J member)."""
    return bd_irregular(J, as_fraction(l), J)


def cheng_denominator(g, m: int) -> Fraction:
    """prod_k (3(m)-g0+g_k) for an exponent triple; the m-th local step factor."""
    g0, g1, g2 = (as_fraction(v) for v in g)
    s = Fraction(3 * m)
    return s * (s - g0 + g1) * (s - g0 + g2)


def cheng_third_sequence(g0, g1, g2, n: int) -> list[EPolynomial]:
    g = (as_fraction(g0), as_fraction(g1), as_fraction(g2))
    if sum(g) != 3:
        raise ValueError("exponent triple must sum to 3")
    E = EPolynomial.identity("Ebar")
    seq = [EPolynomial.constant(1, "Ebar")]
    if n >= 1:
        seq.append(E)
    for k in range(2, n + 1):
        w = cheng_denominator(g, k - 1)
        seq.append(E * seq[k - 1] + w * seq[k - 2])
    return seq


def cheng_third(g0, g1, g2, n: int) -> EPolynomial:
    """n-th polynomial in Ebar of the third-order recursion (pbar_0 = 1, pbar_1 = Ebar)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return cheng_third_sequence(g0, g1, g2, n)[n]


def general_family(n: int, M: int, g, m: int) -> EPolynomial:
    """m-th polynomial of the n-th order / x^(nM) potential family.

    p_m = E p_{m-1} - (-1)^M prod_{j=1..M} prod_{k=0..n-1} (n(j+m-M-1) - g0 + g_k)
    p_{m-1-M}, with p_0 = 1 and negative-index members zero.  At (n, M) = (3, 1)
    this reduces exactly to the third-order recursion.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    gs = tuple(as_fraction(v) for v in g)
    if len(gs) != n:
        raise ValueError(f"expected {n} exponents")
    if sum(gs) != Fraction(n * (n - 1), 2):
        raise ValueError("exponents must sum to n(n-1)/2")
    g0 = gs[0]
    sign = Fraction(-1) if M % 2 else Fraction(1)
    E = EPolynomial.identity("Ebar")
    seq = [EPolynomial.constant(1, "Ebar")]
    zero = EPolynomial([], "Ebar")
    for mm in range(1, m + 1):
        w = Fraction(1)
        for jj in range(1, M + 1):
            base = n * (jj + mm - M - 1) - g0
            for gk in gs:
                w *= base + gk
        tail = seq[mm - 1 - M] if mm - 1 - M >= 0 else zero
        seq.append(E * seq[mm - 1] - sign * w * tail)
    return seq[m]


def kappa_scaling_residual(J: int, l, n: int, E_samples, prec: int = 128):
    """max relative |kappa^n pbar_n(E/kappa) - p_n(E)| over the sample energies.

    At a QES exponent triple the third-order recursion is the kappa-rescaled
    sextic recursion; the identity is exact but kappa is irrational, so it is
    verified numerically at the requested precision.
    """
    from .params import g_qes, kappa

    pn = bd_second(alpha_qes(J, l), l, n)
    pbar = cheng_third(*g_qes(J, l), n)
    worst = mpmath.mpf(0)
    with mpmath.workprec(prec):
        k = kappa()
        for E in E_samples:
            E = mpmath.mpf(E)
            lhs = k**n * pbar(E / k)
            rhs = pn(E)
            scale = max(abs(lhs), abs(rhs), mpmath.mpf(1))
            worst = max(worst, abs(lhs - rhs) / scale)
    return worst
