"""Problem parameterisations and the exact maps between them.

Three eigenproblem families share one parameter algebra:

* the sextic radial problem  -psi'' + (x^6 + alpha*x^2 + l(l+1)/x^2) psi = E psi,
* a third-order problem  phi''' + x^3 phi + (L/x^3) phi - G (phi'/x^2 - phi/x^3)
  = Ebar phi  parameterised by exponents (g0, g1, g2) with g0+g1+g2 = 3,
* an n-th order family built from first-order factors D(g) = d/dx - g/x with
  potential x^(n*M).

All parameters are exact rationals; irrational quantities (the spectral scale
kappa, eigenvalues) live only in the numeric layer.  The maps in this module
(alpha <-> g, the QES loci, the adjoint flip) are therefore exact identities
that hold with zero tolerance.

Sign conventions: the spectral invariants of the third-order problem are
G = 2 - (g0*g1 + g0*g2 + g1*g2) and L = -2 - g0*g1*g2 + (g0*g1 + g0*g2 + g1*g2).
Some earlier conventions in the literature differ from these by an overall
sign; the forms used here are the corrected ones.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import mpmath

RationalLike = "int | Fraction | str"


def as_fraction(value) -> Fraction:
    """Coerce to an exact Fraction.

    Floats and decimal strings are rejected: a parameter that arrives as a
    decimal has already lost the exactness the algebraic identities rely on.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeError(f"inexact parameter {value!r}; pass an int, Fraction or 'p/q' string")
    if isinstance(value, str):
        s = value.strip()
        if any(ch in s for ch in ".eE"):
            raise ValueError(f"decimal parameter {value!r} rejected; use an exact 'p/q' string")
        return Fraction(s)
    return Fraction(value)


@dataclass(frozen=True)
class SexticProblem:
    """Second-order radial problem with potential x^6 + alpha x^2 + l(l+1)/x^2.

    ``regular`` records which root of the indicial equation seeds the boundary
    behaviour at the origin: x^(l+1) when True, x^(-l) when False (the l -> -1-l
    continuation, used to reach l <= -1/2).
    """

    alpha: Fraction
    l: Fraction
    regular: bool = True

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_fraction(self.alpha))
        object.__setattr__(self, "l", as_fraction(self.l))

    @classmethod
    def qes(cls, J: int, l) -> "SexticProblem":
        """The problem on the QES line alpha = alpha_J at angular parameter l."""
        return cls(alpha_qes(J, l), as_fraction(l))

    @classmethod
    def irregular(cls, J: int, l) -> "SexticProblem":
        """The resonant partner problem with alpha = 2J+4l+2 and l' = -J-1/2.

        Its boundary exponent l'+1 = -J+1/2 is the *smaller* indicial root, so
        the two local solutions resonate (their exponents differ by 2J).
        """
        l = as_fraction(l)
        return cls(2 * J + 4 * l + 2, Fraction(-(2 * J + 1), 2))

    @property
    def indicial_exponents(self) -> tuple[Fraction, Fraction]:
        """Both roots of the indicial equation at the origin: (l+1, -l)."""
        return (self.l + 1, -self.l)

    @property
    def boundary_exponent(self) -> Fraction:
        return self.l + 1 if self.regular else -self.l

    @property
    def angular_coefficient(self) -> Fraction:
        """Coefficient l(l+1) of the centrifugal term."""
        return self.l * (self.l + 1)

    @property
    def wkb_power(self) -> Fraction:
        """Power of x multiplying exp(-x^4/4) in the decaying solution."""
        return Fraction(-3, 2) - self.alpha / 2

    def resonance_order(self) -> int | None:
        """Number of 2-steps separating the indicial roots, if an exact integer.

        Returns J when -l - (l+1) = 2J for a positive integer J (the resonant
        case), otherwise None.
        """
        diff = -self.l - (self.l + 1)
        if diff > 0 and diff.denominator == 1 and diff % 2 == 0:
            return int(diff) // 2
        return None


@dataclass(frozen=True)
class ThirdOrderProblem:
    """Third-order problem with exponent triple (g0, g1, g2), g0+g1+g2 = 3.

    The invariants G and L are always derived from the stored triple, never
    cached.  With ``adjoint`` set, the operator carries -x^3 and -L in place of
    +x^3 and +L, the indicial exponents become 2 - g_i, and the eigenvalue
    recorded for parameter Ebar is the one appearing as -Ebar on the right-hand
    side of the adjoint equation.
    """

    g0: Fraction
    g1: Fraction
    g2: Fraction
    adjoint: bool = False

    def __post_init__(self):
        object.__setattr__(self, "g0", as_fraction(self.g0))
        object.__setattr__(self, "g1", as_fraction(self.g1))
        object.__setattr__(self, "g2", as_fraction(self.g2))
        if self.g0 + self.g1 + self.g2 != 3:
            raise ValueError(f"exponent triple must sum to 3, got {self.g0 + self.g1 + self.g2}")

    @classmethod
    def from_alpha(cls, alpha, l, adjoint: bool = False) -> "ThirdOrderProblem":
        return cls(*g_from_alpha(alpha, l), adjoint=adjoint)

    @classmethod
    def qes(cls, J: int, l, adjoint: bool = False) -> "ThirdOrderProblem":
        g = g_qes(J, l, adjoint=False)
        return cls(*g, adjoint=adjoint)

    @property
    def base_triple(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.g0, self.g1, self.g2)

    @property
    def exponents(self) -> tuple[Fraction, Fraction, Fraction]:
        """Indicial exponents at the origin, adjusted for the adjoint flag."""
        if self.adjoint:
            return (2 - self.g0, 2 - self.g1, 2 - self.g2)
        return self.base_triple

    @property
    def e2(self) -> Fraction:
        return self.g0 * self.g1 + self.g0 * self.g2 + self.g1 * self.g2

    @property
    def e3(self) -> Fraction:
        return self.g0 * self.g1 * self.g2

    @property
    def G(self) -> Fraction:
        return 2 - self.e2

    @property
    def L(self) -> Fraction:
        """L of the direct problem; the adjoint operator carries -L."""
        return -2 - self.e3 + self.e2

    @property
    def L_effective(self) -> Fraction:
        return -self.L if self.adjoint else self.L

    @property
    def boundary_exponent(self) -> Fraction:
        """Exponent selected by the boundary condition at the origin.

        Direct problem: x^g1.  Adjoint problem: x^(2-g0).
        """
        return 2 - self.g0 if self.adjoint else self.g1

    @property
    def is_ordered(self) -> bool:
        return self.g0 < self.g1 < self.g2

    def flipped(self) -> "ThirdOrderProblem":
        return ThirdOrderProblem(self.g0, self.g1, self.g2, adjoint=not self.adjoint)

    def resonances(self) -> list[tuple[int, int, int]]:
        """Pairs (i, j, J) of exponent indices with exponent_j - exponent_i = 3J > 0."""
        e = self.exponents
        found = []
        for i in range(3):
            for j in range(3):
                d = e[j] - e[i]
                if d > 0 and d.denominator == 1 and d % 3 == 0:
                    found.append((i, j, int(d) // 3))
        return found


@dataclass(frozen=True)
class GeneralProblem:
    """n-th order problem built from the factor chain D(g) = d/dx - g/x.

    The operator is (-1)^(n+1) D(g_{n-1}-(n-1)) ... D(g_1 - 1) D(g_0) + x^(nM)
    acting on the positive half-line, with sum(g) = n(n-1)/2.  Exponents are
    stored in the order given (QES loci violate the ascending ordering); BVP
    consumers sort and record the permutation.
    """

    n: int
    M: int
    g: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(as_fraction(v) for v in self.g))
        if self.n < 2:
            raise ValueError("ODE order n must be >= 2")
        if self.M < 1:
            raise ValueError("potential power exponent M must be >= 1")
        if len(self.g) != self.n:
            raise ValueError(f"expected {self.n} exponents, got {len(self.g)}")
        target = Fraction(self.n * (self.n - 1), 2)
        if sum(self.g) != target:
            raise ValueError(f"exponents must sum to n(n-1)/2 = {target}, got {sum(self.g)}")

    @property
    def is_sorted(self) -> bool:
        return all(self.g[i] < self.g[i + 1] for i in range(self.n - 1))

    def sorted_exponents(self) -> tuple[Fraction, ...]:
        return tuple(sorted(self.g))

    @property
    def boundary_exponent(self) -> Fraction:
        """Exponent of the boundary condition at the origin (the g_1 label)."""
        return self.g[1]

    @property
    def chain_sign(self) -> int:
        return 1 if (self.n + 1) % 2 == 0 else -1

    @property
    def potential_power(self) -> int:
        return self.n * self.M

    @property
    def decay_prefactor_power(self) -> Fraction:
        """Power of x multiplying exp(-x^(M+1)/(M+1)) in the decaying solution."""
        return Fraction((1 - self.n) * self.M, 2)


_FAMILIES = ("standard-sextic", "irregular-sextic", "third-order", "general")


@dataclass(frozen=True)
class QESLocus:
    """A QES parameter point: J algebraic levels in the tagged problem family."""

    J: int
    family: str

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("QES level count J must be >= 1")
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {_FAMILIES}")


def alpha_qes(J: int, l) -> Fraction:
    """Quartic-coefficient line alpha_J = -(2l + 1 + 4J) on which the sextic is QES."""
    if J < 1:
        raise ValueError("J must be a positive integer")
    return -(2 * as_fraction(l) + 1 + 4 * J)


def g_from_alpha(alpha, l) -> tuple[Fraction, Fraction, Fraction]:
    """Map sextic parameters (alpha, l) to the third-order exponent triple."""
    alpha = as_fraction(alpha)
    l = as_fraction(l)
    g0 = (1 - alpha - 6 * l) / 4
    g1 = 1 + alpha / 2
    g2 = (7 - alpha + 6 * l) / 4
    return (g0, g1, g2)


def alpha_from_g(g0, g2) -> tuple[Fraction, Fraction]:
    """Inverse map: recover (alpha, l) from the outer exponents g0, g2."""
    g0 = as_fraction(g0)
    g2 = as_fraction(g2)
    alpha = 2 * (2 - g0 - g2)
    l = (2 * g2 - 3 - 2 * g0) / 6
    return (alpha, l)


def g_qes(J: int, l, adjoint: bool = False) -> tuple[Fraction, Fraction, Fraction]:
    """Exponent triple of the third-order problem at the image of the QES line.

    The adjoint triple is (2 - g_i) and satisfies g0_adj = g1_adj - 3J exactly,
    which is the resonance driving the hidden QES sector.
    """
    if J < 1:
        raise ValueError("J must be a positive integer")
    l = as_fraction(l)
    if adjoint:
        return (Fraction(3, 2) - J + l, Fraction(3, 2) + 2 * J + l, -J - 2 * l)
    return (Fraction(1, 2) + J - l, Fraction(1, 2) - 2 * J - l, 2 + J + 2 * l)


def kappa():
    """Spectral scale kappa = 4/(3 sqrt 3) at the current working precision.

    kappa^2 = 16/27 exactly; eigenvalues of the sextic and third-order problems
    pair as E = kappa * Ebar.
    """
    return 4 / (3 * mpmath.sqrt(3))


KAPPA_SQUARED = Fraction(16, 27)


def wkb_factorisation_compatible(problem, ansatz_exponent, poly_degree: int) -> bool:
    """Decide whether a factorised ansatz can match the decaying WKB behaviour.

    An ansatz x^ansatz_exponent * P(x) * exp(-decay) with deg P = poly_degree
    behaves like x^(ansatz_exponent + poly_degree) * exp(-decay) at large x.
    It is admissible iff that power equals the WKB power of the decaying
    solution: -3/2 - alpha/2 for the sextic family and -1 for the third-order
    family.  At third-order QES loci with g1 != 1 - 2J this fails, so those
    eigenfunctions take no such factorised form.
    """
    ansatz_exponent = as_fraction(ansatz_exponent)
    if isinstance(problem, SexticProblem):
        target = problem.wkb_power
    elif isinstance(problem, ThirdOrderProblem):
        target = Fraction(-1)
    else:
        raise TypeError("expected a SexticProblem or ThirdOrderProblem")
    return ansatz_exponent + poly_degree == target


def rational_str(q: Fraction) -> str:
    """Serialize a rational exactly ("3/2", "-5", never a decimal)."""
    q = as_fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
