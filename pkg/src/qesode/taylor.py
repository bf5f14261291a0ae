"""High-order Taylor stepping for linear ODE systems with Laurent coefficients.

The boundary-value problems solved here are all linear systems Y' = A(x) Y on
the positive half-line whose matrix entries are finite Laurent polynomials in
x (powers as low as x^-3, as high as x^8).  Away from the origin every entry
is analytic, so the solution is advanced by generating its local Taylor series
directly from the ODE: with A(a+h) expanded around the base point a, the
series coefficients obey

    Y_(t+1) = (1/(t+1)) sum_(s<=t) A_s Y_(t-s),

and a step is accepted when the tail of the computed series is below the
requested tolerance relative to the largest term seen in the step.  This keeps
full arbitrary-precision accuracy with no fixed-order error model; precision
is set by the caller in bits.

Arithmetic runs on gmpy2.mpfr (an order of magnitude faster than mpmath's mpf
for this loop); values cross the boundary to and from mpmath exactly via
mantissa/exponent pairs.  Because mpfr exponents are effectively unbounded,
solutions scaling like exp(+-x^4/4) need no renormalisation.

Optionally the integral of a product of two solution components is accumulated
alongside the state: within each accepted step it is computed term-by-term
from the Cauchy product of the local series, so quadrature inherits the
integrator's accuracy for free.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import mpmath

Laurent = "dict[int, object]"


@dataclass(frozen=True)
class LinearSystem:
    """Y' = A(x) Y with sparse rows: rows[i] = ((j, {power: coeff}), ...)."""

    size: int
    rows: tuple

    def __post_init__(self):
        if len(self.rows) != self.size:
            raise ValueError("row count must equal system size")


def block_diagonal(a: LinearSystem, b: LinearSystem) -> LinearSystem:
    """Two independent systems advanced on a shared grid (used for quadrature)."""
    rows = list(a.rows)
    for row in b.rows:
        rows.append(tuple((j + a.size, poly) for j, poly in row))
    return LinearSystem(a.size + b.size, tuple(rows))


def to_mpfr(value):
    """Exact-to-context conversion from int/Fraction/mpmath.mpf (or float)."""
    if isinstance(value, gmpy2.mpfr):
        return +value
    if isinstance(value, int):
        return gmpy2.mpfr(value)
    if isinstance(value, Fraction):
        return gmpy2.mpfr(value.numerator) / gmpy2.mpfr(value.denominator)
    sign, man, exp, _ = mpmath.mpf(value)._mpf_
    if man == 0:
        return gmpy2.mpfr(0)
    r = gmpy2.mpfr(-man if sign else man)
    return gmpy2.mul_2exp(r, exp) if exp >= 0 else r / gmpy2.mul_2exp(gmpy2.mpfr(1), -exp)


def from_mpfr(r) -> mpmath.mpf:
    """Exact conversion back to an mpmath mpf (normalisation only)."""
    if gmpy2.is_nan(r) or gmpy2.is_infinite(r):
        raise ArithmeticError(f"non-finite value {r} left the integrator")
    m, e = r.as_mantissa_exp()
    return mpmath.make_mpf(mpmath.libmp.from_man_exp(int(m), int(e)))


def _binomial_pows(poly_items, a, inv_a, n_terms):
    """Taylor coefficients around a of sum_p c_p x^p, for generalized integer p."""
    out = [gmpy2.mpfr(0)] * n_terms
    for p, c in poly_items:
        term = c * (a**p)
        out[0] += term
        for t in range(1, n_terms):
            term = term * (p - (t - 1)) * inv_a / t
            if term == 0:
                break
            out[t] += term
    return out


class _StepFailure(Exception):
    pass


def integrate(
    system: LinearSystem,
    x_start,
    x_end,
    y_start,
    prec: int,
    tol=None,
    max_terms: int = 48,
    product_pairs: tuple = (),
    max_steps: int = 100000,
):
    """Advance Y from x_start to x_end (either direction, both positive).

    Returns (y_end as mpmath values, {pair: integral} for product_pairs).
    ``tol`` is the per-step relative series tail target; the default leaves a
    16-bit guard below the working precision.
    """
    ctx = gmpy2.get_context()
    old_prec = ctx.precision
    ctx.precision = prec + 24
    try:
        rows = tuple(
            tuple((j, tuple((p, to_mpfr(c)) for p, c in poly.items())) for j, poly in row)
            for row in system.rows
        )
        a = to_mpfr(x_start)
        b = to_mpfr(x_end)
        y = [to_mpfr(v) for v in y_start]
        if tol is None:
            tol = gmpy2.mpfr(2) ** (-(prec - 16))
        else:
            tol = to_mpfr(tol)
        products = {pair: gmpy2.mpfr(0) for pair in product_pairs}
        if a == b:
            return [from_mpfr(v) for v in y], {k: from_mpfr(v) for k, v in products.items()}
        direction = 1 if b > a else -1
        h = (b - a) / 8
        n = system.size
        zero = gmpy2.mpfr(0)
        steps = 0
        while True:
            steps += 1
            if steps > max_steps:
                raise RuntimeError("integrator exceeded the step budget")
            remaining = b - a
            if direction * remaining <= 0:
                break
            if direction * h > direction * remaining:
                h = remaining
            # hard cap: stay well inside the disc of analyticity around the origin
            cap = abs(a) / 2
            if abs(h) > cap:
                h = cap if direction > 0 else -cap
            inv_a = 1 / a
            ents = [
                [(j, _binomial_pows(poly, a, inv_a, max_terms)) for j, poly in row]
                for row in rows
            ]
            while True:
                ys = [y]
                hpow = [gmpy2.mpfr(1)]
                for t in range(max_terms - 1):
                    nxt = [zero] * n
                    for i in range(n):
                        acc = zero
                        for j, coefs in ents[i]:
                            for s in range(t + 1):
                                cs = coefs[s]
                                if cs:
                                    acc += cs * ys[t - s][j]
                        nxt[i] = acc / (t + 1)
                    ys.append(nxt)
                    hpow.append(hpow[-1] * h)
                # scale of the step and its tail
                peak = gmpy2.mpfr(0)
                for t, row_t in enumerate(ys):
                    m = max(abs(v) for v in row_t) * abs(hpow[t])
                    if m > peak:
                        peak = m
                tail = max(
                    max(abs(v) for v in ys[t]) * abs(hpow[t]) for t in range(max_terms - 3, max_terms)
                )
                if peak == 0 or tail <= tol * peak:
                    break
                h = h * gmpy2.mpfr("0.5")
                if abs(h) < abs(a) * gmpy2.mpfr(1e-12):
                    raise _StepFailure(f"step collapsed near x = {a}")
            new_y = [zero] * n
            for i in range(n):
                acc = zero
                for t in range(max_terms - 1, -1, -1):
                    acc = acc * h + ys[t][i]
                new_y[i] = acc
            for (pi, pj) in product_pairs:
                acc = zero
                for t in range(max_terms):
                    conv = zero
                    for s in range(t + 1):
                        conv += ys[s][pi] * ys[t - s][pj]
                    acc += conv * hpow[t] * h / (t + 1)
                products[(pi, pj)] += acc
            a = a + h
            y = new_y
            if tail <= tol * peak * gmpy2.mpfr("1e-6"):
                h = h * 2
        return [from_mpfr(v) for v in y], {k: from_mpfr(v) for k, v in products.items()}
    finally:
        ctx.precision = old_prec
