"""Quasi-exactly-solvable sectors of sextic and higher-order ODE eigenproblems.

The package pairs two independent routes to the same spectra: exact rational
polynomial recursions whose degree-J member's roots are the algebraically
known eigenvalues (``bdpoly``), and a high-precision shooting oracle that
solves the underlying boundary-value problems numerically (``shoot``).  Local
series machinery including logarithm-resonance handling lives in
``frobenius``, closed-form special-function solutions in ``closedform`` and
the parameter algebra in ``params``.
"""
from __future__ import annotations

__version__ = "0.1.0"
