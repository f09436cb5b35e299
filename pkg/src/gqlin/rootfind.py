"""Safeguarded scalar root solving for implicit primitive recovery.

The target functions have a single physical positive root but no proven
monotonicity, so the solver never trusts a raw Newton iteration: it brackets
the root by doubling from a small positive abscissa, then runs Newton with a
bisection fallback whenever the step leaves the bracket.  Function values that
are undefined below the physical domain (for example a superluminal velocity
at too-small an argument) are treated as negative-side by the caller returning
``-inf``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NumericError

__all__ = ["RootSolveReport", "bracketed_newton"]


@dataclass(frozen=True)
class RootSolveReport:
    """Outcome of a scalar root solve."""

    root: float
    iterations: int
    residual: float
    bracket: tuple[float, float]


def bracketed_newton(f, fprime, lo: float, tol: float, scale: float,
                     max_doublings: int = 200, max_iter: int = 200,
                     extra_scan: int = 3) -> RootSolveReport:
    """Positive root of ``f`` by doubling bracket search plus safeguarded Newton.

    ``f(x)`` must be negative-side at ``lo`` (values of ``-inf`` mark points
    below the physical domain).  The solve stops when
    ``|f(x)| <= tol * scale`` and further Newton steps no longer improve, or
    when the bracket collapses to rounding width.  A second sign change during
    the post-bracket scan is reported as a numeric error (possible multiple
    roots).

    Raises:
        NumericError: no sign change after ``max_doublings`` doublings, the
            value at ``lo`` is positive, or disjoint brackets were detected.
    """
    a = float(lo)
    fa = f(a)
    if fa == 0.0:
        return RootSolveReport(a, 0, 0.0, (a, a))
    if fa > 0.0:
        raise NumericError("function positive at lower bracket end")
    b = a
    fb = fa
    n_doublings = 0
    while fb <= 0.0:
        if n_doublings >= max_doublings:
            raise NumericError("bracketing failed: no sign change found")
        a, fa = b, fb
        b = b * 2.0
        fb = f(b)
        n_doublings += 1
    # scan a few more nodes for a sign change back (disjoint second bracket)
    probe = b
    fp_prev = fb
    for _ in range(extra_scan):
        probe *= 2.0
        fp = f(probe)
        if fp_prev > 0.0 and fp < 0.0:
            raise NumericError("disjoint brackets detected: multiple roots")
        fp_prev = fp

    x = 0.5 * (a + b)
    fx = f(x)
    best_x, best_f = x, abs(fx)
    iters = 0
    while iters < max_iter:
        iters += 1
        if fx == 0.0:
            best_x, best_f = x, 0.0
            break
        if fx > 0.0:
            b = x
        else:
            a = x
        dfx = fprime(x)
        newton_ok = np.isfinite(dfx) and dfx != 0.0 and np.isfinite(fx)
        if newton_ok:
            x_new = x - fx / dfx
            if not (a < x_new < b):
                x_new = 0.5 * (a + b)
        else:
            x_new = 0.5 * (a + b)
        if x_new == x or (b - a) <= abs(x) * 4e-16:
            break
        x = x_new
        fx = f(x)
        if abs(fx) < best_f:
            best_x, best_f = x, abs(fx)
        if best_f <= tol * scale and (b - a) <= max(abs(x), 1.0) * 1e-12:
            break
    if best_f > tol * scale:
        raise NumericError(
            f"root solve stalled: residual {best_f:.3e} > {tol * scale:.3e}")
    return RootSolveReport(best_x, iters, best_f, (a, b))
