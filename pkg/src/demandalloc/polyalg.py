"""Polynomial algebra for demand transfer functions.

Demand filters are finite real-coefficient polynomials in the backshift
variable z.  The forecastability of a filtered demand stream is governed by
the split of the polynomial's roots across the unit circle: roots on or
outside the circle stay in the minimum-phase (outer) part, roots strictly
inside are reflected into an all-pass Blaschke (inner) part.  The constant
term of the outer part is the one-step root mean squared forecast error of
the stream, which is what everything downstream consumes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

# Trailing coefficients below this magnitude are noise from round-trip
# multiplication, not structure.
TRIM_TOL = 1e-12

DEFAULT_BOUNDARY_TOL = 1e-9

# Conjugate residue allowed when collapsing a complex root product back to
# real coefficients, relative to the coefficient scale.
CONJUGATE_TOL = 1e-9


class ZeroPolynomial(ValueError):
    """Operation undefined for the identically zero polynomial."""


class NoRoots(ValueError):
    """Root finding requested on a degree-0 polynomial."""


class NumericalInstability(ArithmeticError):
    """Conjugate pairing left an imaginary residue too large to discard."""


class TransferPoly:
    """Real polynomial c_0 + c_1 z + ... + c_q z^q, low-order first.

    Trailing coefficients with magnitude below 1e-12 are trimmed on
    construction so degrees stay stable under repeated multiplication.
    The zero polynomial is representable (single zero coefficient) but most
    operations reject it.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs) -> None:
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a non-empty 1-d real sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("coeffs must be finite")
        keep = c.size
        while keep > 1 and abs(c[keep - 1]) < TRIM_TOL:
            keep -= 1
        self.coeffs = c[:keep].copy()
        self.coeffs.flags.writeable = False

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0.0

    def __call__(self, z):
        # Horner; returns c_0 exactly at z=0 and accepts complex arguments.
        acc = np.zeros_like(np.asarray(z, dtype=complex))
        for c in self.coeffs[::-1]:
            acc = acc * z + c
        if np.iscomplexobj(z):
            return acc if acc.ndim else complex(acc)
        out = acc.real
        return out if out.ndim else float(out)

    def __len__(self) -> int:
        return self.coeffs.size

    def __repr__(self) -> str:
        body = ", ".join(f"{c:g}" for c in self.coeffs)
        return f"TransferPoly(({body}))"


@dataclass(frozen=True)
class Factorization:
    """Inner-outer split of a transfer polynomial.

    outer carries the full spectrum (same modulus on the unit circle as the
    input); inner_roots are the reflected roots, all strictly inside the
    unit disk and closed under conjugation.  scale_sign relates the input to
    the product outer(z) * prod (z - r) / (1 - conj(r) z): it is +1 or -1.
    """

    outer: TransferPoly
    inner_roots: tuple
    scale_sign: float

    def blaschke(self, z):
        """Evaluate the inner (all-pass) factor at z."""
        acc = np.ones_like(np.asarray(z, dtype=complex))
        for r in self.inner_roots:
            acc = acc * (z - r) / (1.0 - np.conj(r) * z)
        return acc if acc.ndim else complex(acc)


def as_poly(p) -> TransferPoly:
    return p if isinstance(p, TransferPoly) else TransferPoly(p)


def poly_mul(a: TransferPoly, b: TransferPoly) -> TransferPoly:
    """Coefficient-wise convolution of two transfer polynomials."""
    a, b = as_poly(a), as_poly(b)
    return TransferPoly(np.convolve(a.coeffs, b.coeffs))


def _newton_polish(coeffs: np.ndarray, roots: np.ndarray, sweeps: int = 2) -> np.ndarray:
    """A couple of Newton steps per eigenvalue root; keeps only improvements."""
    deriv = np.polynomial.polynomial.polyder(coeffs)
    out = roots.astype(complex)
    for _ in range(sweeps):
        f = np.polynomial.polynomial.polyval(out, coeffs)
        fp = np.polynomial.polynomial.polyval(out, deriv)
        ok = np.abs(fp) > 0
        step = np.where(ok, f / np.where(ok, fp, 1.0), 0.0)
        cand = out - step
        better = np.abs(np.polynomial.polynomial.polyval(cand, coeffs)) <= np.abs(f)
        out = np.where(better, cand, out)
    return out


def poly_roots(p: TransferPoly):
    """All degree-many roots of p, with multiplicity.

    Companion-matrix eigenvalues (numpy applies balancing) followed by a
    short Newton polish.  Roots come back sorted by (real, imag) so repeated
    calls are deterministic.
    """
    p = as_poly(p)
    if p.degree == 0:
        raise NoRoots("degree-0 polynomial has no roots")
    raw = np.roots(p.coeffs[::-1])
    polished = _newton_polish(p.coeffs, raw)
    order = np.lexsort((polished.imag, polished.real))
    return polished[order]


def _expand_outer(lead: float, outside: np.ndarray, inside: np.ndarray) -> TransferPoly:
    """Expand lead * prod (z - a_out) * prod (1 - conj(a_in) z) to real coeffs."""
    acc = np.array([lead], dtype=complex)
    for a in outside:
        acc = np.convolve(acc, np.array([-a, 1.0], dtype=complex))
    for a in inside:
        acc = np.convolve(acc, np.array([1.0, -np.conj(a)], dtype=complex))
    scale = max(1.0, float(np.max(np.abs(acc.real))))
    residue = float(np.max(np.abs(acc.imag)))
    if residue > CONJUGATE_TOL * scale:
        raise NumericalInstability(
            f"imaginary residue {residue:.3e} after conjugate pairing "
            f"(scale {scale:.3e}); root set is not conjugate-closed enough"
        )
    return TransferPoly(acc.real)


def inner_outer_factor(p: TransferPoly, boundary_tol: float = DEFAULT_BOUNDARY_TOL) -> Factorization:
    """Split p into an outer polynomial and reflected inner roots.

    Roots with modulus below 1 - boundary_tol are reflected: the outer part
    gains the factor (1 - conj(a) z) and the root joins inner_roots.  Roots
    in the band [1 - boundary_tol, 1) are treated as boundary cases and kept
    on the outer side; a warning flags them because invertibility claims
    degrade there.
    """
    p = as_poly(p)
    if p.is_zero():
        raise ZeroPolynomial("cannot factor the zero polynomial")
    if p.degree == 0:
        return Factorization(outer=p, inner_roots=(), scale_sign=1.0)

    roots = poly_roots(p)
    moduli = np.abs(roots)
    if np.any(np.abs(moduli - 1.0) <= boundary_tol):
        warnings.warn(
            "root within boundary_tol of the unit circle; classified as "
            "outer-side but invertibility is numerically marginal",
            RuntimeWarning,
            stacklevel=2,
        )
    inside = roots[moduli < 1.0 - boundary_tol]
    outside = roots[moduli >= 1.0 - boundary_tol]
    outer = _expand_outer(float(p.coeffs[-1]), outside, inside)

    # Probe a circle point away from any root to recover the +-1 relating
    # p to outer * blaschke.  The ratio is exactly real up to roundoff.
    fact = Factorization(outer=outer, inner_roots=tuple(inside), scale_sign=1.0)
    for probe in (0.37 + 0.61j, -0.52 + 0.33j, 0.11 - 0.79j):
        denom = complex(outer(probe)) * complex(fact.blaschke(probe))
        if abs(denom) > 1e-12:
            ratio = complex(p(probe)) / denom
            sign = 1.0 if ratio.real >= 0 else -1.0
            return Factorization(outer=outer, inner_roots=tuple(inside), scale_sign=sign)
    return fact


def root_msfe(p: TransferPoly, boundary_tol: float = DEFAULT_BOUNDARY_TOL) -> float:
    """One-step root MSFE of the stream filtered by p: |outer(0)|.

    Equals |c_q| * prod of |a_j| over roots on the outer side, so it never
    drops below |p(0)| and matches |p(0)| exactly when p is invertible.
    """
    p = as_poly(p)
    if p.is_zero():
        raise ZeroPolynomial("root MSFE undefined for the zero polynomial")
    if p.degree == 0:
        return abs(float(p.coeffs[0]))
    roots = poly_roots(p)
    moduli = np.abs(roots)
    outer_mod = moduli[moduli >= 1.0 - boundary_tol]
    # Empty product is 1: a fully non-invertible filter keeps only |c_q|.
    return abs(float(p.coeffs[-1])) * float(np.prod(outer_mod))


def is_invertible(p: TransferPoly, boundary_tol: float = DEFAULT_BOUNDARY_TOL) -> bool:
    """True iff p has no root strictly inside the unit disk (outer filter)."""
    p = as_poly(p)
    if p.is_zero():
        raise ZeroPolynomial("invertibility undefined for the zero polynomial")
    if p.degree == 0:
        return True
    return bool(np.min(np.abs(poly_roots(p))) >= 1.0 - boundary_tol)


def variance(p: TransferPoly) -> float:
    """Stationary variance of the filtered stream under unit-variance shocks."""
    c = as_poly(p).coeffs
    return float(np.dot(c, c))
