"""Dense Hermitian spectra, counting functions, IDS curves and references.

Spectra come from LAPACK's dense Hermitian solver with residual and
orthogonality diagnostics; exact-rational diagonal operators bypass floating
point entirely so that eigenvalue atoms at rational energies are counted
exactly.  IDS curves are right-continuous step functions (finite volume) or
piecewise-linear interpolants (analytic references); the Kolmogorov distance
evaluates both on the merged breakpoint set including left limits.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .exact import ComplexRational
from .operators import InducedOperator

DEFAULT_DENSE_BUDGET = 4096


class EigensolverError(RuntimeError):
    pass


@dataclass
class Spectrum:
    """Sorted eigenvalues with solver diagnostics.

    ``exact_values`` is set for exact-rational diagonal operators; float
    values are then just their float images.
    """

    values: np.ndarray
    residual: float
    orthogonality: float = 0.0
    exact_values: Optional[tuple] = None

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def is_exact(self) -> bool:
        return self.exact_values is not None

    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.values))) if self.n else 0.0)


def _matrix_hash(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()[:16]


def eigen_spectrum(op: Union[InducedOperator, np.ndarray],
                   tol: float = 1e-8,
                   budget: int = DEFAULT_DENSE_BUDGET) -> Spectrum:
    """Full spectrum of a Hermitian operator (dense LAPACK path).

    Exact-rational diagonal operators are solved exactly.  The float path
    records the worst relative eigenpair residual and eigenvector
    orthogonality defect and fails loudly when they exceed ``tol``.
    """
    if isinstance(op, InducedOperator):
        if op.exact and op.is_diagonal():
            diag = op.diagonal()
            exact = tuple(sorted(
                v.re if isinstance(v, ComplexRational) else Fraction(v)
                for v in diag))
            vals = np.array([float(x) for x in exact])
            return Spectrum(values=vals, residual=0.0, exact_values=exact)
        dense = op.to_dense()
    else:
        dense = np.asarray(op)
    n = dense.shape[0]
    if n > budget:
        raise EigensolverError(f"dense solve of size {n} exceeds budget {budget}")
    if n == 0:
        return Spectrum(values=np.empty(0), residual=0.0)
    try:
        w, vecs = np.linalg.eigh(dense)
    except np.linalg.LinAlgError as err:
        raise EigensolverError(
            f"eigensolver failed to converge (matrix {_matrix_hash(dense)})"
        ) from err
    scale = max(1.0, float(np.max(np.abs(w))))
    resid = float(np.linalg.norm(dense @ vecs - vecs * w, axis=0).max()) / scale
    ortho = float(np.abs(vecs.conj().T @ vecs - np.eye(n)).max())
    if resid > tol:
        raise EigensolverError(
            f"residual {resid:.3e} above tolerance {tol:.3e} "
            f"(matrix {_matrix_hash(dense)})")
    return Spectrum(values=np.sort(w), residual=resid, orthogonality=ortho)


def counting_function(spec: Spectrum, beta,
                      tie_tol: Optional[float] = None) -> int:
    """Number of eigenvalues <= beta (ties absorbed within tie_tol)."""
    if spec.is_exact:
        b = Fraction(beta) if not isinstance(beta, float) else beta
        return sum(1 for x in spec.exact_values if x <= b)
    if tie_tol is None:
        tie_tol = 1e-9 * spec.scale()
    return int(np.searchsorted(spec.values, float(beta) + tie_tol, side="right"))


def atom_mass(spec: Spectrum, alpha,
              cluster_tol: Optional[float] = None) -> float:
    """Fraction of eigenvalues within cluster_tol of alpha (exact if rational)."""
    if spec.n == 0:
        return 0.0
    if spec.is_exact:
        a = Fraction(alpha) if not isinstance(alpha, float) else alpha
        return sum(1 for x in spec.exact_values if x == a) / spec.n
    if cluster_tol is None:
        cluster_tol = 1e-8 * spec.scale()
    return float(np.mean(np.abs(spec.values - float(alpha)) <= cluster_tol))


def punctured_mass(spec: Spectrum, alpha: float, eps: float,
                   cluster_tol: float = 1e-9) -> float:
    """Fraction of eigenvalues with cluster_tol < |lambda - alpha| < eps."""
    if not 0 < cluster_tol < eps:
        raise ValueError("need 0 < cluster_tol < eps")
    if spec.n == 0:
        return 0.0
    d = np.abs(spec.values - float(alpha))
    return float(np.mean((d > cluster_tol) & (d < eps)))


def punctured_mass_bound(norm_bound: float, eps: float) -> float:
    """log(R)/log(1/eps): determinant-arithmetic bound on punctured mass at 0.

    For integer-coefficient Hermitian H with ||H|| <= R, the product of the
    nonzero eigenvalues is a nonzero integer, so at most a log(R)/log(1/eps)
    fraction of them can lie in the punctured interval (-eps, eps) \\ {0}.
    """
    if norm_bound < 1:
        raise ValueError("norm bound must be >= 1")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return math.log(norm_bound) / math.log(1.0 / eps)


# ---------------------------------------------------------------------------
# IDS curves
# ---------------------------------------------------------------------------


@dataclass
class IDSCurve:
    """Distribution-function curve: step (finite volume) or linear (analytic)."""

    xs: np.ndarray
    ys: np.ndarray
    kind: str = "step"          # "step" (right-continuous) | "linear"

    def __post_init__(self):
        if len(self.xs) != len(self.ys):
            raise ValueError("grid and values must have equal length")
        if np.any(np.diff(self.xs) < 0):
            raise ValueError("grid must be sorted")
        if np.any(np.diff(self.ys) < -1e-12):
            raise ValueError("IDS curve must be nondecreasing")
        if self.kind not in ("step", "linear"):
            raise ValueError("kind must be 'step' or 'linear'")

    def eval(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == "linear":
            return np.interp(x, self.xs, self.ys)
        idx = np.searchsorted(self.xs, x, side="right") - 1
        out = np.where(idx >= 0, self.ys[np.maximum(idx, 0)], 0.0)
        return out

    def eval_left(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == "linear":
            return np.interp(x, self.xs, self.ys)
        idx = np.searchsorted(self.xs, x, side="left") - 1
        return np.where(idx >= 0, self.ys[np.maximum(idx, 0)], 0.0)


def ids_curve(spec: Spectrum, grid: Optional[Sequence[float]] = None,
              tie_tol: Optional[float] = None) -> IDSCurve:
    """Normalized counting function as a step curve on grid + breakpoints."""
    breaks = np.unique(spec.values)
    if grid is not None:
        xs = np.unique(np.concatenate([np.asarray(grid, dtype=float), breaks]))
    else:
        xs = breaks
    ys = np.array([counting_function(spec, x, tie_tol) for x in xs],
                  dtype=float) / max(spec.n, 1)
    return IDSCurve(xs=xs, ys=ys, kind="step")


def kolmogorov_distance(a: IDSCurve, b: IDSCurve) -> float:
    """sup_beta |a - b| over merged breakpoints including left limits."""
    xs = np.union1d(a.xs, b.xs)
    d1 = np.abs(a.eval(xs) - b.eval(xs)).max() if len(xs) else 0.0
    d2 = np.abs(a.eval_left(xs) - b.eval_left(xs)).max() if len(xs) else 0.0
    return float(max(d1, d2))


def reference_ids(kind: str, d: int, beta_grid: Sequence[float],
                  quadrature_points: int = 100_000) -> IDSCurve:
    """Analytic IDS reference curves.

    ``lattice_laplacian`` with d=1 is the arcsine law of the Z Laplacian,
    N(beta) = 1 - arccos(1 + beta/2)/pi on [-4, 0]; d=2 is the numerical
    self-convolution via theta-quadrature (documented error <= 1e-4).
    """
    grid = np.asarray(sorted(beta_grid), dtype=float)
    if kind != "lattice_laplacian":
        raise ValueError(f"unsupported reference kind {kind!r}")
    if d == 1:
        ys = _arcsine_ids(grid)
        return IDSCurve(xs=grid, ys=ys, kind="linear")
    if d == 2:
        phi = (np.arange(quadrature_points) + 0.5) * np.pi / quadrature_points
        shift = 2.0 * np.cos(phi) - 2.0
        ys = np.empty(len(grid))
        for i, beta in enumerate(grid):
            ys[i] = _arcsine_ids(beta - shift).mean()
        ys = np.maximum.accumulate(ys)
        return IDSCurve(xs=grid, ys=ys, kind="linear")
    raise ValueError("lattice_laplacian reference supports d in {1, 2}")


def _arcsine_ids(beta: np.ndarray) -> np.ndarray:
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    arg = np.clip(1.0 + beta / 2.0, -1.0, 1.0)
    out = 1.0 - np.arccos(arg) / np.pi
    out[beta <= -4.0] = 0.0
    out[beta >= 0.0] = 1.0
    return out


# ---------------------------------------------------------------------------
# Spectral measure view
# ---------------------------------------------------------------------------


@dataclass
class SpectralMeasureView:
    """theta(f) integrals against the normalized eigenvalue measure."""

    spectrum: Spectrum

    def moment(self, k: int) -> float:
        return float(np.mean(self.spectrum.values ** k)) if self.spectrum.n else 0.0

    def polynomial(self, coeffs: Sequence[float]) -> float:
        """theta(p) for p(x) = sum coeffs[i] x^i."""
        vals = self.spectrum.values
        acc = np.zeros_like(vals)
        for c in reversed(list(coeffs)):
            acc = acc * vals + c
        return float(acc.mean()) if self.spectrum.n else 0.0

    def interval_mass(self, lo: float, hi: float) -> float:
        """theta(]lo, hi]) with the step-counting convention."""
        vals = self.spectrum.values
        if self.spectrum.n == 0:
            return 0.0
        return float(np.mean((vals > lo) & (vals <= hi)))
