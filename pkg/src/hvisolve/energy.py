"""Energy functional, subgradient selections and pointwise certification.

In spectral coordinates the energy is

    phi(x) = 1/2 sum (lam_n - lam_k) c_n^2 - int j(x(z)) dz,

with the integral by quadrature.  A subgradient selection replaces the
nonsmooth integrand derivative by the Clarke-interval midpoint at nodes
that land exactly on a potential breakpoint; generically no node does, and
the selection is the honest gradient almost everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .potential import PiecewisePotential
from .spectral import (EigenBasis, Quadrature, SpaceDecomposition,
                       SpectralVector)


@dataclass(frozen=True)
class EnergyContext:
    """Precomputed data for energy evaluations on a fixed discretization."""

    basis: EigenBasis
    decomposition: SpaceDecomposition
    potential: PiecewisePotential
    quadrature: Quadrature
    lambda_k: float
    mode_values: np.ndarray = field(repr=False, default=None)  # (n_nodes, n_modes)

    @staticmethod
    def create(basis: EigenBasis, decomposition: SpaceDecomposition,
               potential: PiecewisePotential, quadrature: Quadrature) -> "EnergyContext":
        lam_k = basis.distinct_values[decomposition.k - 1]
        U = basis.eval_modes(quadrature.nodes)
        return EnergyContext(basis, decomposition, potential, quadrature,
                             float(lam_k), U)

    @property
    def shifted_eigenvalues(self) -> np.ndarray:
        return self.basis.eigenvalues - self.lambda_k

    def node_values(self, x: SpectralVector) -> np.ndarray:
        return self.mode_values @ x.coeffs

    def vector(self, coeffs: np.ndarray) -> SpectralVector:
        return SpectralVector(coeffs, self.basis)


@dataclass
class ResidualReport:
    """Pointwise distances of -lap x - lam_k x to the subgradient interval."""

    max_violation: float
    violating_fraction: float
    tol: float
    n_nodes: int
    max_relative_violation: float
    distances: np.ndarray = field(repr=False, default=None)

    @property
    def ok(self) -> bool:
        return self.max_violation <= self.tol


def energy(ctx: EnergyContext, x: SpectralVector) -> float:
    c = x.coeffs
    if not np.all(np.isfinite(c)):
        raise ValueError("coefficients must be finite")
    quad_term = 0.5 * float(np.sum(ctx.shifted_eigenvalues * c * c))
    jvals = ctx.potential.value(ctx.node_values(x))
    return quad_term - ctx.quadrature.integrate(jvals)


def subgradient_selection(ctx: EnergyContext, x: SpectralVector) -> SpectralVector:
    """Dual-coordinate selection (lam_n - lam_k) c_n - <h, u_n> with the
    midpoint rule at breakpoint nodes."""
    h = ctx.potential.selection(ctx.node_values(x))
    g = ctx.shifted_eigenvalues * x.coeffs - ctx.mode_values.T @ (ctx.quadrature.weights * h)
    return ctx.vector(g)


def min_norm_subgradient(ctx: EnergyContext, x: SpectralVector,
                         restriction: np.ndarray | None = None) -> float:
    """Estimate of the minimal dual norm over subgradient selections,
    restricted to a mode-index set.

    Nodes whose value sits exactly on a potential breakpoint leave a free
    in-interval choice; those choices are optimized by bounded least
    squares.  Exact when no node is on a breakpoint.
    """
    idx = np.arange(ctx.basis.n_modes) if restriction is None else np.asarray(restriction)
    xv = ctx.node_values(x)
    lo, hi = ctx.potential.clarke_bounds(xv)
    h = 0.5 * (lo + hi)
    w = ctx.quadrature.weights
    U = ctx.mode_values[:, idx]
    g = (ctx.shifted_eigenvalues * x.coeffs)[idx] - U.T @ (w * h)
    free = np.flatnonzero(hi - lo > 0)
    if len(free):
        # minimize |g - A (h_free - mid)| over the interval box
        import scipy.optimize

        A = (w[free][:, None] * U[free, :]).T
        half = 0.5 * (hi[free] - lo[free])
        sol = scipy.optimize.lsq_linear(A, g, bounds=(-half, half),
                                        tol=1e-14)
        g = g - A @ sol.x
    return float(np.sqrt(g @ g))


def residual_certificate(ctx: EnergyContext, x: SpectralVector,
                         tol: float) -> ResidualReport:
    """Check -lap x - lam_k x against the subgradient interval at every node.

    A node violates when its distance exceeds tol * (1 + |r(z)|); the report
    carries the absolute maximum distance and the weighted violating
    fraction.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    r = ctx.mode_values @ (ctx.shifted_eigenvalues * x.coeffs)
    xv = ctx.node_values(x)
    lo, hi = ctx.potential.clarke_bounds(xv)
    dist = np.maximum(np.maximum(lo - r, r - hi), 0.0)
    rel = dist / (1.0 + np.abs(r))
    violating = rel > tol
    w = ctx.quadrature.weights
    frac = float(np.sum(w[violating]) / np.sum(w))
    return ResidualReport(
        max_violation=float(np.max(dist)),
        violating_fraction=frac,
        tol=tol,
        n_nodes=ctx.quadrature.n_nodes,
        max_relative_violation=float(np.max(rel)),
        distances=dist,
    )
