"""Dirichlet-Laplacian eigenbases, space decompositions and quadrature.

Supported geometries: the interval (0, L), the rectangle (0, Lx) x (0, Ly)
(both with analytic sine eigenfunctions) and a 1D finite-difference grid
fallback.  Eigenfunctions are L2-orthonormal; for a coefficient vector c
this gives ||x||_{L2}^2 = sum c_n^2 and ||grad x||_{L2}^2 = sum lam_n c_n^2
exactly, which the whole solver relies on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

GROUP_TOL_ANALYTIC = 1e-9
GROUP_TOL_GRID = 1e-6
QUAD_OVERSAMPLE = 4


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of the domain Z."""

    kind: str  # "interval" | "rectangle" | "grid1d"
    length: float = 0.0
    lx: float = 0.0
    ly: float = 0.0
    n_grid: int = 0

    @staticmethod
    def interval(length: float) -> "DomainSpec":
        if length <= 0:
            raise SpectralError(f"interval length must be positive, got {length}")
        return DomainSpec(kind="interval", length=float(length))

    @staticmethod
    def rectangle(lx: float, ly: float) -> "DomainSpec":
        if lx <= 0 or ly <= 0:
            raise SpectralError(f"rectangle sides must be positive, got {lx}, {ly}")
        return DomainSpec(kind="rectangle", lx=float(lx), ly=float(ly))

    @staticmethod
    def grid1d(length: float, n_grid: int) -> "DomainSpec":
        if length <= 0:
            raise SpectralError(f"grid length must be positive, got {length}")
        if n_grid < 3:
            raise SpectralError(f"grid1d needs at least 3 interior points, got {n_grid}")
        return DomainSpec(kind="grid1d", length=float(length), n_grid=int(n_grid))

    @property
    def dim(self) -> int:
        return 2 if self.kind == "rectangle" else 1

    @property
    def measure(self) -> float:
        if self.kind == "rectangle":
            return self.lx * self.ly
        return self.length


@dataclass(frozen=True)
class EigenBasis:
    """First n modes of (-Laplacian, H^1_0), sorted by eigenvalue.

    ``distinct_groups`` partitions mode indices by eigenvalue equality
    within ``group_tol`` (relative).  Mode indices are 0-based; distinct
    group indices are 1-based throughout the package.
    """

    domain: DomainSpec
    eigenvalues: np.ndarray  # (n_modes,), nondecreasing
    distinct_groups: tuple[tuple[int, ...], ...]
    group_tol: float
    wavenumbers: np.ndarray | None = None  # (n_modes, dim) for analytic bases
    grid_nodes: np.ndarray | None = None   # grid1d: interior nodes
    grid_vectors: np.ndarray | None = None  # grid1d: (n_grid, n_modes), L2-normalized

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    @property
    def n_groups(self) -> int:
        return len(self.distinct_groups)

    @property
    def distinct_values(self) -> np.ndarray:
        """Eigenvalue of each distinct group (1-based group g is entry g-1)."""
        return np.array([self.eigenvalues[g[0]] for g in self.distinct_groups])

    def group_of_mode(self, i: int) -> int:
        for g, members in enumerate(self.distinct_groups, start=1):
            if i in members:
                return g
        raise SpectralError(f"mode index {i} out of range")

    def eval_modes(self, points: np.ndarray) -> np.ndarray:
        """Values of every mode at the given points, shape (npts, n_modes)."""
        pts = np.asarray(points, dtype=float)
        if self.domain.kind == "interval":
            z = np.atleast_1d(pts)
            n = self.wavenumbers[:, 0]
            L = self.domain.length
            return np.sqrt(2.0 / L) * np.sin(np.outer(z, n) * (np.pi / L))
        if self.domain.kind == "rectangle":
            pts = np.atleast_2d(pts)
            p = self.wavenumbers[:, 0]
            q = self.wavenumbers[:, 1]
            lx, ly = self.domain.lx, self.domain.ly
            sx = np.sqrt(2.0 / lx) * np.sin(np.outer(pts[:, 0], p) * (np.pi / lx))
            sy = np.sqrt(2.0 / ly) * np.sin(np.outer(pts[:, 1], q) * (np.pi / ly))
            return sx * sy
        # grid1d: linear interpolation between grid nodes, zero at the boundary
        z = np.atleast_1d(pts)
        L = self.domain.length
        full = np.concatenate(([0.0], self.grid_nodes, [L]))
        out = np.empty((len(z), self.n_modes))
        for j in range(self.n_modes):
            vals = np.concatenate(([0.0], self.grid_vectors[:, j], [0.0]))
            out[:, j] = np.interp(z, full, vals)
        return out


@dataclass(frozen=True)
class SpaceDecomposition:
    """Index bookkeeping for Hbar + E(lam_k) + Hhat and Y + V splittings."""

    k: int
    m: int
    n_trunc: int
    indices_Hbar: np.ndarray
    indices_Ek: np.ndarray
    indices_Hhat: np.ndarray
    indices_Y: np.ndarray
    indices_V: np.ndarray

    @property
    def indices_H0(self) -> np.ndarray:
        return np.concatenate([self.indices_Hbar, self.indices_Ek])

    @property
    def dim_H0(self) -> int:
        return len(self.indices_Hbar) + len(self.indices_Ek)

    @property
    def dim_Hhat(self) -> int:
        return len(self.indices_Hhat)


@dataclass(frozen=True)
class Quadrature:
    """Positive-weight quadrature rule on Z."""

    nodes: np.ndarray   # (npts,) or (npts, 2)
    weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ values)


@dataclass(frozen=True)
class SpectralVector:
    """Function in H^1_0 as coefficients in the L2-orthonormal eigenbasis."""

    coeffs: np.ndarray
    basis: EigenBasis

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))
        if len(self.coeffs) != self.basis.n_modes:
            raise SpectralError("coefficient length does not match basis size")

    @property
    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs**2)))

    @property
    def h1_norm(self) -> float:
        """Gradient (H^1_0) norm: sqrt(sum lam_n c_n^2)."""
        return float(np.sqrt(np.sum(self.basis.eigenvalues * self.coeffs**2)))

    def __add__(self, other: "SpectralVector") -> "SpectralVector":
        return SpectralVector(self.coeffs + other.coeffs, self.basis)

    def __sub__(self, other: "SpectralVector") -> "SpectralVector":
        return SpectralVector(self.coeffs - other.coeffs, self.basis)

    def __neg__(self) -> "SpectralVector":
        return SpectralVector(-self.coeffs, self.basis)

    def scaled(self, a: float) -> "SpectralVector":
        return SpectralVector(a * self.coeffs, self.basis)


def zero_vector(basis: EigenBasis) -> SpectralVector:
    return SpectralVector(np.zeros(basis.n_modes), basis)


def unit_vector(basis: EigenBasis, mode: int, amplitude: float = 1.0) -> SpectralVector:
    c = np.zeros(basis.n_modes)
    c[mode] = amplitude
    return SpectralVector(c, basis)


def _group_indices(eigenvalues: np.ndarray, tol: float) -> tuple[tuple[int, ...], ...]:
    groups: list[list[int]] = [[0]]
    for i in range(1, len(eigenvalues)):
        ref = eigenvalues[groups[-1][0]]
        if abs(eigenvalues[i] - ref) <= tol * max(1.0, abs(ref)):
            groups[-1].append(i)
        else:
            groups.append([i])
    return tuple(tuple(g) for g in groups)


def build_basis(domain: DomainSpec, n_max: int,
                group_tol: float | None = None) -> EigenBasis:
    """First n_max eigenpairs of the Dirichlet Laplacian on the domain."""
    if n_max < 3:
        raise SpectralError(f"n_max must be at least 3, got {n_max}")
    tol_analytic = GROUP_TOL_ANALYTIC if group_tol is None else group_tol
    tol_grid = GROUP_TOL_GRID if group_tol is None else group_tol

    if domain.kind == "interval":
        n = np.arange(1, n_max + 1)
        lam = (n * np.pi / domain.length) ** 2
        groups = _group_indices(lam, tol_analytic)
        return EigenBasis(domain, lam, groups, tol_analytic,
                          wavenumbers=n[:, None])

    if domain.kind == "rectangle":
        # enumerate enough (p, q) pairs to certainly contain the n_max smallest
        pmax = n_max + 2
        p, q = np.meshgrid(np.arange(1, pmax + 1), np.arange(1, pmax + 1),
                           indexing="ij")
        lam = (p * np.pi / domain.lx) ** 2 + (q * np.pi / domain.ly) ** 2
        flat = np.stack([lam.ravel(), p.ravel().astype(float),
                         q.ravel().astype(float)], axis=1)
        order = np.lexsort((flat[:, 2], flat[:, 1], flat[:, 0]))
        flat = flat[order][:n_max]
        lam_sorted = flat[:, 0]
        wn = flat[:, 1:].astype(int)
        groups = _group_indices(lam_sorted, tol_analytic)
        return EigenBasis(domain, lam_sorted, groups, tol_analytic,
                          wavenumbers=wn)

    if domain.kind == "grid1d":
        if n_max > domain.n_grid:
            raise SpectralError(
                f"n_max={n_max} exceeds grid resolution {domain.n_grid}")
        h = domain.length / (domain.n_grid + 1)
        nodes = h * np.arange(1, domain.n_grid + 1)
        main = np.full(domain.n_grid, 2.0 / h**2)
        off = np.full(domain.n_grid - 1, -1.0 / h**2)
        lam, vecs = scipy.linalg.eigh_tridiagonal(main, off)
        lam = lam[:n_max]
        vecs = vecs[:, :n_max] / np.sqrt(h)  # L2-normalize with the grid weight
        # fix sign for determinism: first nonzero entry positive
        for j in range(n_max):
            col = vecs[:, j]
            nz = np.flatnonzero(np.abs(col) > 1e-12)
            if len(nz) and col[nz[0]] < 0:
                vecs[:, j] = -col
        groups = _group_indices(lam, tol_grid)
        return EigenBasis(domain, lam, groups, tol_grid,
                          grid_nodes=nodes, grid_vectors=vecs)

    raise SpectralError(f"unknown domain kind {domain.kind!r}")


def build_quadrature(domain: DomainSpec, basis: EigenBasis,
                     oversample: int = QUAD_OVERSAMPLE) -> Quadrature:
    """Gauss-Legendre rule (trapezoid for grid1d) resolving every basis mode.

    Node count is at least ``oversample`` times the highest mode number per
    dimension; integrands mix high-frequency sines with piecewise
    polynomials, so oversampling keeps aliasing in check.
    """
    if domain.kind == "interval":
        nmax = int(basis.wavenumbers[:, 0].max())
        npts = max(oversample * nmax, 32)
        x, w = np.polynomial.legendre.leggauss(npts)
        L = domain.length
        return Quadrature(0.5 * L * (x + 1.0), 0.5 * L * w)
    if domain.kind == "rectangle":
        px = int(basis.wavenumbers[:, 0].max())
        qy = int(basis.wavenumbers[:, 1].max())
        nx = max(oversample * px, 24)
        ny = max(oversample * qy, 24)
        xx, wx = np.polynomial.legendre.leggauss(nx)
        yy, wy = np.polynomial.legendre.leggauss(ny)
        zx = 0.5 * domain.lx * (xx + 1.0)
        zy = 0.5 * domain.ly * (yy + 1.0)
        ZX, ZY = np.meshgrid(zx, zy, indexing="ij")
        WX, WY = np.meshgrid(0.5 * domain.lx * wx, 0.5 * domain.ly * wy,
                             indexing="ij")
        nodes = np.stack([ZX.ravel(), ZY.ravel()], axis=1)
        return Quadrature(nodes, (WX * WY).ravel())
    if domain.kind == "grid1d":
        h = domain.length / (domain.n_grid + 1)
        nodes = np.concatenate(([0.0], basis.grid_nodes, [domain.length]))
        w = np.full(len(nodes), h)
        w[0] = w[-1] = h / 2.0
        return Quadrature(nodes, w)
    raise SpectralError(f"unknown domain kind {domain.kind!r}")


def decompose(basis: EigenBasis, k: int, m: int, n_trunc: int) -> SpaceDecomposition:
    """Partition mode indices into Hbar (groups < k), E(lam_k), truncated
    Hhat (groups > k), and the Y/V split at group m."""
    if not (1 <= m <= k):
        raise SpectralError(f"need 1 <= m <= k, got m={m}, k={k}")
    if k >= basis.n_groups:
        raise SpectralError(
            f"k={k} needs group k+1 in the basis ({basis.n_groups} groups built)")
    if n_trunc > basis.n_modes:
        raise SpectralError(f"n_trunc={n_trunc} exceeds basis size {basis.n_modes}")

    group_of = np.empty(basis.n_modes, dtype=int)
    for g, members in enumerate(basis.distinct_groups, start=1):
        for i in members:
            group_of[i] = g

    all_idx = np.arange(basis.n_modes)
    hbar = all_idx[group_of < k]
    ek = all_idx[group_of == k]
    hhat = all_idx[(group_of > k) & (all_idx < n_trunc)]
    if len(hhat) == 0:
        raise SpectralError(
            f"truncation n_trunc={n_trunc} leaves the high-mode space empty")
    y = all_idx[group_of < m]
    v = all_idx[(group_of >= m) & (group_of <= k)]
    return SpaceDecomposition(k=k, m=m, n_trunc=n_trunc,
                              indices_Hbar=hbar, indices_Ek=ek,
                              indices_Hhat=hhat, indices_Y=y, indices_V=v)


def coercivity_constant(basis: EigenBasis, n: int, beta, n_trunc: int,
                        quad: Quadrature) -> float:
    """Smallest value of (||grad x||^2 - int beta x^2) / ||grad x||^2 over
    the truncated high-mode space past group n.

    Computed as the smallest eigenvalue of the generalized problem
    (Lam - B) c = xi * Lam c on the modes of groups n+1..  ``beta`` is a
    scalar or a callable of the quadrature nodes.  A nonpositive result
    (hypothesis of the coercivity bound violated at this truncation) is
    reported with a warning, not raised.
    """
    dec = decompose(basis, k=n, m=n, n_trunc=n_trunc)
    idx = dec.indices_Hhat
    lam = basis.eigenvalues[idx]
    U = basis.eval_modes(quad.nodes)[:, idx]
    if callable(beta):
        b = np.asarray(beta(quad.nodes), dtype=float)
        b = np.broadcast_to(b, (quad.n_nodes,))
    else:
        b = np.full(quad.n_nodes, float(beta))
    B = U.T @ (U * (quad.weights * b)[:, None])
    A = np.diag(lam) - B
    A = 0.5 * (A + A.T)
    vals = scipy.linalg.eigh(A, np.diag(lam), eigvals_only=True)
    xi = float(vals[0])
    if xi <= 1e-10:
        warnings.warn(
            f"coercivity constant {xi:.3e} is not positive at truncation "
            f"{n_trunc}; the weight reaches the next eigenvalue",
            stacklevel=2)
    return xi


def evaluate(x: SpectralVector, grid: np.ndarray) -> np.ndarray:
    """Pointwise values sum_n c_n u_n(z) on the given nodes."""
    if not np.all(np.isfinite(x.coeffs)):
        raise SpectralError("coefficients must be finite")
    return x.basis.eval_modes(grid) @ x.coeffs
