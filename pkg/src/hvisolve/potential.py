"""Piecewise-polynomial locally Lipschitz potentials and their checks.

A potential is a continuous function of one real variable given by
polynomial pieces between breakpoints (the two end pieces are unbounded).
For such functions the Clarke subdifferential at a point is exactly the
interval between the two one-sided derivatives, which is what the solver
consumes pointwise.

``check_hypotheses`` validates the seven structural conditions the
multiplicity argument needs against the eigenvalue data: continuity and
value at zero, local Lipschitzness, subgradient growth, the superquadratic
defect at infinity, the one-sided slope bound against the spectral gap,
the sign of the quadratic quotient near zero, and subquadratic resonance
at infinity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import EigenBasis

CONTINUITY_TOL = 1e-12
BREAKPOINT_MATCH_TOL = 1e-12


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class SubgradientInterval:
    """Convex hull of the one-sided derivatives at a point."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise PotentialError(f"interval endpoints out of order: {self.lo} > {self.hi}")

    def distance(self, r: float) -> float:
        if r < self.lo:
            return self.lo - r
        if r > self.hi:
            return r - self.hi
        return 0.0

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


def _polyval(coeffs: np.ndarray, z):
    return np.polynomial.polynomial.polyval(z, coeffs)


def _polyder(coeffs: np.ndarray) -> np.ndarray:
    d = np.polynomial.polynomial.polyder(coeffs)
    return np.atleast_1d(d)


class PiecewisePotential:
    """Continuous piecewise polynomial with j(0) = 0.

    ``pieces[i]`` (ascending coefficients) is active on
    [breakpoints[i-1], breakpoints[i]); the first and last pieces extend to
    -inf and +inf.
    """

    def __init__(self, breakpoints, pieces, params=None, family: str = "custom"):
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        self.pieces = [np.atleast_1d(np.asarray(p, dtype=float)) for p in pieces]
        self.params = dict(params or {})
        self.family = family
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise PotentialError("need exactly one piece more than breakpoints")
        if len(self.breakpoints) and np.any(np.diff(self.breakpoints) <= 0):
            raise PotentialError("breakpoints must be strictly increasing")
        self._derivs = [_polyder(p) for p in self.pieces]
        self._validate()

    def _validate(self):
        for i, b in enumerate(self.breakpoints):
            left = _polyval(self.pieces[i], b)
            right = _polyval(self.pieces[i + 1], b)
            if abs(left - right) > CONTINUITY_TOL * max(1.0, abs(left)):
                raise PotentialError(
                    f"potential discontinuous at breakpoint {b}: {left} vs {right}")
        if abs(float(self.value(0.0))) > CONTINUITY_TOL:
            raise PotentialError("potential must vanish at zero")

    # -- evaluation ---------------------------------------------------------

    def _piece_index(self, zeta):
        return np.searchsorted(self.breakpoints, zeta, side="right")

    def value(self, zeta):
        z = np.asarray(zeta, dtype=float)
        idx = self._piece_index(z)
        out = np.empty_like(z, dtype=float)
        for i in range(len(self.pieces)):
            sel = idx == i
            if np.any(sel):
                out[sel] = _polyval(self.pieces[i], z[sel])
        return out if out.ndim else float(out)

    def derivative(self, zeta):
        """A.e. derivative (right-piece rule at breakpoints)."""
        z = np.asarray(zeta, dtype=float)
        idx = self._piece_index(z)
        out = np.empty_like(z, dtype=float)
        for i in range(len(self.pieces)):
            sel = idx == i
            if np.any(sel):
                out[sel] = _polyval(self._derivs[i], z[sel])
        return out if out.ndim else float(out)

    def _at_breakpoint(self, z: np.ndarray) -> np.ndarray:
        """Index of the matched breakpoint for each entry, -1 if none."""
        out = np.full(z.shape, -1, dtype=int)
        for i, b in enumerate(self.breakpoints):
            out[np.abs(z - b) <= BREAKPOINT_MATCH_TOL * max(1.0, abs(b))] = i
        return out

    def clarke_bounds(self, zeta):
        """Vectorized lower/upper Clarke interval endpoints."""
        z = np.atleast_1d(np.asarray(zeta, dtype=float))
        lo = self.derivative(z).copy()
        hi = lo.copy()
        bp = self._at_breakpoint(z)
        for i in np.flatnonzero(bp >= 0):
            b = self.breakpoints[bp[i]]
            dl = float(_polyval(self._derivs[bp[i]], b))
            dr = float(_polyval(self._derivs[bp[i] + 1], b))
            lo[i], hi[i] = min(dl, dr), max(dl, dr)
        return lo, hi

    def clarke_interval(self, zeta: float) -> SubgradientInterval:
        lo, hi = self.clarke_bounds(zeta)
        return SubgradientInterval(float(lo[0]), float(hi[0]))

    def selection(self, zeta):
        """A.e.-derivative selection: interval midpoint at breakpoints,
        exact derivative elsewhere."""
        z = np.atleast_1d(np.asarray(zeta, dtype=float))
        lo, hi = self.clarke_bounds(z)
        return 0.5 * (lo + hi)

    # -- serialization ------------------------------------------------------

    def describe(self) -> list[str]:
        lines = [f"family = {self.family}"]
        for key in sorted(self.params):
            lines.append(f"param.{key} = {self.params[key]!r}")
        lines.append("breakpoints = " + ", ".join(f"{b!r}" for b in self.breakpoints))
        for i, p in enumerate(self.pieces):
            lines.append(f"piece.{i} = " + ", ".join(f"{c!r}" for c in p))
        return lines


# -- module-level op wrappers ----------------------------------------------

def value(j: PiecewisePotential, zeta: float) -> float:
    return float(j.value(zeta))


def clarke_interval(j: PiecewisePotential, zeta: float) -> SubgradientInterval:
    return j.clarke_interval(zeta)


# -- built-in families ------------------------------------------------------

def example_potential(mu: float, slope_neg: float, slope_pos: float) -> PiecewisePotential:
    """Five-piece potential: quadratic wells glued to affine tails.

    Quadratic near zero with curvature -mu, opposite-curvature quadratics on
    1 <= |z| < 4, and affine tails of slope -slope_neg / slope_pos beyond.
    """
    breakpoints = [-4.0, -1.0, 1.0, 4.0]
    pieces = [
        [-2.0 * mu - 4.0 * slope_neg, -slope_neg],
        [2.0 * mu, 3.0 * mu, mu / 2.0],
        [0.0, 0.0, -mu / 2.0],
        [2.0 * mu, -3.0 * mu, mu / 2.0],
        [-2.0 * mu - 4.0 * slope_pos, slope_pos],
    ]
    return PiecewisePotential(breakpoints, pieces,
                              params={"mu": mu, "slope_neg": slope_neg,
                                      "slope_pos": slope_pos},
                              family="example")


def max_potential(xi: float, c: float) -> PiecewisePotential:
    """Pointwise maximum of (xi/2) z^2 + c|z| and (xi/2)|z|.

    The branches cross at |z| = 1 - 2c/xi (for c < xi/2); breakpoints are
    placed at the crossings and at zero.
    """
    if xi <= 0:
        raise PotentialError(f"quadratic weight must be positive, got {xi}")
    quad_neg = [0.0, -c, xi / 2.0]   # xi/2 z^2 + c|z| for z < 0
    quad_pos = [0.0, c, xi / 2.0]
    if c >= xi / 2.0:
        # linear branch never wins away from zero
        return PiecewisePotential([0.0], [quad_neg, quad_pos],
                                  params={"xi": xi, "c": c}, family="max")
    zc = 1.0 - 2.0 * c / xi
    pieces = [quad_neg, [0.0, -xi / 2.0], [0.0, xi / 2.0], quad_pos]
    return PiecewisePotential([-zc, 0.0, zc], pieces,
                              params={"xi": xi, "c": c}, family="max")


def trivial_potential() -> PiecewisePotential:
    """j identically zero (useful baseline; rejected by the hypothesis checker)."""
    return PiecewisePotential([], [[0.0]], family="zero")


# -- hypothesis checker ------------------------------------------------------

@dataclass
class HypothesisCheck:
    name: str
    verdict: str  # "pass" | "fail" | "untestable"
    constants: dict = field(default_factory=dict)
    witness: dict | None = None

    @property
    def ok(self) -> bool:
        return self.verdict == "pass"


@dataclass
class HypothesisReport:
    checks: dict[str, HypothesisCheck]

    @property
    def all_pass(self) -> bool:
        return all(c.ok for c in self.checks.values())

    @property
    def failed(self) -> list[str]:
        return [n for n, c in self.checks.items() if not c.ok]

    def __getitem__(self, name: str) -> HypothesisCheck:
        return self.checks[name]


def _poly_extreme_on_interval(coeffs: np.ndarray, a: float, b: float,
                              want_max: bool) -> float:
    """Max (or min) of a polynomial on [a, b]; endpoints may be infinite."""
    coeffs = np.atleast_1d(coeffs)
    deg = len(np.trim_zeros(coeffs, "b")) - 1
    if deg <= 0:
        return float(coeffs[0]) if len(coeffs) else 0.0
    sign = 1.0 if want_max else -1.0
    if not np.isfinite(a) or not np.isfinite(b):
        lead = np.trim_zeros(coeffs, "b")[-1]
        if not np.isfinite(b) and sign * lead > 0:
            return sign * np.inf
        if not np.isfinite(a) and sign * lead * (-1.0) ** deg > 0:
            return sign * np.inf
        # bounded on the unbounded side: extremum among finite critical points
    cands = []
    for e in (a, b):
        if np.isfinite(e):
            cands.append(e)
    der = _polyder(coeffs)
    if len(np.trim_zeros(der, "b")):
        roots = np.polynomial.polynomial.polyroots(der)
        for r in roots:
            if abs(r.imag) < 1e-12 and a <= r.real <= b:
                cands.append(r.real)
    vals = [float(_polyval(coeffs, c)) for c in cands]
    return max(vals) if want_max else min(vals)


def chain_slope_bound(j: PiecewisePotential) -> float:
    """Upper bound on (v1 - v2)/(z1 - z2) over all subgradient pairs.

    For a piecewise-C1 scalar with only downward derivative jumps this is
    the largest second-derivative value over the closed pieces; an upward
    jump makes the quotient unbounded (+inf).
    """
    edges = np.concatenate(([-np.inf], j.breakpoints, [np.inf]))
    best = -np.inf
    for i, p in enumerate(j.pieces):
        d2 = _polyder(j._derivs[i])
        best = max(best, _poly_extreme_on_interval(d2, edges[i], edges[i + 1], True))
    for i, b in enumerate(j.breakpoints):
        dl = float(_polyval(j._derivs[i], b))
        dr = float(_polyval(j._derivs[i + 1], b))
        if dr > dl + 1e-12:
            return np.inf  # upward derivative jump
    return float(best)


def _tail_defect_poly(piece: np.ndarray) -> np.ndarray:
    """Coefficients of q(z) = z p'(z) - 2 p(z) for a tail piece."""
    d = _polyder(piece)
    zd = np.concatenate(([0.0], d))
    n = max(len(zd), len(piece))
    q = np.zeros(n)
    q[: len(zd)] += zd
    q[: len(piece)] -= 2.0 * piece
    return q


def _tail_limit_sign(q: np.ndarray, side: int) -> float:
    """Limit of polynomial q as z -> side*inf: -inf, finite value, or +inf."""
    t = np.trim_zeros(q, "b")
    if len(t) <= 1:
        return float(t[0]) if len(t) else 0.0
    deg = len(t) - 1
    lead = t[-1] * (side ** deg)
    return np.inf if lead > 0 else -np.inf


def _quadratic_tail_coeff(piece: np.ndarray) -> float | None:
    """z^2 coefficient of a tail piece; None if the degree exceeds 2."""
    t = np.trim_zeros(np.atleast_1d(piece), "b")
    if len(t) > 3:
        return None
    return float(t[2]) if len(t) == 3 else 0.0


def check_hypotheses(j: PiecewisePotential, basis: EigenBasis,
                     k: int, m: int) -> HypothesisReport:
    """Verify the seven structural hypotheses against the eigenvalue data.

    The potential is one-dimensional (no z-dependence), so "strict on a set
    of positive measure" collapses to a strict scalar inequality, which is
    what the checker enforces.
    """
    if not (1 <= m <= k < basis.n_groups):
        raise PotentialError(f"need 1 <= m <= k < n_groups, got m={m}, k={k}")
    lam = basis.distinct_values
    lam_k = lam[k - 1]
    lam_m = lam[m - 1]
    lam_kp1 = lam[k]
    gap = lam_kp1 - lam_k
    lam_m_prev = lam[m - 2] if m >= 2 else -np.inf

    checks: dict[str, HypothesisCheck] = {}
    bp = j.breakpoints
    bmax = float(np.max(np.abs(bp))) if len(bp) else 1.0

    # (i) measurable in z (structural) and j(0) = 0
    v0 = float(j.value(0.0))
    checks["i"] = HypothesisCheck(
        "i", "pass" if abs(v0) <= CONTINUITY_TOL else "fail",
        constants={"value_at_zero": v0},
        witness=None if abs(v0) <= CONTINUITY_TOL else {"zeta": 0.0, "value": v0})

    # (ii) locally Lipschitz: continuous piecewise polynomial by construction
    jumps = [abs(float(_polyval(j.pieces[i], b)) - float(_polyval(j.pieces[i + 1], b)))
             for i, b in enumerate(bp)]
    cont_ok = all(g <= CONTINUITY_TOL * max(1.0, abs(b)) for g, b in zip(jumps, bp))
    checks["ii"] = HypothesisCheck("ii", "pass" if cont_ok else "fail",
                                   constants={"max_value_jump": max(jumps, default=0.0)})

    # (iii) |u| <= a1 + c1 |zeta|^(r-1) with r < 2* (2* = inf for dim <= 2)
    r = float(max(2, max(len(np.trim_zeros(p, "b")) - 1 for p in j.pieces)))
    core = max(bmax, 1.0)
    edges = np.concatenate(([-np.inf], bp, [np.inf]))
    a1 = 0.0
    for i, d in enumerate(j._derivs):
        a, b = max(edges[i], -core), min(edges[i + 1], core)
        if a < b:
            hi = _poly_extreme_on_interval(d, a, b, True)
            lo = _poly_extreme_on_interval(d, a, b, False)
            a1 = max(a1, abs(hi), abs(lo))
    c1 = max(float(np.sum(np.abs(d))) for d in (j._derivs[0], j._derivs[-1]))
    c1 = max(c1, 1e-12)
    sweep = np.concatenate([-np.geomspace(core, 1e3, 64), np.geomspace(core, 1e3, 64)])
    lo_s, hi_s = j.clarke_bounds(sweep)
    bound = a1 + c1 * np.abs(sweep) ** (r - 1.0)
    grow_ok = np.all(np.maximum(np.abs(lo_s), np.abs(hi_s)) <= bound + 1e-9)
    checks["iii"] = HypothesisCheck(
        "iii", "pass" if grow_ok else "fail",
        constants={"a1": a1, "c1": c1, "r": r},
        witness=None if grow_ok else {
            "zeta": float(sweep[np.argmax(np.maximum(np.abs(lo_s), np.abs(hi_s)) - bound)])})

    # (iv) u*zeta - 2 j -> -inf at infinity: exact on the affine/quadratic
    # tails through the defect polynomial, plus a sampled far-field sweep
    q_right = _tail_defect_poly(j.pieces[-1])
    q_left = _tail_defect_poly(j.pieces[0])
    lim_r = _tail_limit_sign(q_right, +1)
    lim_l = _tail_limit_sign(q_left, -1)
    symb_ok = (lim_r == -np.inf) and (lim_l == -np.inf)
    worst = np.where(sweep >= 0, hi_s * sweep, lo_s * sweep) - 2.0 * j.value(sweep)
    far = float(np.max(worst[np.abs(sweep) >= 0.5e3]))
    checks["iv"] = HypothesisCheck(
        "iv", "pass" if symb_ok else "fail",
        constants={"right_tail_limit": lim_r, "left_tail_limit": lim_l,
                   "far_field_defect": far},
        witness=None if symb_ok else {"tail": "right" if lim_r != -np.inf else "left"})

    # (v) slope-difference quotient <= l with l < lam_{k+1} - lam_k
    l_bound = chain_slope_bound(j)
    v_ok = np.isfinite(l_bound) and l_bound < gap
    checks["v"] = HypothesisCheck(
        "v", "pass" if v_ok else "fail",
        constants={"l": l_bound, "gap": gap, "margin": gap - l_bound},
        witness=None if v_ok else {"l": float(l_bound), "gap": float(gap)})

    # (vi) near zero: lam_{m-1} - lam_k <= 2 j / zeta^2 <= beta < lam_m - lam_k,
    # beta nonpositive; explicit delta0 search by halving
    delta0 = min(float(np.min(np.abs(bp[bp != 0]))) if np.any(bp != 0) else 1.0, 1.0)
    vi_check = None
    for _ in range(40):
        zs = np.concatenate([-np.geomspace(delta0 * 1e-8, delta0, 128),
                             np.geomspace(delta0 * 1e-8, delta0, 128)])
        qv = 2.0 * j.value(zs) / zs**2
        sup_q, inf_q = float(np.max(qv)), float(np.min(qv))
        lower_ok = inf_q >= lam_m_prev - lam_k - 1e-9
        upper_ok = (sup_q < lam_m - lam_k) and (sup_q <= 0.0)
        if lower_ok and upper_ok:
            vi_check = HypothesisCheck(
                "vi", "pass",
                constants={"beta": sup_q, "delta0": delta0, "m": m,
                           "lower_bound": lam_m_prev - lam_k,
                           "upper_limit": lam_m - lam_k})
            break
        if not upper_ok and sup_q >= lam_m - lam_k - 1e-15 and delta0 < 1e-10:
            break
        delta0 /= 2.0
        if delta0 < 1e-12:
            break
    if vi_check is None:
        zs = np.concatenate([-np.geomspace(1e-8, 1.0, 64), np.geomspace(1e-8, 1.0, 64)])
        qv = 2.0 * j.value(zs) / zs**2
        i_bad = int(np.argmax(qv))
        vi_check = HypothesisCheck(
            "vi", "fail",
            constants={"sup_quotient": float(np.max(qv)),
                       "inf_quotient": float(np.min(qv)), "m": m,
                       "upper_limit": lam_m - lam_k},
            witness={"zeta": float(zs[i_bad]), "quotient": float(qv[i_bad])})
    checks["vi"] = vi_check

    # (vii) 0 <= liminf 2 j / zeta^2 <= limsup <= gamma < lam_{k+1} - lam_k
    a_r = _quadratic_tail_coeff(j.pieces[-1])
    a_l = _quadratic_tail_coeff(j.pieces[0])
    if a_r is None or a_l is None:
        checks["vii"] = HypothesisCheck(
            "vii", "fail", constants={"gap": gap},
            witness={"reason": "tail degree exceeds 2, quotient unbounded"})
    else:
        liminf = 2.0 * min(a_l, a_r)
        gamma = max(2.0 * a_l, 2.0 * a_r, 0.0)
        ok = (liminf >= -1e-12) and (gamma < gap)
        checks["vii"] = HypothesisCheck(
            "vii", "pass" if ok else "fail",
            constants={"gamma": gamma, "liminf": liminf, "gap": gap},
            witness=None if ok else {"gamma": float(gamma), "gap": float(gap)})

    return HypothesisReport(checks)
