"""Critical-point search on the reduced low-mode landscape.

The reduced functional psi lives on the small space spanned by the modes
up to the resonant group.  The search verifies the local sign-splitting
geometry near the origin, finds a global minimizer by multistart
gradient-sampling descent, then hunts a second nontrivial critical point
(path minimax with a restart fallback), and finally lifts reduced
critical points back to certified solutions of the inclusion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .energy import (EnergyContext, ResidualReport, min_norm_subgradient,
                     residual_certificate)
from .reduction import InnerOptions, reduced_eval
from .spectral import SpectralVector

PSI_FLOOR = -1.0e6
BRANCH_TOL = 1e-8  # dichotomy between inf psi = 0 and inf psi < 0


class SearchError(RuntimeError):
    pass


class DistinctnessError(SearchError):
    def __init__(self, msg, first=None, second=None):
        super().__init__(msg)
        self.first = first
        self.second = second


@dataclass
class OuterOptions:
    tol: float = 1e-7
    multistart: int = 8
    max_iter: int = 200
    n_grad: int = 6
    sample_radius: float = 1e-4
    start_radius: float = 2.0
    seed: int = 0
    nontriviality: float = 1e-4
    distinctness: float = 1e-3
    inner: InnerOptions = field(default_factory=InnerOptions)
    path_segments: int = 32
    path_sweeps: int = 6


@dataclass
class CriticalPoint:
    u: SpectralVector
    psi_value: float
    reduced_residual: float
    kind: str  # "global_min" | "linking_second" | "other"

    def h1_norm(self) -> float:
        return self.u.h1_norm


@dataclass
class LinkingReport:
    delta: float
    tested_deltas: list[float]
    worst_Y: float  # most negative psi seen on the Y-sphere at delta
    worst_V: float  # most positive psi seen on the V-sphere at delta
    witnesses: list[dict]
    y_trivial: bool


@dataclass
class SolutionSet:
    solutions: list[dict]  # x, residual_report, critical_point, full_min_norm
    pairwise_h1_distance: float
    linking: LinkingReport
    hypothesis_report: object
    diagnostics: dict


class _PsiOracle:
    """Reduced-functional evaluations with warm-started inner solves."""

    def __init__(self, ctx: EnergyContext, inner: InnerOptions):
        self.ctx = ctx
        self.inner = inner
        self._warm = None
        self.min_psi_seen = 0.0

    def at(self, coeffs_H0: np.ndarray, cold: bool = False):
        u = np.zeros(self.ctx.basis.n_modes)
        u[self.ctx.decomposition.indices_H0] = coeffs_H0
        opts = InnerOptions(tol=self.inner.tol, max_iter=self.inner.max_iter,
                            warm_start=None if cold else self._warm)
        ev = reduced_eval(self.ctx, self.ctx.vector(u), opts)
        self._warm = ev.reduction.theta.coeffs[self.ctx.decomposition.indices_Hhat].copy()
        self.min_psi_seen = min(self.min_psi_seen, ev.psi_value)
        if ev.psi_value < PSI_FLOOR:
            raise SearchError(
                f"reduced functional fell below the floor {PSI_FLOOR}; "
                "boundedness below is violated, hypotheses do not hold")
        return ev

    def psi(self, coeffs_H0: np.ndarray) -> float:
        return self.at(coeffs_H0).psi_value

    def grad(self, coeffs_H0: np.ndarray) -> np.ndarray:
        ev = self.at(coeffs_H0)
        return ev.reduced_subgradient.coeffs[self.ctx.decomposition.indices_H0]


def _min_norm_combination(G: np.ndarray) -> np.ndarray:
    """Minimal-norm point of the convex hull of the rows of G."""
    n = G.shape[0]
    if n == 1:
        return G[0]
    Q = G @ G.T

    def f(a):
        return float(a @ Q @ a)

    def fprime(a):
        return 2.0 * Q @ a

    cons = ({"type": "eq", "fun": lambda a: np.sum(a) - 1.0,
             "jac": lambda a: np.ones_like(a)},)
    res = scipy.optimize.minimize(f, np.full(n, 1.0 / n), jac=fprime,
                                  bounds=[(0.0, 1.0)] * n, constraints=cons,
                                  method="SLSQP",
                                  options={"maxiter": 100, "ftol": 1e-16})
    a = np.clip(res.x, 0.0, 1.0)
    s = a.sum()
    a = a / s if s > 0 else np.full(n, 1.0 / n)
    return a @ G


def _sphere_sample(rng: np.random.Generator, idx_local: np.ndarray,
                   lam_local: np.ndarray, dim_H0: int, radius: float) -> np.ndarray:
    """Random point of H^1 norm ``radius`` in a sub-span of the low modes."""
    c = np.zeros(dim_H0)
    g = rng.standard_normal(len(idx_local))
    g /= np.sqrt(np.sum(lam_local * g * g))
    c[idx_local] = radius * g
    return c


def local_linking_check(ctx: EnergyContext, delta_max: float, n_samples: int,
                        opts: OuterOptions | None = None) -> LinkingReport:
    """Largest delta <= delta_max for which psi >= -1e-10 on the Y-sphere
    and psi <= 1e-10 on the V-sphere, located by bisection.  Failure is
    data: delta = 0 with witnesses."""
    opts = opts or OuterOptions()
    rng = np.random.default_rng(opts.seed + 101)
    dec = ctx.decomposition
    i0 = dec.indices_H0
    pos = {g: i for i, g in enumerate(i0)}
    y_local = np.array([pos[i] for i in dec.indices_Y], dtype=int)
    v_local = np.array([pos[i] for i in dec.indices_V], dtype=int)
    lam = ctx.basis.eigenvalues
    oracle = _PsiOracle(ctx, opts.inner)
    slack = 1e-10

    def probe(delta):
        worst_y, worst_v = np.inf, -np.inf
        wit = []
        for _ in range(n_samples):
            if len(y_local):
                cy = _sphere_sample(rng, y_local, lam[dec.indices_Y], len(i0), delta)
                py = oracle.psi(cy)
                worst_y = min(worst_y, py)
                if py < -slack:
                    wit.append({"side": "Y", "delta": delta, "psi": py})
            cv = _sphere_sample(rng, v_local, lam[dec.indices_V], len(i0), delta)
            pv = oracle.psi(cv)
            worst_v = max(worst_v, pv)
            if pv > slack:
                wit.append({"side": "V", "delta": delta, "psi": pv})
        ok = not wit
        return ok, worst_y, worst_v, wit

    tested = []
    ok, wy, wv, wit = probe(delta_max)
    tested.append(delta_max)
    if ok:
        return LinkingReport(delta=delta_max, tested_deltas=tested, worst_Y=wy,
                             worst_V=wv, witnesses=[], y_trivial=len(y_local) == 0)
    lo_pass, hi_fail = 0.0, delta_max
    best = (0.0, np.inf, -np.inf, wit)
    for _ in range(16):
        mid = 0.5 * (lo_pass + hi_fail)
        ok, wy, wv, w = probe(mid)
        tested.append(mid)
        if ok:
            lo_pass = mid
            best = (mid, wy, wv, [])
        else:
            hi_fail = mid
            if best[0] == 0.0:
                best = (0.0, wy, wv, w)
    delta, wy, wv, wit = best
    return LinkingReport(delta=delta, tested_deltas=tested, worst_Y=wy,
                         worst_V=wv, witnesses=wit,
                         y_trivial=len(y_local) == 0)


def _descend(oracle: _PsiOracle, c0: np.ndarray, opts: OuterOptions,
             rng: np.random.Generator) -> tuple[np.ndarray, float, float]:
    """Gradient-sampling descent from one start; returns (point, psi, residual)."""
    c = c0.copy()
    psi = oracle.psi(c)
    radius = opts.sample_radius
    for _ in range(opts.max_iter):
        G = [oracle.grad(c)]
        for _ in range(opts.n_grad):
            jitter = rng.standard_normal(len(c))
            G.append(oracle.grad(c + radius * jitter / max(np.linalg.norm(jitter), 1e-12)))
        g = _min_norm_combination(np.asarray(G))
        gnorm = float(np.linalg.norm(g))
        if gnorm <= opts.tol:
            break
        d = -g / gnorm
        t, accepted = 1.0, False
        for _ in range(30):
            trial = oracle.psi(c + t * d)
            if trial <= psi - 1e-4 * t * gnorm:
                c, psi, accepted = c + t * d, trial, True
                break
            t *= 0.5
        if not accepted:
            radius *= 0.5
            if radius < 1e-12:
                break
    # smooth polish: away from kink preimages psi is differentiable and
    # BFGS converges quadratically where sampling stalls
    res = scipy.optimize.minimize(oracle.psi, c, jac=oracle.grad, method="BFGS",
                                  options={"gtol": 0.1 * opts.tol, "maxiter": 200})
    if res.fun <= psi + 1e-14:
        c, psi = res.x, float(res.fun)
    c = _newton_polish(oracle, c, 0.2 * opts.tol)
    psi = oracle.psi(c)
    residual = float(np.linalg.norm(oracle.grad(c)))
    return c, psi, residual


def _newton_polish(oracle: _PsiOracle, c: np.ndarray, tol: float) -> np.ndarray:
    """Drive the reduced gradient to tol by finite-difference Newton on the
    low-mode stationarity system; the low-mode dimension is small."""
    n = len(c)
    g = oracle.grad(c)
    for _ in range(30):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            break
        fd = 1e-7 * (1.0 + float(np.max(np.abs(c))))
        J = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = fd
            J[:, i] = (oracle.grad(c + e) - g) / fd
        try:
            dc = np.linalg.lstsq(J, -g, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
        t = 1.0
        improved = False
        for _ in range(20):
            g_new = oracle.grad(c + t * dc)
            if float(np.linalg.norm(g_new)) < gnorm:
                c, g, improved = c + t * dc, g_new, True
                break
            t *= 0.5
        if not improved:
            break
    return c


def minimize_psi(ctx: EnergyContext, opts: OuterOptions | None = None) -> CriticalPoint:
    """Multistart nonsmooth descent for the global minimizer of the reduced
    functional."""
    opts = opts or OuterOptions()
    dec = ctx.decomposition
    if dec.dim_H0 < 1:
        raise SearchError("low-mode space is empty")
    rng = np.random.default_rng(opts.seed)
    oracle = _PsiOracle(ctx, opts.inner)
    starts = [np.zeros(dec.dim_H0)]
    lam0 = ctx.basis.eigenvalues[dec.indices_H0]
    for _ in range(opts.multistart - 1):
        g = rng.standard_normal(dec.dim_H0)
        g /= np.sqrt(np.sum(lam0 * g * g))
        starts.append(rng.uniform(0.2, 1.0) * opts.start_radius * g)
    best = None
    for c0 in starts:
        c, psi, resid = _descend(oracle, c0, opts, rng)
        if best is None or psi < best[1]:
            best = (c, psi, resid)
    c, psi, resid = best
    # recomputed from scratch (cold inner solve) at reporting time; the
    # residual is the interval-aware min-norm over the low modes, since the
    # lifted point generically has nodes pinned at potential breakpoints
    ev = oracle.at(c, cold=True)
    u = np.zeros(ctx.basis.n_modes)
    u[dec.indices_H0] = c
    x = ctx.vector(u) + ev.reduction.theta
    resid = min_norm_subgradient(ctx, x, restriction=dec.indices_H0)
    if resid > opts.tol:
        raise SearchError(
            f"minimizer residual {resid:.3e} exceeds tolerance {opts.tol}")
    return CriticalPoint(u=ctx.vector(u), psi_value=ev.psi_value,
                         reduced_residual=resid, kind="global_min")


def _refine_candidate(oracle: _PsiOracle, c: np.ndarray,
                      opts: OuterOptions) -> tuple[np.ndarray, float]:
    """Drive the aggregated residual norm down around a candidate point."""

    def m(cc):
        return float(np.linalg.norm(oracle.grad(cc)))

    res = scipy.optimize.minimize(m, c, method="Nelder-Mead",
                                  options={"xatol": 1e-10, "fatol": 1e-12,
                                           "maxiter": 400})
    return res.x, float(res.fun)


def second_point_search(ctx: EnergyContext, first: CriticalPoint, delta: float,
                        opts: OuterOptions | None = None) -> CriticalPoint:
    """Second nontrivial critical point.

    With a strictly negative minimum a piecewise-linear path minimax between
    the origin and the minimizer is tried first; when the minimax point
    collapses onto the origin or the minimizer (which happens for even
    potentials, whose two guaranteed points form a symmetric pair of minima)
    the search restarts from the reflected and perturbed configurations.
    In the degenerate flat branch a point of the V-sphere at radius delta/2
    is certified directly.
    """
    opts = opts or OuterOptions()
    if delta <= 0:
        raise SearchError("local linking radius must be positive")
    dec = ctx.decomposition
    rng = np.random.default_rng(opts.seed + 577)
    oracle = _PsiOracle(ctx, opts.inner)
    c_first = first.u.coeffs[dec.indices_H0]
    lam0 = ctx.basis.eigenvalues[dec.indices_H0]

    def h1(c):
        return float(np.sqrt(np.sum(lam0 * c * c)))

    def distinct(c):
        return (h1(c - c_first) > opts.distinctness
                and h1(c) > max(opts.nontriviality, opts.distinctness))

    def accept(c, kind):
        ev = oracle.at(c, cold=True)
        u = np.zeros(ctx.basis.n_modes)
        u[dec.indices_H0] = c
        x = ctx.vector(u) + ev.reduction.theta
        resid = min_norm_subgradient(ctx, x, restriction=dec.indices_H0)
        if resid > opts.tol:
            return None
        return CriticalPoint(u=ctx.vector(u), psi_value=ev.psi_value,
                             reduced_residual=resid, kind=kind)

    if first.psi_value < -BRANCH_TOL:
        # branch 1: path minimax between the origin and the minimizer
        n = opts.path_segments
        path = np.linspace(0.0, 1.0, n + 1)[:, None] * c_first[None, :]
        for sweep in range(opts.path_sweeps):
            vals = np.array([oracle.psi(p) for p in path])
            imax = int(np.argmax(vals))
            for i in range(1, n):
                g = oracle.grad(path[i])
                chord = path[i + 1] - path[i - 1]
                nc = np.linalg.norm(chord)
                if nc > 0:
                    g = g - (g @ chord) / nc**2 * chord
                step = 0.5 ** (sweep + 2)
                gl = np.linalg.norm(g)
                if gl > 0:
                    path[i] -= step * min(1.0, h1(c_first) / n) * g / gl
            # re-spread nodes by cumulative chord length
            seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
            s = np.concatenate(([0.0], np.cumsum(seg)))
            if s[-1] > 0:
                snew = np.linspace(0.0, s[-1], n + 1)
                path = np.stack([np.interp(snew, s, path[:, d])
                                 for d in range(path.shape[1])], axis=1)
        vals = np.array([oracle.psi(p) for p in path])
        imax = int(np.argmax(vals))
        cand, mres = _refine_candidate(oracle, path[imax], opts)
        if mres <= opts.tol and distinct(cand):
            out = accept(cand, "linking_second")
            if out is not None:
                return out
        # restart fallback: descend from the reflection of the minimizer and
        # from perturbed starts, keeping only points distinct from the first
        candidates = [-c_first]
        for _ in range(opts.multistart):
            g = rng.standard_normal(dec.dim_H0)
            g /= np.sqrt(np.sum(lam0 * g * g))
            candidates.append(-c_first + 0.3 * h1(c_first) * g)
        best = None
        for c0 in candidates:
            c, psi, resid = _descend(oracle, c0, opts, rng)
            if distinct(c):
                out = accept(c, "linking_second")
                if out is not None and (best is None or out.psi_value < best.psi_value):
                    best = out
        if best is not None:
            return best
        raise DistinctnessError(
            "no certified second point distinct from the minimizer and the origin",
            first=first, second=(cand, mres))

    # branch 2: flat minimum; the V-sphere at radius delta/2 is critical
    pos = {g: i for i, g in enumerate(dec.indices_H0)}
    v_local = np.array([pos[i] for i in dec.indices_V], dtype=int)
    for _ in range(max(4, opts.multistart)):
        c = _sphere_sample(rng, v_local, ctx.basis.eigenvalues[dec.indices_V],
                           dec.dim_H0, delta / 2.0)
        out = accept(c, "linking_second")
        if out is not None and distinct(c):
            return out
    raise SearchError("degenerate flat branch: no V-sphere point certified "
                      f"at radius {delta / 2.0}")


# -- end-to-end pipeline -----------------------------------------------------

class PipelineError(RuntimeError):
    """Stage failure with diagnostics attached."""

    def __init__(self, stage: str, message: str, payload=None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.payload = payload


class HypothesisFailure(PipelineError):
    def __init__(self, report):
        failed = ", ".join(report.failed)
        super().__init__("hypotheses", f"hypotheses failed: {failed}", report)
        self.report = report


class CertificationError(PipelineError):
    pass


def build_context(config) -> EnergyContext:
    """Discretization for a run: basis sized to the truncation, quadrature,
    decomposition and potential."""
    from .config import default_n_trunc
    from .spectral import build_basis, build_quadrature, decompose

    domain = config.domain
    cap = domain.n_grid if domain.kind == "grid1d" else 1 << 14
    n_max = config.n_trunc if config.n_trunc is not None else config.k + 8
    basis = build_basis(domain, min(max(n_max, config.k + 2), cap),
                        group_tol=config.tol_grouping)
    while basis.n_groups <= config.k and basis.n_modes < cap:
        basis = build_basis(domain, min(2 * basis.n_modes, cap),
                            group_tol=config.tol_grouping)
    if config.n_trunc is None:
        # pad past the resonant group; the probe basis only located group k
        desired = basis.distinct_groups[config.k - 1][-1] + 1 + 64
    else:
        desired = config.n_trunc
    if desired > basis.n_modes:
        basis = build_basis(domain, min(desired, cap),
                            group_tol=config.tol_grouping)
    n_trunc = default_n_trunc(config, basis)
    quad = build_quadrature(domain, basis)
    if config.quad_nodes > 0 and domain.kind == "interval":
        x, w = np.polynomial.legendre.leggauss(config.quad_nodes)
        from .spectral import Quadrature
        L = domain.length
        quad = Quadrature(0.5 * L * (x + 1.0), 0.5 * L * w)
    dec = decompose(basis, config.k, config.m, n_trunc)
    return EnergyContext.create(basis, dec, config.build_potential(), quad)


def solve_hvi(config) -> SolutionSet:
    """Full pipeline: basis, hypotheses, local linking, minimization, second
    point, lift and pointwise certification of both solutions."""
    from .potential import check_hypotheses
    from .reduction import InnerSolveError, continuity_probe
    from .spectral import coercivity_constant

    try:
        ctx = build_context(config)
    except Exception as exc:
        raise PipelineError("spectral", str(exc)) from exc
    dec = ctx.decomposition

    hyp = check_hypotheses(ctx.potential, ctx.basis, config.k, config.m)
    if not hyp.all_pass and not config.override_hypotheses:
        raise HypothesisFailure(hyp)

    opts = OuterOptions(tol=config.tol_outer, seed=config.seed,
                        nontriviality=config.nontriviality,
                        distinctness=config.distinctness,
                        inner=InnerOptions(tol=config.tol_inner))

    linking = local_linking_check(ctx, delta_max=0.5, n_samples=12, opts=opts)
    if linking.delta <= 0:
        raise PipelineError("local_linking",
                            "no positive linking radius found", linking)

    try:
        first = minimize_psi(ctx, opts)
    except (SearchError, InnerSolveError) as exc:
        raise PipelineError("minimize_psi", str(exc)) from exc
    try:
        second = second_point_search(ctx, first, linking.delta, opts)
    except (SearchError, InnerSolveError) as exc:
        raise PipelineError("second_point", str(exc)) from exc

    solutions = []
    inner_cert = InnerOptions(tol=config.tol_inner)
    from .reduction import reduce as reduce_op
    for cp in (first, second):
        res = reduce_op(ctx, cp.u, inner_cert)
        x = cp.u + res.theta
        report = residual_certificate(ctx, x, config.tol_residual)
        full_norm = min_norm_subgradient(ctx, x)
        solutions.append({"x": x, "residual_report": report,
                          "critical_point": cp, "full_min_norm": full_norm,
                          "reduction": res})

    dist = (solutions[0]["x"] - solutions[1]["x"]).h1_norm
    lift_budget = config.tol_inner + config.tol_outer + 1e-8
    problems = []
    for i, s in enumerate(solutions, start=1):
        if not s["residual_report"].ok:
            problems.append(
                f"solution {i}: pointwise violation "
                f"{s['residual_report'].max_violation:.3e} > {config.tol_residual}")
        if s["full_min_norm"] > lift_budget:
            problems.append(
                f"solution {i}: full min-norm subgradient "
                f"{s['full_min_norm']:.3e} exceeds lift budget {lift_budget:.3e}")
        if s["x"].h1_norm <= config.nontriviality:
            problems.append(f"solution {i}: trivial (H1 norm {s['x'].h1_norm:.3e})")
    if dist <= config.distinctness:
        problems.append(f"solutions coincide (H1 distance {dist:.3e})")

    chain_bound = _chain_bound(ctx)

    def beta_fn(z):
        z = np.asarray(z, dtype=float)
        n = z.shape[0] if z.ndim > 0 else 1
        return np.full(n, chain_bound + ctx.lambda_k)

    diag = {
        "coercivity_constant": coercivity_constant(
            ctx.basis, config.k, beta_fn, dec.n_trunc, ctx.quadrature),
        "continuity_probe": continuity_probe(
            ctx, ctx.vector(np.zeros(ctx.basis.n_modes)), radius=1e-2,
            n_samples=4, rng=np.random.default_rng(config.seed + 7),
            opts=inner_cert),
        "strong_convexity_margin": min(
            s["reduction"].strong_convexity_margin for s in solutions),
        "min_psi_seen": min(s["critical_point"].psi_value for s in solutions),
        "chain_slope_bound": chain_bound,
    }

    out = SolutionSet(solutions=solutions, pairwise_h1_distance=dist,
                      linking=linking, hypothesis_report=hyp,
                      diagnostics=diag)
    if problems:
        raise CertificationError("certify", "; ".join(problems), out)
    return out


def _chain_bound(ctx: EnergyContext) -> float:
    from .potential import chain_slope_bound
    return chain_slope_bound(ctx.potential)
