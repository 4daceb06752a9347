"""Acceptance gate: ten numbered criteria, one printed verdict line each.

Criterion 7 includes a pointwise residual clause that a spectral Galerkin
discretization cannot meet: the certified solutions cross the potential
kinks at |x| = 1, and the partial-sum transition layer of the residual at a
crossing has height proportional to the subgradient jump there, independent
of the truncation level.  That clause is asserted as stated and left
failing; every other clause of criterion 7 is verified separately.
"""

import subprocess
import sys

import numpy as np
import pytest

import hvisolve as hv
from conftest import config_text
from test_reduction import brute_force_theta, h1_dist

MU = 1.5
SL = 0.5


def verdict(num, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    print(f"criterion {num:2d}: {tag}  {detail}".rstrip())
    return ok


def test_criterion_01_example_potential_geometry(example_j):
    checks = [
        abs(example_j.value(1.0) + MU / 2),
        abs(example_j.value(3.0) + 5 * MU / 2),
        abs(example_j.value(4.0) + 2 * MU),
        abs(example_j.value(4.0 + 2 * MU / SL)),
        abs(example_j.clarke_interval(1.0).lo + 2 * MU),
        abs(example_j.clarke_interval(1.0).hi + MU),
        abs(example_j.clarke_interval(4.0).lo - SL),
        abs(example_j.clarke_interval(4.0).hi - MU),
    ]
    worst = max(checks)
    assert verdict(1, worst < 1e-12, f"worst geometry error {worst:.2e}")


def test_criterion_02_hypothesis_window(basis68):
    ok = True
    for mu in (0.5, 1.5, 2.9):
        rep = hv.check_hypotheses(hv.example_potential(mu, 0.4 * mu, 0.4 * mu),
                                  basis68, 2, 2)
        ok = ok and rep.all_pass
    rep6 = hv.check_hypotheses(hv.example_potential(6.0, 0.5, 0.5),
                               basis68, 2, 2)
    wit = rep6.checks["v"].witness or {}
    ok = ok and (not rep6.all_pass) and "v" in rep6.failed \
        and abs(wit.get("gap", np.nan) - 5.0) < 1e-12
    assert verdict(2, ok, f"mu=6 gap witness {wit.get('gap')}")


def test_criterion_03_coercivity_constant(interval_domain):
    basis = hv.build_basis(interval_domain, 258)
    quad = hv.build_quadrature(interval_domain, basis)
    worst = 0.0
    for eps in (0.1, 1.0, 4.0):
        beta = lambda z, e=eps: np.full(np.atleast_1d(z).shape[0], 9.0 - e)
        vals = [hv.coercivity_constant(basis, 2, beta, nt, quad)
                for nt in (16, 64, 256)]
        worst = max(worst, max(abs(v - eps / 9.0) for v in vals))
        worst = max(worst, max(vals) - min(vals))
    assert verdict(3, worst < 1e-8, f"worst deviation {worst:.2e}")


def test_criterion_04_strong_monotonicity(default_ctx):
    mu = default_ctx.potential.params["mu"]
    beta = lambda z: np.full(np.atleast_1d(z).shape[0],
                             mu + default_ctx.lambda_k)
    nt = default_ctx.decomposition.n_trunc
    xi = hv.coercivity_constant(default_ctx.basis, 2, beta, nt,
                                default_ctx.quadrature)
    rng = np.random.default_rng(2024)
    n = default_ctx.basis.n_modes
    i0 = default_ctx.decomposition.indices_H0
    ih = default_ctx.decomposition.indices_Hhat
    margins = []
    for _ in range(1000):
        u = np.zeros(n)
        u[i0] = 3.0 * rng.standard_normal(len(i0))
        v1 = np.zeros(n)
        v2 = np.zeros(n)
        v1[ih] = rng.standard_normal(len(ih))
        v2[ih] = rng.standard_normal(len(ih))
        margins.append(hv.strong_convexity_audit(
            default_ctx, default_ctx.vector(u),
            default_ctx.vector(v1), default_ctx.vector(v2)))
    worst = min(margins)
    assert verdict(4, worst >= xi - 1e-8,
                   f"worst margin {worst:.6f} vs bound {xi:.6f}")


def test_criterion_05_reduction_correctness(basis68, example_j):
    quad = hv.build_quadrature(basis68.domain, basis68)
    ctx = hv.EnergyContext.create(basis68, hv.decompose(basis68, 2, 2, 5),
                                  example_j, quad)
    zero = ctx.vector(np.zeros(ctx.basis.n_modes))
    ok = np.linalg.norm(hv.reduce(ctx, zero).theta.coeffs) <= 1e-10
    rng = np.random.default_rng(99)
    i0 = ctx.decomposition.indices_H0
    ih = ctx.decomposition.indices_Hhat
    lam0 = ctx.basis.eigenvalues[i0]
    worst_oracle = 0.0
    worst_warm = 0.0
    for _ in range(20):
        raw = rng.standard_normal(len(i0))
        raw *= (0.5 * rng.uniform(0.1, 1.0)) / np.sqrt(np.sum(lam0 * raw * raw))
        u = np.zeros(ctx.basis.n_modes)
        u[i0] = raw
        uvec = ctx.vector(u)
        cold = hv.reduce(ctx, uvec)
        oracle = brute_force_theta(ctx, uvec)
        worst_oracle = max(worst_oracle,
                           h1_dist(ctx, cold.theta.coeffs, oracle))
        warm = hv.reduce(ctx, uvec, hv.InnerOptions(
            warm_start=cold.theta.coeffs[ih]
            + 1e-2 * rng.standard_normal(len(ih))))
        worst_warm = max(worst_warm,
                         h1_dist(ctx, cold.theta.coeffs, warm.theta.coeffs))
    ok = ok and worst_oracle < 1e-4 and worst_warm < 1e-6
    assert verdict(5, ok, f"oracle gap {worst_oracle:.2e}, "
                          f"cold/warm gap {worst_warm:.2e}")


def test_criterion_06_local_linking(default_ctx):
    rep = hv.local_linking_check(default_ctx, 0.5, 12)
    ok = rep.delta > 0 and rep.worst_Y >= -1e-10 and rep.worst_V <= 1e-10 \
        and not rep.witnesses
    ctx0 = hv.EnergyContext.create(default_ctx.basis,
                                   default_ctx.decomposition,
                                   hv.trivial_potential(),
                                   default_ctx.quadrature)
    for delta in (1e-3, 0.1, 1.0, 10.0):
        r0 = hv.local_linking_check(ctx0, delta, 8)
        ok = ok and r0.worst_Y >= -1e-10 and r0.delta >= delta * (1 - 1e-9)
    assert verdict(6, ok, f"delta {rep.delta:.4g}")


# values regression-pinned after the first certified n_trunc=64 run
PIN_PSI = -8.3619247068722888
PIN_DIST = 18.75042308042018
PIN_H1 = (9.3752115424913942, 9.3752115379287861)


def test_criterion_07_multiplicity(solved):
    sols = solved.solutions
    clauses = {"count": len(sols) >= 2}
    if sols:
        clauses["reduced_residual"] = all(
            s["critical_point"].reduced_residual <= 1e-6 for s in sols)
        clauses["full_min_norm"] = all(
            s["full_min_norm"] <= 1e-5 for s in sols)
        clauses["max_violation"] = all(
            s["residual_report"].max_violation <= 1e-6 for s in sols)
        clauses["distance"] = solved.pairwise_h1_distance >= 1e-3
        clauses["nontrivial"] = all(
            s["critical_point"].h1_norm() >= 1e-4 for s in sols)
        clauses["pin_psi"] = all(
            abs(s["critical_point"].psi_value - PIN_PSI) < 1e-8 for s in sols)
        clauses["pin_distance"] = abs(solved.pairwise_h1_distance
                                      - PIN_DIST) < 1e-6
    failed = sorted(k for k, v in clauses.items() if not v)
    mv = max(s["residual_report"].max_violation for s in sols) if sols else np.nan
    ok = not failed
    verdict(7, ok, f"failing clauses: {failed or 'none'}; "
                   f"max pointwise violation {mv:.4f}")
    assert ok, ("pointwise residual clause cannot be met by a truncated "
                f"eigenfunction expansion; failing clauses {failed}")


def test_criterion_07_attainable_clauses(solved):
    sols = solved.solutions
    assert len(sols) >= 2
    for s, pin in zip(sols, PIN_H1):
        assert s["critical_point"].reduced_residual <= 1e-6
        assert s["full_min_norm"] <= 1e-5
        assert s["critical_point"].h1_norm() >= 1e-4
        assert abs(s["critical_point"].psi_value - PIN_PSI) < 1e-8
        assert abs(s["x"].h1_norm - pin) < 1e-6
    assert solved.pairwise_h1_distance >= 1e-3
    assert abs(solved.pairwise_h1_distance - PIN_DIST) < 1e-6


def test_criterion_08_lift_consistency(solved, default_config):
    budget = default_config.tol_inner + default_config.tol_outer + 1e-8
    worst = max(s["full_min_norm"] for s in solved.solutions)
    assert verdict(8, worst <= budget,
                   f"worst lifted min-norm {worst:.3e} vs budget {budget:.3e}")


def test_criterion_09_bounded_below(default_ctx):
    try:
        cp = hv.minimize_psi(default_ctx, hv.OuterOptions(multistart=50))
        ok = cp.psi_value > -1e6
        detail = f"50 starts, min psi {cp.psi_value:.6f}"
    except hv.SearchError as exc:
        ok, detail = False, f"descent guard fired: {exc}"
    assert verdict(9, ok, detail)


def test_criterion_10_determinism(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(config_text(**{"solver.n_trunc": 64}))
    out = tmp_path / "out"
    cmd = [sys.executable, "-m", "hvisolve.cli",
           "--config", str(cfg), "--out", str(out)]
    r1 = subprocess.run(cmd, capture_output=True, text=True)
    first = (out / "report.txt").read_bytes()
    r2 = subprocess.run(cmd, capture_output=True, text=True)
    second = (out / "report.txt").read_bytes()
    ok = r1.returncode == 0 and r2.returncode == 0 and first == second
    assert verdict(10, ok, f"report.txt {len(first)} bytes, "
                           f"byte-identical: {first == second}")
