"""Run reports: structured text, per-solution tables, and figures.

The report file carries only deterministic content (config echo, check
verdicts, solution summaries, diagnostics) so that identical runs are
byte-identical.  Wall-clock timings go to a sidecar file that is excluded
from the determinism contract.
"""

from __future__ import annotations

import os

import numpy as np

from .config import SolverConfig
from .energy import EnergyContext
from .multiplicity import SolutionSet
from .spectral import SpectralVector

PLOT_NODES_1D = 512
PLOT_NODES_2D = 128


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def plot_grid(domain) -> np.ndarray:
    """Uniform evaluation grid, independent of the quadrature rule."""
    if domain.kind in ("interval", "grid1d"):
        return np.linspace(0.0, domain.length, PLOT_NODES_1D)
    gx = np.linspace(0.0, domain.lx, PLOT_NODES_2D)
    gy = np.linspace(0.0, domain.ly, PLOT_NODES_2D)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def solution_table(ctx: EnergyContext, x: SpectralVector) -> dict:
    """Columns for one solution on the plot grid."""
    grid = plot_grid(ctx.basis.domain)
    modes = ctx.basis.eval_modes(grid)
    xv = modes @ x.coeffs
    r = modes @ (ctx.shifted_eigenvalues * x.coeffs)
    lo, hi = ctx.potential.clarke_bounds(xv)
    return {"grid": grid, "x": xv, "r": r, "dj_lower": lo, "dj_upper": hi}


def write_solution_csv(path: str, ctx: EnergyContext, x: SpectralVector) -> None:
    tab = solution_table(ctx, x)
    grid = tab["grid"]
    two_d = grid.ndim == 2
    header = ("z1,z2" if two_d else "z") + ",x,r,dj_lower,dj_upper"
    cols = ([grid[:, 0], grid[:, 1]] if two_d else [grid]) + \
        [tab["x"], tab["r"], tab["dj_lower"], tab["dj_upper"]]
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")


def report_lines(config: SolverConfig, result: SolutionSet,
                 ctx: EnergyContext) -> list[str]:
    lines = ["[config]"]
    lines += config.to_lines()
    lines.append("")

    lines.append("[discretization]")
    dec = ctx.decomposition
    lines.append(f"n_modes = {ctx.basis.n_modes}")
    lines.append(f"n_groups = {ctx.basis.n_groups}")
    lines.append(f"n_trunc = {dec.n_trunc}")
    lines.append(f"dim_H0 = {dec.dim_H0}")
    lines.append(f"dim_Hhat = {dec.dim_Hhat}")
    lines.append(f"lambda_k = {_fmt(ctx.lambda_k)}")
    lines.append(f"quadrature_nodes = {ctx.quadrature.n_nodes}")
    lines.append("")

    lines.append("[hypotheses]")
    hyp = result.hypothesis_report
    lines.append(f"all_pass = {_fmt(hyp.all_pass)}")
    for name in sorted(hyp.checks):
        chk = hyp.checks[name]
        lines.append(f"check.{name}.verdict = {chk.verdict}")
        for key in sorted(chk.constants):
            lines.append(f"check.{name}.{key} = {_fmt(chk.constants[key])}")
        if chk.witness:
            for key in sorted(chk.witness):
                lines.append(f"check.{name}.witness.{key} = {_fmt(chk.witness[key])}")
    lines.append("")

    lines.append("[local_linking]")
    lines.append(f"delta = {_fmt(result.linking.delta)}")
    lines.append(f"worst_Y = {_fmt(result.linking.worst_Y)}")
    lines.append(f"worst_V = {_fmt(result.linking.worst_V)}")
    lines.append(f"y_trivial = {_fmt(result.linking.y_trivial)}")
    lines.append(f"n_tested_deltas = {len(result.linking.tested_deltas)}")
    lines.append("")

    for i, sol in enumerate(result.solutions, start=1):
        cp = sol["critical_point"]
        rr = sol["residual_report"]
        lines.append(f"[solution_{i}]")
        lines.append(f"kind = {cp.kind}")
        lines.append(f"psi = {_fmt(cp.psi_value)}")
        lines.append(f"reduced_residual = {_fmt(cp.reduced_residual)}")
        lines.append(f"h1_norm = {_fmt(sol['x'].h1_norm)}")
        lines.append(f"l2_norm = {_fmt(sol['x'].l2_norm)}")
        lines.append(f"full_min_norm_subgradient = {_fmt(sol['full_min_norm'])}")
        lines.append(f"residual.max_violation = {_fmt(rr.max_violation)}")
        lines.append(f"residual.violating_fraction = {_fmt(rr.violating_fraction)}")
        lines.append(f"residual.tol = {_fmt(rr.tol)}")
        lines.append(f"residual.n_nodes = {rr.n_nodes}")
        lines.append(f"certified = {_fmt(rr.ok)}")
        lines.append("")

    lines.append("[summary]")
    lines.append(f"n_solutions = {len(result.solutions)}")
    lines.append(f"pairwise_h1_distance = {_fmt(result.pairwise_h1_distance)}")
    psis = sorted(s["critical_point"].psi_value for s in result.solutions)
    for i, p in enumerate(psis, start=1):
        lines.append(f"psi_{i} = {_fmt(p)}")
    lines.append("")

    lines.append("[diagnostics]")
    for key in sorted(result.diagnostics):
        lines.append(f"{key} = {_fmt(result.diagnostics[key])}")
    return lines


def write_figures(out_dir: str, config: SolverConfig, result: SolutionSet,
                  ctx: EnergyContext) -> list[str]:
    """Render per-solution and potential figures next to the tables."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    domain = ctx.basis.domain
    for i, sol in enumerate(result.solutions, start=1):
        tab = solution_table(ctx, sol["x"])
        path = os.path.join(out_dir, f"solution_{i}.png")
        if tab["grid"].ndim == 1:
            fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
            ax1.plot(tab["grid"], tab["x"], lw=1.2)
            ax1.set_ylabel("x(z)")
            ax1.set_title(f"solution {i}")
            ax2.fill_between(tab["grid"], tab["dj_lower"], tab["dj_upper"],
                             alpha=0.3, label="subgradient interval")
            ax2.plot(tab["grid"], tab["r"], lw=0.8, color="C3", label="r(z)")
            ax2.set_xlabel("z")
            ax2.set_ylabel("r(z)")
            ax2.legend(loc="best", fontsize=8)
        else:
            n = PLOT_NODES_2D
            fig, ax = plt.subplots(figsize=(6, 5))
            im = ax.imshow(tab["x"].reshape(n, n).T, origin="lower",
                           extent=(0, domain.lx, 0, domain.ly), aspect="auto")
            fig.colorbar(im, ax=ax, label="x(z)")
            ax.set_title(f"solution {i}")
        fig.tight_layout()
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)

    j = ctx.potential
    span = 1.5 * max(1.0, float(np.max(np.abs(j.breakpoints))) if
                     len(j.breakpoints) else 1.0)
    zz = np.linspace(-span, span, 800)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(zz, j.value(zz), lw=1.2)
    ax1.set_ylabel("j")
    lo, hi = j.clarke_bounds(zz)
    ax2.plot(zz, lo, lw=0.9, label="lower")
    ax2.plot(zz, hi, lw=0.9, label="upper")
    ax2.set_xlabel("zeta")
    ax2.set_ylabel("subgradient bounds")
    ax2.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, "potential.png")
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)
    return written


def write_outputs(out_dir: str, config: SolverConfig, result: SolutionSet,
                  ctx: EnergyContext, timings: dict | None = None) -> str:
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "report.txt")
    with open(report_path, "w") as fh:
        fh.write("\n".join(report_lines(config, result, ctx)) + "\n")
    for i, sol in enumerate(result.solutions, start=1):
        write_solution_csv(os.path.join(out_dir, f"solution_{i}.csv"),
                           ctx, sol["x"])
    write_figures(out_dir, config, result, ctx)
    if timings:
        with open(os.path.join(out_dir, "timings.txt"), "w") as fh:
            for key in timings:
                fh.write(f"{key} = {timings[key]:.3f}s\n")
    return report_path
