"""Command line entry point.

Reads a flat key = value config, runs the solver pipeline, and writes the
report, one table per solution, and figures to the output directory.

Exit codes: 0 success with two certified solutions, 2 hypotheses failed,
3 search incomplete, 4 certification failed.
"""

from __future__ import annotations

import argparse
import sys
import time

from .config import ConfigError, parse_config, with_overrides
from .multiplicity import (CertificationError, HypothesisFailure,
                           PipelineError, build_context, solve_hvi)
from .potential import check_hypotheses
from .report import write_outputs

EXIT_OK = 0
EXIT_HYPOTHESES = 2
EXIT_SEARCH = 3
EXIT_CERTIFICATION = 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hvisolve",
        description="Spectral solver for resonant elliptic inclusions with "
                    "nonsmooth potentials; certifies two nontrivial solutions.")
    p.add_argument("--config", required=True, help="path to key = value config")
    p.add_argument("--check-only", action="store_true",
                   help="run only the basis build and hypothesis checks")
    p.add_argument("--seed", type=int, default=None, help="override run.seed")
    p.add_argument("--out", default=None, help="override run.out_dir")
    p.add_argument("--tol-inner", type=float, default=None)
    p.add_argument("--tol-outer", type=float, default=None)
    p.add_argument("--tol-residual", type=float, default=None)
    return p


def _write_failure(out_dir: str, config, stage: str, message: str) -> None:
    import os
    os.makedirs(out_dir, exist_ok=True)
    lines = ["[config]"] + config.to_lines() + [
        "", "[failure]", f"stage = {stage}", f"message = {message}"]
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = parse_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    config = with_overrides(config, seed=args.seed, out_dir=args.out,
                            tol_inner=args.tol_inner, tol_outer=args.tol_outer,
                            tol_residual=args.tol_residual)

    if args.check_only:
        try:
            ctx = build_context(config)
        except Exception as exc:
            print(f"error: spectral setup failed: {exc}", file=sys.stderr)
            return EXIT_SEARCH
        hyp = check_hypotheses(ctx.potential, ctx.basis, config.k, config.m)
        for name in sorted(hyp.checks):
            print(f"check {name}: {hyp.checks[name].verdict}")
        if hyp.all_pass:
            print("all hypotheses pass")
            return EXIT_OK
        print(f"failed: {', '.join(hyp.failed)}", file=sys.stderr)
        return EXIT_HYPOTHESES

    t0 = time.perf_counter()
    try:
        result = solve_hvi(config)
    except HypothesisFailure as exc:
        report = exc.payload
        lines = [f"hypotheses failed: {', '.join(report.failed)}"]
        for name in report.failed:
            chk = report.checks[name]
            if chk.witness:
                lines.append(f"  {name} witness: {chk.witness}")
        msg = "; ".join(lines)
        print(f"error: {msg}", file=sys.stderr)
        _write_failure(config.out_dir, config, "hypotheses", msg)
        return EXIT_HYPOTHESES
    except CertificationError as exc:
        # solutions were found but did not certify; report what we have
        result = exc.payload
        ctx = build_context(config)
        write_outputs(config.out_dir, config, result, ctx,
                      timings={"total": time.perf_counter() - t0})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_failure(config.out_dir, config, exc.stage, str(exc))
        return EXIT_SEARCH
    elapsed = time.perf_counter() - t0

    ctx = build_context(config)
    report_path = write_outputs(config.out_dir, config, result, ctx,
                                timings={"total": elapsed})
    print(f"wrote {report_path}: {len(result.solutions)} certified solutions, "
          f"pairwise H1 distance "
          f"{result.pairwise_h1_distance:.6g}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
