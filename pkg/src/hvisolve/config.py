"""Run configuration: flat ``section.key = value`` files and defaults."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .potential import (PiecewisePotential, example_potential, max_potential,
                        trivial_potential)
from .spectral import DomainSpec


class ConfigError(ValueError):
    pass


_DEFAULT_TRUNC_PAD = 64  # modes kept past the resonant group


@dataclass(frozen=True)
class SolverConfig:
    domain: DomainSpec
    k: int
    m: int
    potential_family: str
    potential_params: dict
    n_trunc: int | None = None  # None: last mode of group k + pad
    quad_nodes: int = 0         # 0: automatic oversampling rule
    tol_inner: float = 1e-9
    tol_outer: float = 1e-7
    tol_residual: float = 1.0
    tol_grouping: float = 1e-9
    nontriviality: float = 1e-4
    distinctness: float = 1e-3
    seed: int = 0
    out_dir: str = "out"
    check_only: bool = False
    override_hypotheses: bool = False

    def __post_init__(self):
        if not (1 <= self.m <= self.k):
            raise ConfigError(f"need 1 <= m <= k, got m={self.m}, k={self.k}")
        for name in ("tol_inner", "tol_outer", "tol_residual", "tol_grouping",
                     "nontriviality", "distinctness"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")

    def build_potential(self) -> PiecewisePotential:
        p = self.potential_params
        if self.potential_family == "example":
            return example_potential(p["mu"], p.get("slope_neg", 0.5),
                                     p.get("slope_pos", 0.5))
        if self.potential_family == "max":
            return max_potential(p["xi"], p.get("c", 0.0))
        if self.potential_family == "zero":
            return trivial_potential()
        raise ConfigError(f"unknown potential family {self.potential_family!r}")

    def to_lines(self) -> list[str]:
        d = self.domain
        lines = [f"domain.kind = {d.kind}"]
        if d.kind in ("interval", "grid1d"):
            lines.append(f"domain.length = {d.length!r}")
        if d.kind == "grid1d":
            lines.append(f"domain.n_grid = {d.n_grid}")
        if d.kind == "rectangle":
            lines.append(f"domain.lx = {d.lx!r}")
            lines.append(f"domain.ly = {d.ly!r}")
        lines += [f"solver.k = {self.k}", f"solver.m = {self.m}"]
        if self.n_trunc is not None:
            lines.append(f"solver.n_trunc = {self.n_trunc}")
        lines.append(f"potential.family = {self.potential_family}")
        for key in sorted(self.potential_params):
            lines.append(f"potential.{key} = {self.potential_params[key]!r}")
        lines += [
            f"quadrature.nodes = {self.quad_nodes}",
            f"tol.inner = {self.tol_inner!r}",
            f"tol.outer = {self.tol_outer!r}",
            f"tol.residual = {self.tol_residual!r}",
            f"tol.grouping = {self.tol_grouping!r}",
            f"threshold.nontriviality = {self.nontriviality!r}",
            f"threshold.distinctness = {self.distinctness!r}",
            f"run.seed = {self.seed}",
            f"run.out_dir = {self.out_dir}",
        ]
        return lines


_POTENTIAL_KEYS = {"example": {"mu", "slope_neg", "slope_pos"},
                   "max": {"xi", "c"},
                   "zero": set()}


def parse_config_lines(lines, source: str = "<config>") -> SolverConfig:
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in kv:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        kv[key] = val

    def pop(key, cast, default=None, required=False):
        if key in kv:
            raw = kv.pop(key)
            try:
                return cast(raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {key!r}: {raw!r}") from exc
        if required:
            raise ConfigError(f"{source}: missing required key {key!r}")
        return default

    kind = pop("domain.kind", str, required=True)
    if kind == "interval":
        domain = DomainSpec.interval(pop("domain.length", float, required=True))
    elif kind == "rectangle":
        domain = DomainSpec.rectangle(pop("domain.lx", float, required=True),
                                      pop("domain.ly", float, required=True))
    elif kind == "grid1d":
        domain = DomainSpec.grid1d(pop("domain.length", float, required=True),
                                   pop("domain.n_grid", int, required=True))
    else:
        raise ConfigError(f"{source}: unknown domain.kind {kind!r}")

    k = pop("solver.k", int, required=True)
    m = pop("solver.m", int, default=k)
    family = pop("potential.family", str, required=True)
    if family not in _POTENTIAL_KEYS:
        raise ConfigError(f"{source}: unknown potential.family {family!r}")
    params = {}
    for pkey in sorted(_POTENTIAL_KEYS[family]):
        full = f"potential.{pkey}"
        if full in kv:
            params[pkey] = pop(full, float)
    if family == "example" and "mu" not in params:
        raise ConfigError(f"{source}: missing required key 'potential.mu'")
    if family == "max" and "xi" not in params:
        raise ConfigError(f"{source}: missing required key 'potential.xi'")

    cfg = SolverConfig(
        domain=domain, k=k, m=m,
        potential_family=family, potential_params=params,
        n_trunc=pop("solver.n_trunc", int),
        quad_nodes=pop("quadrature.nodes", int, default=0),
        tol_inner=pop("tol.inner", float, default=1e-9),
        tol_outer=pop("tol.outer", float, default=1e-7),
        tol_residual=pop("tol.residual", float, default=1.0),
        tol_grouping=pop("tol.grouping", float, default=1e-9),
        nontriviality=pop("threshold.nontriviality", float, default=1e-4),
        distinctness=pop("threshold.distinctness", float, default=1e-3),
        seed=pop("run.seed", int, default=0),
        out_dir=pop("run.out_dir", str, default="out"),
    )
    if kv:
        raise ConfigError(f"{source}: unknown keys: {', '.join(sorted(kv))}")
    return cfg


def parse_config(path: str) -> SolverConfig:
    with open(path) as fh:
        return parse_config_lines(fh.readlines(), source=path)


def with_overrides(cfg: SolverConfig, **kwargs) -> SolverConfig:
    return replace(cfg, **{k: v for k, v in kwargs.items() if v is not None})


def default_n_trunc(cfg: SolverConfig, basis) -> int:
    if cfg.n_trunc is not None:
        return cfg.n_trunc
    last_of_k = basis.distinct_groups[cfg.k - 1][-1]
    return min(last_of_k + 1 + _DEFAULT_TRUNC_PAD, basis.n_modes)
