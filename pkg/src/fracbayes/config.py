"""Run configuration: a flat, typed ``key = value`` text format.

Keys use dotted section names (``grid.m``, ``sampler.rule``); values are
typed by a fixed schema (int, float, bool, string, or comma-separated
float list).  Unknown keys, duplicate keys, and type mismatches are
load errors, and every load validates the cross-module preconditions by
constructing the grid, regions, prior, link, and sampler objects.
Rendering a config produces a canonical byte-stable text block that
parses back to the same config, which is what run manifests embed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .grid import BumpDatum, build_grid, classify_regions
from .observation import LinkFunction
from .priors import SievePriorConfig
from .sampler import SamplerConfig

__all__ = [
    "RunConfig",
    "default_config",
    "preset_config",
    "parse_config",
    "load_config",
    "render_config",
    "apply_overrides",
    "prior_config",
    "sampler_config",
    "PRESETS",
    "TRUTH_PRESETS",
]

TRUTH_PRESETS = ("bump", "step", "double", "values")


@dataclass(frozen=True)
class GridSection:
    ell: float = 3.0
    m: int = 50
    s: float = 0.5


@dataclass(frozen=True)
class RegionSection:
    omega_lo: float = -1.0
    omega_hi: float = 1.0
    o_lo: float = -0.5
    o_hi: float = 0.5
    d_inner: float = 1.0
    d_outer: float = 3.0


@dataclass(frozen=True)
class DatumSection:
    amplitude: float = 10000.0
    center: float = -2.5
    radius: float = 0.5


@dataclass(frozen=True)
class TruthSection:
    preset: str = "bump"
    height: float = 1.5
    values: tuple[float, ...] = ()


@dataclass(frozen=True)
class ObservationSection:
    n: int = 150
    sigma: float = 0.001
    link_m0: float = 5.0
    link_k: float = 1.0


@dataclass(frozen=True)
class PriorSection:
    family: str = "piecewise"
    j0: int = 3
    t: float = 1.0
    alpha: float = 2.0
    rescale: bool = False
    halfcell: bool = False


@dataclass(frozen=True)
class SamplerSection:
    rule: str = "greedy"
    step_beta: float = 0.1
    iterations: int = 5_000_000
    thinning: int = 1
    link_mode: bool = False


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run parameters (see the module docstring)."""

    seed: int = 0
    grid: GridSection = field(default_factory=GridSection)
    regions: RegionSection = field(default_factory=RegionSection)
    datum: DatumSection = field(default_factory=DatumSection)
    truth: TruthSection = field(default_factory=TruthSection)
    observation: ObservationSection = field(default_factory=ObservationSection)
    prior: PriorSection = field(default_factory=PriorSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)


_SECTIONS = {
    "grid": GridSection,
    "regions": RegionSection,
    "datum": DatumSection,
    "truth": TruthSection,
    "observation": ObservationSection,
    "prior": PriorSection,
    "sampler": SamplerSection,
}


def _schema() -> dict[str, type]:
    out: dict[str, type] = {"seed": int}
    for name, cls in _SECTIONS.items():
        for f in fields(cls):
            out[f"{name}.{f.name}"] = f.type if isinstance(f.type, type) else _ANNOT[f.type]
    return out


_ANNOT = {"int": int, "float": float, "bool": bool, "str": str, "tuple[float, ...]": tuple}
_SCHEMA = _schema()


def _parse_value(raw: str, typ: type, key: str):
    if typ is bool:
        if raw in ("true", "false"):
            return raw == "true"
        raise ValueError(f"key {key!r} expects true/false, got {raw!r}")
    if typ is int:
        try:
            return int(raw)
        except ValueError:
            raise ValueError(f"key {key!r} expects an integer, got {raw!r}") from None
    if typ is float:
        try:
            return float(raw)
        except ValueError:
            raise ValueError(f"key {key!r} expects a number, got {raw!r}") from None
    if typ is tuple:
        toks = [tok.strip() for tok in raw.split(",") if tok.strip()]
        try:
            return tuple(float(tok) for tok in toks)
        except ValueError:
            raise ValueError(f"key {key!r} expects comma-separated numbers, got {raw!r}") from None
    return raw


def _render_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _items(cfg: RunConfig) -> list[tuple[str, object]]:
    out: list[tuple[str, object]] = [("seed", cfg.seed)]
    for name in _SECTIONS:
        section = getattr(cfg, name)
        for f in fields(section):
            out.append((f"{name}.{f.name}", getattr(section, f.name)))
    return out


def render_config(cfg: RunConfig) -> str:
    """Canonical text form; parsing it back reproduces ``cfg`` exactly."""
    lines = []
    for key, value in _items(cfg):
        if key == "truth.values" and not value:
            continue
        lines.append(f"{key} = {_render_value(value)}")
    return "\n".join(lines) + "\n"


def _build(items: dict[str, object]) -> RunConfig:
    cfg = RunConfig(seed=items.pop("seed", 0))
    by_section: dict[str, dict[str, object]] = {}
    for key, value in items.items():
        section, _, name = key.partition(".")
        by_section.setdefault(section, {})[name] = value
    for section, values in by_section.items():
        cfg = replace(cfg, **{section: replace(getattr(cfg, section), **values)})
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and validate config text.

    Raises
    ------
    ValueError
        On malformed lines, unknown or duplicate keys, type mismatches,
        or any cross-module precondition violation.
    """
    items: dict[str, object] = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"config line {ln}: expected 'key = value', got {raw!r}")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            raise ValueError(f"config line {ln}: unknown key {key!r}")
        if key in items:
            raise ValueError(f"config line {ln}: duplicate key {key!r}")
        items[key] = _parse_value(val, _SCHEMA[key], key)
    cfg = _build(items)
    check_config(cfg)
    return cfg


def load_config(path: str) -> RunConfig:
    """Read, parse, and validate a config file."""
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def apply_overrides(cfg: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Re-parse ``cfg`` with dotted ``key -> raw value`` replacements applied."""
    merged = dict(_items(cfg))
    for key, raw in overrides.items():
        if key not in _SCHEMA:
            raise ValueError(f"unknown config key {key!r}")
        merged[key] = _parse_value(raw, _SCHEMA[key], key)
    cfg = _build(dict(merged))
    check_config(cfg)
    return cfg


def prior_config(cfg: RunConfig) -> SievePriorConfig:
    """The prior parameters as consumed by the prior module.

    The ``prior.rescale`` switch ties the draw rescaling to the
    observation count.
    """
    p = cfg.prior
    return SievePriorConfig(
        family=p.family,
        j0=p.j0,
        t=p.t,
        alpha=p.alpha,
        rescale_n=cfg.observation.n if p.rescale else None,
        halfcell=p.halfcell,
    )


def sampler_config(cfg: RunConfig) -> SamplerConfig:
    """The sampler parameters as consumed by the chain engine."""
    s = cfg.sampler
    return SamplerConfig(
        rule=s.rule,
        step_beta=s.step_beta,
        iterations=s.iterations,
        thinning=s.thinning,
        seed=cfg.seed,
        link_mode=s.link_mode,
        prior=prior_config(cfg),
    )


def check_config(cfg: RunConfig) -> None:
    """Validate every cross-module precondition by constructing the parts.

    Raises
    ------
    ValueError
        On any violated precondition, with the offending value named.
    """
    if not 0 <= cfg.seed < 2**64:
        raise ValueError(f"seed must be a u64, got {cfg.seed!r}")
    g = cfg.grid
    spec = build_grid(ell=g.ell, m=g.m, s=g.s)
    r = cfg.regions
    d = cfg.datum
    classify_regions(
        spec,
        omega=(r.omega_lo, r.omega_hi),
        oo=(r.o_lo, r.o_hi),
        d=(r.d_inner, r.d_outer),
        phi_support=(d.center - d.radius, d.center + d.radius),
    )
    BumpDatum(amplitude=d.amplitude, center=d.center, radius=d.radius)
    t = cfg.truth
    if t.preset not in TRUTH_PRESETS:
        raise ValueError(f"unknown truth preset {t.preset!r}, expected one of {TRUTH_PRESETS}")
    if t.preset == "values" and not t.values:
        raise ValueError("truth preset 'values' needs a nonempty truth.values list")
    if t.preset == "values" and any(v < 0 for v in t.values):
        raise ValueError("truth.values must be nonnegative")
    if t.preset != "values" and t.height < 0:
        raise ValueError(f"truth.height must be nonnegative, got {t.height!r}")
    o = cfg.observation
    if o.n < 1:
        raise ValueError(f"observation.n must be at least 1, got {o.n!r}")
    if not o.sigma > 0:
        raise ValueError(f"observation.sigma must be positive, got {o.sigma!r}")
    LinkFunction(m0=o.link_m0, k=o.link_k)
    prior_config(cfg)
    sampler_config(cfg)


def default_config() -> RunConfig:
    """All-defaults config (full-scale reference run)."""
    return RunConfig()


PRESETS = ("full", "desk", "smoke")


def preset_config(name: str) -> RunConfig:
    """Named parameter bundles.

    ``full`` is the reference large-scale run (M=50, N=150, five million
    iterations); ``desk`` completes in minutes (M=20, N=100, 2*10^5
    iterations); ``smoke`` in seconds (M=10, N=20, 10^3 iterations).
    """
    if name == "full":
        return RunConfig()
    if name == "desk":
        return RunConfig(
            grid=GridSection(m=20),
            observation=ObservationSection(n=100),
            sampler=SamplerSection(iterations=200_000),
        )
    if name == "smoke":
        return RunConfig(
            grid=GridSection(m=10),
            observation=ObservationSection(n=20),
            sampler=SamplerSection(iterations=1000),
        )
    raise ValueError(f"unknown preset {name!r}, expected one of {PRESETS}")
