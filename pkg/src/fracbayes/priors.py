"""Gaussian sieve priors on the bulk interval.

Two families of mean-zero Gaussian random fields feed the sampler:

* ``piecewise`` — the bulk interval is split into ``2**(j0+1)`` equal
  cells with iid standard-normal cell values.  An optional half-cell
  variant covers only the left half of every cell (the right halves stay
  at zero).
* ``haar`` — a truncated Haar wavelet expansion on the bulk interval,
  levels ``-1`` (normalized constant) through ``j0``, keeping the terms
  whose support meets the central 80% of the observation window.  Level
  ``l >= 0`` coefficients carry the decay weight ``2**(-l*t)``, and the
  whole sum is multiplied by a smooth plateau cutoff equal to 1 on the
  central 85% of the window and 0 outside it.

Draw amplitudes can shrink with the sample size ``n`` through the factor
``n**(-1/(4*alpha + 6))``; the truncation level matched to ``n`` is
``round(log2(n)/(2*alpha + 1))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridFunction, GridSpec, RegionMap

__all__ = [
    "SievePriorConfig",
    "PriorSampler",
    "make_sampler",
    "draw_piecewise",
    "draw_haar_sieve",
    "rescale_factor",
    "rescale_draw",
    "sieve_level",
    "haar_level_weight",
]

FAMILIES = ("piecewise", "haar")


@dataclass(frozen=True)
class SievePriorConfig:
    """Parameters of the sieve prior.

    Parameters
    ----------
    family : {"piecewise", "haar"}
        Basis family.
    j0 : int
        Resolution: the piecewise family uses ``2**(j0+1)`` cells, the
        haar family truncates at wavelet level ``j0``.
    t : float
        Coefficient decay exponent for the haar family; must exceed 1/2.
    alpha : float
        Smoothness parameter entering the ``n``-dependent rescaling and
        the matched truncation level.
    rescale_n : int, optional
        When set, every draw is multiplied by ``rescale_factor(rescale_n,
        alpha)``.
    halfcell : bool
        Piecewise family only: cover just the left half of each cell.
    """

    family: str = "piecewise"
    j0: int = 3
    t: float = 1.0
    alpha: float = 2.0
    rescale_n: int | None = None
    halfcell: bool = False

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown prior family {self.family!r}, expected one of {FAMILIES}")
        if not (isinstance(self.j0, int) and self.j0 >= 0):
            raise ValueError(f"resolution j0 must be a nonnegative integer, got {self.j0!r}")
        if not self.t > 0.5:
            raise ValueError(f"decay exponent t must exceed 1/2, got {self.t!r}")
        if not self.alpha > 0:
            raise ValueError(f"smoothness alpha must be positive, got {self.alpha!r}")
        if self.rescale_n is not None and not (isinstance(self.rescale_n, int) and self.rescale_n >= 1):
            raise ValueError(f"rescale_n must be a positive integer, got {self.rescale_n!r}")
        if self.halfcell and self.family != "piecewise":
            raise ValueError("halfcell applies to the piecewise family only")


def rescale_factor(n: int, alpha: float) -> float:
    """Amplitude shrink factor ``n**(-1/(4*alpha + 6))`` for sample size ``n``."""
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n!r}")
    return float(n) ** (-1.0 / (4.0 * alpha + 6.0))


def rescale_draw(f: GridFunction, n: int, alpha: float) -> GridFunction:
    """Shrink a prior draw by the sample-size-dependent factor.

    Exactly a scalar multiple, so every norm of the result equals
    ``rescale_factor(n, alpha)`` times the norm of the input.
    """
    return GridFunction(f.spec, rescale_factor(n, alpha) * f.values)


def sieve_level(n: int, alpha: float) -> int:
    """Truncation level matched to sample size: ``round(log2(n)/(2*alpha+1))``."""
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n!r}")
    return int(round(math.log2(n) / (2.0 * alpha + 1.0)))


def haar_level_weight(level: int, t: float) -> float:
    """Coefficient weight at a wavelet level: 1 for the constant level, else ``2**(-level*t)``."""
    if level < -1:
        raise ValueError(f"wavelet levels start at -1, got {level!r}")
    if level == -1:
        return 1.0
    return 2.0 ** (-level * t)


def _plateau(t: np.ndarray) -> np.ndarray:
    """Smooth transition: 1 for t <= 0, 0 for t >= 1, C-infinity in between."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        g_dn = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        g_up = np.where(t < 1, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return g_up / (g_up + g_dn)


class _PiecewiseBasis:
    """Dyadic partition of the bulk interval with one coefficient per cell."""

    def __init__(self, cfg: SievePriorConfig, spec: GridSpec, regions: RegionMap) -> None:
        self.ncells = 2 ** (cfg.j0 + 1)
        lo, hi = regions.omega_iv
        width = (hi - lo) / self.ncells
        x = spec.node_x(regions.omega)
        # Nodes exactly on a cell boundary belong to the right cell.
        self.cell = np.clip(np.floor((x - lo) / width).astype(int), 0, self.ncells - 1)
        if cfg.halfcell:
            q = np.clip(np.floor((x - lo) / (0.5 * width)).astype(int), 0, 2 * self.ncells - 1)
            self.covered = q % 2 == 0
        else:
            self.covered = np.ones(x.size, dtype=bool)

    def draw_values(self, rng: np.random.Generator) -> np.ndarray:
        coeff = rng.standard_normal(self.ncells)
        vals = coeff[self.cell]
        vals[~self.covered] = 0.0
        return vals


class _HaarBasis:
    """Truncated Haar expansion localized to the observation window.

    Basis columns are pre-sampled on the bulk nodes with the cutoff and
    level weights folded in, so a draw is a single matrix-vector product
    against iid standard-normal coefficients.
    """

    def __init__(self, cfg: SievePriorConfig, spec: GridSpec, regions: RegionMap) -> None:
        wlo, whi = regions.omega_iv
        olo, ohi = regions.oo_iv
        oc, orad = 0.5 * (olo + ohi), 0.5 * (ohi - olo)
        width = whi - wlo
        x = spec.node_x(regions.omega)
        u = (x - wlo) / width
        klo, khi = oc - 0.8 * orad, oc + 0.8 * orad
        chi = _plateau((np.abs(x - oc) - 0.85 * orad) / (0.15 * orad))
        cols = [np.full(x.size, 1.0 / math.sqrt(width))]
        levels = [-1]
        for lev in range(cfg.j0 + 1):
            amp = 2.0 ** (0.5 * lev) / math.sqrt(width)
            for r in range(2**lev):
                slo = wlo + width * r * 2.0 ** (-lev)
                shi = slo + width * 2.0 ** (-lev)
                if shi <= klo or slo >= khi:
                    continue
                v = 2.0**lev * u - r
                up = ((v >= 0.0) & (v < 0.5)).astype(float)
                dn = ((v >= 0.5) & (v < 1.0)).astype(float)
                cols.append(amp * (up - dn))
                levels.append(lev)
        self.levels = np.asarray(levels)
        weights = np.array([haar_level_weight(int(l), cfg.t) for l in self.levels])
        matrix = np.column_stack(cols)
        self.matrix = chi[:, None] * matrix * weights[None, :]

    def draw_values(self, rng: np.random.Generator) -> np.ndarray:
        coeff = rng.standard_normal(self.levels.size)
        return self.matrix @ coeff


class PriorSampler:
    """Draws sieve-prior fields on the full interior grid.

    Draws are mean-zero Gaussian fields supported on the bulk nodes
    (piecewise family) or inside the observation window (haar family);
    the sample-size rescaling from the config is applied to every draw.
    """

    def __init__(self, cfg: SievePriorConfig, spec: GridSpec, regions: RegionMap) -> None:
        self.cfg = cfg
        self.spec = spec
        self.regions = regions
        basis = _PiecewiseBasis if cfg.family == "piecewise" else _HaarBasis
        self._basis = basis(cfg, spec, regions)
        self._scale = 1.0
        if cfg.rescale_n is not None:
            self._scale = rescale_factor(cfg.rescale_n, cfg.alpha)

    def draw_omega(self, rng: np.random.Generator) -> np.ndarray:
        """One draw restricted to the bulk nodes (the sampler's hot path)."""
        return self._scale * self._basis.draw_values(rng)

    def draw(self, rng: np.random.Generator) -> GridFunction:
        """One draw as a grid function (zero outside the bulk nodes)."""
        full = np.zeros(self.spec.n_interior)
        full[self.regions.omega - 1] = self.draw_omega(rng)
        return GridFunction(self.spec, full)


def make_sampler(cfg: SievePriorConfig, spec: GridSpec, regions: RegionMap) -> PriorSampler:
    """Construct the sampler for a validated prior config."""
    return PriorSampler(cfg, spec, regions)


def draw_piecewise(
    cfg: SievePriorConfig, spec: GridSpec, regions: RegionMap, rng: np.random.Generator
) -> GridFunction:
    """One piecewise-family draw (see :class:`PriorSampler`).

    Raises
    ------
    ValueError
        If the config selects a different family.
    """
    if cfg.family != "piecewise":
        raise ValueError(f"config selects family {cfg.family!r}, not piecewise")
    return PriorSampler(cfg, spec, regions).draw(rng)


def draw_haar_sieve(
    cfg: SievePriorConfig, spec: GridSpec, regions: RegionMap, rng: np.random.Generator
) -> GridFunction:
    """One haar-family draw (see :class:`PriorSampler`).

    Raises
    ------
    ValueError
        If the config selects a different family.
    """
    if cfg.family != "haar":
        raise ValueError(f"config selects family {cfg.family!r}, not haar")
    return PriorSampler(cfg, spec, regions).draw(rng)
