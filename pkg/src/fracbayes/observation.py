"""Measurement model: design points, noisy data, and the likelihood.

A single experiment measures the flux ``G(f0)`` of the unknown potential
at ``n`` design points drawn uniformly from the admissible evaluation
set, corrupted by iid centered Gaussian noise of known standard
deviation.  The log-likelihood of a candidate potential is the usual
Gaussian misfit

``l(f) = -sum_i (y_i - G(f)(x_i))^2 / (2 sigma^2)``,

accumulated with compensated summation so the value does not depend on
the order of the measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forward import ForwardModel, Potential, admissible_intervals
from .grid import GridSpec, RegionMap

__all__ = [
    "LinkFunction",
    "MeasurementSet",
    "link_apply",
    "sample_design",
    "generate_data",
    "log_likelihood",
]


@dataclass(frozen=True)
class LinkFunction:
    """Smooth increasing map from the real line onto ``(0, m0)``.

    ``link(z) = m0 / (1 + (m0 - 1) exp(-k z))`` fixes ``link(0) = 1``
    exactly, so an unconstrained field ``z`` maps to a positive potential
    with background value 1.  Evaluation is done piecewise in
    ``exp(-k |z|)`` to stay finite for large ``|z|``.
    """

    m0: float = 5.0
    k: float = 1.0

    def __post_init__(self) -> None:
        if not self.m0 > 1:
            raise ValueError(f"link ceiling m0 must exceed 1, got {self.m0!r}")
        if not self.k > 0:
            raise ValueError(f"link slope k must be positive, got {self.k!r}")

    def __call__(self, z):
        """Evaluate the link at scalar or array ``z``."""
        arr = np.atleast_1d(np.asarray(z, dtype=float))
        t = np.exp(-self.k * np.abs(arr))
        pos = self.m0 / (1.0 + (self.m0 - 1.0) * t)
        neg = self.m0 * t / (t + (self.m0 - 1.0))
        out = np.where(arr >= 0, pos, neg)
        if np.asarray(z).ndim == 0:
            return float(out[0])
        return out

    def inverse(self, y):
        """Field value(s) mapping to potential value(s) ``y`` in ``(0, m0)``."""
        arr = np.atleast_1d(np.asarray(y, dtype=float))
        if ((arr <= 0) | (arr >= self.m0)).any():
            raise ValueError(f"link inverse needs values in (0, {self.m0}), got {arr!r}")
        out = np.log(arr * (self.m0 - 1.0) / (self.m0 - arr)) / self.k
        if np.asarray(y).ndim == 0:
            return float(out[0])
        return out


@dataclass
class MeasurementSet:
    """Design points ``x``, observed values ``y``, and the noise level.

    ``seed`` records the master seed the data were generated from, when
    known; it is informational and never consumed.
    """

    x: np.ndarray
    y: np.ndarray
    sigma: float
    seed: int | None = None

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError(f"x and y must be matching vectors, got {self.x.shape} and {self.y.shape}")
        if not self.sigma > 0:
            raise ValueError(f"noise level must be positive, got {self.sigma!r}")

    @property
    def n(self) -> int:
        return self.x.size


def link_apply(link: LinkFunction, z: np.ndarray) -> Potential:
    """Map unconstrained field values on the bulk nodes to a potential."""
    return Potential(values=link(np.asarray(z, dtype=float)), background=1.0, cap=link.m0)


def sample_design(
    n: int, spec: GridSpec, regions: RegionMap, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``n`` iid design points uniformly from the admissible set.

    The admissible set is the union of the two measurement intervals
    shrunk by one mesh cell at each end; each point lands in either
    interval with probability proportional to its length.  The result is
    sorted ascending.
    """
    if n < 1:
        raise ValueError(f"need at least one design point, got {n!r}")
    (a1, b1), (a2, b2) = admissible_intervals(spec, regions)
    len1, len2 = b1 - a1, b2 - a2
    pick = rng.random(n) < len1 / (len1 + len2)
    t = rng.random(n)
    pts = np.where(pick, a1 + t * len1, a2 + t * len2)
    return np.sort(pts)


def generate_data(
    f0: Potential,
    model: ForwardModel,
    n: int,
    sigma: float,
    rng_design: np.random.Generator,
    rng_noise: np.random.Generator,
    seed: int | None = None,
) -> MeasurementSet:
    """Simulate one experiment: design, exact flux, additive noise.

    Parameters
    ----------
    f0 : Potential
        Ground-truth potential on the bulk nodes.
    model : ForwardModel
        Forward map (fixes the operator, datum, and regions).
    n : int
        Number of measurements.
    sigma : float
        Noise standard deviation; must be finite and positive.
    rng_design, rng_noise : numpy.random.Generator
        Independent streams for design points and noise draws.
    seed : int, optional
        Master seed to record on the result (informational).

    Returns
    -------
    MeasurementSet
    """
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ValueError(f"data generation needs a finite positive noise level, got {sigma!r}")
    x = sample_design(n, model.spec, model.regions, rng_design)
    g = model.predict(f0, x)
    y = g + sigma * rng_noise.standard_normal(n)
    return MeasurementSet(x=x, y=y, sigma=sigma, seed=seed)


def log_likelihood(f: Potential, data: MeasurementSet, model: ForwardModel) -> float:
    """Gaussian log-likelihood of ``f`` given the data (up to its constant).

    Computed as ``-fsum(r_i^2) / (2 sigma^2)`` with compensated
    summation, so permuting the measurements leaves the value bit-exact.
    An infinite noise level yields 0 for every potential.
    """
    plan = model.prepare(data.x)
    r = data.y - model.predict_values(f.values, plan)
    return -math.fsum((r * r).tolist()) / (2.0 * data.sigma**2)
