"""Uniform 1D grid, region bookkeeping, and the exterior Dirichlet datum.

The computational domain is the open interval ``(-ell, ell)`` split into
``k = 6*m`` cells of width ``h = 2*ell/k``.  All grid functions live on the
interior nodes ``x_i = -ell + i*h`` for ``i = 1, ..., k-1`` and are extended
by zero outside; the two endpoint nodes carry homogeneous values and are
never stored.

Four regions of the domain matter downstream:

* ``omega`` -- the bulk set (default ``(-1, 1)``) where the unknown
  potential acts,
* ``oo`` -- the observation window (default ``(-1/2, 1/2)``) strictly
  inside ``omega``, the only place the potential is allowed to differ
  from its background value,
* ``dd`` -- the exterior measurement set (default ``(-3, -1) u (1, 3)``)
  where the nonlocal flux is recorded,
* ``supp_phi`` -- the support (default ``(-3, -2)``) of the exterior
  Dirichlet datum.

Regions are open sets: a node falling exactly on a region boundary belongs
to no region.  Index sets store 1-based interior node indices, so for the
default geometry ``omega = {2m+1, ..., 4m-1}`` and ``supp_phi = {1, ...,
m-1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridSpec",
    "RegionMap",
    "GridFunction",
    "BumpDatum",
    "build_grid",
    "classify_regions",
    "sample_phi",
    "weighted_l2",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform mesh on ``(-ell, ell)`` with ``6*m`` cells.

    Parameters
    ----------
    ell : float
        Half-width of the computational domain.
    m : int
        Resolution parameter; the mesh has ``k = 6*m`` cells.
    s : float
        Fractional order of the nonlocal operator, ``0 < s < 1``.
    """

    ell: float = 3.0
    m: int = 50
    s: float = 0.5

    def __post_init__(self) -> None:
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise ValueError(f"resolution m must be a positive integer, got {self.m!r}")
        if not (math.isfinite(self.ell) and self.ell > 0):
            raise ValueError(f"half-width ell must be positive and finite, got {self.ell!r}")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"fractional order s must lie in (0, 1), got {self.s!r}")

    @property
    def k(self) -> int:
        """Number of mesh cells."""
        return 6 * self.m

    @property
    def h(self) -> float:
        """Mesh width ``2*ell/k``."""
        return 2.0 * self.ell / self.k

    @property
    def n_interior(self) -> int:
        """Number of interior nodes, ``k - 1``."""
        return self.k - 1

    def node_x(self, i):
        """Coordinate(s) of node(s) ``i``; accepts scalars or arrays."""
        return -self.ell + np.asarray(i) * self.h

    def interior_x(self) -> np.ndarray:
        """Coordinates of all interior nodes ``i = 1, ..., k-1``."""
        return self.node_x(np.arange(1, self.k))


def build_grid(ell: float = 3.0, m: int = 50, s: float = 0.5) -> GridSpec:
    """Construct a validated :class:`GridSpec`.

    Raises
    ------
    ValueError
        If ``m`` is not a positive integer, ``ell`` is not positive, or
        ``s`` lies outside ``(0, 1)``.
    """
    return GridSpec(ell=float(ell), m=int(m), s=float(s))


@dataclass(frozen=True)
class RegionMap:
    """Index sets (1-based interior node indices) of the four regions.

    The interval fields record the geometry the index sets were derived
    from; downstream code uses them to place priors (``oo_iv``), admissible
    measurement intervals (``d_iv``), and cell partitions (``omega_iv``).
    """

    omega: np.ndarray
    dd: np.ndarray
    oo: np.ndarray
    supp_phi: np.ndarray
    omega_iv: tuple[float, float]
    oo_iv: tuple[float, float]
    d_iv: tuple[float, float]
    phi_iv: tuple[float, float]

    @property
    def n_omega(self) -> int:
        return int(self.omega.size)


def classify_regions(
    spec: GridSpec,
    *,
    omega: tuple[float, float] = (-1.0, 1.0),
    oo: tuple[float, float] = (-0.5, 0.5),
    d: tuple[float, float] = (1.0, 3.0),
    phi_support: tuple[float, float] = (-3.0, -2.0),
) -> RegionMap:
    """Classify interior nodes into the open regions of the geometry.

    Parameters
    ----------
    spec : GridSpec
        The mesh.
    omega : (float, float)
        Endpoints of the bulk set.
    oo : (float, float)
        Endpoints of the observation window; must be compactly contained
        in ``omega``.
    d : (float, float)
        ``(inner, outer)`` radii of the symmetric exterior measurement set
        ``(-outer, -inner) u (inner, outer)``.
    phi_support : (float, float)
        Support interval of the exterior datum; must sit inside one
        component of the measurement set at positive distance from
        ``omega``.

    Returns
    -------
    RegionMap

    Raises
    ------
    ValueError
        If the intervals violate the geometric preconditions above.
    """
    olo, ohi = map(float, omega)
    qlo, qhi = map(float, oo)
    din, dout = map(float, d)
    plo, phi = map(float, phi_support)

    if not -spec.ell < olo < ohi < spec.ell:
        raise ValueError(f"omega = ({olo}, {ohi}) must sit strictly inside (-{spec.ell}, {spec.ell})")
    if not olo < qlo < qhi < ohi:
        raise ValueError(f"observation window ({qlo}, {qhi}) must be compactly contained in omega = ({olo}, {ohi})")
    if not 0.0 < din < dout <= spec.ell:
        raise ValueError(f"measurement radii must satisfy 0 < inner < outer <= ell, got ({din}, {dout})")
    if din < max(ohi, -olo):
        raise ValueError(f"measurement set with inner radius {din} overlaps omega = ({olo}, {ohi})")
    if not plo < phi:
        raise ValueError(f"datum support ({plo}, {phi}) is empty")
    in_left = -dout <= plo and phi <= -din
    in_right = din <= plo and phi <= dout
    if not (in_left or in_right):
        raise ValueError(
            f"datum support ({plo}, {phi}) must lie inside one component of "
            f"(-{dout}, -{din}) u ({din}, {dout})"
        )
    gap = olo - phi if in_left else plo - ohi
    if not gap > 0:
        raise ValueError(f"datum support ({plo}, {phi}) must keep positive distance from omega = ({olo}, {ohi})")

    idx = np.arange(1, spec.k)
    x = spec.node_x(idx)
    om = idx[(x > olo) & (x < ohi)]
    dd = idx[((x > -dout) & (x < -din)) | ((x > din) & (x < dout))]
    qq = idx[(x > qlo) & (x < qhi)]
    supp = idx[(x > plo) & (x < phi)]
    return RegionMap(
        omega=om, dd=dd, oo=qq, supp_phi=supp,
        omega_iv=(olo, ohi), oo_iv=(qlo, qhi), d_iv=(din, dout), phi_iv=(plo, phi),
    )


@dataclass
class GridFunction:
    """Real values on the interior nodes (node ``i`` at position ``i-1``)."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.spec.n_interior,):
            raise ValueError(
                f"grid function needs {self.spec.n_interior} interior values, got shape {vals.shape}"
            )
        self.values = vals

    def at(self, idx) -> np.ndarray:
        """Values at the given 1-based node indices."""
        return self.values[np.asarray(idx) - 1]


@dataclass(frozen=True)
class BumpDatum:
    """Smooth compactly supported exterior Dirichlet datum.

    The datum is the classical bump ``amplitude * exp(1/((x-center)^2 -
    radius^2))`` on ``(center-radius, center+radius)`` and zero elsewhere.
    With the defaults its peak value is ``10000*exp(-4) ~= 183.156`` at
    ``x = -5/2``.
    """

    amplitude: float = 10000.0
    center: float = -2.5
    radius: float = 0.5

    def __post_init__(self) -> None:
        if not self.amplitude >= 0:
            raise ValueError(f"datum amplitude must be nonnegative, got {self.amplitude!r}")
        if not self.radius > 0:
            raise ValueError(f"datum radius must be positive, got {self.radius!r}")

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.radius, self.center + self.radius)

    def __call__(self, x):
        """Evaluate the datum at scalar or array ``x``."""
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        dist2 = (arr - self.center) ** 2 - self.radius**2
        out = np.zeros_like(arr)
        inside = dist2 < 0
        out[inside] = self.amplitude * np.exp(1.0 / dist2[inside])
        if np.asarray(x).ndim == 0:
            return float(out[0])
        return out


def sample_phi(spec: GridSpec, datum: BumpDatum = BumpDatum()) -> GridFunction:
    """Sample the exterior datum onto the interior nodes."""
    return GridFunction(spec, datum(spec.interior_x()))


def weighted_l2(values: np.ndarray, h: float) -> float:
    """Discrete L2 norm ``sqrt(h * sum(v_i^2))`` of nodal values."""
    v = np.asarray(values, dtype=float)
    return math.sqrt(h * float(v @ v))
