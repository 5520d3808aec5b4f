"""Cubes, equidistributed ball sequences, observation masks and the
dominating/weak site decomposition.

Conventions: the cube of side ``L`` is centered at the origin; grids are
cell-centered with spacing ``h`` (``L/h`` an integer) and discrete norms are
``h^d * sum(|psi|^2)`` over cell centers.  One ball of radius ``delta`` sits
in each cell of the ``G``-lattice, so a grid point can only be covered by the
ball of its own lattice cell; the mask test is a single distance comparison.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

__all__ = [
    "CubeDomain",
    "EquidistributedSequence",
    "SiteDecomposition",
    "generate_sequence",
    "mask",
    "save_mask",
    "classify_sites",
    "near_neighbor",
    "window_containment_margin",
    "feasible_window_side",
    "tiling_identity_defect",
]

EULER = math.e

BoundaryCondition = Literal["dirichlet", "periodic"]


@dataclass(frozen=True)
class CubeDomain:
    """Cell-centered tensor grid on the cube (-L/2, L/2)^d."""

    d: int
    L: float
    h: float
    bc: BoundaryCondition = "dirichlet"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        n = self.L / self.h
        if abs(n - round(n)) > 1e-9 or round(n) < 2:
            raise ValueError("L/h must be an integer >= 2")
        if self.bc not in ("dirichlet", "periodic"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")

    @property
    def n(self) -> int:
        """Cells per axis."""
        return round(self.L / self.h)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    def centers_1d(self) -> np.ndarray:
        return -self.L / 2.0 + (np.arange(self.n) + 0.5) * self.h

    def center_grid(self) -> np.ndarray:
        """Array of shape ``shape + (d,)`` with the cell-center coordinates."""
        axes = np.meshgrid(*([self.centers_1d()] * self.d), indexing="ij")
        return np.stack(axes, axis=-1)

    def norm_sq(self, psi: np.ndarray, where: Optional[np.ndarray] = None) -> float:
        psi = np.asarray(psi)
        if psi.shape != self.shape:
            raise ValueError("grid function shape mismatch")
        dens = np.abs(psi) ** 2
        if where is not None:
            dens = dens[where]
        return self.cell_volume * float(np.sum(dens))


@dataclass(frozen=True)
class EquidistributedSequence:
    """One ball center per cell of the G-lattice inside the cube."""

    G: float
    delta: float
    L: float
    d: int
    centers: np.ndarray  # shape (m,)*d + (d,), m = L/G

    def __post_init__(self):
        if not 0.0 < self.delta < self.G / 2.0:
            raise ValueError("delta must lie in (0, G/2)")
        m = self.cells_per_axis
        if self.centers.shape != (m,) * self.d + (self.d,):
            raise ValueError("center array shape mismatch")

    @property
    def cells_per_axis(self) -> int:
        m = self.L / self.G
        if abs(m - round(m)) > 1e-9:
            raise ValueError("L/G must be an integer")
        return round(m)

    def lattice_points(self) -> np.ndarray:
        """Cell centers of the G-lattice, shape (m,)*d + (d,)."""
        m = self.cells_per_axis
        ax = -self.L / 2.0 + (np.arange(m) + 0.5) * self.G
        return np.stack(np.meshgrid(*([ax] * self.d), indexing="ij"), axis=-1)

    def containment_margin(self) -> float:
        """min over cells of G/2 - delta - ||z_j - cell center||_inf; >= 0 by
        construction."""
        off = np.abs(self.centers - self.lattice_points()).max(axis=-1)
        return float(self.G / 2.0 - self.delta - off.max())

    def to_json(self) -> str:
        m = self.cells_per_axis
        items = []
        for idx in np.ndindex(*(m,) * self.d):
            j = [(-(m - 1) / 2.0 + k) * self.G for k in idx]
            items.append({"j": j, "z": self.centers[idx].tolist()})
        return json.dumps(
            {"G": self.G, "delta": self.delta, "L": self.L, "d": self.d,
             "centers": items},
            indent=None,
        )


def generate_sequence(
    G: float,
    delta: float,
    L: float,
    d: int,
    mode: Literal["centered", "uniform_random"] = "centered",
    seed: Optional[int] = None,
) -> EquidistributedSequence:
    """Place one delta-ball center per G-cell.

    ``centered`` puts each center at its cell center; ``uniform_random`` draws
    it uniformly from the shrunken cell so the ball stays strictly inside.
    """
    if not 0.0 < delta < G / 2.0:
        raise ValueError("delta must lie in (0, G/2)")
    m = L / G
    if abs(m - round(m)) > 1e-9 or round(m) % 2 != 1:
        raise ValueError("L/G must be an odd positive integer")
    m = round(m)
    base = EquidistributedSequence(
        G=G, delta=delta, L=L, d=d,
        centers=np.zeros((m,) * d + (d,)),
    )
    lattice = base.lattice_points()
    if mode == "centered":
        centers = lattice.copy()
    elif mode == "uniform_random":
        rng = np.random.default_rng(seed)
        half = G / 2.0 - delta
        offsets = rng.uniform(-half, half, size=lattice.shape)
        centers = lattice + offsets
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return EquidistributedSequence(G=G, delta=delta, L=L, d=d, centers=centers)


def mask(seq: EquidistributedSequence, domain: CubeDomain) -> np.ndarray:
    """Boolean grid marking cells whose center lies in some delta-ball."""
    if domain.d != seq.d or abs(domain.L - seq.L) > 1e-12:
        raise ValueError("sequence and domain are incompatible")
    pts = domain.center_grid()
    ratio = domain.L / seq.G
    cells_per_G = round(seq.G / domain.h)
    if abs(seq.G / domain.h - cells_per_G) > 1e-9:
        raise ValueError("grid spacing must divide G")
    # index of the G-cell owning each grid cell
    idx = np.minimum(
        (np.arange(domain.n) // cells_per_G), seq.cells_per_axis - 1
    )
    own = seq.centers[np.ix_(*([idx] * domain.d))]
    dist2 = np.sum((pts - own) ** 2, axis=-1)
    return dist2 < seq.delta**2


@dataclass(frozen=True)
class SiteDecomposition:
    """Partition of integer sites of the cube into dominating and weak."""

    T: int
    L: int
    sites: np.ndarray         # (m,)*d + (d,) integer site coordinates
    dominating: np.ndarray    # boolean, shape (m,)*d
    unit_mass: np.ndarray     # ||psi||^2 over the unit cube at each site
    window_mass: np.ndarray   # ||psi||^2 over the T-window at each site

    @property
    def weak(self) -> np.ndarray:
        return ~self.dominating

    def weak_mass(self) -> float:
        return float(self.unit_mass[self.weak].sum())

    def dominating_mass(self) -> float:
        return float(self.unit_mass[self.dominating].sum())

    def total_mass(self) -> float:
        return float(self.unit_mass.sum())


def _window_sums(dens_ext: np.ndarray, cells: int, n_ext: int, starts: np.ndarray,
                 d: int) -> np.ndarray:
    """Sums of ``dens_ext`` over all d-dim windows of ``cells`` cells per axis
    anchored at the given start indices (one start array per axis)."""
    # summed-area table with a zero layer in front
    sat = dens_ext
    for ax in range(d):
        sat = np.cumsum(sat, axis=ax)
        pad = [(0, 0)] * d
        pad[ax] = (1, 0)
        sat = np.pad(sat, pad)
    m = len(starts)
    out = np.zeros((m,) * d)
    lo = starts
    hi = starts + cells
    for idx in np.ndindex(*(m,) * d):
        corners = 0.0
        for signs in np.ndindex(*(2,) * d):
            corner = tuple(
                (hi[idx[ax]] if signs[ax] == 0 else lo[idx[ax]]) for ax in range(d)
            )
            corners += (-1) ** sum(signs) * sat[corner]
        out[idx] = corners
    return out


def save_mask(path, mask_array: np.ndarray, fmt: str = "binary") -> None:
    """Persist an observation mask: flat binary (npy) or CSV of cell flags."""
    if fmt == "binary":
        np.save(path, mask_array)
    elif fmt == "csv":
        flat = mask_array.reshape(-1).astype(int)
        with open(path, "w") as fh:
            fh.write("cell,in_mask\n")
            for i, v in enumerate(flat):
                fh.write(f"{i},{v}\n")
    else:
        raise ValueError(f"unknown mask format {fmt!r}")


def classify_sites(
    psi_ext: np.ndarray, T: int, L: int, h: float
) -> SiteDecomposition:
    """Dominating/weak partition from a grid function extended to the 3L cube.

    ``psi_ext`` lives on the cell-centered grid of (-3L/2, 3L/2)^d.  A site is
    dominating when its unit-cube mass is at least ``1/(2 T^d)`` of its
    T-window mass; ties count as dominating.
    """
    d = psi_ext.ndim
    if L % 2 != 1:
        raise ValueError("L must be an odd integer")
    cells_per_unit = round(1.0 / h)
    if abs(1.0 / h - cells_per_unit) > 1e-9:
        raise ValueError("h must divide 1")
    n_ext = 3 * L * cells_per_unit
    if psi_ext.shape != (n_ext,) * d:
        raise ValueError("extended grid shape mismatch")
    if T > 2 * L + 1:
        raise ValueError("window side T exceeds the 3L extension")

    dens = (np.abs(psi_ext) ** 2) * h**d
    m = L
    # site k runs over integers -(L-1)/2 .. (L-1)/2; in extended grid indices
    # the unit cube at site k starts at (k + 3L/2 - 1/2) * cells_per_unit
    k0 = -(L - 1) // 2
    site_vals = np.arange(k0, k0 + L)
    unit_starts = (site_vals + (3 * L - 1) / 2.0) * cells_per_unit
    unit_starts = np.round(unit_starts).astype(int)
    win_starts = (site_vals + (3 * L - T) / 2.0) * cells_per_unit
    win_starts_r = np.round(win_starts).astype(int)
    if np.max(np.abs(win_starts - win_starts_r)) > 1e-9:
        raise ValueError("T-window faces must align with the grid")
    unit_mass = _window_sums(dens, cells_per_unit, n_ext, unit_starts, d)
    window_mass = _window_sums(dens, T * cells_per_unit, n_ext, win_starts_r, d)
    dominating = unit_mass >= window_mass / (2.0 * float(T) ** d)
    sites = np.stack(
        np.meshgrid(*([site_vals.astype(float)] * d), indexing="ij"), axis=-1
    )
    return SiteDecomposition(
        T=T, L=L, sites=sites, dominating=dominating,
        unit_mass=unit_mass, window_mass=window_mass,
    )


def near_neighbor(k: tuple, L: Optional[int] = None) -> tuple:
    """Shift the first coordinate by 2; wrap into the cube when L is given."""
    k = tuple(k)
    first = k[0] + 2
    if L is not None:
        half = (L - 1) // 2
        first = (first + half) % L - half
    return (first,) + k[1:]


def window_containment_margin(
    d: int, theta1: float, T: Optional[int] = None, center_offset: Optional[float] = None
) -> float:
    """Signed slack of the ball-in-window containment used by the site
    argument: T/2 minus the worst-case reach of the shifted ball.

    The reach is ``2 + offset + (2 e theta1 + 1) R`` with ``R = sqrt(d) + 2``
    (near-neighbor shift, center wobble within its cell, ball radius).  With
    the printed window side this is negative by about ``2 + sqrt(d)/2``: the
    printed side is too small for the containment as stated, which
    :func:`feasible_window_side` repairs.
    """
    from uclab.constants import side_length_T

    if T is None:
        T = side_length_T(d, theta1)
    if center_offset is None:
        center_offset = math.sqrt(d) / 2.0
    R = math.sqrt(d) + 2.0
    reach = 2.0 + center_offset + (2.0 * EULER * theta1 + 1.0) * R
    return T / 2.0 - reach


def feasible_window_side(d: int, theta1: float) -> int:
    """Smallest integer window side making the containment margin >= 0."""
    R = math.sqrt(d) + 2.0
    reach = 2.0 + math.sqrt(d) / 2.0 + (2.0 * EULER * theta1 + 1.0) * R
    return math.ceil(2.0 * reach)


def tiling_identity_defect(psi_ext: np.ndarray, T: int, L: int, h: float) -> float:
    """Relative defect of the window-resummation identity: the sum of T-window
    masses over all sites equals T^d times the base-cube mass."""
    d = psi_ext.ndim
    dec = classify_sites(psi_ext, T, L, h)
    lhs = float(dec.window_mass.sum())
    cells_per_unit = round(1.0 / h)
    n_ext = 3 * L * cells_per_unit
    lo = L * cells_per_unit
    hi = 2 * L * cells_per_unit
    sl = tuple(slice(lo, hi) for _ in range(d))
    base = float((np.abs(psi_ext[sl]) ** 2).sum() * h**d)
    rhs = float(T) ** d * base
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)
