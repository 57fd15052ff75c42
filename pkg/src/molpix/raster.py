"""Encode a depicted molecule as an 80x80 grid of integer codes.

Vacuum is 0, bond pixels are 2 and atom pixels carry the element's nominal
mass. Pixels are 0.5 A wide and the molecule centroid lands on pixel (40, 40).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import LayoutTooLarge, PixelCollision
from .layout import DepictedMol, rotate

log = logging.getLogger(__name__)

GRID_SIZE = 80
CENTER = 40
PIXEL_SIZE = 0.5
BOND_CODE = 2
VACUUM_CODE = 0
MAX_ROTATION_RETRIES = 8


@dataclass(frozen=True, eq=False)
class MolImage:
    pixels: np.ndarray
    source: str = ""

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.shape != (GRID_SIZE, GRID_SIZE):
            raise ValueError(f"expected {GRID_SIZE}x{GRID_SIZE} pixels, got {px.shape}")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    def __eq__(self, other):
        if not isinstance(other, MolImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None

    @property
    def atom_mask(self) -> np.ndarray:
        return (self.pixels != VACUUM_CODE) & (self.pixels != BOND_CODE)

    @property
    def bond_mask(self) -> np.ndarray:
        return self.pixels == BOND_CODE


def _snap(v: float) -> int:
    # round half up, so a bond centred on the origin spans exactly 3 pixels
    return int(math.floor(v / PIXEL_SIZE + 0.5))


def pixel_of(x: float, y: float) -> tuple[int, int]:
    """(row, col) of a coordinate in Angstrom; +y points up the image."""
    return CENTER - _snap(y), CENTER + _snap(x)


def line_pixels(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    """Integer midpoint line between two pixels, endpoints included."""
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dc - dr
    r, c = r0, c0
    out = [(r, c)]
    while (r, c) != (r1, c1):
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr
        out.append((r, c))
    return out


def rasterize(m: DepictedMol, source: str | None = None) -> MolImage:
    g = m.graph
    name = g.smiles if source is None else source
    grid = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    centered = m.coords - m.centroid
    cells: list[tuple[int, int]] = []
    seen: dict[tuple[int, int], int] = {}
    for atom, (x, y) in zip(g.atoms, centered):
        cell = pixel_of(x, y)
        if not (0 <= cell[0] < GRID_SIZE and 0 <= cell[1] < GRID_SIZE):
            raise LayoutTooLarge(f"atom {atom.index} of {name!r} falls outside the grid")
        if cell in seen:
            log.info("pixel collision in %s (atoms %d, %d)", name, seen[cell], atom.index)
            raise PixelCollision(
                f"atoms {seen[cell]} and {atom.index} of {name!r} share pixel {cell}")
        seen[cell] = atom.index
        cells.append(cell)
    for bond in g.bonds:
        for r, c in line_pixels(*cells[bond.a], *cells[bond.b])[1:-1]:
            if (r, c) not in seen:
                grid[r, c] = BOND_CODE
    for atom, (r, c) in zip(g.atoms, cells):
        grid[r, c] = atom.element.nominal_mass
    return MolImage(grid, name)


def draw_angle(rng: np.random.Generator) -> float:
    return float(rng.uniform(0.0, 180.0))


def augment(m: DepictedMol, rng_seed: int | np.random.Generator, source: str | None = None) -> MolImage:
    """Rasterize after a random rotation in [0, 180) degrees.

    Collisions (or atoms leaving the field) trigger a fresh draw, at most
    ``MAX_ROTATION_RETRIES`` times.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    last: Exception | None = None
    for _ in range(1 + MAX_ROTATION_RETRIES):
        theta = draw_angle(rng)
        try:
            return rasterize(rotate(m, theta), source)
        except (PixelCollision, LayoutTooLarge) as exc:
            last = exc
    raise PixelCollision(f"no collision-free rotation after {MAX_ROTATION_RETRIES} retries: {last}")


def export_pgm(img: MolImage, path: str | Path) -> Path:
    path = Path(path)
    header = f"P5\n{GRID_SIZE} {GRID_SIZE}\n255\n".encode("ascii")
    path.write_bytes(header + img.pixels.tobytes(order="C"))
    return path


def read_pgm(path: str | Path) -> MolImage:
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte before the raster
    if tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM: {tokens[0]!r}")
    w, h, maxval = (int(t) for t in tokens[1:])
    if (w, h) != (GRID_SIZE, GRID_SIZE) or maxval > 255:
        raise ValueError(f"unexpected PGM geometry {w}x{h} maxval {maxval}")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return MolImage(raster.reshape(h, w), str(path))
