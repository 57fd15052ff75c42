"""Deterministic 2D coordinates for a molecular graph.

Ring systems are laid out first as regular polygons (fused rings are
grown across the shared edge, bridged systems around their outer
envelope), chains are grown depth-first with 120 degree zig-zags, and a
bounded overlap-resolution pass flips or swings acyclic branches apart.
All lengths are in Angstrom.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .exceptions import LayoutDegenerate, LayoutTooLarge
from .smiles import DOUBLE, TRIPLE, MolGraph

BOND_LENGTH = 1.5
MIN_DISTANCE = 1.0
COMFORT_DISTANCE = 1.25
MAX_EXTENT = 39.0
# Largest |coordinate| that still snaps inside an 80 px grid at 0.5 A/px.
FIELD_HALF_WIDTH = 19.5
MAX_RESOLVE_ITERATIONS = 50


@dataclass(frozen=True, eq=False)
class DepictedMol:
    graph: MolGraph
    coords: np.ndarray  # (n_atoms, 2), Angstrom

    def __post_init__(self) -> None:
        c = np.array(self.coords, dtype=np.float64).reshape(-1, 2)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def centroid(self) -> np.ndarray:
        return self.coords.mean(axis=0)


def rotate(m: DepictedMol, theta: float) -> DepictedMol:
    """Rigid rotation by ``theta`` degrees (counter-clockwise) about the centroid."""
    if not math.isfinite(theta):
        raise ValueError(f"rotation angle must be finite, got {theta}")
    if theta == 0:
        return DepictedMol(m.graph, m.coords.copy())
    t = math.radians(theta)
    c, s = math.cos(t), math.sin(t)
    rot = np.array([[c, -s], [s, c]])
    center = m.centroid
    return DepictedMol(m.graph, (m.coords - center) @ rot.T + center)


def layout(g: MolGraph) -> DepictedMol:
    """Place every atom of ``g`` in the plane, centroid at the origin.

    Raises:
        LayoutDegenerate: atoms closer than 1.0 A after overlap resolution.
        LayoutTooLarge: the drawing does not fit a 39 A square field.
    """
    if g.n_atoms == 0:
        raise LayoutDegenerate("empty molecule")
    coords = _Placer(g).run()
    coords = _resolve_overlaps(g, coords)
    coords = coords - coords.mean(axis=0)
    _check_geometry(g, coords)
    return DepictedMol(g, coords)


def _check_geometry(g: MolGraph, coords: np.ndarray) -> None:
    if not np.all(np.isfinite(coords)):
        raise LayoutDegenerate(f"non-finite coordinates for {g.smiles!r}")
    extent = coords.max(axis=0) - coords.min(axis=0)
    if np.any(extent > MAX_EXTENT) or np.any(np.abs(coords) > FIELD_HALF_WIDTH):
        raise LayoutTooLarge(
            f"{g.smiles!r} spans {extent[0]:.1f} x {extent[1]:.1f} A; field is {MAX_EXTENT} A"
        )
    d = min_pair_distance(coords)
    if d < MIN_DISTANCE:
        raise LayoutDegenerate(f"atoms {d:.2f} A apart in {g.smiles!r}")


def min_pair_distance(coords: np.ndarray) -> float:
    n = len(coords)
    if n < 2:
        return math.inf
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    dist[np.diag_indices(n)] = np.inf
    return float(dist.min())


def _unit(angle: float) -> np.ndarray:
    return np.array([math.cos(angle), math.sin(angle)])


def _angle(v: np.ndarray) -> float:
    return math.atan2(v[1], v[0])


# ---------------------------------------------------------------------------
# ring systems
# ---------------------------------------------------------------------------

def ring_systems(g: MolGraph) -> list[list[tuple[int, ...]]]:
    """Group rings that share at least one atom."""
    rings = list(g.rings)
    groups: list[list[int]] = []
    for k, ring in enumerate(rings):
        hits = [grp for grp in groups if any(set(ring) & set(rings[j]) for j in grp)]
        merged = [k]
        for grp in hits:
            merged.extend(grp)
            groups.remove(grp)
        groups.append(sorted(merged))
    out = [[rings[k] for k in grp] for grp in groups]
    out.sort(key=lambda rs: (-len(set().union(*rs)), min(set().union(*rs))))
    return out


def _polygon(ring: tuple[int, ...], center: np.ndarray, start: float, sign: float = -1.0):
    n = len(ring)
    radius = BOND_LENGTH / (2 * math.sin(math.pi / n))
    return {
        atom: center + radius * _unit(start + sign * 2 * math.pi * k / n)
        for k, atom in enumerate(ring)
    }


def _arc(a: np.ndarray, b: np.ndarray, k: int, normal: np.ndarray) -> list[np.ndarray]:
    """k points between a and b, equal chords, bulging toward ``normal``.

    With |a - b| equal to the bond length this completes a regular
    (k + 2)-gon, i.e. the reflection of a fused neighbour ring.
    """
    d = float(np.linalg.norm(b - a))
    m = k + 1
    if d >= m * BOND_LENGTH * (1 - 1e-12) or d < 1e-9:
        return [a + (b - a) * (j / m) for j in range(1, m)]
    lo, hi = 1e-12, 2 * math.pi / m
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        chord = BOND_LENGTH * math.sin(m * mid / 2) / math.sin(mid / 2)
        if chord > d:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    radius = BOND_LENGTH / (2 * math.sin(theta / 2))
    phi = m * theta
    midpoint = 0.5 * (a + b)
    center = midpoint - normal * radius * math.cos(phi / 2)
    start = _angle(a - center)
    # the arc must end on b and pass through the requested side
    best, best_err = 1.0, math.inf
    for sign in (1.0, -1.0):
        end = center + radius * _unit(start + sign * phi)
        apex = center + radius * _unit(start + sign * phi / 2)
        err = float(np.linalg.norm(end - b)) - (1.0 if np.dot(apex - midpoint, normal) > 0 else 0.0)
        if err < best_err:
            best, best_err = sign, err
    return [center + radius * _unit(start + best * j * theta) for j in range(1, m)]


def _segments(ring: tuple[int, ...], placed: dict[int, np.ndarray]):
    """Maximal runs of unplaced atoms with their placed flanking atoms."""
    n = len(ring)
    first = next(i for i in range(n) if ring[i] in placed)
    out = []
    i = first
    while True:
        j = (i + 1) % n
        run = []
        while ring[j] not in placed:
            run.append(ring[j])
            j = (j + 1) % n
        if run:
            out.append((ring[i], run, ring[j]))
        i = j
        if i == first:
            break
    return out


def _min_dist_to(points: list[np.ndarray], others: list[np.ndarray]) -> float:
    if not points or not others:
        return math.inf
    p = np.array(points)
    o = np.array(others)
    return float(np.sqrt(((p[:, None, :] - o[None, :, :]) ** 2).sum(-1)).min())


def _place_segment(a, run, b, placed, prefer_away_from):
    pa, pb = placed[a], placed[b]
    chord = pb - pa
    if np.linalg.norm(chord) < 1e-9:
        normal = np.array([0.0, 1.0])
    else:
        normal = np.array([-chord[1], chord[0]]) / np.linalg.norm(chord)
    if np.dot(0.5 * (pa + pb) - prefer_away_from, normal) < 0:
        normal = -normal
    others = [v for atom, v in placed.items() if atom not in (a, b)]
    m = len(run) + 1
    candidates = [_arc(pa, pb, len(run), nrm) for nrm in (normal, -normal)]
    if np.linalg.norm(chord) >= m * BOND_LENGTH * (1 - 1e-12):
        # stretched bridge: also try bowed paths
        for bow in (0.25, 0.5, 0.75, 1.0, 1.25, 1.5):
            for nrm in (normal, -normal):
                candidates.append(
                    [pa + chord * (j / m) + nrm * bow * BOND_LENGTH * math.sin(math.pi * j / m)
                     for j in range(1, m)]
                )
    best_pts, best_score = None, -math.inf
    for pts in candidates:
        score = _min_dist_to(pts, others)
        if len(pts) > 1:
            score = min(score, _min_dist_to(pts[:1], pts[1:]))
        if score > best_score + 1e-6:
            best_pts, best_score = pts, score
    for atom, p in zip(run, best_pts):
        placed[atom] = p


def _layout_fused(rings: list[tuple[int, ...]]) -> dict[int, np.ndarray]:
    order = sorted(range(len(rings)), key=lambda k: (-len(rings[k]), rings[k]))
    first = rings[order[0]]
    placed = _polygon(first, np.zeros(2), math.pi / 2 + math.pi / len(first))
    done = {order[0]}
    while len(done) < len(rings):
        cand = [k for k in range(len(rings)) if k not in done]
        k = max(
            cand,
            key=lambda r: (
                sum(a in placed for a in rings[r]),
                len(rings[r]),
                tuple(-x for x in rings[r]),
            ),
        )
        ring = rings[k]
        shared = [a for a in ring if a in placed]
        if not shared:
            break
        if len(shared) == len(ring):
            done.add(k)
            continue
        if len(shared) == 1:
            pivot = shared[0]
            nbr_pts = [placed[r[(r.index(pivot) + s) % len(r)]]
                       for j in done for r in [rings[j]] if pivot in r for s in (1, -1)]
            outward = placed[pivot] - np.mean(nbr_pts, axis=0)
            if np.linalg.norm(outward) < 1e-9:
                outward = np.array([1.0, 0.0])
            outward /= np.linalg.norm(outward)
            n = len(ring)
            radius = BOND_LENGTH / (2 * math.sin(math.pi / n))
            center = placed[pivot] + outward * radius
            start = _angle(placed[pivot] - center)
            rolled = ring[ring.index(pivot):] + ring[: ring.index(pivot)]
            for atom, p in _polygon(rolled, center, start, sign=1.0).items():
                placed.setdefault(atom, p)
        else:
            for a, run, b in _segments(ring, placed):
                host = [rings[j] for j in done if a in rings[j] and b in rings[j]]
                if host:
                    ref = np.mean([placed[x] for x in host[0]], axis=0)
                else:
                    ref = np.mean(list(placed.values()), axis=0)
                _place_segment(a, run, b, placed, ref)
        done.add(k)
    return placed


def _envelope(rings: list[tuple[int, ...]]) -> list[int] | None:
    """Largest simple cycle obtainable as an XOR of SSSR rings."""
    edge_sets = []
    for ring in rings:
        edges = {frozenset(e) for e in zip(ring, ring[1:] + ring[:1])}
        edge_sets.append(edges)
    best: list[int] | None = None
    limit = min(len(rings), 10)
    for size in range(2, limit + 1):
        for combo in itertools.combinations(range(limit), size):
            acc: set = set()
            for k in combo:
                acc ^= edge_sets[k]
            cyc = _as_simple_cycle(acc)
            if cyc and (best is None or len(cyc) > len(best)):
                best = cyc
    return best


def _as_simple_cycle(edges: set) -> list[int] | None:
    if not edges:
        return None
    adj: dict[int, list[int]] = {}
    for e in edges:
        a, b = tuple(e)
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    if any(len(v) != 2 for v in adj.values()):
        return None
    start = min(adj)
    cyc = [start]
    prev, cur = None, start
    while True:
        nxt = min(x for x in adj[cur] if x != prev) if prev is None else next(
            x for x in adj[cur] if x != prev
        )
        if nxt == start:
            break
        cyc.append(nxt)
        prev, cur = cur, nxt
    return cyc if len(cyc) == len(adj) else None


def _layout_bridged(g: MolGraph, rings: list[tuple[int, ...]]) -> dict[int, np.ndarray] | None:
    env = _envelope(rings)
    if env is None:
        return None
    placed = _polygon(tuple(env), np.zeros(2), math.pi / 2 + math.pi / len(env))
    atoms = set().union(*rings)
    adj = g.adjacency()
    # Bridges: paths of unplaced atoms between placed ones, routed inside.
    for _ in range(len(atoms)):
        pending = sorted(a for a in atoms if a not in placed)
        if not pending:
            break
        progress = False
        for start in pending:
            if start in placed:
                continue
            anchors = [x for x in adj[start] if x in placed]
            if not anchors:
                continue
            path = _bridge_path(start, anchors[0], adj, atoms, placed)
            if path is None:
                continue
            a, run, b = path
            centroid = np.mean(list(placed.values()), axis=0)
            mid = 0.5 * (placed[a] + placed[b])
            # bulge toward the inside: prefer_away_from a point beyond the centroid
            _place_segment(a, run, b, placed, mid + (mid - centroid) * 2)
            progress = True
        if not progress:
            return None
    _refine_free_atoms(placed, [a for a in sorted(atoms) if a not in env])
    return placed


def _refine_free_atoms(placed: dict[int, np.ndarray], free: list[int], sweeps: int = 20) -> None:
    """Greedy grid nudges of bridge atoms to open up the closest contact."""
    steps = [np.array(v) * 0.25 for v in itertools.product((-1, 0, 1), repeat=2) if v != (0, 0)]
    for _ in range(sweeps):
        moved = False
        for atom in free:
            others = [p for a, p in placed.items() if a != atom]
            here = _min_dist_to([placed[atom]], others)
            if here >= COMFORT_DISTANCE:
                continue
            best, best_d = None, here
            for step in steps:
                trial = placed[atom] + step
                d = _min_dist_to([trial], others)
                if d > best_d + 1e-9:
                    best, best_d = trial, d
            if best is not None:
                placed[atom] = best
                moved = True
        if not moved:
            break


def _bridge_path(start, anchor, adj, atoms, placed):
    prev, cur = anchor, start
    run = [start]
    seen = {anchor, start}
    while True:
        nxt = [x for x in adj[cur] if x in atoms and x != prev and x not in seen]
        placed_nxt = [x for x in nxt if x in placed]
        if placed_nxt:
            return anchor, run, placed_nxt[0]
        unplaced = [x for x in nxt if x not in placed]
        if not unplaced:
            return None
        prev, cur = cur, unplaced[0]
        run.append(cur)
        seen.add(cur)


def layout_ring_system(g: MolGraph, rings: list[tuple[int, ...]]) -> dict[int, np.ndarray]:
    placed = _layout_fused(rings)
    atoms = set().union(*rings)
    pts = [placed[a] for a in sorted(atoms) if a in placed]
    if len(pts) == len(atoms) and min_pair_distance(np.array(pts)) >= COMFORT_DISTANCE:
        return placed
    alt = _layout_bridged(g, rings)
    if alt is not None and len(alt) == len(atoms):
        alt_pts = np.array([alt[a] for a in sorted(atoms)])
        if len(pts) < len(atoms) or min_pair_distance(alt_pts) > min_pair_distance(np.array(pts)):
            return alt
    if len(pts) < len(atoms):
        raise LayoutDegenerate(f"cannot place ring system in {g.smiles!r}")
    return placed


# ---------------------------------------------------------------------------
# chain growth
# ---------------------------------------------------------------------------

class _Placer:
    def __init__(self, g: MolGraph) -> None:
        self.g = g
        self.adj = g.adjacency()
        self.coords = np.full((g.n_atoms, 2), np.nan)
        self.placed = [False] * g.n_atoms
        self.turn = [1.0] * g.n_atoms
        self.systems = ring_systems(g)
        self.system_of: dict[int, int] = {}
        for k, rings in enumerate(self.systems):
            for ring in rings:
                for a in ring:
                    self.system_of[a] = k

    def run(self) -> np.ndarray:
        stack: list[int] = []
        if self.systems:
            local = layout_ring_system(self.g, self.systems[0])
            for atom in sorted(local):
                self._set(atom, local[atom])
            stack.extend(sorted(local, reverse=True))
        else:
            self._set(0, np.zeros(2))
            stack.append(0)
        while stack:
            u = stack.pop()
            new = self._grow(u)
            stack.extend(reversed(new))
        if not all(self.placed):
            raise LayoutDegenerate(f"disconnected graph {self.g.smiles!r}")
        return self.coords.copy()

    def _set(self, atom: int, xy: np.ndarray) -> None:
        self.coords[atom] = xy
        self.placed[atom] = True

    def _placed_points(self) -> np.ndarray:
        return self.coords[np.array(self.placed)]

    def _crowding(self, xy: np.ndarray, exclude: int) -> float:
        mask = np.array(self.placed)
        mask[exclude] = False
        if not mask.any():
            return math.inf
        return float(np.sqrt(((self.coords[mask] - xy) ** 2).sum(-1)).min())

    def _is_linear(self, u: int) -> bool:
        if len(self.adj[u]) != 2:
            return False
        orders = [self.g.bond_between(u, w).order for w in self.adj[u]]
        return TRIPLE in orders or orders.count(DOUBLE) == 2

    def _directions(self, u: int, k: int) -> list[float]:
        origin = self.coords[u]
        existing = sorted(
            _angle(self.coords[w] - origin) for w in self.adj[u] if self.placed[w]
        )
        if not existing:
            if k == 1:
                return [0.0]
            if k == 2:
                return [0.0, math.radians(120)]
            return [2 * math.pi * i / k for i in range(k)]
        if len(existing) == 1:
            a = existing[0]
            if k == 1:
                if self._is_linear(u):
                    return [a + math.pi]
                first = a + self.turn[u] * math.radians(120)
                second = a - self.turn[u] * math.radians(120)
                p1 = origin + BOND_LENGTH * _unit(first)
                p2 = origin + BOND_LENGTH * _unit(second)
                c1, c2 = self._crowding(p1, u), self._crowding(p2, u)
                if c1 >= COMFORT_DISTANCE + 0.25 or c1 >= c2:
                    return [first]
                return [second]
            if k == 2:
                return [a + math.radians(120), a - math.radians(120)]
            if k == 3:
                return [a + math.pi / 2, a + math.pi, a - math.pi / 2]
            return [a + 2 * math.pi * (i + 1) / (k + 1) for i in range(k)]
        gaps = []
        for i, ang in enumerate(existing):
            nxt = existing[(i + 1) % len(existing)]
            gap = (nxt - ang) % (2 * math.pi)
            if len(existing) == 1:
                gap = 2 * math.pi
            gaps.append((gap, -i, ang))
        gap, _, start = max(gaps)
        return [start + gap * (i + 1) / (k + 1) for i in range(k)]

    def _grow(self, u: int) -> list[int]:
        new = [w for w in self.adj[u] if not self.placed[w]]
        if not new:
            return []
        dirs = self._directions(u, len(new))
        grown: list[int] = []
        for w, ang in zip(new, dirs):
            if self.placed[w]:
                continue
            target = self.coords[u] + BOND_LENGTH * _unit(ang)
            if w in self.system_of:
                grown.extend(self._attach_system(u, w, target))
            else:
                self._set(w, target)
                self.turn[w] = -self.turn[u]
                grown.append(w)
        return grown

    def _attach_system(self, u: int, w: int, target: np.ndarray) -> list[int]:
        rings = self.systems[self.system_of[w]]
        local = layout_ring_system(self.g, rings)
        nbrs = [x for x in self.adj[w] if x in local]
        inward = np.mean([local[x] - local[w] for x in nbrs], axis=0)
        if np.linalg.norm(inward) < 1e-9:
            inward = np.mean(list(local.values()), axis=0) - local[w]
        ext_angle = _angle(-inward)
        want = _angle(self.coords[u] - target)
        best, best_score = None, -math.inf
        for mirror in (False, True):
            pts = {}
            for atom, p in local.items():
                q = p - local[w]
                if mirror:
                    # reflect across the exterior axis
                    e = _unit(ext_angle)
                    q = 2 * np.dot(q, e) * e - q
                rot = want - ext_angle
                c, s = math.cos(rot), math.sin(rot)
                pts[atom] = target + np.array([c * q[0] - s * q[1], s * q[0] + c * q[1]])
            others = [self.coords[i] for i in range(self.g.n_atoms) if self.placed[i]]
            score = _min_dist_to(list(pts.values()), others)
            if score > best_score + 1e-6:
                best, best_score = pts, score
        for atom in sorted(best):
            self._set(atom, best[atom])
        return sorted(best)


# ---------------------------------------------------------------------------
# overlap resolution
# ---------------------------------------------------------------------------

def _ring_bonds(g: MolGraph) -> set[frozenset[int]]:
    out = set()
    for ring in g.rings:
        for a, b in zip(ring, ring[1:] + ring[:1]):
            out.add(frozenset((a, b)))
    return out


def _side(adj: list[list[int]], start: int, blocked: int) -> list[int]:
    seen = {start, blocked}
    order = [start]
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                order.append(w)
                queue.append(w)
    return order


def _path(adj: list[list[int]], a: int, b: int) -> list[int]:
    par = {a: a}
    queue = deque([a])
    while queue:
        u = queue.popleft()
        if u == b:
            break
        for w in adj[u]:
            if w not in par:
                par[w] = u
                queue.append(w)
    out = [b]
    while out[-1] != a:
        out.append(par[out[-1]])
    return out[::-1]


def _closest_pair(coords: np.ndarray) -> tuple[float, int, int]:
    n = len(coords)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    dist[np.diag_indices(n)] = np.inf
    flat = int(np.argmin(dist))
    i, j = divmod(flat, n)
    return float(dist[i, j]), min(i, j), max(i, j)


def _overlap_penalty(coords: np.ndarray) -> float:
    n = len(coords)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    dist[np.diag_indices(n)] = np.inf
    short = np.clip(COMFORT_DISTANCE - dist, 0.0, None)
    return float((short**2).sum())


def _resolve_overlaps(g: MolGraph, coords: np.ndarray) -> np.ndarray:
    n = g.n_atoms
    if n < 3:
        return coords
    adj = g.adjacency()
    ring_bonds = _ring_bonds(g)
    coords = coords.copy()
    for _ in range(MAX_RESOLVE_ITERATIONS):
        d, i, j = _closest_pair(coords)
        if d >= COMFORT_DISTANCE:
            break
        path = _path(adj, i, j)
        options = []
        for p, q in zip(path, path[1:]):
            if frozenset((p, q)) in ring_bonds:
                continue
            side_q = _side(adj, q, p)
            side_p = _side(adj, p, q)
            if len(side_q) <= len(side_p):
                pivot, moving = p, side_q
            else:
                pivot, moving = q, side_p
            options.append((pivot, p if pivot == q else q, moving))
        best, best_pen = None, _overlap_penalty(coords)
        for pivot, head, moving in options:
            idx = np.array(moving)
            axis = coords[head] - coords[pivot]
            axis /= np.linalg.norm(axis)
            rel = coords[idx] - coords[pivot]
            candidates = [2 * (rel @ axis)[:, None] * axis - rel]  # mirror across bond
            for deg in (30, -30, 60, -60, 90, -90):
                t = math.radians(deg)
                c, s = math.cos(t), math.sin(t)
                candidates.append(rel @ np.array([[c, s], [-s, c]]))
            for cand in candidates:
                trial = coords.copy()
                trial[idx] = coords[pivot] + cand
                pen = _overlap_penalty(trial)
                if pen < best_pen - 1e-12:
                    best, best_pen = trial, pen
        if best is None:
            break
        coords = best
    return coords
