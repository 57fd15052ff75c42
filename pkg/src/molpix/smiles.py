"""SMILES parsing into a heavy-atom molecular graph.

Supported subset:
    - organic-subset atoms (B C N O P S F Cl Br I) and aromatic b c n o p s
    - bracket atoms with H count, charge, and chirality marks
    - branches, ring closures 1-9 and %nn
    - bond symbols - = # : / \\

Stereo marks are accepted and dropped. Isotopes, wildcards, atom classes
and multi-fragment input are rejected.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Final

from .exceptions import MultiFragment, SmilesSyntaxError, UnsupportedElement


@dataclass(frozen=True)
class Element:
    symbol: str
    nominal_mass: int


ELEMENTS: Final[dict[str, Element]] = {
    e.symbol: e
    for e in (
        Element("H", 1),
        Element("B", 11),
        Element("C", 12),
        Element("N", 14),
        Element("O", 16),
        Element("F", 19),
        Element("P", 31),
        Element("S", 32),
        Element("Cl", 35),
        Element("Br", 80),
        Element("I", 127),
    )
}

# Symbols that are real elements but outside ELEMENTS; used to tell an
# unsupported element apart from a plain typo.
_PERIODIC: Final[frozenset[str]] = frozenset(
    """He Li Be Ne Na Mg Al Si Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn Ga Ge As Se
    Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te Xe Cs Ba La Ce Pr Nd Pm
    Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po At Rn
    Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs Mt Ds Rg
    Cn Nh Fl Mc Lv Ts Og""".split()
)

_ORGANIC: Final[tuple[str, ...]] = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
_AROMATIC: Final[frozenset[str]] = frozenset("bcnops")
_AROMATIC_BRACKET_ONLY: Final[frozenset[str]] = frozenset({"se", "as", "te"})

_DEFAULT_VALENCE: Final[dict[str, tuple[int, ...]]] = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

SINGLE, DOUBLE, TRIPLE, AROMATIC = "single", "double", "triple", "aromatic"
_BOND_SYMBOLS: Final[dict[str, str]] = {
    "-": SINGLE,
    "=": DOUBLE,
    "#": TRIPLE,
    ":": AROMATIC,
    "/": SINGLE,
    "\\": SINGLE,
}
_BOND_VALENCE: Final[dict[str, int]] = {SINGLE: 1, DOUBLE: 2, TRIPLE: 3, AROMATIC: 1}


@dataclass(frozen=True)
class Atom:
    element: Element
    aromatic: bool
    charge: int
    index: int
    hydrogens: int = 0  # implicit + bracket H, never materialized as nodes

    @property
    def symbol(self) -> str:
        return self.element.symbol


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: str

    def other(self, i: int) -> int:
        return self.b if i == self.a else self.a


@dataclass(frozen=True)
class MolGraph:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    rings: tuple[tuple[int, ...], ...] = field(default=())
    smiles: str = ""

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def neighbors(self, i: int) -> list[int]:
        return self.adjacency()[i]

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            adj[bond.a].append(bond.b)
            adj[bond.b].append(bond.a)
        for row in adj:
            row.sort()
        return adj

    def bond_between(self, i: int, j: int) -> Bond | None:
        for bond in self.bonds:
            if {bond.a, bond.b} == {i, j}:
                return bond
        return None

    def mass_sum(self) -> int:
        return sum(a.element.nominal_mass for a in self.atoms)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

@dataclass
class _RawAtom:
    symbol: str
    aromatic: bool
    charge: int = 0
    hcount: int | None = None  # None: organic subset, derive from valence
    bracket: bool = False


class _Parser:
    def __init__(self, s: str) -> None:
        self.s = s
        self.pos = 0
        self.atoms: list[_RawAtom] = []
        self.bonds: dict[frozenset[int], str] = {}
        self.bond_order: list[tuple[int, int]] = []
        self.open_rings: dict[int, tuple[int, str | None, int]] = {}

    def error(self, msg: str) -> SmilesSyntaxError:
        return SmilesSyntaxError(f"{msg} at position {self.pos} in {self.s!r}")

    def peek(self) -> str:
        return self.s[self.pos] if self.pos < len(self.s) else ""

    def parse(self) -> None:
        prev: int | None = None
        pending_bond: str | None = None
        stack: list[int] = []
        s = self.s
        while self.pos < len(s):
            ch = s[self.pos]
            if ch == "(":
                if prev is None or pending_bond is not None:
                    raise self.error("branch without a preceding atom")
                stack.append(prev)
                self.pos += 1
                if self.peek() == ")":
                    raise self.error("empty branch")
            elif ch == ")":
                if not stack:
                    raise self.error("unbalanced ')'")
                if pending_bond is not None:
                    raise self.error("dangling bond")
                prev = stack.pop()
                self.pos += 1
            elif ch in _BOND_SYMBOLS:
                if pending_bond is not None or prev is None:
                    raise self.error(f"unexpected bond symbol {ch!r}")
                pending_bond = _BOND_SYMBOLS[ch]
                self.pos += 1
            elif ch == ".":
                raise MultiFragment(f"disconnected SMILES {s!r}")
            elif ch.isdigit() or ch == "%":
                if prev is None:
                    raise self.error("ring closure without an atom")
                self._ring_closure(prev, pending_bond)
                pending_bond = None
            elif ch == "$":
                raise self.error("quadruple bonds are not supported")
            else:
                idx = self._atom()
                if prev is not None:
                    self._add_bond(prev, idx, pending_bond)
                elif pending_bond is not None:
                    raise self.error("bond before first atom")
                pending_bond = None
                prev = idx
        if stack:
            raise self.error("unbalanced '('")
        if pending_bond is not None:
            raise self.error("dangling bond at end of string")
        if self.open_rings:
            digits = ", ".join(str(d) for d in sorted(self.open_rings))
            raise SmilesSyntaxError(f"unmatched ring closure {digits} in {s!r}")
        if not self.atoms:
            raise self.error("no atoms")

    def _ring_closure(self, atom: int, bond: str | None) -> None:
        s = self.s
        if s[self.pos] == "%":
            num = s[self.pos + 1 : self.pos + 3]
            if len(num) != 2 or not num.isdigit():
                raise self.error("'%' must be followed by two digits")
            digit = int(num)
            self.pos += 3
        else:
            digit = int(s[self.pos])
            self.pos += 1
        if digit in self.open_rings:
            other, other_bond, at = self.open_rings.pop(digit)
            if bond is not None and other_bond is not None and bond != other_bond:
                raise self.error(f"conflicting bond orders on ring closure {digit}")
            if other == atom:
                raise self.error(f"ring closure {digit} bonds an atom to itself")
            self._add_bond(other, atom, bond or other_bond)
        else:
            self.open_rings[digit] = (atom, bond, self.pos)

    def _add_bond(self, a: int, b: int, order: str | None) -> None:
        key = frozenset((a, b))
        if key in self.bonds:
            raise self.error(f"duplicate bond between atoms {a} and {b}")
        if order is None:
            both_aromatic = self.atoms[a].aromatic and self.atoms[b].aromatic
            order = AROMATIC if both_aromatic else SINGLE
        self.bonds[key] = order
        self.bond_order.append((min(a, b), max(a, b)))

    def _atom(self) -> int:
        s = self.s
        ch = s[self.pos]
        if ch == "[":
            raw = self._bracket()
        elif ch == "*":
            raise UnsupportedElement(f"wildcard atom in {s!r}")
        else:
            raw = None
            for sym in _ORGANIC:
                if s.startswith(sym, self.pos):
                    raw = _RawAtom(sym, aromatic=False)
                    self.pos += len(sym)
                    break
            if raw is None:
                if ch in _AROMATIC:
                    raw = _RawAtom(ch.upper(), aromatic=True)
                    self.pos += 1
                else:
                    raise self.error(f"bad token {ch!r}")
        self.atoms.append(raw)
        return len(self.atoms) - 1

    def _bracket(self) -> _RawAtom:
        s = self.s
        end = s.find("]", self.pos)
        if end < 0:
            raise self.error("unterminated bracket atom")
        body = s[self.pos + 1 : end]
        self.pos = end + 1
        i = 0
        if i < len(body) and body[i].isdigit():
            raise SmilesSyntaxError(f"isotopes are not supported: [{body}] in {s!r}")
        # element symbol
        symbol = ""
        aromatic = False
        two = body[i : i + 2]
        if two in _AROMATIC_BRACKET_ONLY:
            raise UnsupportedElement(f"unsupported aromatic element {two!r} in {s!r}")
        if body[i : i + 1] == "*":
            raise UnsupportedElement(f"wildcard atom in {s!r}")
        if two in ELEMENTS or two in _PERIODIC:
            symbol = two
        elif body[i : i + 1] in ELEMENTS or body[i : i + 1] in _PERIODIC:
            symbol = body[i]
        elif body[i : i + 1] in _AROMATIC:
            symbol = body[i].upper()
            aromatic = True
        else:
            raise SmilesSyntaxError(f"bad bracket atom [{body}] in {s!r}")
        i += len(symbol)
        if symbol not in ELEMENTS:
            raise UnsupportedElement(f"element {symbol!r} is not supported ({s!r})")
        # chirality
        while i < len(body) and body[i] == "@":
            i += 1
        if body[i : i + 2] in ("TH", "AL", "SP", "TB", "OH"):
            i += 2
            while i < len(body) and body[i].isdigit():
                i += 1
        # hydrogens
        hcount = 0
        if i < len(body) and body[i] == "H":
            i += 1
            hcount = 1
            if i < len(body) and body[i].isdigit():
                hcount = int(body[i])
                i += 1
        # charge
        charge = 0
        if i < len(body) and body[i] in "+-":
            sign = 1 if body[i] == "+" else -1
            j = i + 1
            if j < len(body) and body[j].isdigit():
                k = j
                while k < len(body) and body[k].isdigit():
                    k += 1
                charge = sign * int(body[j:k])
                i = k
            else:
                n = 1
                while j < len(body) and body[j] == body[i]:
                    n += 1
                    j += 1
                charge = sign * n
                i = j
        if i < len(body) and body[i] == ":":
            raise SmilesSyntaxError(f"atom classes are not supported: [{body}]")
        if i != len(body):
            raise SmilesSyntaxError(f"bad bracket atom [{body}] in {s!r}")
        return _RawAtom(symbol, aromatic, charge=charge, hcount=hcount, bracket=True)


def _implicit_hydrogens(raw: _RawAtom, bond_orders: list[str]) -> int:
    if raw.hcount is not None:
        return raw.hcount
    valences = _DEFAULT_VALENCE.get(raw.symbol)
    if valences is None:
        return 0
    used = sum(_BOND_VALENCE[o] for o in bond_orders) + (1 if raw.aromatic else 0)
    for v in valences:
        if v >= used:
            return v - used
    return 0


def _fold_explicit_hydrogens(
    raws: list[_RawAtom], bonds: dict[frozenset[int], str]
) -> tuple[list[int], dict[int, int]]:
    """Drop bracket [H] atoms hanging off a heavy atom; return kept indices
    and extra hydrogen counts per kept atom."""
    neighbours: dict[int, list[int]] = {i: [] for i in range(len(raws))}
    for key in bonds:
        a, b = tuple(key)
        neighbours[a].append(b)
        neighbours[b].append(a)
    drop: set[int] = set()
    extra: dict[int, int] = {}
    for i, raw in enumerate(raws):
        if raw.symbol != "H" or raw.charge or raw.hcount:
            continue
        nbrs = neighbours[i]
        if len(nbrs) == 1 and raws[nbrs[0]].symbol != "H":
            drop.add(i)
            extra[nbrs[0]] = extra.get(nbrs[0], 0) + 1
    kept = [i for i in range(len(raws)) if i not in drop]
    return kept, extra


def parse_smiles(s: str) -> MolGraph:
    """Parse a SMILES string into a connected heavy-atom graph.

    Raises:
        SmilesSyntaxError: malformed input.
        UnsupportedElement: element outside the supported set.
        MultiFragment: input contains '.'.
    """
    if not isinstance(s, str) or not s:
        raise SmilesSyntaxError("empty SMILES")
    if not s.isascii():
        raise SmilesSyntaxError(f"non-ASCII SMILES {s!r}")
    s = s.strip()
    if not s or any(c.isspace() for c in s):
        raise SmilesSyntaxError(f"whitespace inside SMILES {s!r}")
    p = _Parser(s)
    p.parse()

    kept, extra_h = _fold_explicit_hydrogens(p.atoms, p.bonds)
    remap = {old: new for new, old in enumerate(kept)}
    orders_of: dict[int, list[str]] = {i: [] for i in range(len(p.atoms))}
    for key, order in p.bonds.items():
        for i in key:
            orders_of[i].append(order)

    atoms = []
    for old in kept:
        raw = p.atoms[old]
        h = _implicit_hydrogens(raw, orders_of[old]) + extra_h.get(old, 0)
        atoms.append(
            Atom(
                element=ELEMENTS[raw.symbol],
                aromatic=raw.aromatic,
                charge=raw.charge,
                index=remap[old],
                hydrogens=h,
            )
        )
    bonds = []
    for a, b in p.bond_order:
        if a in remap and b in remap:
            bonds.append(Bond(remap[a], remap[b], p.bonds[frozenset((a, b))]))
    graph = MolGraph(atoms=tuple(atoms), bonds=tuple(bonds), smiles=s)
    return MolGraph(graph.atoms, graph.bonds, tuple(ring_perception(graph)), s)


# ---------------------------------------------------------------------------
# rings
# ---------------------------------------------------------------------------

def _canonical_cycle(cycle: list[int]) -> tuple[int, ...]:
    k = cycle.index(min(cycle))
    rot = cycle[k:] + cycle[:k]
    if len(rot) > 2 and rot[-1] < rot[1]:
        rot = [rot[0]] + rot[:0:-1]
    return tuple(rot)


def ring_perception(g: MolGraph) -> list[tuple[int, ...]]:
    """Minimum cycle basis (smallest set of smallest rings).

    Horton's candidate set: for every vertex v and edge (x, y), the cycle
    formed by shortest paths v->x, v->y and the edge, when the two paths
    meet only at v. Candidates are accepted shortest-first if independent
    over GF(2). Each ring starts at its lowest atom index and runs toward
    the lower-indexed neighbour; the list is sorted by (size, atoms).
    """
    n = len(g.atoms)
    edges = [(min(b.a, b.b), max(b.a, b.b)) for b in g.bonds]
    if not edges:
        return []
    n_components = _count_components(n, edges)
    rank = len(edges) - n + n_components
    if rank == 0:
        return []
    edge_id = {e: k for k, e in enumerate(edges)}
    adj = g.adjacency()

    parents = [_bfs_parents(adj, v) for v in range(n)]

    def path(v: int, x: int) -> list[int] | None:
        par = parents[v]
        if x != v and par[x] < 0:
            return None
        out = [x]
        while out[-1] != v:
            out.append(par[out[-1]])
        return out[::-1]

    candidates: dict[int, tuple[int, ...]] = {}
    for v in range(n):
        for x, y in edges:
            px, py = path(v, x), path(v, y)
            if px is None or py is None:
                continue
            if set(px) & set(py) != {v}:
                continue
            cyc = px + py[:0:-1]
            if len(cyc) < 3:
                continue
            mask = 0
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                mask |= 1 << edge_id[(min(a, b), max(a, b))]
            canon = _canonical_cycle(cyc)
            if mask not in candidates or canon < candidates[mask]:
                candidates[mask] = canon

    ordered = sorted(candidates.items(), key=lambda kv: (len(kv[1]), kv[1]))
    basis: dict[int, int] = {}  # pivot bit -> reduced vector
    chosen: list[tuple[int, ...]] = []
    for mask, canon in ordered:
        vec = mask
        while vec:
            pivot = vec.bit_length() - 1
            if pivot not in basis:
                basis[pivot] = vec
                chosen.append(canon)
                break
            vec ^= basis[pivot]
        if len(chosen) == rank:
            break
    return sorted(chosen, key=lambda c: (len(c), c))


def _bfs_parents(adj: list[list[int]], root: int) -> list[int]:
    par = [-1] * len(adj)
    par[root] = root
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if par[w] < 0:
                par[w] = u
                queue.append(w)
    return par


def _count_components(n: int, edges: list[tuple[int, int]]) -> int:
    root = list(range(n))

    def find(i: int) -> int:
        while root[i] != i:
            root[i] = root[root[i]]
            i = root[i]
        return i

    for a, b in edges:
        root[find(a)] = find(b)
    return len({find(i) for i in range(n)})
