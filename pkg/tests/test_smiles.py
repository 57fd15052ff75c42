import itertools

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from golden import GOLDEN
from molpix.exceptions import MultiFragment, SmilesSyntaxError, UnsupportedElement
from molpix.smiles import ELEMENTS, parse_smiles, ring_perception


class TestParseExamples:
    def test_methane(self):
        g = parse_smiles("C")
        assert g.n_atoms == 1 and g.bonds == ()
        assert g.atoms[0].element.nominal_mass == 12

    def test_ethanol(self):
        g = parse_smiles("CCO")
        assert [a.symbol for a in g.atoms] == ["C", "C", "O"]
        assert [(b.a, b.b, b.order) for b in g.bonds] == [(0, 1, "single"), (1, 2, "single")]

    def test_benzene(self):
        g = parse_smiles("c1ccccc1")
        assert g.n_atoms == 6 and all(a.aromatic for a in g.atoms)
        assert len(g.bonds) == 6 and {b.order for b in g.bonds} == {"aromatic"}
        assert [sorted(r) for r in g.rings] == [[0, 1, 2, 3, 4, 5]]

    def test_branch_with_double_bond(self):
        g = parse_smiles("C(=O)O")
        assert [(b.a, b.b, b.order) for b in g.bonds] == [(0, 1, "double"), (0, 2, "single")]

    def test_unmatched_ring_closure(self):
        with pytest.raises(SmilesSyntaxError):
            parse_smiles("C1CC")


class TestParseFeatures:
    def test_bracket_atom_charge_and_h(self):
        g = parse_smiles("C[NH3+]")
        n = g.atoms[1]
        assert n.symbol == "N" and n.charge == 1 and n.hydrogens == 3

    def test_negative_charge(self):
        assert parse_smiles("C(=O)[O-]").atoms[2].charge == -1

    def test_stereo_marks_are_dropped(self):
        a = parse_smiles("F/C=C/F")
        b = parse_smiles("FC=CF")
        assert [x.order for x in a.bonds] == [x.order for x in b.bonds]
        assert parse_smiles("N[C@@H](C)C(=O)O").n_atoms == 6

    def test_percent_ring_closure(self):
        g = parse_smiles("C%12CCCCC%12")
        assert len(g.rings) == 1 and len(g.rings[0]) == 6

    def test_two_letter_elements(self):
        g = parse_smiles("ClCBr")
        assert [a.symbol for a in g.atoms] == ["Cl", "C", "Br"]

    def test_explicit_hydrogen_atom_is_folded(self):
        g = parse_smiles("[H]OC")
        assert [a.symbol for a in g.atoms] == ["O", "C"]
        assert g.atoms[0].hydrogens == 1

    def test_implicit_hydrogens(self):
        g = parse_smiles("CC=O")
        assert [a.hydrogens for a in g.atoms] == [3, 1, 0]

    @pytest.mark.parametrize("smiles, error", [
        ("C.C", MultiFragment),
        ("CC.O", MultiFragment),
        ("C(C", SmilesSyntaxError),
        ("CC)", SmilesSyntaxError),
        ("C%1", SmilesSyntaxError),
        ("C?C", SmilesSyntaxError),
        ("[13CH4]", SmilesSyntaxError),
        ("*C", UnsupportedElement),
        ("[Si](C)(C)C", UnsupportedElement),
        ("[Fe]", UnsupportedElement),
        ("", SmilesSyntaxError),
    ])
    def test_rejections(self, smiles, error):
        with pytest.raises(error):
            parse_smiles(smiles)

    def test_syntax_error_is_value_error(self):
        with pytest.raises(ValueError):
            parse_smiles("C1CC")


class TestElements:
    def test_codes(self):
        assert {s: e.nominal_mass for s, e in ELEMENTS.items()} == {
            "H": 1, "B": 11, "C": 12, "N": 14, "O": 16, "F": 19,
            "P": 31, "S": 32, "Cl": 35, "Br": 80, "I": 127}

    def test_no_element_uses_the_bond_code(self):
        assert all(e.nominal_mass != 2 for e in ELEMENTS.values())


@pytest.mark.parametrize("smiles, atoms, bonds, mass, rings", GOLDEN)
class TestGoldenCorpus:
    def test_counts(self, smiles, atoms, bonds, mass, rings):
        g = parse_smiles(smiles)
        assert g.n_atoms == atoms
        assert len(g.bonds) == bonds
        assert g.mass_sum() == mass
        assert len(g.rings) == rings

    def test_deterministic(self, smiles, atoms, bonds, mass, rings):
        assert parse_smiles(smiles) == parse_smiles(smiles)

    def test_indices_and_endpoints(self, smiles, atoms, bonds, mass, rings):
        g = parse_smiles(smiles)
        assert [a.index for a in g.atoms] == list(range(g.n_atoms))
        pairs = [frozenset((b.a, b.b)) for b in g.bonds]
        assert len(set(pairs)) == len(pairs)
        assert all(b.a != b.b and max(b.a, b.b) < g.n_atoms for b in g.bonds)

    def test_aromatic_atoms_lie_on_rings(self, smiles, atoms, bonds, mass, rings):
        g = parse_smiles(smiles)
        on_ring = {i for r in g.rings for i in r}
        assert all(a.index in on_ring for a in g.atoms if a.aromatic)


def _nx_graph(g):
    G = nx.Graph()
    G.add_nodes_from(range(g.n_atoms))
    G.add_edges_from((b.a, b.b) for b in g.bonds)
    return G


def _is_cycle(g, cycle):
    n = len(cycle)
    return len(set(cycle)) == n and all(
        g.bond_between(cycle[i], cycle[(i + 1) % n]) is not None for i in range(n))


def _all_simple_cycle_lengths(G):
    """Lengths of every simple cycle, enumerated exhaustively (each direction once)."""
    out = []
    for c in nx.simple_cycles(G.to_directed()):
        if len(c) > 2:
            out.append(len(c))
    return out


class TestRingPerception:
    def test_chain_has_no_rings(self):
        assert ring_perception(parse_smiles("CCCCCC")) == []

    def test_benzene_single_cycle(self):
        assert ring_perception(parse_smiles("c1ccccc1")) == [(0, 1, 2, 3, 4, 5)]

    def test_naphthalene_two_hexagons_sharing_an_edge(self):
        rings = ring_perception(parse_smiles("c1ccc2ccccc2c1"))
        assert [len(r) for r in rings] == [6, 6]
        assert len(set(rings[0]) & set(rings[1])) == 2

    def test_naphthalene_against_exhaustive_enumeration(self):
        g = parse_smiles("c1ccc2ccccc2c1")
        lengths = _all_simple_cycle_lengths(_nx_graph(g))
        # three simple cycles: two hexagons and the 10-membered perimeter
        assert sorted(set(lengths)) == [6, 10]
        assert [len(r) for r in ring_perception(g)] == [6, 6]

    @pytest.mark.parametrize("smiles", [row[0] for row in GOLDEN if row[4] > 0])
    def test_matches_networkx_minimum_cycle_basis(self, smiles):
        g = parse_smiles(smiles)
        ours = ring_perception(g)
        ref = nx.minimum_cycle_basis(_nx_graph(g))
        assert sorted(len(r) for r in ours) == sorted(len(r) for r in ref)
        assert all(_is_cycle(g, r) for r in ours)

    @pytest.mark.parametrize("smiles", [row[0] for row in GOLDEN if row[4] > 0])
    def test_cycles_are_independent(self, smiles):
        g = parse_smiles(smiles)
        rings = ring_perception(g)
        edge_id = {frozenset((b.a, b.b)): k for k, b in enumerate(g.bonds)}
        masks = []
        for r in rings:
            m = 0
            for i in range(len(r)):
                m ^= 1 << edge_id[frozenset((r[i], r[(i + 1) % len(r)]))]
            masks.append(m)
        # GF(2) rank equals the number of cycles
        rank, basis = 0, []
        for m in masks:
            for b in basis:
                m = min(m, m ^ b)
            if m:
                basis.append(m)
                rank += 1
        assert rank == len(rings) == len(g.bonds) - g.n_atoms + 1

    def test_deterministic_order(self):
        g = parse_smiles("c1ccc2c(c1)ccc1ccccc12")
        rings = ring_perception(g)
        assert rings == ring_perception(g)
        assert rings == sorted(rings, key=lambda r: (len(r), r))
        assert all(r[0] == min(r) for r in rings)


_atom = st.sampled_from(["C", "N", "O", "S", "Cl", "c1ccccc1", "C(=O)", "F"])


@settings(max_examples=60, deadline=None)
@given(st.lists(_atom, min_size=1, max_size=8))
def test_random_chains_parse_with_consistent_counts(parts):
    smiles = "".join(parts)
    try:
        g = parse_smiles(smiles)
    except SmilesSyntaxError:
        return
    assert len(g.bonds) - g.n_atoms + 1 == len(g.rings)
    assert nx.is_connected(_nx_graph(g))


def test_ring_count_is_cycle_rank_for_small_random_graphs():
    # exhaustive over all connected labelled graphs on 4 nodes written as SMILES
    # via explicit ring closures
    nodes = range(4)
    edges_all = list(itertools.combinations(nodes, 2))
    for k in range(3, len(edges_all) + 1):
        for edges in itertools.combinations(edges_all, k):
            G = nx.Graph(edges)
            if G.number_of_nodes() != 4 or not nx.is_connected(G):
                continue
            tree = list(nx.dfs_edges(G, 0))
            extra = [e for e in edges if e not in tree and e[::-1] not in tree]
            labels = {n: "" for n in nodes}
            for d, (a, b) in enumerate(extra, start=1):
                labels[a] += str(d)
                labels[b] += str(d)
            smiles = _tree_smiles(tree, labels)
            g = parse_smiles(smiles)
            assert len(g.rings) == k - 3
            assert sorted(len(r) for r in g.rings) == sorted(len(c) for c in nx.minimum_cycle_basis(G))


def _tree_smiles(tree_edges, labels):
    children = {}
    for a, b in tree_edges:
        children.setdefault(a, []).append(b)

    def emit(n):
        s = "C" + labels[n]
        kids = children.get(n, [])
        for c in kids[:-1]:
            s += "(" + emit(c) + ")"
        if kids:
            s += emit(kids[-1])
        return s

    return emit(0)
