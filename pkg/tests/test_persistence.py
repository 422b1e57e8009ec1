import numpy as np
import pytest

from mftopo.errors import InputDataError
from mftopo.mdrg import ReebGraph, ReebNode, classify, cycle_rank, morseify
from mftopo.persistence import (
    compute_exdg1,
    compute_pd0,
    compute_pd0_neg,
    diagram_set,
    diagrams_from_csv,
    diagrams_to_csv,
)
from oracles import (
    cycle_space_exdg1_oracle,
    random_reeb_graph,
    sweep_pd0_oracle,
)


def _graph(values, edges):
    nodes = tuple(ReebNode(id=i, value=float(v), bin=0) for i, v in enumerate(values))
    return ReebGraph(nodes=nodes, edges=tuple(sorted(edges)), field_index=0)


def _points(dg):
    return sorted((p.birth, p.death) for p in dg.points)


def test_single_edge():
    g = _graph([0.0, 1.0], [(0, 1)])
    assert _points(compute_pd0(g)) == [(0.0, 1.0)]
    assert _points(compute_pd0_neg(g)) == [(-1.0, 0.0)]
    assert _points(compute_exdg1(g)) == []


def test_w_shape():
    # minima at 0 and 0.2, down-fork at 1, max at 2
    g = _graph([0.0, 0.2, 1.0, 2.0], [(0, 2), (1, 2), (2, 3)])
    assert _points(compute_pd0(g)) == [(0.0, 2.0), (0.2, 1.0)]


def test_m_shape_mirror_symmetry():
    # M is W mirrored around value 1; its negation is W shifted by -2
    w = _graph([0.0, 0.2, 1.0, 2.0], [(0, 2), (1, 2), (2, 3)])
    m = _graph([2.0, 1.8, 1.0, 0.0], [(0, 2), (1, 2), (2, 3)])
    got = _points(compute_pd0_neg(m))
    assert got == [(b - 2.0, d - 2.0) for b, d in _points(compute_pd0(w))]


def test_pd0_neg_counts_up_forks():
    # ordinary up-forks of f each contribute one pd0-neg point, plus one
    # global pair per multi-node component
    rng = np.random.default_rng(9)
    for _ in range(50):
        g = random_reeb_graph(rng)
        span = max(n.value for n in g.nodes) - min(n.value for n in g.nodes)
        m = morseify(g, max(span, 1.0) * 1e-7)
        types = classify(m)
        neg = compute_pd0_neg(m)
        n_upforks = sum(1 for t in types.values() if t == "up-fork")
        essential = len(compute_exdg1(m).points)
        multi_components = _multi_node_components(m)
        assert len(neg.points) == (n_upforks - essential) + multi_components


def _multi_node_components(rg):
    adj = rg.adjacency()
    seen = set()
    count = 0
    for n in rg.nodes:
        if n.id in seen:
            continue
        stack = [n.id]
        comp = set()
        while stack:
            cur = stack.pop()
            if cur in comp:
                continue
            comp.add(cur)
            stack.extend(adj[cur])
        seen |= comp
        if len(comp) >= 2:
            count += 1
    return count


def test_tree_has_empty_exdg1():
    g = _graph([0.0, 1.0, 2.0, 3.0], [(0, 1), (1, 2), (1, 3)])
    m = morseify(g, 1e-9)
    assert _points(compute_exdg1(m)) == []


def test_single_cycle():
    g = _graph([2.0, 3.0, 4.0, 5.0], [(0, 1), (0, 2), (1, 3), (2, 3)])
    m = morseify(g, 1e-6)
    assert _points(compute_exdg1(m)) == [(5.0, 2.0)]


def test_theta_graph_against_cycle_oracle():
    # two independent cycles sharing a path
    g = _graph(
        [0.0, 1.0, 3.0, 5.0, 10.0],
        [(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4)],
    )
    m = morseify(g, 1e-6)
    assert _points(compute_exdg1(m)) == cycle_space_exdg1_oracle(m)
    assert len(compute_exdg1(m).points) == cycle_rank(m) == 2


def test_non_morse_rejected():
    g = _graph([0.0, 0.1, 0.2, 1.0], [(0, 3), (1, 3), (2, 3)])
    with pytest.raises(InputDataError, match="non-Morse"):
        compute_pd0(g)


def test_birth_death_orientation():
    rng = np.random.default_rng(3)
    for _ in range(40):
        g = random_reeb_graph(rng)
        span = max(n.value for n in g.nodes) - min(n.value for n in g.nodes)
        m = morseify(g, max(span, 1.0) * 1e-7)
        for p in compute_pd0(m).points:
            assert p.birth <= p.death
        for p in compute_pd0_neg(m).points:
            assert p.birth <= p.death
        for p in compute_exdg1(m).points:
            assert p.birth >= p.death
        # point count <= half the node count
        assert len(compute_pd0(m).points) <= m.node_count / 2


def test_shift_equivariance():
    rng = np.random.default_rng(21)
    g = random_reeb_graph(rng)
    span = max(n.value for n in g.nodes) - min(n.value for n in g.nodes)
    m = morseify(g, max(span, 1.0) * 1e-7)
    shifted = ReebGraph(
        nodes=tuple(
            ReebNode(id=n.id, value=n.value + 5.0, bin=n.bin, members=n.members)
            for n in m.nodes
        ),
        edges=m.edges,
        field_index=m.field_index,
    )
    for fn in (compute_pd0, compute_exdg1):
        base = _points(fn(m))
        moved = _points(fn(shifted))
        assert moved == [(b + 5.0, d + 5.0) for b, d in base]


def test_oracle_agreement_sample():
    rng = np.random.default_rng(77)
    for _ in range(100):
        g = random_reeb_graph(rng)
        span = max(n.value for n in g.nodes) - min(n.value for n in g.nodes)
        m = morseify(g, max(span, 1.0) * 1e-7)
        assert _points(compute_pd0(m)) == sweep_pd0_oracle(m)
        assert _points(compute_exdg1(m)) == cycle_space_exdg1_oracle(m)
        neg_direct = _points(compute_pd0_neg(m))
        assert neg_direct == sweep_pd0_oracle(m.negated())


def test_essential_up_forks_used_once():
    rng = np.random.default_rng(13)
    for _ in range(60):
        g = random_reeb_graph(rng)
        span = max(n.value for n in g.nodes) - min(n.value for n in g.nodes)
        m = morseify(g, max(span, 1.0) * 1e-7)
        dg = compute_exdg1(m)
        partners = [p.death_node for p in dg.points]
        assert len(partners) == len(set(partners))
        types = classify(m)
        assert all(types[v] == "up-fork" for v in partners)


def test_csv_round_trip():
    # graph with a loop so all three diagram kinds carry points
    g = _graph(
        [0.0, 0.2, 1.0, 2.0, 3.0, 4.0],
        [(0, 2), (1, 2), (2, 3), (2, 4), (3, 5), (4, 5)],
    )
    diagrams = diagram_set(g, 1e-6)
    assert all(len(dg.points) for dg in diagrams.values())
    text = diagrams_to_csv(diagrams.values())
    back = diagrams_from_csv(text)
    by_kind = {d.kind: d for d in back}
    for kind, dg in diagrams.items():
        assert _points(by_kind[kind]) == _points(dg)
