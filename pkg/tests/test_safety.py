from __future__ import annotations

import itertools
import math
import random

import pytest

from labsentry.model import NavGraph, Point, RobotState
from labsentry.safety import (
    BlockingRule,
    NoRouteError,
    PlanError,
    SafetyPolicy,
    filter_safe_nodes,
    perimeter_nodes,
    plan_route,
    route_length,
    validate_plan,
)
from conftest import random_connected_graph


def grid_graph() -> NavGraph:
    # 3x4 grid, ids 1..12, unit spacing
    nodes = {}
    edges = set()
    for r in range(3):
        for c in range(4):
            nid = r * 4 + c + 1
            nodes[nid] = Point(float(c), float(r))
    for r in range(3):
        for c in range(4):
            nid = r * 4 + c + 1
            if c < 3:
                edges.add((nid, nid + 1))
            if r < 2:
                edges.add((nid, nid + 4))
    return NavGraph(nodes=nodes, edges=frozenset(edges))


# -- independent oracles (kept deliberately dumb) ------------------------------


def brute_filter(graph, hazards, workers, exits, policy):
    out = []
    for nid in sorted(graph.nodes):
        p = graph.nodes[nid]
        ok = True
        for h in hazards:
            if math.dist(p, h) <= policy.hazard_radius:
                ok = False
        for w in workers:
            if math.dist(p, w) <= policy.person_radius:
                ok = False
        for e in exits:
            if math.dist(p, e) <= policy.exit_radius:
                ok = False
        if ok:
            out.append(nid)
    return out


def brute_validate(assignments, graph, hazard, robots, policy):
    errors = set()
    spots = {}
    for idx, dest in assignments.items():
        if dest is None:
            spots[idx] = robots[idx - 1].at_node
        elif dest in graph.nodes:
            spots[idx] = dest
        else:
            errors.add("e2")
    for a, b in itertools.combinations(sorted(spots), 2):
        same = spots[a] == spots[b]
        adjacent = (min(spots[a], spots[b]), max(spots[a], spots[b])) in graph.edges
        if same or (policy.blocking_rule is BlockingRule.SAME_OR_ADJACENT and adjacent):
            errors.add("e1")
    for idx in spots:
        if math.dist(graph.nodes[spots[idx]], hazard) <= policy.hazard_radius:
            errors.add("e3")
    return errors


def all_simple_paths(graph, start, goal, banned):
    """Exhaustive enumeration of simple paths avoiding banned nodes."""
    paths = []

    def walk(node, seen, acc):
        if node == goal:
            paths.append(list(acc))
            return
        for nxt in graph.neighbors(node):
            if nxt in seen or nxt in banned:
                continue
            seen.add(nxt)
            acc.append(nxt)
            walk(nxt, seen, acc)
            acc.pop()
            seen.remove(nxt)

    walk(start, {start}, [start])
    return paths


# -- filter_safe_nodes -----------------------------------------------------------


def test_filter_nothing_excludes_returns_all():
    g = grid_graph()
    out = filter_safe_nodes(g, [], [], [Point(100, 100)], SafetyPolicy())
    assert out == sorted(g.nodes)


def test_filter_single_fire_matches_brute_force():
    g = grid_graph()
    policy = SafetyPolicy(hazard_radius=2.0)
    hazard = [g.nodes[6]]
    out = filter_safe_nodes(g, hazard, [], [], policy)
    assert out == brute_filter(g, hazard, [], [], policy)
    assert 6 not in out


def test_filter_radius_beyond_diagonal_empties():
    g = grid_graph()
    out = filter_safe_nodes(g, [Point(1.5, 1.0)], [], [], SafetyPolicy(hazard_radius=50))
    assert out == []


def test_filter_random_instances_match_brute_force():
    rng = random.Random(42)
    for _ in range(100):
        g = random_connected_graph(rng, max_nodes=12)
        policy = SafetyPolicy(
            hazard_radius=rng.uniform(0.5, 4.0),
            person_radius=rng.uniform(0.5, 4.0),
            exit_radius=rng.uniform(0.5, 4.0),
        )
        hazards = [Point(rng.uniform(0, 10), rng.uniform(0, 10)) for _ in range(rng.randint(0, 2))]
        workers = [Point(rng.uniform(0, 10), rng.uniform(0, 10)) for _ in range(rng.randint(0, 2))]
        exits = [Point(rng.uniform(0, 10), rng.uniform(0, 10)) for _ in range(rng.randint(1, 2))]
        got = filter_safe_nodes(g, hazards, workers, exits, policy)
        assert got == brute_filter(g, hazards, workers, exits, policy)
        assert set(got) <= set(g.nodes)


def test_filter_monotone_in_hazard_radius():
    rng = random.Random(43)
    g = random_connected_graph(rng, max_nodes=12)
    hazards = [Point(5, 5)]
    previous = None
    for radius in (0.5, 1.0, 2.0, 4.0, 8.0):
        current = set(filter_safe_nodes(g, hazards, [], [], SafetyPolicy(hazard_radius=radius)))
        if previous is not None:
            assert current <= previous
        previous = current


# -- validate_plan ------------------------------------------------------------------


def robots_at(*nodes) -> list[RobotState]:
    return [RobotState(id=f"R{i+1}", at_node=n) for i, n in enumerate(nodes)]


def test_validate_blocking_same_node():
    g = grid_graph()
    check = validate_plan({1: 4, 2: 4, 3: None}, g, Point(50, 50), robots_at(1, 2, 3), SafetyPolicy())
    assert PlanError.E1 in check.errors


def test_validate_nonexistent_node():
    g = grid_graph()
    check = validate_plan({1: 99, 2: 2, 3: None}, g, Point(50, 50), robots_at(1, 5, 9), SafetyPolicy())
    assert PlanError.E2 in check.errors


def test_validate_success_case():
    g = grid_graph()
    check = validate_plan({1: 4, 2: 8, 3: 12}, g, Point(-10, -10), robots_at(1, 5, 9), SafetyPolicy())
    assert check.success
    assert check.codes() == []


def test_validate_stay_inside_perimeter_is_e3():
    g = grid_graph()
    # robot 1 sits at node 1 which is right next to the hazard; telling it to
    # stay must still flag e3
    check = validate_plan({1: None, 2: 8, 3: 12}, g, g.nodes[1], robots_at(1, 5, 9), SafetyPolicy())
    assert PlanError.E3 in check.errors


def test_validate_adjacent_blocking_rule():
    g = grid_graph()
    policy = SafetyPolicy(blocking_rule=BlockingRule.SAME_OR_ADJACENT)
    check = validate_plan({1: 1, 2: 2}, g, Point(50, 50), robots_at(5, 6), policy)
    assert PlanError.E1 in check.errors
    relaxed = validate_plan({1: 1, 2: 2}, g, Point(50, 50), robots_at(5, 6), SafetyPolicy())
    assert PlanError.E1 not in relaxed.errors


def test_validate_random_instances_match_brute_force():
    rng = random.Random(77)
    for _ in range(300):
        g = random_connected_graph(rng, max_nodes=12)
        ids = sorted(g.nodes)
        k = rng.randint(1, min(3, len(ids)))
        robots = robots_at(*rng.sample(ids, k))
        assignments = {}
        for i in range(1, k + 1):
            roll = rng.random()
            if roll < 0.2:
                assignments[i] = None
            elif roll < 0.35:
                assignments[i] = rng.randint(90, 120)  # probably nonexistent
            else:
                assignments[i] = rng.choice(ids)
        policy = SafetyPolicy(
            hazard_radius=rng.uniform(0.5, 5.0),
            blocking_rule=rng.choice(list(BlockingRule)),
        )
        hazard = Point(rng.uniform(0, 10), rng.uniform(0, 10))
        got = validate_plan(assignments, g, hazard, robots, policy)
        assert set(got.codes()) == brute_validate(assignments, g, hazard, robots, policy)
        assert got.success == (not got.errors)


# -- plan_route -----------------------------------------------------------------------


def test_route_trivial_self():
    g = grid_graph()
    assert plan_route(g, 5, 5) == [5]


def test_route_excluded_middle_disconnects():
    nodes = {i: Point(float(i), 0.0) for i in range(1, 6)}
    edges = frozenset((i, i + 1) for i in range(1, 5))
    path_graph = NavGraph(nodes=nodes, edges=edges)
    with pytest.raises(NoRouteError):
        plan_route(path_graph, 1, 5, excluded={3})


def test_route_start_exempt_from_exclusion():
    nodes = {i: Point(float(i), 0.0) for i in range(1, 4)}
    g = NavGraph(nodes=nodes, edges=frozenset({(1, 2), (2, 3)}))
    # robot caught inside the perimeter must still be able to leave
    assert plan_route(g, 1, 3, excluded={1}) == [1, 2, 3]


def test_route_goal_excluded_rejected():
    g = grid_graph()
    with pytest.raises(ValueError, match="excluded"):
        plan_route(g, 1, 4, excluded={4})


def test_route_unknown_nodes_rejected():
    g = grid_graph()
    with pytest.raises(ValueError):
        plan_route(g, 99, 4)
    with pytest.raises(ValueError):
        plan_route(g, 1, 99)


def test_route_optimal_versus_exhaustive_enumeration():
    rng = random.Random(2024)
    checked = 0
    while checked < 100:
        g = random_connected_graph(rng, max_nodes=10)
        ids = sorted(g.nodes)
        start, goal = rng.choice(ids), rng.choice(ids)
        banned = set(rng.sample(ids, rng.randint(0, max(0, len(ids) - 2))))
        banned -= {start, goal}
        candidates = all_simple_paths(g, start, goal, banned)
        try:
            got = plan_route(g, start, goal, excluded=banned)
        except NoRouteError:
            assert candidates == []
            checked += 1
            continue
        assert not (set(got) - {start}) & banned
        best = min(route_length(g, p) for p in candidates)
        assert route_length(g, got) == pytest.approx(best, abs=1e-9)
        checked += 1


def test_perimeter_nodes():
    g = grid_graph()
    assert perimeter_nodes(g, g.nodes[1], 1.0) == {1, 2, 5}


def test_policy_rejects_nonpositive_radii():
    with pytest.raises(ValueError):
        SafetyPolicy(hazard_radius=0.0)
