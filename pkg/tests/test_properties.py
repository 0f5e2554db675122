"""Property-based checks over randomized instances and plans."""

from __future__ import annotations

from hypothesis import assume, given, settings
from hypothesis import strategies as st

from helpers import MEDIA, build_instance
from mixplan import NetworkMatrix, cram_allocate
from mixplan.errors import InfeasibleError
from mixplan.heuristic import dsort, min_mixers
from mixplan.model.metrics import eval_network_cost
from mixplan.model.serialize import dumps_instance, dumps_plan, loads_instance
from mixplan.model.types import Plan, StreamEdge
from mixplan.model.validate import STRUCTURAL_FAMILIES, carried_streams, validate_plan


@st.composite
def symmetric_times(draw, max_sites=4):
    k = draw(st.integers(min_value=1, max_value=max_sites))
    cell = st.floats(min_value=0.1, max_value=100.0, allow_nan=False)
    rows = [[0.0] * k for _ in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            rows[i][j] = rows[j][i] = draw(cell)
    return rows


@st.composite
def instances(draw, max_users=20):
    times = draw(symmetric_times())
    sites = [f"s{i}" for i in range(len(times))]
    n = draw(st.integers(min_value=2, max_value=max_users))
    places = [sites[draw(st.integers(0, len(sites) - 1))] for _ in range(n)]
    max_delay = draw(st.floats(min_value=150.0, max_value=500.0, allow_nan=False))
    return build_instance(n, sites, times, max_delay=max_delay, places=places)


@given(symmetric_times())
def test_from_time_is_symmetric_and_priced(times):
    sites = tuple(f"s{i}" for i in range(len(times)))
    net = NetworkMatrix.from_time(sites=sites, time=times, kappa=0.02)
    for a in sites:
        assert net.t(a, a) == 0.0
        for b in sites:
            assert net.t(a, b) == net.t(b, a)
            assert abs(net.p(a, b) - 0.02 * net.t(a, b)) < 1e-12


@given(instances())
@settings(max_examples=60, deadline=None)
def test_instance_serialization_round_trips(inst):
    assert loads_instance(dumps_instance(inst)) == inst


@given(instances())
@settings(max_examples=60, deadline=None)
def test_dsort_is_a_sorted_permutation(inst):
    order = dsort(inst.servers, inst.participants, inst.network)
    assert sorted(order) == list(range(len(inst.servers)))
    totals = [
        sum(inst.network.t(s.site, p.site) for p in inst.participants)
        for s in inst.servers
    ]
    assert all(totals[a] <= totals[b] + 1e-9 for a, b in zip(order, order[1:]))


@given(st.integers(min_value=2, max_value=60), st.floats(min_value=1.0, max_value=500.0, allow_nan=False))
def test_min_mixers_matches_direct_scan(n, bound):
    inst = build_instance(n, ["a"], [[0.0]], max_delay=bound)
    expected = None
    for m in range(1, n):
        per = -(-n // m)
        handling = MEDIA.mix_ms(per) + MEDIA.mix_ms(m)
        if handling < bound and MEDIA.vm_mb(per) <= 10240.0 + 1e-9:
            expected = (m, per, handling)
            break
    if expected is None:
        try:
            min_mixers(inst)
        except InfeasibleError:
            return
        raise AssertionError("scan says infeasible, walk found a split")
    assert min_mixers(inst) == expected


@given(instances())
@settings(max_examples=50, deadline=None)
def test_heuristic_plans_validate_and_meet_bound(inst):
    try:
        plan = cram_allocate(inst)
    except InfeasibleError:
        assume(False)
    assert validate_plan(plan, inst, delay_model="algorithm1", families=STRUCTURAL_FAMILIES) == []
    assert max(plan.per_participant_delay.values()) <= inst.qos.max_delay + 1e-9


@given(instances())
@settings(max_examples=40, deadline=None)
def test_carried_streams_matches_reachability(inst):
    try:
        plan = cram_allocate(inst)
    except InfeasibleError:
        assume(False)
    # recompute reachability from scratch with a plain BFS
    succ: dict[tuple[str, str], set[str]] = {}
    for e in plan.edges:
        if e.tail.is_vm:
            key = ("vm" if e.head.is_vm else "participant", e.head.id)
            succ.setdefault(key, set()).add(e.tail.id)
    expected: dict[str, set[str]] = {}
    for p in inst.participants:
        seen: set[str] = set()
        frontier = list(succ.get(("participant", p.id), ()))
        while frontier:
            v = frontier.pop()
            if v in seen:
                continue
            seen.add(v)
            frontier.extend(succ.get(("vm", v), ()))
        expected[p.id] = seen
    assert carried_streams(plan) == expected


@given(instances(), st.data())
@settings(max_examples=40, deadline=None)
def test_network_cost_never_rises_with_more_compression(inst, data):
    try:
        plan = cram_allocate(inst)
    except InfeasibleError:
        assume(False)
    idx = data.draw(st.integers(0, len(plan.edges) - 1))
    bump = data.draw(st.floats(min_value=0.01, max_value=0.95, allow_nan=False))
    edges = list(plan.edges)
    e = edges[idx]
    new_rate = min(0.95, e.compression_rate + bump)
    edges[idx] = StreamEdge(e.head, e.tail, compression_rate=new_rate)
    squeezed = Plan(
        vms=plan.vms,
        edges=tuple(edges),
        per_participant_delay=plan.per_participant_delay,
        feasible=True,
    )
    assert eval_network_cost(squeezed, inst) <= eval_network_cost(plan, inst) + 1e-12


@given(instances())
@settings(max_examples=30, deadline=None)
def test_validate_is_pure_and_does_not_mutate(inst):
    try:
        plan = cram_allocate(inst)
    except InfeasibleError:
        assume(False)
    before = dumps_plan(plan)
    first = validate_plan(plan, inst)
    second = validate_plan(plan, inst)
    assert first == second
    assert dumps_plan(plan) == before
