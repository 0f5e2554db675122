"""Cost and delay evaluation of plans.

Two delay models coexist on purpose (they are NOT equivalent and are kept
separate deliberately):

* "ilp"        - per-stream recursion: a stream arriving at VM v pays the
                 transmission time of the edge plus the VM's handling time
                 for its full in-degree; a participant's delay is the worst
                 arrival of any source stream at its final VM plus the
                 return leg.
* "algorithm1" - the planner's own server-level bookkeeping: a per-server
                 mix time combining the worst mixer load, the local mixer
                 count and a join term for the number of mixer-hosting
                 servers, plus round-trip transmission, with compressed
                 paths capped at the QoS bound.

Validators default to "ilp"; plans built by the heuristic store
"algorithm1" delays.
"""

from __future__ import annotations

from collections import defaultdict

from ..errors import StructuralError
from .types import (
    COMPRESSOR,
    EPS,
    MIXER,
    Endpoint,
    Instance,
    Plan,
    PlanMetrics,
)

PER_MB = "per-mb"
PER_VM = "per-vm"

DELAY_MODELS = ("ilp", "algorithm1")


def endpoint_site(plan: Plan, instance: Instance, e: Endpoint) -> str:
    if e.is_vm:
        vm = plan.vm_by_id(e.id)
        if not (0 <= vm.server < len(instance.servers)):
            raise StructuralError(f"vm {vm.id!r} references server #{vm.server} which does not exist")
        return instance.servers[vm.server].site
    return instance.participant(e.id).site


def eval_server_cost(plan: Plan, instance: Instance, cost_mode: str = PER_MB) -> float:
    """Dollar cost of hosting the plan's VMs.

    per-mb (default): every VM is billed (overhead + per-stream memory for
    its input_count) times the host's cost_per_unit.
    per-vm: cost_per_unit is read as a flat price per VM, the literal
    reading of the objective's first term.
    """
    total = 0.0
    for vm in plan.vms:
        if not (0 <= vm.server < len(instance.servers)):
            raise StructuralError(f"vm {vm.id!r} references server #{vm.server} which does not exist")
        srv = instance.servers[vm.server]
        if cost_mode == PER_MB:
            total += instance.media.vm_mb(vm.input_count) * srv.cost_per_unit
        elif cost_mode == PER_VM:
            total += srv.cost_per_unit
        else:
            raise ValueError(f"unknown cost_mode {cost_mode!r}")
    return total


def eval_network_cost(plan: Plan, instance: Instance) -> float:
    """Dollar cost of all stream transmissions; an edge leaving a
    compressor with rate r is billed at (1 - r) of the base site cost."""
    total = 0.0
    for e in plan.edges:
        a = endpoint_site(plan, instance, e.head)
        b = endpoint_site(plan, instance, e.tail)
        total += instance.network.p(a, b) * (1.0 - e.compression_rate)
    return total


def _effective_time(instance: Instance, a_site: str, b_site: str, rate: float) -> float:
    return instance.network.t(a_site, b_site) * (1.0 - rate)


def stream_arrival_times(plan: Plan, instance: Instance) -> dict[str, dict[str, float]]:
    """arrival[u][v]: worst-case time for participant u's stream to be ready
    at VM v, handling time at v included.  Only VMs actually carrying u's
    stream appear.  Raises StructuralError on a cycle along any carrying
    path."""
    indeg = plan.in_degree()
    site_of_vm = {
        vm.id: endpoint_site(plan, instance, Endpoint.vm(vm.id)) for vm in plan.vms
    }
    out_edges: dict[str, list] = defaultdict(list)  # vm id -> vm-to-vm edges
    in_edges: dict[str, list] = defaultdict(list)  # vm id -> all inbound edges
    src_targets: dict[str, list] = defaultdict(list)  # participant -> first-hop vms
    for e in plan.edges:
        if e.tail.is_vm:
            in_edges[e.tail.id].append(e)
            if e.head.is_vm:
                out_edges[e.head.id].append(e)
            else:
                src_targets[e.head.id].append(e.tail.id)

    out: dict[str, dict[str, float]] = {}
    for p in instance.participants:
        u = p.id
        # VMs carrying u's own stream
        reach: set[str] = set()
        stack = list(src_targets.get(u, []))
        while stack:
            v = stack.pop()
            if v in reach:
                continue
            reach.add(v)
            for e in out_edges.get(v, []):
                stack.append(e.tail.id)

        arrival: dict[str, float] = {}
        state: dict[str, int] = {}  # 0 visiting, 1 done

        def visit(v: str) -> float:
            st = state.get(v)
            if st == 1:
                return arrival[v]
            if st == 0:
                raise StructuralError(f"cycle through vm {v!r} on participant {u!r}'s stream path")
            state[v] = 0
            best = 0.0
            for e in in_edges.get(v, []):
                if not e.head.is_vm and e.head.id == u:
                    t = _effective_time(instance, p.site, site_of_vm[v], e.compression_rate)
                elif e.head.is_vm and e.head.id in reach:
                    t = visit(e.head.id) + _effective_time(
                        instance, site_of_vm[e.head.id], site_of_vm[v], e.compression_rate
                    )
                else:
                    continue  # this inbound edge does not carry u's stream
                best = max(best, t)
            arrival[v] = instance.media.mix_ms(indeg.get(v, 0)) + best
            state[v] = 1
            return arrival[v]

        for v in sorted(reach):
            visit(v)
        out[u] = arrival
    return out


def _final_edge(plan: Plan, u: str):
    found = None
    for e in plan.edges:
        if not e.tail.is_vm and e.tail.id == u:
            if found is not None:
                raise StructuralError(f"participant {u!r} has more than one inbound edge")
            found = e
    if found is None:
        raise StructuralError(f"participant {u!r} is disconnected: no inbound edge")
    return found


def _delays_recursive(plan: Plan, instance: Instance) -> dict[str, float]:
    arrivals = stream_arrival_times(plan, instance)
    delays: dict[str, float] = {}
    for p in instance.participants:
        e = _final_edge(plan, p.id)
        if not e.head.is_vm:
            raise StructuralError(f"participant {p.id!r} receives directly from a participant")
        r = e.head.id
        worst = 0.0
        for u in instance.participant_ids:
            t = arrivals.get(u, {}).get(r)
            if t is not None:
                worst = max(worst, t)
        back = _effective_time(instance, endpoint_site(plan, instance, e.head), p.site, e.compression_rate)
        delays[p.id] = worst + back
    return delays


def _delays_planner(plan: Plan, instance: Instance) -> dict[str, float]:
    media = instance.media
    t_eps = instance.qos.max_delay
    mixers = [vm for vm in plan.vms if vm.kind == MIXER]
    if not mixers:
        raise StructuralError("plan has no mixer, participant delays are undefined")
    per_server: dict[int, int] = defaultdict(int)
    for vm in mixers:
        per_server[vm.server] += 1
    used = sorted(per_server)

    kind = {vm.id: vm.kind for vm in plan.vms}
    server_of = {vm.id: vm.server for vm in plan.vms}
    # participant-origin load per mixer: direct participant edges plus
    # forwards from compressors that take at least one participant stream
    comp_has_user_in = {
        vm.id: any(not e.head.is_vm and e.tail.is_vm and e.tail.id == vm.id for e in plan.edges)
        for vm in plan.vms
        if vm.kind == COMPRESSOR
    }
    load: dict[str, int] = {vm.id: 0 for vm in mixers}
    for e in plan.edges:
        if e.tail.is_vm and kind.get(e.tail.id) == MIXER:
            if not e.head.is_vm:
                load[e.tail.id] += 1
            elif kind.get(e.head.id) == COMPRESSOR and comp_has_user_in.get(e.head.id):
                load[e.tail.id] += 1
    worst_load = max(load.values()) if load else 0

    # compressor bridges between mixer-hosting servers
    bridged: set[tuple[int, int]] = set()
    comp_in_from: dict[str, set[int]] = defaultdict(set)
    for e in plan.edges:
        if e.head.is_vm and e.tail.is_vm:
            if kind[e.head.id] == MIXER and kind[e.tail.id] == COMPRESSOR:
                comp_in_from[e.tail.id].add(server_of[e.head.id])
    for e in plan.edges:
        if e.head.is_vm and e.tail.is_vm:
            if kind[e.head.id] == COMPRESSOR and kind[e.tail.id] == MIXER:
                for j in comp_in_from.get(e.head.id, ()):
                    bridged.add((j, server_of[e.tail.id]))

    sites = {j: instance.servers[j].site for j in used}
    mix_time: dict[int, float] = {}
    for j in used:
        base = media.mix_ms(worst_load) + media.mix_ms(per_server[j]) + media.mix_ms(len(used))
        worst = 0.0
        for n in used:
            pair = base + instance.network.t(sites[j], sites[n])
            if j != n and (j, n) in bridged:
                pair = min(pair, t_eps)
            worst = max(worst, pair)
        mix_time[j] = worst

    delays: dict[str, float] = {}
    for p in instance.participants:
        fwd = None
        for e in plan.edges:
            if not e.head.is_vm and e.head.id == p.id:
                fwd = e
                break
        if fwd is None or not fwd.tail.is_vm:
            raise StructuralError(f"participant {p.id!r} has no outbound stream")
        target = fwd.tail.id
        if kind[target] == MIXER:
            s = server_of[target]
            delays[p.id] = mix_time[s] + 2.0 * instance.network.t(p.site, instance.servers[s].site)
        else:
            # compressed path: locate the mixer this compressor forwards to
            mix_target = None
            for e in plan.edges:
                if e.head.is_vm and e.head.id == target and e.tail.is_vm and kind[e.tail.id] == MIXER:
                    mix_target = e.tail.id
                    break
            if mix_target is None:
                raise StructuralError(f"compressor {target!r} forwards to no mixer")
            s = server_of[mix_target]
            raw = mix_time[s] + 2.0 * instance.network.t(p.site, instance.servers[s].site)
            delays[p.id] = min(raw, t_eps)
    return delays


def eval_delays(plan: Plan, instance: Instance, delay_model: str = "ilp") -> dict[str, float]:
    """End-to-end delay in ms per participant id under the chosen model."""
    if delay_model == "ilp":
        return _delays_recursive(plan, instance)
    if delay_model == "algorithm1":
        return _delays_planner(plan, instance)
    raise ValueError(f"unknown delay_model {delay_model!r}")


def compression_rates(plan: Plan) -> tuple[float, ...]:
    comp_ids = {vm.id for vm in plan.vms if vm.kind == COMPRESSOR}
    return tuple(e.compression_rate for e in plan.edges if e.head.is_vm and e.head.id in comp_ids)


def allocated_memory(plan: Plan, instance: Instance) -> float:
    return sum(instance.media.vm_mb(vm.input_count) for vm in plan.vms)


def metrics(
    plan: Plan,
    instance: Instance,
    delay_model: str = "stored",
    cost_mode: str = PER_MB,
) -> PlanMetrics:
    """Bundle all plan quality measures.

    delay_model "stored" trusts the delays the solver recorded in the plan;
    "ilp" or "algorithm1" recompute them from the stream graph.
    """
    server = eval_server_cost(plan, instance, cost_mode)
    network = eval_network_cost(plan, instance)
    if delay_model == "stored":
        delays = dict(plan.per_participant_delay)
    else:
        delays = eval_delays(plan, instance, delay_model)
    return PlanMetrics(
        server_cost=server,
        network_cost=network,
        total_cost=server + network,
        max_delay=max(delays.values()) if delays else 0.0,
        compression_rates=compression_rates(plan),
        vm_count=len(plan.vms),
        allocated_memory=allocated_memory(plan, instance),
    )
