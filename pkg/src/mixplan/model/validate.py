"""Plan validation: every structural and resource constraint as a flat list
of violations with stable, machine-readable family codes.

A valid plan satisfies, in this order:

  placement-integrity       all ids and server references resolve
  participant-out-degree    each participant sends exactly one stream
  participant-in-degree     each participant receives exactly one stream
  participant-direct-link   participants never talk to each other directly
  compressor-chain          compressors never feed compressors
  compressor-flow-balance   a compressor relays streams 1:1 (in = out)
  vm-stream-support         every VM both receives and sends something, and
                            its recorded input_count matches the graph
  mixer-coverage            at least one mixer aggregates every participant
  final-stream-coverage     what a participant receives reflects everyone
  server-capacity           per-server memory within capacity
  compression-source        only compressors emit compressed edges
  compression-rate-cap      rates stay within the configured maximum
  delay-structure           stream paths are acyclic and connected
  delay-bound               end-to-end delays within the QoS limit

Delay families evaluate under `delay_model` ("ilp" default, "algorithm1"
for plans produced by the heuristic, whose bookkeeping differs; the two
models are intentionally not unified).
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable

from ..errors import StructuralError
from .metrics import eval_delays, stream_arrival_times
from .types import COMPRESSOR, EPS, MIXER, Instance, Plan, Violation

ALL_FAMILIES = (
    "placement-integrity",
    "participant-out-degree",
    "participant-in-degree",
    "participant-direct-link",
    "compressor-chain",
    "compressor-flow-balance",
    "vm-stream-support",
    "mixer-coverage",
    "final-stream-coverage",
    "server-capacity",
    "compression-source",
    "compression-rate-cap",
    "delay-structure",
    "delay-bound",
)

# the purely graph-shaped subset, usable even when delays are out of scope
STRUCTURAL_FAMILIES = tuple(f for f in ALL_FAMILIES if not f.startswith("delay-"))


def carried_streams(plan: Plan) -> dict[str, set[str]]:
    """For each participant id, the set of VM ids its stream reaches,
    following edges transitively (a mixer's output carries every stream
    that entered it)."""
    out_edges: dict[str, list[str]] = defaultdict(list)
    first_hop: dict[str, list[str]] = defaultdict(list)
    for e in plan.edges:
        if e.tail.is_vm:
            if e.head.is_vm:
                out_edges[e.head.id].append(e.tail.id)
            else:
                first_hop[e.head.id].append(e.tail.id)
    known = {vm.id for vm in plan.vms}
    reach: dict[str, set[str]] = {}
    for u, hops in first_hop.items():
        seen: set[str] = set()
        stack = [v for v in hops if v in known]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(w for w in out_edges.get(v, []) if w in known)
        reach[u] = seen
    return reach


def validate_plan(
    plan: Plan,
    instance: Instance,
    delay_model: str = "ilp",
    families: Iterable[str] | None = None,
) -> list[Violation]:
    """Check `plan` against every constraint family (or the given subset).
    Returns an empty list iff the plan is valid; never raises for plan
    defects, only for unknown family names."""
    selected = tuple(families) if families is not None else ALL_FAMILIES
    unknown = [f for f in selected if f not in ALL_FAMILIES]
    if unknown:
        raise ValueError(f"unknown violation families: {unknown}")
    active = set(selected)
    found: list[Violation] = []

    def emit(code: str, subject: str, message: str) -> None:
        if code in active:
            found.append(Violation(code=code, subject=subject, message=message))

    vm_ids = {vm.id for vm in plan.vms}
    kind = {vm.id: vm.kind for vm in plan.vms}
    participant_ids = set(instance.participant_ids)

    integrity_ok = True
    for vm in plan.vms:
        if not (0 <= vm.server < len(instance.servers)):
            emit("placement-integrity", vm.id, f"vm {vm.id!r} placed on nonexistent server #{vm.server}")
            integrity_ok = False
    for i, e in enumerate(plan.edges):
        for end in (e.head, e.tail):
            if end.is_vm and end.id not in vm_ids:
                emit("placement-integrity", end.id, f"edge #{i} references unknown vm {end.id!r}")
                integrity_ok = False
            if not end.is_vm and end.id not in participant_ids:
                emit("placement-integrity", end.id, f"edge #{i} references unknown participant {end.id!r}")
                integrity_ok = False

    out_count: dict[str, int] = defaultdict(int)
    in_count: dict[str, int] = defaultdict(int)
    vm_in: dict[str, int] = {v: 0 for v in vm_ids}
    vm_out: dict[str, int] = {v: 0 for v in vm_ids}
    for e in plan.edges:
        if e.head.is_vm:
            if e.head.id in vm_out:
                vm_out[e.head.id] += 1
        else:
            out_count[e.head.id] += 1
        if e.tail.is_vm:
            if e.tail.id in vm_in:
                vm_in[e.tail.id] += 1
        else:
            in_count[e.tail.id] += 1

    for u in instance.participant_ids:
        if out_count[u] != 1:
            emit("participant-out-degree", u, f"participant {u!r} has {out_count[u]} outbound streams, wants exactly 1")
        if in_count[u] != 1:
            emit("participant-in-degree", u, f"participant {u!r} has {in_count[u]} inbound streams, wants exactly 1")

    for i, e in enumerate(plan.edges):
        if not e.head.is_vm and not e.tail.is_vm:
            emit(
                "participant-direct-link",
                f"{e.head.id}->{e.tail.id}",
                f"edge #{i} links participants {e.head.id!r} and {e.tail.id!r} directly",
            )
        if e.head.is_vm and e.tail.is_vm:
            if kind.get(e.head.id) == COMPRESSOR and kind.get(e.tail.id) == COMPRESSOR:
                emit(
                    "compressor-chain",
                    f"{e.head.id}->{e.tail.id}",
                    f"edge #{i} chains compressors {e.head.id!r} and {e.tail.id!r}",
                )

    for vm in plan.vms:
        if vm.kind == COMPRESSOR and vm_in[vm.id] != vm_out[vm.id]:
            emit(
                "compressor-flow-balance",
                vm.id,
                f"compressor {vm.id!r} takes {vm_in[vm.id]} streams but emits {vm_out[vm.id]}",
            )

    for vm in plan.vms:
        if vm_in[vm.id] < 1:
            emit("vm-stream-support", vm.id, f"vm {vm.id!r} receives no stream")
        if vm_out[vm.id] < 1:
            emit("vm-stream-support", vm.id, f"vm {vm.id!r} sends no stream")
        if vm.input_count != vm_in[vm.id]:
            emit(
                "vm-stream-support",
                vm.id,
                f"vm {vm.id!r} records input_count={vm.input_count} but has {vm_in[vm.id]} inbound edges",
            )

    reach = carried_streams(plan)
    all_users = set(instance.participant_ids)
    full_mixers = [
        vm.id
        for vm in plan.vms
        if vm.kind == MIXER and all(vm.id in reach.get(u, ()) for u in all_users)
    ]
    if not full_mixers:
        emit("mixer-coverage", "plan", "no mixer aggregates the streams of all participants")

    final_src: dict[str, str] = {}
    for e in plan.edges:
        if not e.tail.is_vm and e.head.is_vm and in_count[e.tail.id] == 1:
            final_src[e.tail.id] = e.head.id
    for u in instance.participant_ids:
        v = final_src.get(u)
        if v is None:
            continue  # degree family already covers it
        missing = sorted(w for w in all_users if v not in reach.get(w, ()))
        if missing:
            emit(
                "final-stream-coverage",
                u,
                f"participant {u!r} receives from {v!r} which lacks streams of {', '.join(missing)}",
            )

    if integrity_ok:
        per_server_mb: dict[int, float] = defaultdict(float)
        for vm in plan.vms:
            per_server_mb[vm.server] += instance.media.vm_mb(vm_in[vm.id])
        for idx, used in sorted(per_server_mb.items()):
            cap = instance.servers[idx].capacity
            if used > cap + EPS:
                emit(
                    "server-capacity",
                    instance.servers[idx].site,
                    f"server #{idx} ({instance.servers[idx].site}) holds {used:g} MB over its {cap:g} MB capacity",
                )

    for i, e in enumerate(plan.edges):
        if e.compression_rate > EPS and not (e.head.is_vm and kind.get(e.head.id) == COMPRESSOR):
            emit(
                "compression-source",
                f"edge#{i}",
                f"edge #{i} carries rate {e.compression_rate:g} but its sender is not a compressor",
            )
        if e.compression_rate > instance.media.max_compression_rate + EPS:
            emit(
                "compression-rate-cap",
                f"edge#{i}",
                f"edge #{i} rate {e.compression_rate:g} exceeds the cap {instance.media.max_compression_rate:g}",
            )

    wants_delay = bool(active & {"delay-structure", "delay-bound"})
    if integrity_ok and wants_delay:
        t_eps = instance.qos.max_delay
        try:
            delays = eval_delays(plan, instance, delay_model=delay_model)
        except StructuralError as exc:
            emit("delay-structure", "plan", str(exc))
        else:
            for u in instance.participant_ids:
                d = delays.get(u)
                if d is not None and d > t_eps + EPS:
                    emit(
                        "delay-bound",
                        u,
                        f"participant {u!r} delay {d:g} ms exceeds the {t_eps:g} ms bound",
                    )
            if delay_model == "ilp":
                # every stream must also be ready at every VM it crosses in time
                try:
                    arrivals = stream_arrival_times(plan, instance)
                except StructuralError:
                    pass  # already reported above
                else:
                    for u in sorted(arrivals):
                        for v in sorted(arrivals[u]):
                            if arrivals[u][v] > t_eps + EPS:
                                emit(
                                    "delay-bound",
                                    f"{u}@{v}",
                                    f"stream of {u!r} becomes ready at {v!r} after {arrivals[u][v]:g} ms, over the {t_eps:g} ms bound",
                                )
    return found
