"""Greedy mixer/compressor allocation.

The pipeline runs four phases:

1. min_mixers          - how many mixers are needed at all
2. dsort/place_mixers  - pack them onto the servers closest to the crowd
3. inter_mixer_compress- wire the mixer-to-mixer exchange, inserting
                         compressors where a server pair misses the bound
4. assign_participants - attach each participant to the nearest underfull
                         mixer, compressing the path when the round trip
                         misses the bound

Resource accounting: each mixer prepays vm_overhead + per-stream memory for
max_user streams when placed, and participant streams later consume that
prepaid budget rather than charging the server twice.  Every other inbound
stream (local mixer joins, inter-server exchange, compressor inputs and the
compressed return leg) is charged to its receiving server as it is wired,
so a finished plan satisfies the per-server capacity check exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InfeasibleError
from .model.types import (
    COMPRESSOR,
    EPS,
    MIXER,
    Endpoint,
    Instance,
    NetworkMatrix,
    Participant,
    Plan,
    ServerSpec,
    StreamEdge,
    VmInstance,
)

__all__ = [
    "AllocationState",
    "CompressOutcome",
    "acs",
    "assign_participants",
    "compress",
    "cram_allocate",
    "dsort",
    "inter_mixer_compress",
    "min_mixers",
    "place_mixers",
]


@dataclass
class AllocationState:
    """Mutable working state threaded through the phases of one run."""

    instance: Instance
    remaining_capacity: dict[int, float]
    mixers_per_server: dict[int, list[int]]  # per-mixer participant-stream loads
    compressors_per_server: dict[int, list[int]]  # per-compressor forward loads
    mix_time_per_server: dict[int, float] = field(default_factory=dict)
    max_user: int = 0
    min_mixer: int = 0
    order: list[int] = field(default_factory=list)  # dsort order, server indices
    used_servers: list[int] = field(default_factory=list)
    hub: dict[int, str] = field(default_factory=dict)  # server -> aggregating mixer
    mixer_vm_ids: dict[int, list[str]] = field(default_factory=dict)
    comp_vm_ids: dict[int, list[str]] = field(default_factory=dict)
    vm_records: list[tuple[str, str, int]] = field(default_factory=list)
    edges: list[StreamEdge] = field(default_factory=list)

    @classmethod
    def fresh(cls, instance: Instance) -> "AllocationState":
        n = len(instance.servers)
        return cls(
            instance=instance,
            remaining_capacity={i: instance.servers[i].capacity for i in range(n)},
            mixers_per_server={i: [] for i in range(n)},
            compressors_per_server={i: [] for i in range(n)},
            mixer_vm_ids={i: [] for i in range(n)},
            comp_vm_ids={i: [] for i in range(n)},
        )

    def site(self, server: int) -> str:
        return self.instance.servers[server].site

    def claim(self, server: int, mb: float, phase: str, what: str) -> None:
        if self.remaining_capacity[server] < mb - EPS:
            raise InfeasibleError(
                phase,
                f"server {self.site(server)!r} lacks {mb:g} MB for {what}",
            )
        self.remaining_capacity[server] -= mb


@dataclass(frozen=True)
class CompressOutcome:
    """Result of one compress() call, with enough arithmetic context to
    re-verify the chosen rate afterwards."""

    chosen_server: int
    new_vm_created: bool
    real_rate: float
    edges_added: tuple[StreamEdge, ...]
    vm_id: str
    load_after: int
    sender_site: str
    dest_site: str
    shave_ms: float  # t: how much the uncompressed path overshoots
    budget_ms: float  # T[sender][dest] - t
    hop_in_ms: float  # sender -> chosen server
    hop_out_ms: float  # chosen server -> destination
    handling_ms: float  # compressor handling time used in the deadline


def min_mixers(instance: Instance) -> tuple[int, int, float]:
    """Smallest mixer count whose handling time beats the QoS bound.

    Returns (min_mixer, max_user, handling_ms).  Walks mixer counts upward;
    gives up as infeasible when the combined handling time starts rising
    again before ever satisfying the bound, or when the count reaches
    |U| - 1 without success.  The capacity side checks the roomiest server,
    placement does the real packing later.
    """
    n = len(instance.participants)
    media = instance.media
    t_eps = instance.qos.max_delay
    cap = instance.max_server_capacity()
    prev: float | None = None
    m = 0
    while True:
        m += 1
        max_user = math.ceil(n / m)
        handling = media.mix_ms(max_user) + media.mix_ms(m)
        if prev is not None and prev < handling:
            raise InfeasibleError(
                "min_mixers",
                f"handling time rises {prev:g} -> {handling:g} ms before meeting the bound",
                last_handling_ms=handling,
            )
        if handling < t_eps and media.vm_mb(max_user) <= cap + EPS:
            return m, max_user, handling
        if m >= n - 1:
            raise InfeasibleError(
                "min_mixers",
                f"no mixer count up to {m} satisfies the {t_eps:g} ms bound",
                last_handling_ms=handling,
            )
        prev = handling


def dsort(
    servers: tuple[ServerSpec, ...],
    participants: tuple[Participant, ...],
    network: NetworkMatrix,
) -> list[int]:
    """Server indices ordered by total distance to the participant group,
    closest first; ties keep the original order."""
    totals = []
    for i, s in enumerate(servers):
        totals.append((sum(network.t(s.site, p.site) for p in participants), i))
    totals.sort(key=lambda pair: (pair[0], pair[1]))
    return [i for _, i in totals]


def place_mixers(state: AllocationState, instance: Instance, order: list[int]) -> AllocationState:
    """Pack min_mixer mixers onto servers in the given order, reserving the
    full max_user stream budget for each."""
    media = instance.media
    reserve = media.vm_mb(state.max_user)
    placed = 0
    for s in order:
        while placed < state.min_mixer and state.remaining_capacity[s] >= reserve - EPS:
            state.remaining_capacity[s] -= reserve
            vm_id = f"m{placed}"
            state.mixers_per_server[s].append(0)
            state.mixer_vm_ids[s].append(vm_id)
            state.vm_records.append((vm_id, MIXER, s))
            placed += 1
        if placed == state.min_mixer:
            break
    if placed < state.min_mixer:
        raise InfeasibleError(
            "place_mixers",
            f"only {placed} of {state.min_mixer} mixers fit within server capacity",
        )
    state.used_servers = [s for s in order if state.mixers_per_server[s]]
    state.hub = {s: state.mixer_vm_ids[s][0] for s in state.used_servers}
    return state


def compress(
    sender: Participant | int,
    dest: int,
    t: float,
    state: AllocationState,
    forward_to_vm: str | None = None,
    round_trip: bool = False,
    trace_sink: list | None = None,
) -> CompressOutcome:
    """Create or reuse a compressor so the sender's stream reaches `dest`
    t ms sooner than the raw path would.

    sender is a Participant or a server index (whose hub mixer is then the
    stream source).  forward_to_vm overrides the forward target (default:
    dest's hub).  round_trip additionally wires the compressed return leg
    hub -> compressor -> participant.  t may be 0 when the uncompressed
    path hits the bound exactly.

    Candidate hosts must sit strictly closer to the sender than the slack
    left after the shave and one-stream handling; each is costed as the
    network hop plus the memory bill of either a fresh VM or joining its
    least-loaded compressor, and the cheapest candidate (first on ties)
    wins.
    """
    inst = state.instance
    media = inst.media
    net = inst.network
    if isinstance(sender, Participant):
        a_site = sender.site
        forward_from = Endpoint.participant(sender.id)
    else:
        a_site = state.site(sender)
        forward_from = Endpoint.vm(state.hub[sender])
    b_site = state.site(dest)
    t_ab = net.t(a_site, b_site)
    budget = t_ab - t
    max_distance = budget - media.mix_ms(1)
    cr = 1.0 - media.max_compression_rate  # residual time fraction at the cap

    in_streams = 2 if round_trip else 1
    charge_reuse = media.stream_mb(in_streams)
    charge_new = media.vm_overhead + media.stream_mb(in_streams)

    best: tuple[float, int, bool] | None = None  # (cost, server, reuse)
    any_candidate = False
    for s in range(len(inst.servers)):
        hop_in = net.t(a_site, state.site(s))
        if not (hop_in < max_distance):
            continue
        if not (state.remaining_capacity[s] > media.stream_mb(1)):
            continue
        any_candidate = True
        hop_out = net.t(state.site(s), b_site)
        reach = net.p(a_site, state.site(s))
        unit = inst.servers[s].cost_per_unit
        loads = state.compressors_per_server[s]
        if loads:
            min_load = min(loads)
            fits = media.mix_ms(min_load + 1) + hop_in + hop_out * cr <= budget + EPS
            if fits and state.remaining_capacity[s] >= charge_reuse - EPS:
                cost = reach + media.stream_mb(1) * unit
                if best is None or cost < best[0] - EPS:
                    best = (cost, s, True)
        fits_new = media.mix_ms(1) + hop_in + hop_out * cr <= budget + EPS
        if fits_new and state.remaining_capacity[s] >= charge_new - EPS:
            cost = reach + (media.vm_overhead + media.stream_mb(1)) * unit
            if best is None or cost < best[0] - EPS:
                best = (cost, s, False)

    if best is None:
        detail = (
            "no server sits close enough to host a compressor"
            if not any_candidate
            else "no compressor placement meets the deadline within the rate cap and capacity"
        )
        raise InfeasibleError("compress", detail + f" (shave {t:g} ms on {a_site} -> {b_site})")

    _, chosen, reuse = best
    loads = state.compressors_per_server[chosen]
    if reuse:
        state.claim(chosen, charge_reuse, "compress", "an added compressor stream")
        idx = min(range(len(loads)), key=lambda i: loads[i])
        vm_id = state.comp_vm_ids[chosen][idx]
        new_vm = False
    else:
        state.claim(chosen, charge_new, "compress", "a new compressor")
        vm_id = f"c{sum(1 for _, kind, _ in state.vm_records if kind == COMPRESSOR)}"
        state.vm_records.append((vm_id, COMPRESSOR, chosen))
        loads.append(0)
        state.comp_vm_ids[chosen].append(vm_id)
        idx = len(loads) - 1
        new_vm = True

    load_before = loads[idx]
    handling = media.mix_ms(load_before + 1)
    hop_in = net.t(a_site, state.site(chosen))
    hop_out = net.t(state.site(chosen), b_site)
    new_t = budget - hop_in - handling
    if hop_out <= EPS:
        real_rate = 0.0
    else:
        real_rate = max(0.0, (hop_out - new_t) / hop_out)
    assert real_rate <= media.max_compression_rate + 1e-9
    loads[idx] += 1

    if forward_to_vm is None:
        forward_to_vm = state.hub[dest]
    edges = [
        StreamEdge(head=forward_from, tail=Endpoint.vm(vm_id)),
        StreamEdge(head=Endpoint.vm(vm_id), tail=Endpoint.vm(forward_to_vm), compression_rate=real_rate),
    ]
    if round_trip:
        if not isinstance(sender, Participant):
            raise ValueError("round_trip compression only applies to participant senders")
        edges.append(StreamEdge(head=Endpoint.vm(state.hub[dest]), tail=Endpoint.vm(vm_id)))
        edges.append(
            StreamEdge(head=Endpoint.vm(vm_id), tail=Endpoint.participant(sender.id), compression_rate=real_rate)
        )

    outcome = CompressOutcome(
        chosen_server=chosen,
        new_vm_created=new_vm,
        real_rate=real_rate,
        edges_added=tuple(edges),
        vm_id=vm_id,
        load_after=loads[idx],
        sender_site=a_site,
        dest_site=b_site,
        shave_ms=t,
        budget_ms=budget,
        hop_in_ms=hop_in,
        hop_out_ms=hop_out,
        handling_ms=handling,
    )
    if trace_sink is not None:
        trace_sink.append(outcome)
    state.edges.extend(edges)
    return outcome


def inter_mixer_compress(
    state: AllocationState,
    instance: Instance,
    trace_sink: list | None = None,
) -> AllocationState:
    """Wire the mixer exchange and record per-server mix times.

    Local mixers feed their server's hub.  For every ordered pair of
    mixer-hosting servers the exchange either goes hub to hub directly or,
    when the pair's total time reaches the bound, through a compressor that
    caps the pair at the bound.
    """
    media = instance.media
    net = instance.network
    t_eps = instance.qos.max_delay
    used = state.used_servers
    k = len(used)

    for s in used:
        hub = state.hub[s]
        for vm_id in state.mixer_vm_ids[s][1:]:
            state.claim(s, media.stream_mb(1), "inter_mixer_compress", "the local mixer join stream")
            state.edges.append(StreamEdge(head=Endpoint.vm(vm_id), tail=Endpoint.vm(hub)))

    for j in used:
        base = (
            media.mix_ms(state.max_user)
            + media.mix_ms(len(state.mixers_per_server[j]))
            + media.mix_ms(k)
        )
        worst = 0.0
        for n in used:
            total = base + net.t(state.site(j), state.site(n))
            if j != n:
                if total >= t_eps:
                    compress(j, n, total - t_eps, state, trace_sink=trace_sink)
                    state.claim(n, media.stream_mb(1), "inter_mixer_compress", "the compressed exchange stream")
                    total = t_eps
                else:
                    state.claim(n, media.stream_mb(1), "inter_mixer_compress", "the exchange stream")
                    state.edges.append(StreamEdge(head=Endpoint.vm(state.hub[j]), tail=Endpoint.vm(state.hub[n])))
            worst = max(worst, total)
        state.mix_time_per_server[j] = worst
    return state


def acs(participant: Participant, state: AllocationState) -> tuple[int, int]:
    """Nearest server still holding an underfull mixer; returns the server
    index and the chosen mixer's position there (least-loaded, first on
    ties).  The chosen mixer's load is incremented."""
    best: tuple[float, int] | None = None
    for s in state.used_servers:
        if not any(load < state.max_user for load in state.mixers_per_server[s]):
            continue
        d = state.instance.network.t(participant.site, state.site(s))
        if best is None or d < best[0] - EPS:
            best = (d, s)
    if best is None:
        raise InfeasibleError("acs", f"every mixer is already at {state.max_user} streams")
    s = best[1]
    loads = state.mixers_per_server[s]
    candidates = [i for i in range(len(loads)) if loads[i] < state.max_user]
    idx = min(candidates, key=lambda i: loads[i])
    loads[idx] += 1
    return s, idx


def assign_participants(
    state: AllocationState,
    instance: Instance,
    trace_sink: list | None = None,
) -> Plan:
    """Attach every participant, compressing paths that overshoot the
    bound, and materialize the final Plan."""
    net = instance.network
    t_eps = instance.qos.max_delay
    delays: dict[str, float] = {}
    for p in instance.participants:
        s, mixer_idx = acs(p, state)
        mixer_id = state.mixer_vm_ids[s][mixer_idx]
        total = state.mix_time_per_server[s] + 2.0 * net.t(p.site, state.site(s))
        if total <= t_eps + EPS:
            state.edges.append(StreamEdge(head=Endpoint.participant(p.id), tail=Endpoint.vm(mixer_id)))
            state.edges.append(StreamEdge(head=Endpoint.vm(state.hub[s]), tail=Endpoint.participant(p.id)))
            delays[p.id] = total
        else:
            compress(
                p,
                s,
                total - t_eps,
                state,
                forward_to_vm=mixer_id,
                round_trip=True,
                trace_sink=trace_sink,
            )
            delays[p.id] = t_eps

    in_deg: dict[str, int] = {vm_id: 0 for vm_id, _, _ in state.vm_records}
    for e in state.edges:
        if e.tail.is_vm:
            in_deg[e.tail.id] += 1
    vms = tuple(
        VmInstance(id=vm_id, kind=kind, server=server, input_count=in_deg[vm_id])
        for vm_id, kind, server in state.vm_records
    )
    return Plan(vms=vms, edges=tuple(state.edges), per_participant_delay=delays, feasible=True)


def cram_allocate(instance: Instance, trace_sink: list | None = None) -> Plan:
    """Run the full pipeline on one instance.

    trace_sink, when given, collects a CompressOutcome per compressor
    decision for later auditing.  Raises InfeasibleError (carrying the
    phase name) when no allocation satisfies the bounds.
    """
    state = AllocationState.fresh(instance)
    state.min_mixer, state.max_user, _ = min_mixers(instance)
    state.order = dsort(instance.servers, instance.participants, instance.network)
    place_mixers(state, instance, state.order)
    inter_mixer_compress(state, instance, trace_sink)
    return assign_participants(state, instance, trace_sink)
