"""Exhaustive optimal allocation for small instances.

Enumerates every simple plan shape (at most one stream edge per ordered
endpoint pair): mixer and compressor placements as server multisets, any
subset of VM-to-VM edges, and one outgoing plus one incoming stream per
participant.  Compressor output edges carry the configured fixed rate,
which is also cost-optimal whenever that rate equals the cap, since a
higher rate never hurts delay and only lowers transmission cost.

Leaves are checked with the full plan validator (recursive delay model),
so the search returns the cheapest plan that the validator accepts.
The enumeration is staged so the delay math lands early: once a shape's
VM-to-VM links are fixed, per-VM direct-input counts are drawn next,
which pins every handling time and therefore every arrival time exactly;
only then are same-site participants (interchangeable, so counted rather
than labeled) assigned to entry VMs, and final streams to sources.
Three things keep the tree small without losing completeness:

* cost lower bounds against the best plan found so far (seeded with a
  few constructive incumbents so pruning bites from the start),
* orderly generation: VMs of the same kind on the same server are
  interchangeable, so each must acquire its first edge in index order,
  and identically wired VMs keep non-increasing direct-input counts,
* monotone structural kills: server footprints and best-case delays
  only worsen as links accumulate, so a partial wiring that already
  overflows a server, strands a site, or cannot merge every stream in
  time is dropped at once.

A node budget caps total effort; exceeding it raises rather than
returning an unproven answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

from ..errors import BoundsExceededError, BudgetExceededError, InfeasibleError
from ..heuristic import cram_allocate
from ..model.metrics import PER_MB, PER_VM, eval_delays, eval_network_cost, eval_server_cost
from ..model.types import (
    COMPRESSOR,
    EPS,
    MIXER,
    Endpoint,
    Instance,
    Plan,
    StreamEdge,
    VmInstance,
)
from ..model.validate import validate_plan

__all__ = ["SearchBounds", "brute_force_optimal"]


@dataclass(frozen=True)
class SearchBounds:
    """Instance-size guards for the exhaustive search.

    max_compressors defaults (None) to 2*|participants| - 1, the most any
    plan can use.  node_budget caps visited search nodes; exceeding it
    raises BudgetExceededError rather than returning an unproven answer.
    """

    max_participants: int = 5
    max_servers: int = 3
    max_compressors: int | None = None
    node_budget: int = 10_000_000


def _edge_sort_key(e: StreamEdge) -> tuple:
    return (e.head.type, e.head.id, e.tail.type, e.tail.id, round(e.compression_rate, 9))


def _is_simple(plan: Plan) -> bool:
    pairs = set()
    for e in plan.edges:
        key = (e.head.type, e.head.id, e.tail.type, e.tail.id)
        if key in pairs:
            return False
        pairs.add(key)
    return True


def brute_force_optimal(
    instance: Instance,
    bounds: SearchBounds | None = None,
    cost_mode: str = PER_MB,
) -> Plan:
    """Cheapest valid plan for the instance, or raise.

    Raises BoundsExceededError when the instance is larger than the
    bounds allow, BudgetExceededError when the node budget runs out, and
    InfeasibleError when the full search finds no valid plan.
    Ties break toward fewer VMs, then the lexicographically smallest edge
    list.
    """
    if bounds is None:
        bounds = SearchBounds()
    if cost_mode not in (PER_MB, PER_VM):
        raise ValueError(f"unknown cost_mode {cost_mode!r}")
    n_users = len(instance.participants)
    n_servers = len(instance.servers)
    if n_users > bounds.max_participants:
        raise BoundsExceededError(
            f"instance has {n_users} participants, search bound is {bounds.max_participants}"
        )
    if n_servers > bounds.max_servers:
        raise BoundsExceededError(
            f"instance has {n_servers} servers, search bound is {bounds.max_servers}"
        )
    max_comps = bounds.max_compressors
    if max_comps is None:
        max_comps = 2 * n_users - 1

    media = instance.media
    net = instance.network
    users = instance.participants
    server_sites = [s.site for s in instance.servers]
    units = [s.cost_per_unit for s in instance.servers]
    caps = [s.capacity for s in instance.servers]
    gamma = min(media.fixed_gamma / 100.0, media.max_compression_rate)
    t_eps = instance.qos.max_delay

    # participants at the same site are interchangeable everywhere below,
    # so streams are assigned to site groups and labeled only at the end
    site_groups: dict[str, list[int]] = {}
    for ui, u in enumerate(users):
        site_groups.setdefault(u.site, []).append(ui)
    gsites = list(site_groups)
    ugroups = [site_groups[s] for s in gsites]
    n_groups = len(ugroups)

    if cost_mode == PER_MB:
        vm_floor = [media.vm_overhead * u for u in units]
        stream_charge = [media.stream_mb(1) * u for u in units]
    else:
        vm_floor = list(units)
        stream_charge = [0.0] * n_servers

    best_cost: float | None = None
    best_key: tuple | None = None
    best_shape: tuple | None = None  # (vm_servers, kinds, edges)
    nodes = 0

    def tick() -> None:
        nonlocal nodes
        nodes += 1
        if nodes > bounds.node_budget:
            raise BudgetExceededError(
                f"search exceeded the node budget of {bounds.node_budget}"
            )

    def consider(vm_servers: tuple[int, ...], kinds: tuple[str, ...], edges: list[StreamEdge]) -> None:
        nonlocal best_cost, best_key, best_shape
        ids = _vm_ids(kinds)
        in_deg = {vid: 0 for vid in ids}
        for e in edges:
            if e.tail.is_vm:
                in_deg[e.tail.id] += 1
        vms = tuple(
            VmInstance(id=ids[i], kind=kinds[i], server=vm_servers[i], input_count=in_deg[ids[i]])
            for i in range(len(ids))
        )
        plan = Plan(vms=vms, edges=tuple(edges), per_participant_delay={}, feasible=True)
        if validate_plan(plan, instance, delay_model="ilp"):
            return
        cost = eval_server_cost(plan, instance, cost_mode) + eval_network_cost(plan, instance)
        key = (len(vms), tuple(_edge_sort_key(e) for e in edges))
        if (
            best_cost is None
            or cost < best_cost - EPS
            or (abs(cost - best_cost) <= EPS and key < best_key)
        ):
            best_cost, best_key, best_shape = cost, key, (vm_servers, kinds, tuple(edges))

    # seed the incumbent with simple-structured plans so pruning bites early
    for seed in _seed_plans(instance):
        if sum(1 for vm in seed.vms if vm.kind == COMPRESSOR) > max_comps:
            continue
        if _is_simple(seed) and not validate_plan(seed, instance, delay_model="ilp"):
            cost = eval_server_cost(seed, instance, cost_mode) + eval_network_cost(seed, instance)
            key = (len(seed.vms), tuple(_edge_sort_key(e) for e in seed.edges))
            if best_cost is None or cost < best_cost - EPS or (abs(cost - best_cost) <= EPS and key < best_key):
                servers = tuple(vm.server for vm in seed.vms)
                kinds = tuple(vm.kind for vm in seed.vms)
                best_cost, best_key, best_shape = cost, key, (servers, kinds, seed.edges)

    for a in range(1, max(2, n_users)):
        for ms in combinations_with_replacement(range(n_servers), a):
            tick()
            for b in range(0, max_comps + 1):
                for cs in combinations_with_replacement(range(n_servers), b):
                    tick()
                    vm_servers = tuple(ms) + tuple(cs)
                    kinds = (MIXER,) * a + (COMPRESSOR,) * b
                    ids = _vm_ids(kinds)
                    n_vm = a + b
                    base = sum(vm_floor[s] for s in vm_servers)

                    out_floor = []
                    in_floor = []
                    for u in users:
                        out_floor.append(
                            min(
                                stream_charge[vm_servers[i]] + net.p(u.site, server_sites[vm_servers[i]])
                                for i in range(n_vm)
                            )
                        )
                        in_floor.append(
                            min(
                                net.p(server_sites[vm_servers[i]], u.site)
                                * ((1.0 - gamma) if kinds[i] == COMPRESSOR else 1.0)
                                for i in range(n_vm)
                            )
                        )
                    out_suffix = _suffix_sums(out_floor)
                    in_suffix = _suffix_sums(in_floor)
                    user_floor = out_suffix[0] + in_suffix[0]
                    if best_cost is not None and base + user_floor > best_cost + EPS:
                        continue

                    rate_of = [gamma if k == COMPRESSOR else 0.0 for k in kinds]
                    site_of = [server_sites[s] for s in vm_servers]
                    mixer_bits = sum(1 << i for i in range(n_vm) if kinds[i] == MIXER)
                    tm1 = media.mix_ms(1)
                    charge_of = [stream_charge[s] for s in vm_servers]

                    # participant edges are decided per site group, so cost and
                    # time lookups are indexed [site group][vm]
                    tg_v = [[net.t(s, site_of[v]) for v in range(n_vm)] for s in gsites]
                    po = [[net.p(s, site_of[v]) for v in range(n_vm)] for s in gsites]
                    pi = [
                        [net.p(site_of[v], s) * (1.0 - rate_of[v]) for v in range(n_vm)]
                        for s in gsites
                    ]

                    slots = [
                        (i, j)
                        for i in range(n_vm)
                        for j in range(n_vm)
                        if i != j and not (kinds[i] == COMPRESSOR and kinds[j] == COMPRESSOR)
                    ]
                    slot_cost = [
                        stream_charge[vm_servers[j]]
                        + net.p(site_of[i], site_of[j]) * (1.0 - rate_of[i])
                        for i, j in slots
                    ]
                    eff_pair = {
                        (i, j): net.t(site_of[i], site_of[j]) * (1.0 - rate_of[i])
                        for i, j in slots
                    }
                    # rem[k][i]: undecided slots at index >= k still touching VM i
                    rem = [[0] * n_vm for _ in range(len(slots) + 1)]
                    for k in range(len(slots) - 1, -1, -1):
                        i, j = slots[k]
                        for x in range(n_vm):
                            rem[k][x] = rem[k + 1][x] + (1 if x in (i, j) else 0)

                    # interchangeable VMs: same kind on the same server
                    kin_group: list[list[int]] = []
                    kin_of = [0] * n_vm
                    seen_kin: dict[tuple, int] = {}
                    for i in range(n_vm):
                        key = (kinds[i], vm_servers[i])
                        if key not in seen_kin:
                            seen_kin[key] = len(kin_group)
                            kin_group.append([])
                        kin_of[i] = seen_kin[key]
                        kin_group[kin_of[i]].append(i)

                    def first_untouched_ok(x: int, deg, extra: int = -1) -> bool:
                        """Orderly generation: x may take its first edge only
                        if every lower-indexed twin is already wired."""
                        if deg[x] > 0 or x == extra:
                            return True
                        for y in kin_group[kin_of[x]]:
                            if y == x:
                                return True
                            if deg[y] == 0 and y != extra:
                                return False
                        return True

                    bound = t_eps + EPS

                    mixer_list = [v for v in range(n_vm) if kinds[v] == MIXER]
                    # Every participant stream reaches its first mixer unmerged,
                    # so a lone mixer takes all of them as separate inputs.
                    # With several mixers, somewhere a true merge still happens:
                    # chase any full carrier upstream along edges that carry
                    # everything and you end at a mixer joining >= 2 inputs.
                    mwork = n_users if a == 1 else 2

                    def groups_alive(pin_live: list[int]) -> bool:
                        """Monotone necessary conditions given the VM links so
                        far: footprints must still fit each server, and every
                        site group must still be able to reach some mixer and
                        to receive a final stream in time, under best-case
                        handling.  All terms only worsen as links are added."""
                        used = [0.0] * n_servers
                        for v in range(n_vm):
                            k = max(1, pin_live[v])
                            if a == 1 and kinds[v] == MIXER:
                                k = max(n_users, pin_live[v])
                            used[vm_servers[v]] += media.vm_mb(k)
                        for s in range(n_servers):
                            if used[s] > caps[s] + EPS:
                                return False
                        hand = [tm1 * max(1, pin_live[v]) for v in range(n_vm)]
                        cheap0 = [
                            min(tg_v[g][v] + hand[v] for v in range(n_vm))
                            for g in range(n_groups)
                        ]
                        for g in range(n_groups):
                            tg = tg_v[g]
                            if not any(
                                hand[m] + min(tg[m], cheap0[g]) <= bound
                                for m in mixer_list
                            ):
                                return False
                        # latest content reaching each VM, at its very best
                        gather = [
                            max(min(tg_v[h][v], cheap0[h]) for h in range(n_groups))
                            for v in range(n_vm)
                        ]
                        root_lb = min(
                            gather[m] + tm1 * max(mwork, pin_live[m])
                            for m in mixer_list
                        )
                        if root_lb > bound:
                            return False
                        for g in range(n_groups):
                            tg = tg_v[g]
                            ok = False
                            for s in range(n_vm):
                                own = gather[s] + hand[s]
                                if kinds[s] == MIXER:
                                    # either s is the merge point itself, or it
                                    # sits downstream of one and relays the mix
                                    lb = min(
                                        gather[s] + tm1 * max(mwork, pin_live[s]),
                                        root_lb + tm1 * max(1, pin_live[s]),
                                    )
                                else:
                                    lb = root_lb + tm1 * max(1, pin_live[s])
                                if max(lb, own) + tg[s] * (1.0 - rate_of[s]) <= bound:
                                    ok = True
                                    break
                            if not ok:
                                return False
                        return True

                    if not groups_alive([0] * n_vm):
                        continue

                    def subset_complete(
                        acc: float,
                        edges: list[StreamEdge],
                        pairs: list[tuple[int, int]],
                    ) -> None:
                        """All VM links are fixed.  Stage the participant edges:
                        exact per-VM inbound counts first (which freezes every
                        handling time and most of the cost), then entry VMs per
                        site group, then delivery sources per site group."""
                        pair_in = [0] * n_vm
                        pair_out = [0] * n_vm
                        out_nbrs: list[list[int]] = [[] for _ in range(n_vm)]
                        for i, j in pairs:
                            pair_out[i] += 1
                            pair_in[j] += 1
                            out_nbrs[i].append(j)
                        # cyclic wiring never helps: a carried stream would loop
                        # forever, and an uncarried loop only adds cost
                        indeg = list(pair_in)
                        topo = [v for v in range(n_vm) if indeg[v] == 0]
                        for v in topo:
                            for w in out_nbrs[v]:
                                indeg[w] -= 1
                                if indeg[w] == 0:
                                    topo.append(w)
                        if len(topo) != n_vm:
                            return
                        # down[v]: every VM fed by v, directly or transitively
                        down = [1 << v for v in range(n_vm)]
                        for v in reversed(topo):
                            for w in out_nbrs[v]:
                                down[v] |= down[w]
                        # participant streams may enter mixers, or compressors
                        # that forward onward (final-only output never mixes)
                        cands = [
                            v for v in range(n_vm) if kinds[v] == MIXER or pair_out[v] > 0
                        ]
                        # quick kill: even with optimistic one-input handling,
                        # some site group cannot reach the pipeline in time
                        hand_lb = [tm1 * max(1, pair_in[v]) for v in range(n_vm)]
                        maxs_lb = []
                        for v in cands:
                            row = [-1.0] * n_vm
                            row[v] = hand_lb[v]
                            for w in topo:
                                rw = row[w]
                                if rw >= 0.0:
                                    for x in out_nbrs[w]:
                                        c = rw + eff_pair[(w, x)] + hand_lb[x]
                                        if c > row[x]:
                                            row[x] = c
                            maxs_lb.append(max(row))
                        for g in range(n_groups):
                            tg = tg_v[g]
                            if all(tg[v] + maxs_lb[k] > bound for k, v in enumerate(cands)):
                                return
                        # identically wired twins are interchangeable: force
                        # their inbound counts to be non-increasing by index
                        wire_of = [
                            (
                                kinds[v],
                                vm_servers[v],
                                tuple(sorted(i for i, j in pairs if j == v)),
                                tuple(sorted(j for i, j in pairs if i == v)),
                            )
                            for v in range(n_vm)
                        ]
                        prev_twin = [-1] * len(cands)
                        last_pos: dict[tuple, int] = {}
                        for k, v in enumerate(cands):
                            p = last_pos.get(wire_of[v])
                            if p is not None:
                                prev_twin[k] = p
                            last_pos[wire_of[v]] = k
                        min_q = []
                        unit_lb = []
                        for v in cands:
                            lo = 1 - pair_in[v]  # every VM needs an input
                            if kinds[v] == COMPRESSOR:
                                # outputs mirror inputs, so feed what it sends
                                lo = max(lo, pair_out[v] - pair_in[v])
                            min_q.append(max(0, lo))
                            unit_lb.append(
                                charge_of[v] + min(po[g][v] for g in range(n_groups))
                            )
                        min_left = [0] * (len(cands) + 1)
                        for k in range(len(cands) - 1, -1, -1):
                            min_left[k] = min_left[k + 1] + min_q[k]
                        if min_left[0] > n_users:
                            return
                        cheap_left = [float("inf")] * (len(cands) + 1)
                        for k in range(len(cands) - 1, -1, -1):
                            cheap_left[k] = min(cheap_left[k + 1], unit_lb[k])

                        def composition_done(qs: list[int], acc_q: float) -> None:
                            d = list(pair_in)
                            for k, v in enumerate(cands):
                                d[v] += qs[k]
                            used = [0.0] * n_servers
                            for v in range(n_vm):
                                used[vm_servers[v]] += media.vm_mb(d[v])
                            for s in range(n_servers):
                                if used[s] > caps[s] + EPS:
                                    return
                            support = [v for k, v in enumerate(cands) if qs[k] > 0]
                            cap_q = {v: qs[k] for k, v in enumerate(cands) if qs[k] > 0}
                            # a full carrier sits downstream of every entry VM
                            full_mask = (1 << n_vm) - 1
                            for v in support:
                                full_mask &= down[v]
                            if not full_mask & mixer_bits:
                                return  # nobody mixes every stream
                            # compressor balance fixes delivery counts exactly,
                            # and partial carriers may not emit final streams
                            deliver_cap: dict[int, int] = {}
                            total_comp = 0
                            for v in range(n_vm):
                                is_full = full_mask >> v & 1
                                if kinds[v] == COMPRESSOR:
                                    extra = d[v] - pair_out[v]
                                    if not is_full:
                                        if extra != 0:
                                            return
                                    elif extra:
                                        deliver_cap[v] = extra
                                        total_comp += extra
                                elif not is_full and pair_out[v] == 0:
                                    return  # mixer with no outlet at all
                            if total_comp > n_users:
                                return
                            # handling times are exact now, so arrival times of
                            # a stream entering at v are exact along every path
                            handling = [tm1 * k for k in d]
                            sp: dict[int, list[float]] = {}
                            for v in support:
                                row = [-1.0] * n_vm
                                row[v] = handling[v]
                                for w in topo:
                                    rw = row[w]
                                    if rw >= 0.0:
                                        for x in out_nbrs[w]:
                                            c = rw + eff_pair[(w, x)] + handling[x]
                                            if c > row[x]:
                                                row[x] = c
                                sp[v] = row
                            entry: list[list[int]] = []
                            for g in range(n_groups):
                                tg = tg_v[g]
                                es = [v for v in support if tg[v] + max(sp[v]) <= bound]
                                if sum(cap_q[v] for v in es) < len(ugroups[g]):
                                    return  # this site cannot place all its streams
                                entry.append(es)
                            for v in support:
                                avail = sum(
                                    len(ugroups[g])
                                    for g in range(n_groups)
                                    if v in entry[g]
                                )
                                if avail < cap_q[v]:
                                    return  # nobody can still feed this VM enough
                            acc_x0 = acc + sum(qs[k] * charge_of[v] for k, v in enumerate(cands))
                            gfloor = [
                                len(ugroups[g]) * min(po[g][v] for v in entry[g])
                                for g in range(n_groups)
                            ]
                            gsuf = [0.0] * (n_groups + 1)
                            for g in range(n_groups - 1, -1, -1):
                                gsuf[g] = gsuf[g + 1] + gfloor[g]
                            x_rows: list[list[int]] = []
                            caprem = dict(cap_q)

                            def x_done(acc_x: float) -> None:
                                # max arrival per full carrier, now fully exact
                                srcs = [v for v in range(n_vm) if full_mask >> v & 1]
                                arr_max: dict[int, float] = {}
                                for s_vm in srcs:
                                    top = 0.0
                                    for g in range(n_groups):
                                        tg = tg_v[g]
                                        cells = x_rows[g]
                                        for ei, v in enumerate(entry[g]):
                                            if cells[ei]:
                                                a = tg[v] + sp[v][s_vm]
                                                if a > top:
                                                    top = a
                                    arr_max[s_vm] = top
                                need = [len(ugroups[g]) for g in range(n_groups)]
                                comp_srcs = sorted(deliver_cap)
                                mix_srcs = [v for v in srcs if kinds[v] == MIXER]
                                y_cells: list[tuple[int, list[int]]] = []

                                def deliverable(g: int, s_vm: int) -> bool:
                                    leg = tg_v[g][s_vm] * (1.0 - rate_of[s_vm])
                                    return arr_max[s_vm] + leg <= bound

                                def finish(acc_y: float) -> None:
                                    new_edges = list(edges)
                                    for g in range(n_groups):
                                        members = ugroups[g]
                                        pos = 0
                                        cells = x_rows[g]
                                        for ei, v in enumerate(entry[g]):
                                            for _ in range(cells[ei]):
                                                new_edges.append(
                                                    StreamEdge(
                                                        head=Endpoint.participant(users[members[pos]].id),
                                                        tail=Endpoint.vm(ids[v]),
                                                    )
                                                )
                                                pos += 1
                                    pos_g = [0] * n_groups
                                    for s_vm, yrow in y_cells:
                                        for g in range(n_groups):
                                            for _ in range(yrow[g]):
                                                uid = users[ugroups[g][pos_g[g]]].id
                                                pos_g[g] += 1
                                                new_edges.append(
                                                    StreamEdge(
                                                        head=Endpoint.vm(ids[s_vm]),
                                                        tail=Endpoint.participant(uid),
                                                        compression_rate=rate_of[s_vm],
                                                    )
                                                )
                                    consider(vm_servers, kinds, new_edges)

                                def dfs_ym(mi: int, acc_y: float) -> None:
                                    tick()
                                    if best_cost is not None and acc_y > best_cost + EPS:
                                        return
                                    if mi == len(mix_srcs):
                                        if not any(need):
                                            finish(acc_y)
                                        return
                                    s_vm = mix_srcs[mi]
                                    okg = [g for g in range(n_groups) if deliverable(g, s_vm)]
                                    yrow = [0] * n_groups

                                    def fillm(gi: int, add: float, placed: int) -> None:
                                        if gi == len(okg):
                                            if placed == 0 and pair_out[s_vm] == 0:
                                                return  # would leave the mixer with no output
                                            y_cells.append((s_vm, yrow[:]))
                                            dfs_ym(mi + 1, acc_y + add)
                                            y_cells.pop()
                                            return
                                        g = okg[gi]
                                        for c in range(need[g] + 1):
                                            need[g] -= c
                                            yrow[g] = c
                                            fillm(gi + 1, add + c * pi[g][s_vm], placed + c)
                                            need[g] += c
                                        yrow[g] = 0

                                    fillm(0, 0.0, 0)

                                def dfs_yc(si: int, acc_y: float) -> None:
                                    tick()
                                    if best_cost is not None and acc_y > best_cost + EPS:
                                        return
                                    if si == len(comp_srcs):
                                        dfs_ym(0, acc_y)
                                        return
                                    s_vm = comp_srcs[si]
                                    okg = [g for g in range(n_groups) if deliverable(g, s_vm)]
                                    yrow = [0] * n_groups

                                    def fillc(gi: int, left: int, add: float) -> None:
                                        if gi == len(okg):
                                            if left == 0:
                                                y_cells.append((s_vm, yrow[:]))
                                                dfs_yc(si + 1, acc_y + add)
                                                y_cells.pop()
                                            return
                                        g = okg[gi]
                                        top = min(left, need[g])
                                        for c in range(top + 1):
                                            need[g] -= c
                                            yrow[g] = c
                                            fillc(gi + 1, left - c, add + c * pi[g][s_vm])
                                            need[g] += c
                                        yrow[g] = 0

                                    # a compressor's final-stream count is fixed
                                    fillc(0, deliver_cap[s_vm], 0.0)

                                dfs_yc(0, acc_x)

                            def dfs_x(g: int, acc_x: float) -> None:
                                tick()
                                if best_cost is not None and acc_x + gsuf[g] + in_suffix[0] > best_cost + EPS:
                                    return
                                if g == n_groups:
                                    x_done(acc_x)
                                    return
                                es = entry[g]
                                rowp = po[g]
                                cells = [0] * len(es)

                                def put(ei: int, left: int, add: float) -> None:
                                    tick()
                                    if ei == len(es):
                                        if left == 0:
                                            x_rows.append(cells)
                                            dfs_x(g + 1, acc_x + add)
                                            x_rows.pop()
                                        return
                                    v = es[ei]
                                    top = min(left, caprem[v])
                                    for c in range(top + 1):
                                        caprem[v] -= c
                                        cells[ei] = c
                                        put(ei + 1, left - c, add + c * rowp[v])
                                        caprem[v] += c
                                    cells[ei] = 0

                                put(0, len(ugroups[g]), 0.0)

                            dfs_x(0, acc_x0)

                        def dfs_q(k: int, left: int, qs: list[int], acc_q: float) -> None:
                            tick()
                            floor = acc_q + in_suffix[0]
                            if left:
                                floor += left * cheap_left[k]
                            if best_cost is not None and floor > best_cost + EPS:
                                return
                            if k == len(cands):
                                if left == 0:
                                    composition_done(qs, acc_q)
                                return
                            lo = min_q[k]
                            hi = left - min_left[k + 1]
                            if prev_twin[k] >= 0 and qs[prev_twin[k]] < hi:
                                hi = qs[prev_twin[k]]
                            for qv in range(lo, hi + 1):
                                qs.append(qv)
                                dfs_q(k + 1, left - qv, qs, acc_q + qv * unit_lb[k])
                                qs.pop()

                        dfs_q(0, n_users, [], acc)

                    def dfs_edges(
                        slot_idx: int,
                        acc: float,
                        edges: list[StreamEdge],
                        pairs: list[tuple[int, int]],
                        pair_deg: list[int],
                        pin: list[int],
                    ) -> None:
                        tick()
                        if best_cost is not None and acc + user_floor > best_cost + EPS:
                            return
                        if slot_idx == len(slots):
                            # a compressor with no VM link can never serve anyone
                            for i in range(n_vm):
                                if kinds[i] == COMPRESSOR and pair_deg[i] == 0:
                                    return
                            subset_complete(acc, edges, pairs)
                            return
                        i, j = slots[slot_idx]
                        # exclude branch: legal unless it starves a compressor
                        nxt = rem[slot_idx + 1]
                        if not (
                            (kinds[i] == COMPRESSOR and pair_deg[i] == 0 and nxt[i] == 0)
                            or (kinds[j] == COMPRESSOR and pair_deg[j] == 0 and nxt[j] == 0)
                        ):
                            dfs_edges(slot_idx + 1, acc, edges, pairs, pair_deg, pin)
                        # include branch, under orderly first-touch generation
                        if not (
                            first_untouched_ok(i, pair_deg)
                            and first_untouched_ok(j, pair_deg, extra=i)
                        ):
                            return
                        pin[j] += 1
                        if groups_alive(pin):
                            edges.append(
                                StreamEdge(
                                    head=Endpoint.vm(ids[i]),
                                    tail=Endpoint.vm(ids[j]),
                                    compression_rate=rate_of[i],
                                )
                            )
                            pairs.append((i, j))
                            pair_deg[i] += 1
                            pair_deg[j] += 1
                            dfs_edges(
                                slot_idx + 1,
                                acc + slot_cost[slot_idx],
                                edges,
                                pairs,
                                pair_deg,
                                pin,
                            )
                            pair_deg[i] -= 1
                            pair_deg[j] -= 1
                            pairs.pop()
                            edges.pop()
                        pin[j] -= 1

                    dfs_edges(0, base, [], [], [0] * n_vm, [0] * n_vm)

    if best_shape is None:
        raise InfeasibleError("exact", "no allocation satisfies the constraints")
    vm_servers, kinds, edges = best_shape
    ids = _vm_ids(kinds)
    in_deg = {vid: 0 for vid in ids}
    for e in edges:
        if e.tail.is_vm:
            in_deg[e.tail.id] += 1
    vms = tuple(
        VmInstance(id=ids[i], kind=kinds[i], server=vm_servers[i], input_count=in_deg[ids[i]])
        for i in range(len(ids))
    )
    plan = Plan(vms=vms, edges=tuple(edges), per_participant_delay={}, feasible=True)
    delays = eval_delays(plan, instance, delay_model="ilp")
    return Plan(vms=vms, edges=tuple(edges), per_participant_delay=delays, feasible=True)


def _vm_ids(kinds: tuple[str, ...]) -> list[str]:
    ids = []
    m = c = 0
    for k in kinds:
        if k == MIXER:
            ids.append(f"m{m}")
            m += 1
        else:
            ids.append(f"c{c}")
            c += 1
    return ids


def _suffix_sums(values: list[float]) -> list[float]:
    out = [0.0] * (len(values) + 1)
    for i in range(len(values) - 1, -1, -1):
        out[i] = out[i + 1] + values[i]
    return out


def _seed_plans(instance: Instance):
    """Cheap starting incumbents so pruning bites early: one mixer per
    candidate server with participants attached directly, the same with a
    forward/return compressor pair around each remote participant, and the
    greedy pipeline's plan when it happens to be simple and valid."""
    media = instance.media
    net = instance.network
    gamma = min(media.fixed_gamma / 100.0, media.max_compression_rate)

    def build(hub_server: int, compressed: list) -> Plan:
        vms = [VmInstance(id="m0", kind=MIXER, server=hub_server, input_count=0)]
        comp_of: dict[str, tuple[str, str]] = {}
        for p in compressed:
            near = min(
                range(len(instance.servers)),
                key=lambda i: (net.t(p.site, instance.servers[i].site), i),
            )
            fwd = f"c{len(comp_of) * 2}"
            ret = f"c{len(comp_of) * 2 + 1}"
            vms.append(VmInstance(id=fwd, kind=COMPRESSOR, server=near, input_count=0))
            vms.append(VmInstance(id=ret, kind=COMPRESSOR, server=hub_server, input_count=0))
            comp_of[p.id] = (fwd, ret)
        edges = []
        for p in instance.participants:
            if p.id in comp_of:
                fwd, ret = comp_of[p.id]
                edges.append(StreamEdge(head=Endpoint.participant(p.id), tail=Endpoint.vm(fwd)))
                edges.append(StreamEdge(head=Endpoint.vm(fwd), tail=Endpoint.vm("m0"), compression_rate=gamma))
                edges.append(StreamEdge(head=Endpoint.vm("m0"), tail=Endpoint.vm(ret)))
                edges.append(StreamEdge(head=Endpoint.vm(ret), tail=Endpoint.participant(p.id), compression_rate=gamma))
            else:
                edges.append(StreamEdge(head=Endpoint.participant(p.id), tail=Endpoint.vm("m0")))
                edges.append(StreamEdge(head=Endpoint.vm("m0"), tail=Endpoint.participant(p.id)))
        in_deg: dict[str, int] = {vm.id: 0 for vm in vms}
        for e in edges:
            if e.tail.is_vm:
                in_deg[e.tail.id] += 1
        final = tuple(
            VmInstance(id=vm.id, kind=vm.kind, server=vm.server, input_count=in_deg[vm.id])
            for vm in vms
        )
        return Plan(vms=final, edges=tuple(edges), per_participant_delay={}, feasible=True)

    for s in range(len(instance.servers)):
        hub_site = instance.servers[s].site
        yield build(s, [])
        remote = [p for p in instance.participants if net.t(p.site, hub_site) > EPS]
        if remote:
            yield build(s, remote)
    try:
        yield cram_allocate(instance)
    except InfeasibleError:
        pass
