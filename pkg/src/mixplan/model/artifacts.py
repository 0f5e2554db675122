"""Derived constraint matrices for a plan, in the slot layout the exact
formulation uses.

Node order is: participants (instance order), then |U|-1 mixer slots, then
2|U|-1 compressor slots.  A plan's VMs are assigned to slots in creation
order; unused slots stay all-zero.  Multi-edges collapse to a single binary
entry in D, so these matrices describe the plan's topology, not its stream
multiplicities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import StructuralError
from .metrics import stream_arrival_times
from .types import COMPRESSOR, MIXER, Instance, Plan


@dataclass(frozen=True)
class IlpArtifacts:
    D: np.ndarray  # (4U-2) x (4U-2) adjacency, binary
    E: np.ndarray  # U x V reachability of each participant's stream
    F: np.ndarray  # U x V x V path-through indicators
    X: np.ndarray  # S x V hosting matrix
    Y: np.ndarray  # U x V arrival times (0 where a slot does not carry the stream)
    Z: np.ndarray  # S x V load matrix (in-degree where hosted)
    G: np.ndarray  # V-vector of binary in-degrees
    beta: int
    acyclic: bool
    node_labels: tuple[str, ...]
    slot_of: dict[str, int]  # vm id -> node index

    @property
    def mixer_slots(self) -> int:
        u = len(self.E)
        return u - 1

    @property
    def vm_slots(self) -> int:
        return 3 * len(self.E) - 2


def build_artifacts(plan: Plan, instance: Instance) -> IlpArtifacts:
    n = len(instance.participants)
    n_mix_slots = n - 1
    n_comp_slots = 2 * n - 1
    n_vm = n_mix_slots + n_comp_slots  # 3U - 2
    n_nodes = n + n_vm  # 4U - 2
    n_srv = len(instance.servers)

    mixers = [vm for vm in plan.vms if vm.kind == MIXER]
    comps = [vm for vm in plan.vms if vm.kind == COMPRESSOR]
    if len(mixers) > n_mix_slots:
        raise StructuralError(
            f"plan has {len(mixers)} mixers but the formulation allows at most {n_mix_slots}"
        )
    if len(comps) > n_comp_slots:
        raise StructuralError(
            f"plan has {len(comps)} compressors but the formulation allows at most {n_comp_slots}"
        )

    user_index = {u: i for i, u in enumerate(instance.participant_ids)}
    slot_of: dict[str, int] = {}
    for k, vm in enumerate(mixers):
        slot_of[vm.id] = n + k
    for k, vm in enumerate(comps):
        slot_of[vm.id] = n + n_mix_slots + k

    labels = list(instance.participant_ids)
    labels += [f"m{k}" for k in range(n_mix_slots)]
    labels += [f"c{k}" for k in range(n_comp_slots)]

    def node_index(endpoint) -> int:
        if endpoint.is_vm:
            if endpoint.id not in slot_of:
                raise StructuralError(f"edge references unknown vm {endpoint.id!r}")
            return slot_of[endpoint.id]
        if endpoint.id not in user_index:
            raise StructuralError(f"edge references unknown participant {endpoint.id!r}")
        return user_index[endpoint.id]

    D = np.zeros((n_nodes, n_nodes), dtype=np.int8)
    for e in plan.edges:
        D[node_index(e.head), node_index(e.tail)] = 1

    X = np.zeros((n_srv, n_vm), dtype=np.int8)
    for vm in plan.vms:
        if not (0 <= vm.server < n_srv):
            raise StructuralError(f"vm {vm.id!r} placed on nonexistent server #{vm.server}")
        X[vm.server, slot_of[vm.id] - n] = 1

    # least fixpoint of: a stream is at v if sent there directly, or if it
    # is at some VM i that forwards to v
    E = np.zeros((n, n_vm), dtype=np.int8)
    d_user_vm = D[:n, n:]
    d_vm_vm = D[n:, n:]
    E[:, :] = d_user_vm
    while True:
        prop = (E @ d_vm_vm) > 0
        nxt = np.logical_or(E > 0, prop).astype(np.int8)
        if np.array_equal(nxt, E):
            break
        E = nxt

    F = np.zeros((n, n_vm, n_vm), dtype=np.int8)
    for u in range(n):
        F[u] = (E[u][:, None] & d_vm_vm).astype(np.int8)

    G = D[:, n:].sum(axis=0).astype(np.int64)
    Z = (X * G[None, :]).astype(np.int64)

    Y = np.zeros((n, n_vm), dtype=float)
    acyclic = True
    try:
        arrivals = stream_arrival_times(plan, instance)
    except StructuralError:
        acyclic = False
    else:
        for u, per_vm in arrivals.items():
            for vid, t in per_vm.items():
                Y[user_index[u], slot_of[vid] - n] = t

    return IlpArtifacts(
        D=D,
        E=E,
        F=F,
        X=X,
        Y=Y,
        Z=Z,
        G=G,
        beta=n + n_vm + 1,
        acyclic=acyclic,
        node_labels=tuple(labels),
        slot_of=slot_of,
    )
