"""Domain types: problem instances, plans, and their invariants.

Everything here is immutable after construction.  Validation happens in
__post_init__ so a constructed object is always safe to hand around.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..errors import InvalidInstanceError, StructuralError

# Tolerance used for every cost/delay comparison in the package.
EPS = 1e-9

MIXER = "mixer"
COMPRESSOR = "compressor"


@dataclass(frozen=True)
class Site:
    """A geographic location; id is the key used in matrices."""

    id: str
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or self.id


def _check_square(name: str, sites: tuple[str, ...], m: tuple[tuple[float, ...], ...]) -> None:
    n = len(sites)
    if len(m) != n or any(len(row) != n for row in m):
        raise InvalidInstanceError(f"{name} matrix must be {n}x{n} to match the site list")
    for i in range(n):
        if abs(m[i][i]) > EPS:
            raise InvalidInstanceError(f"{name}[{sites[i]}][{sites[i]}] must be 0")
        for j in range(n):
            if m[i][j] < 0:
                raise InvalidInstanceError(f"{name} entries must be >= 0")
            if abs(m[i][j] - m[j][i]) > EPS:
                raise InvalidInstanceError(
                    f"{name} must be symmetric, differs at [{sites[i]}][{sites[j]}]"
                )


@dataclass(frozen=True)
class NetworkMatrix:
    """Pairwise transmission time (ms) and cost ($ per stream) between sites.

    Both matrices are symmetric with a zero diagonal; indexing follows
    `sites` order.
    """

    sites: tuple[str, ...]
    time: tuple[tuple[float, ...], ...]
    cost: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(set(self.sites)) != len(self.sites):
            raise InvalidInstanceError("duplicate site id in network matrix")
        _check_square("time", self.sites, self.time)
        _check_square("cost", self.sites, self.cost)
        object.__setattr__(self, "_idx", {s: i for i, s in enumerate(self.sites)})

    @classmethod
    def from_time(
        cls,
        sites: Iterable[str],
        time: Iterable[Iterable[float]],
        kappa: float = 0.01,
        cost: Iterable[Iterable[float]] | None = None,
    ) -> "NetworkMatrix":
        """Build a matrix, deriving cost = kappa * time unless given."""
        sites = tuple(sites)
        t = tuple(tuple(float(x) for x in row) for row in time)
        if cost is None:
            c = tuple(tuple(kappa * x for x in row) for row in t)
        else:
            c = tuple(tuple(float(x) for x in row) for row in cost)
        return cls(sites=sites, time=t, cost=c)

    def index(self, site: str) -> int:
        try:
            return self._idx[site]  # type: ignore[attr-defined]
        except KeyError:
            raise StructuralError(f"site {site!r} not in network matrix") from None

    def t(self, a: str, b: str) -> float:
        return self.time[self.index(a)][self.index(b)]

    def p(self, a: str, b: str) -> float:
        return self.cost[self.index(a)][self.index(b)]


@dataclass(frozen=True)
class ServerSpec:
    """A candidate hosting location with a memory budget.

    capacity is MB of RAM; cost_per_unit is dollars per MB under the
    default accounting (see eval_server_cost for the flat per-VM variant).
    """

    site: str
    capacity: float
    cost_per_unit: float

    def __post_init__(self):
        if self.capacity <= 0:
            raise InvalidInstanceError(f"server at {self.site!r}: capacity must be > 0")
        if self.cost_per_unit < 0:
            raise InvalidInstanceError(f"server at {self.site!r}: cost_per_unit must be >= 0")


@dataclass(frozen=True)
class Participant:
    id: str
    site: str


@dataclass(frozen=True)
class MediaCostModel:
    """Linear handling-cost model shared by mixers and compressors.

    Handling k input streams takes time_per_stream * k ms and
    resource_per_stream * k MB on top of the fixed vm_overhead MB.
    fixed_gamma is the compression percentage the exact solver assumes;
    the heuristic derives its own per-stream rates instead.
    """

    time_per_stream: float
    resource_per_stream: float
    vm_overhead: float
    max_compression_rate: float
    fixed_gamma: float = 95.0

    def __post_init__(self):
        if self.time_per_stream <= 0 or self.resource_per_stream <= 0:
            raise InvalidInstanceError("per-stream time and resource slopes must be > 0")
        if self.vm_overhead < 10 * self.resource_per_stream:
            # the fixed VM footprint is assumed to dominate per-stream needs
            raise InvalidInstanceError(
                "vm_overhead must be at least 10x resource_per_stream"
            )
        if not (0 < self.max_compression_rate < 1):
            raise InvalidInstanceError("max_compression_rate must be in (0, 1)")
        if not (0 < self.fixed_gamma < 100):
            raise InvalidInstanceError("fixed_gamma must be in (0, 100)")

    def mix_ms(self, k: int | float) -> float:
        """Handling time for k input streams, in ms."""
        return self.time_per_stream * k

    def stream_mb(self, k: int | float) -> float:
        """Memory consumed by k input streams, in MB."""
        return self.resource_per_stream * k

    def vm_mb(self, k: int | float) -> float:
        """Total footprint of a VM handling k streams."""
        return self.vm_overhead + self.stream_mb(k)


@dataclass(frozen=True)
class QosSpec:
    max_delay: float

    def __post_init__(self):
        if self.max_delay <= 0:
            raise InvalidInstanceError("max_delay must be > 0")


@dataclass(frozen=True)
class Instance:
    """A complete problem: who participates where, which servers exist,
    how far apart everything is, and the handling-cost constants."""

    servers: tuple[ServerSpec, ...]
    participants: tuple[Participant, ...]
    network: NetworkMatrix
    media: MediaCostModel
    qos: QosSpec

    def __post_init__(self):
        if len(self.participants) < 2:
            raise InvalidInstanceError("need at least 2 participants, mixing one stream is meaningless")
        if len(self.servers) < 1:
            raise InvalidInstanceError("need at least 1 server")
        ids = [p.id for p in self.participants]
        if len(set(ids)) != len(ids):
            raise InvalidInstanceError("participant ids must be unique")
        known = set(self.network.sites)
        for s in self.servers:
            if s.site not in known:
                raise InvalidInstanceError(f"server site {s.site!r} missing from network matrix")
        for p in self.participants:
            if p.site not in known:
                raise InvalidInstanceError(f"participant {p.id!r} site {p.site!r} missing from network matrix")

    @property
    def participant_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.participants)

    def participant(self, pid: str) -> Participant:
        for p in self.participants:
            if p.id == pid:
                return p
        raise StructuralError(f"unknown participant {pid!r}")

    def max_server_capacity(self) -> float:
        return max(s.capacity for s in self.servers)


@dataclass(frozen=True)
class VmInstance:
    """One deployed media-handling VM.  `server` indexes Instance.servers;
    input_count is the number of inbound streams it terminates."""

    id: str
    kind: str
    server: int
    input_count: int = 0

    def __post_init__(self):
        if self.kind not in (MIXER, COMPRESSOR):
            raise StructuralError(f"vm {self.id!r}: unknown kind {self.kind!r}")
        if self.server < 0:
            raise StructuralError(f"vm {self.id!r}: negative server index")
        if self.input_count < 0:
            raise StructuralError(f"vm {self.id!r}: negative input_count")


@dataclass(frozen=True)
class Endpoint:
    """Either end of a stream edge: a participant or a VM, by id."""

    type: str  # "participant" | "vm"
    id: str

    def __post_init__(self):
        if self.type not in ("participant", "vm"):
            raise StructuralError(f"endpoint type {self.type!r} must be participant or vm")

    @classmethod
    def participant(cls, pid: str) -> "Endpoint":
        return cls("participant", pid)

    @classmethod
    def vm(cls, vid: str) -> "Endpoint":
        return cls("vm", vid)

    @property
    def is_vm(self) -> bool:
        return self.type == "vm"


@dataclass(frozen=True)
class StreamEdge:
    """A directed stream: `head` emits, `tail` receives.

    compression_rate is the fraction shaved off downstream transmission
    time and cost; it is nonzero only when the head is a compressor.
    """

    head: Endpoint
    tail: Endpoint
    compression_rate: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.compression_rate <= 1.0):
            raise StructuralError("compression_rate must lie in [0, 1]")


@dataclass(frozen=True)
class Plan:
    """A solution: the VMs to create and the stream graph wiring them.

    per_participant_delay carries the solver's own end-to-end estimate in
    ms, keyed by participant id.  Use model.metrics / eval_delays to
    re-derive delays under either delay model.
    """

    vms: tuple[VmInstance, ...]
    edges: tuple[StreamEdge, ...]
    per_participant_delay: Mapping[str, float] = field(default_factory=dict)
    feasible: bool = True

    def __post_init__(self):
        seen = set()
        for vm in self.vms:
            if vm.id in seen:
                raise StructuralError(f"duplicate vm id {vm.id!r}")
            seen.add(vm.id)

    def vm_by_id(self, vid: str) -> VmInstance:
        for vm in self.vms:
            if vm.id == vid:
                return vm
        raise StructuralError(f"unknown vm {vid!r}")

    def in_degree(self) -> dict[str, int]:
        """Inbound edge count per VM id, multi-edges counted individually."""
        deg = {vm.id: 0 for vm in self.vms}
        for e in self.edges:
            if e.tail.is_vm and e.tail.id in deg:
                deg[e.tail.id] += 1
        return deg

    def out_degree(self) -> dict[str, int]:
        deg = {vm.id: 0 for vm in self.vms}
        for e in self.edges:
            if e.head.is_vm and e.head.id in deg:
                deg[e.head.id] += 1
        return deg


@dataclass(frozen=True)
class PlanMetrics:
    server_cost: float
    network_cost: float
    total_cost: float
    max_delay: float
    compression_rates: tuple[float, ...]
    vm_count: int
    allocated_memory: float


@dataclass(frozen=True)
class Violation:
    """One broken plan constraint.  `code` is a stable machine-readable
    family name; `subject` names the offending entity or pair."""

    code: str
    subject: str
    message: str

    def render(self) -> str:
        return f"{self.code}: {self.message}"
