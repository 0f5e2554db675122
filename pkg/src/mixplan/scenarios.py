"""Reproducible planning scenarios over a bundled latency snapshot.

Two service profiles are modeled: a distance-learning deployment across
nine US cities ("odl") and a worldwide game deployment across twenty
cities ("mmog").  Participants are spread either evenly round-robin over
the region's sites or split between its westernmost and easternmost
cities, the stress shape where almost everyone is far from someone.

`sweep` runs the allocator over a list of scenario specs and collects
one comparable row per run; `to_csv` renders those rows with fixed
column order and number formatting so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping

from .errors import InfeasibleError, InvalidInstanceError
from .heuristic import cram_allocate
from .model.metrics import PER_MB, metrics
from .model.types import (
    Instance,
    MediaCostModel,
    NetworkMatrix,
    Participant,
    QosSpec,
    ServerSpec,
)

__all__ = [
    "DEFAULT_MEDIA",
    "FixtureRegion",
    "ScenarioSpec",
    "SweepRow",
    "generate",
    "load_region",
    "run_scenario",
    "small_case",
    "sweep",
    "to_csv",
]

KINDS = ("odl", "mmog")
DISTRIBUTIONS = ("homogeneous", "heterogeneous")
_REGION_OF = {"odl": "usa", "mmog": "world"}

DEFAULT_MEDIA = MediaCostModel(
    time_per_stream=6.0,
    resource_per_stream=20.0,
    vm_overhead=400.0,
    max_compression_rate=0.95,
    fixed_gamma=95.0,
)
DEFAULT_CAPACITY = 10240.0
DEFAULT_PRICE = 0.01
DEFAULT_MAX_DELAY = 400.0
DEFAULT_KAPPA = 0.01

CSV_COLUMNS = (
    "scenario",
    "distribution",
    "n",
    "server_cost",
    "network_cost",
    "total_cost",
    "max_delay_ms",
    "vm_count",
    "allocated_mb",
    "mean_compression_rate",
    "median_compression_rate",
    "status",
    "phase",
)


@dataclass(frozen=True)
class FixtureRegion:
    name: str
    site_ids: tuple[str, ...]
    longitude: Mapping[str, float]
    network: NetworkMatrix


@lru_cache(maxsize=None)
def _fixture() -> dict:
    ref = resources.files("mixplan.data").joinpath("ping_fixture.json")
    with ref.open("r", encoding="utf-8") as f:
        return json.load(f)


@lru_cache(maxsize=None)
def load_region(name: str, kappa: float = DEFAULT_KAPPA) -> FixtureRegion:
    regions = _fixture()["regions"]
    if name not in regions:
        raise InvalidInstanceError(f"unknown fixture region {name!r}, have {sorted(regions)}")
    reg = regions[name]
    site_ids = tuple(s["id"] for s in reg["sites"])
    longitude = {s["id"]: float(s["longitude"]) for s in reg["sites"]}
    network = NetworkMatrix.from_time(site_ids, reg["rtt_ms"], kappa=kappa)
    return FixtureRegion(name=name, site_ids=site_ids, longitude=longitude, network=network)


@dataclass(frozen=True)
class ScenarioSpec:
    """One reproducible run: service kind, participant spread, and size.

    The seed is carried for forward compatibility; both built-in
    distributions are fully deterministic.
    """

    kind: str
    distribution: str
    participant_count: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInstanceError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.distribution not in DISTRIBUTIONS:
            raise InvalidInstanceError(
                f"distribution must be one of {DISTRIBUTIONS}, got {self.distribution!r}"
            )
        if self.participant_count < 2:
            raise InvalidInstanceError("participant_count must be >= 2")

    @property
    def region_name(self) -> str:
        return _REGION_OF[self.kind]


def _participant_sites(spec: ScenarioSpec, region: FixtureRegion) -> list[str]:
    n = spec.participant_count
    if spec.distribution == "homogeneous":
        return [region.site_ids[i % len(region.site_ids)] for i in range(n)]
    west = min(region.site_ids, key=lambda s: (region.longitude[s], s))
    east = max(region.site_ids, key=lambda s: (region.longitude[s], s))
    head = math.ceil(n / 2)
    return [west] * head + [east] * (n - head)


def generate(
    spec: ScenarioSpec,
    max_delay: float = DEFAULT_MAX_DELAY,
    kappa: float = DEFAULT_KAPPA,
) -> Instance:
    """Materialize a scenario as a concrete problem instance.

    Every fixture site hosts one candidate server with the default
    capacity and per-MB price.
    """
    region = load_region(spec.region_name, kappa=kappa)
    sites = _participant_sites(spec, region)
    return Instance(
        servers=tuple(
            ServerSpec(site=s, capacity=DEFAULT_CAPACITY, cost_per_unit=DEFAULT_PRICE)
            for s in region.site_ids
        ),
        participants=tuple(
            Participant(id=f"p{i}", site=site) for i, site in enumerate(sites)
        ),
        network=region.network,
        media=DEFAULT_MEDIA,
        qos=QosSpec(max_delay=max_delay),
    )


def small_case(max_delay: float = 70.0) -> Instance:
    """Two-server microbenchmark: six participants co-located with one
    server and two across a 49 ms link.

    The delay bound is tight enough that a direct remote attachment
    (49 ms haul plus full handling) cannot meet it, so an optimal plan
    must bridge the remote pair through compressors; it is loose enough
    that compressed paths do.  Small enough for the exhaustive search.
    """
    region = load_region("world")
    t = region.network.t("seattle", "toronto")
    net = NetworkMatrix.from_time(
        ["seattle", "toronto"], [[0.0, t], [t, 0.0]], kappa=DEFAULT_KAPPA
    )
    users = [Participant(id=f"p{i}", site="seattle") for i in range(6)]
    users += [Participant(id=f"p{i}", site="toronto") for i in (6, 7)]
    return Instance(
        servers=(
            ServerSpec(site="seattle", capacity=DEFAULT_CAPACITY, cost_per_unit=DEFAULT_PRICE),
            ServerSpec(site="toronto", capacity=DEFAULT_CAPACITY, cost_per_unit=DEFAULT_PRICE),
        ),
        participants=tuple(users),
        network=net,
        media=DEFAULT_MEDIA,
        qos=QosSpec(max_delay=max_delay),
    )


@dataclass(frozen=True)
class SweepRow:
    scenario: str
    distribution: str
    n: int
    status: str  # "ok" | "infeasible"
    phase: str = ""
    server_cost: float | None = None
    network_cost: float | None = None
    total_cost: float | None = None
    max_delay_ms: float | None = None
    vm_count: int | None = None
    allocated_mb: float | None = None
    mean_compression_rate: float | None = None
    median_compression_rate: float | None = None


def run_scenario(spec: ScenarioSpec, cost_mode: str = PER_MB) -> SweepRow:
    instance = generate(spec)
    try:
        plan = cram_allocate(instance)
    except InfeasibleError as exc:
        return SweepRow(
            scenario=spec.kind,
            distribution=spec.distribution,
            n=spec.participant_count,
            status="infeasible",
            phase=exc.phase,
        )
    m = metrics(plan, instance, delay_model="stored", cost_mode=cost_mode)
    rates = m.compression_rates
    return SweepRow(
        scenario=spec.kind,
        distribution=spec.distribution,
        n=spec.participant_count,
        status="ok",
        server_cost=m.server_cost,
        network_cost=m.network_cost,
        total_cost=m.total_cost,
        max_delay_ms=m.max_delay,
        vm_count=m.vm_count,
        allocated_mb=m.allocated_memory,
        mean_compression_rate=statistics.mean(rates) if rates else 0.0,
        median_compression_rate=statistics.median(rates) if rates else 0.0,
    )


def sweep(specs: Iterable[ScenarioSpec], cost_mode: str = PER_MB) -> list[SweepRow]:
    """Run each scenario; infeasible runs become rows, not exceptions."""
    return [run_scenario(spec, cost_mode=cost_mode) for spec in specs]


def _cell(value, kind: str) -> str:
    if value is None:
        return ""
    if kind == "money":
        return f"{value:.4f}"
    if kind == "ms":
        return f"{value:.3f}"
    if kind == "mb":
        return f"{value:.3f}"
    if kind == "rate":
        return f"{value:.6f}"
    return str(value)


def to_csv(rows: Iterable[SweepRow]) -> str:
    """Render sweep rows deterministically; reruns are byte-identical."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(
            [
                r.scenario,
                r.distribution,
                str(r.n),
                _cell(r.server_cost, "money"),
                _cell(r.network_cost, "money"),
                _cell(r.total_cost, "money"),
                _cell(r.max_delay_ms, "ms"),
                _cell(r.vm_count, "int"),
                _cell(r.allocated_mb, "mb"),
                _cell(r.mean_compression_rate, "rate"),
                _cell(r.median_compression_rate, "rate"),
                r.status,
                r.phase,
            ]
        )
    return buf.getvalue()
