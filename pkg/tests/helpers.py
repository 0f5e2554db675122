"""Shared builders for the test suite.

Everything here constructs instances from plain numbers so each test can
state its expectations next to the inputs that produce them.
"""

from __future__ import annotations

from mixplan import (
    Instance,
    MediaCostModel,
    NetworkMatrix,
    Participant,
    QosSpec,
    ServerSpec,
)
from mixplan.model.metrics import PER_MB, eval_network_cost, eval_server_cost

# default media constants used across the suite: 6 ms handling per stream,
# 20 MB per stream, 400 MB VM overhead, rate capped at 0.95
MEDIA = MediaCostModel(
    time_per_stream=6.0,
    resource_per_stream=20.0,
    vm_overhead=400.0,
    max_compression_rate=0.95,
    fixed_gamma=95.0,
)

DEFAULT_CAP = 10240.0
DEFAULT_PRICE = 0.01


def build_instance(
    n,
    sites,
    times,
    max_delay=400.0,
    caps=None,
    price=DEFAULT_PRICE,
    places=None,
    kappa=0.01,
    media=MEDIA,
):
    """Instance with one server per site and participants cycled over the
    sites (or pinned via `places`).  Network cost is kappa times latency."""
    net = NetworkMatrix(
        sites=tuple(sites),
        time=tuple(tuple(float(x) for x in row) for row in times),
        cost=tuple(tuple(kappa * float(x) for x in row) for row in times),
    )
    caps = caps if caps is not None else [DEFAULT_CAP] * len(sites)
    servers = tuple(ServerSpec(site=s, capacity=c, cost_per_unit=price) for s, c in zip(sites, caps))
    if places is None:
        places = [sites[i % len(sites)] for i in range(n)]
    participants = tuple(Participant(id=f"p{i}", site=places[i]) for i in range(n))
    return Instance(
        servers=servers,
        participants=participants,
        network=net,
        media=media,
        qos=QosSpec(max_delay=max_delay),
    )


def two_site_net(t=30.0, kappa=0.01):
    return NetworkMatrix(
        sites=("a", "b"),
        time=((0.0, t), (t, 0.0)),
        cost=((0.0, kappa * t), (kappa * t, 0.0)),
    )


def pair_colocated(max_delay=400.0):
    """Two participants on one site with one server: cheapest possible mix."""
    return Instance(
        servers=(ServerSpec("a", DEFAULT_CAP, DEFAULT_PRICE),),
        participants=(Participant("p0", "a"), Participant("p1", "a")),
        network=two_site_net(),
        media=MEDIA,
        qos=QosSpec(max_delay),
    )


def pair_two_site(max_delay=400.0):
    """One participant per site, 30 ms apart, a server at each site."""
    return Instance(
        servers=(ServerSpec("a", DEFAULT_CAP, DEFAULT_PRICE), ServerSpec("b", DEFAULT_CAP, DEFAULT_PRICE)),
        participants=(Participant("p0", "a"), Participant("p1", "b")),
        network=two_site_net(),
        media=MEDIA,
        qos=QosSpec(max_delay),
    )


def quad_two_server(max_delay=400.0, price=DEFAULT_PRICE):
    """Two participants per site across a 30 ms link."""
    return Instance(
        servers=(ServerSpec("a", DEFAULT_CAP, price), ServerSpec("b", DEFAULT_CAP, price)),
        participants=(
            Participant("p0", "a"),
            Participant("p1", "a"),
            Participant("p2", "b"),
            Participant("p3", "b"),
        ),
        network=two_site_net(),
        media=MEDIA,
        qos=QosSpec(max_delay),
    )


def tight_pair(max_delay=70.0):
    """pair_two_site with a bound just under the raw round trip, so the
    optimum is forced to compress."""
    return pair_two_site(max_delay=max_delay)


def star8():
    """Eight participants on a single site and server."""
    return build_instance(8, ["a"], [[0.0]])


def total_cost(plan, instance, cost_mode=PER_MB):
    return eval_server_cost(plan, instance, cost_mode) + eval_network_cost(plan, instance)
