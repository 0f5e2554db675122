"""JSON (de)serialization for Instance and Plan files.

Key order is fixed by construction so identical objects always produce
byte-identical documents.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from ..errors import InvalidInstanceError, StructuralError
from .types import (
    Endpoint,
    Instance,
    MediaCostModel,
    NetworkMatrix,
    Participant,
    Plan,
    PlanMetrics,
    QosSpec,
    ServerSpec,
    StreamEdge,
    VmInstance,
)


def instance_to_dict(inst: Instance) -> dict[str, Any]:
    return {
        "servers": [
            {"site": s.site, "capacity_mb": s.capacity, "cost_per_mb": s.cost_per_unit}
            for s in inst.servers
        ],
        "participants": [{"id": p.id, "site": p.site} for p in inst.participants],
        "network": {
            "sites": list(inst.network.sites),
            "time_ms": [list(row) for row in inst.network.time],
            "cost": [list(row) for row in inst.network.cost],
        },
        "media": {
            "time_per_stream_ms": inst.media.time_per_stream,
            "resource_per_stream_mb": inst.media.resource_per_stream,
            "vm_overhead_mb": inst.media.vm_overhead,
            "max_compression_rate": inst.media.max_compression_rate,
            "fixed_gamma": inst.media.fixed_gamma,
        },
        "qos": {"max_delay_ms": inst.qos.max_delay},
    }


def instance_from_dict(doc: dict[str, Any]) -> Instance:
    try:
        net = doc["network"]
        kappa = float(net.get("kappa", 0.01))
        network = NetworkMatrix.from_time(
            sites=net["sites"],
            time=net["time_ms"],
            kappa=kappa,
            cost=net.get("cost"),
        )
        media = doc.get("media", {})
        qos = doc.get("qos", {})
        return Instance(
            servers=tuple(
                ServerSpec(
                    site=s["site"],
                    capacity=float(s["capacity_mb"]),
                    cost_per_unit=float(s["cost_per_mb"]),
                )
                for s in doc["servers"]
            ),
            participants=tuple(
                Participant(id=str(p["id"]), site=p["site"]) for p in doc["participants"]
            ),
            network=network,
            media=MediaCostModel(
                time_per_stream=float(media.get("time_per_stream_ms", 6.0)),
                resource_per_stream=float(media.get("resource_per_stream_mb", 20.0)),
                vm_overhead=float(media.get("vm_overhead_mb", 400.0)),
                max_compression_rate=float(media.get("max_compression_rate", 0.95)),
                fixed_gamma=float(media.get("fixed_gamma", 95.0)),
            ),
            qos=QosSpec(max_delay=float(qos.get("max_delay_ms", 400.0))),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInstanceError(f"malformed instance document: {exc}") from exc


def load_instance(path: str | Path) -> Instance:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInstanceError(f"{path}: not valid JSON at line {exc.lineno} col {exc.colno}") from exc
    return instance_from_dict(doc)


def loads_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInstanceError(f"not valid JSON at line {exc.lineno} col {exc.colno}") from exc
    return instance_from_dict(doc)


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2) + "\n"


def _endpoint_to_dict(e: Endpoint) -> dict[str, str]:
    return {"type": e.type, "id": e.id}


def _endpoint_from_dict(d: dict[str, Any]) -> Endpoint:
    return Endpoint(type=str(d["type"]), id=str(d["id"]))


def metrics_to_dict(m: PlanMetrics) -> dict[str, Any]:
    return {
        "server_cost": m.server_cost,
        "network_cost": m.network_cost,
        "total_cost": m.total_cost,
        "max_delay_ms": m.max_delay,
        "compression_rates": list(m.compression_rates),
        "vm_count": m.vm_count,
        "allocated_mb": m.allocated_memory,
    }


def plan_to_dict(
    plan: Plan,
    instance: Instance | None = None,
    metrics: PlanMetrics | None = None,
) -> dict[str, Any]:
    """Serialize a plan; when `instance` is given the vm entries echo the
    hosting site for readability."""
    vms = []
    for vm in plan.vms:
        entry: dict[str, Any] = {"id": vm.id, "kind": vm.kind, "server": vm.server}
        if instance is not None and 0 <= vm.server < len(instance.servers):
            entry["site"] = instance.servers[vm.server].site
        entry["input_count"] = vm.input_count
        vms.append(entry)
    doc: dict[str, Any] = {
        "vms": vms,
        "edges": [
            {
                "head": _endpoint_to_dict(e.head),
                "tail": _endpoint_to_dict(e.tail),
                "compression_rate": e.compression_rate,
            }
            for e in plan.edges
        ],
        "per_participant_delay_ms": {k: v for k, v in plan.per_participant_delay.items()},
        "feasible": plan.feasible,
    }
    if metrics is not None:
        doc["metrics"] = metrics_to_dict(metrics)
    return doc


def plan_from_dict(doc: dict[str, Any]) -> Plan:
    try:
        return Plan(
            vms=tuple(
                VmInstance(
                    id=str(v["id"]),
                    kind=str(v["kind"]),
                    server=int(v["server"]),
                    input_count=int(v.get("input_count", 0)),
                )
                for v in doc["vms"]
            ),
            edges=tuple(
                StreamEdge(
                    head=_endpoint_from_dict(e["head"]),
                    tail=_endpoint_from_dict(e["tail"]),
                    compression_rate=float(e.get("compression_rate", 0.0)),
                )
                for e in doc["edges"]
            ),
            per_participant_delay={
                str(k): float(v)
                for k, v in doc.get("per_participant_delay_ms", {}).items()
            },
            feasible=bool(doc.get("feasible", True)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StructuralError(f"malformed plan document: {exc}") from exc


def load_plan(path: str | Path) -> Plan:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise StructuralError(f"{path}: not valid JSON at line {exc.lineno} col {exc.colno}") from exc
    return plan_from_dict(doc)


def loads_plan(text: str) -> Plan:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StructuralError(f"not valid JSON at line {exc.lineno} col {exc.colno}") from exc
    return plan_from_dict(doc)


def dumps_plan(
    plan: Plan,
    instance: Instance | None = None,
    metrics: PlanMetrics | None = None,
) -> str:
    return json.dumps(plan_to_dict(plan, instance, metrics), indent=2) + "\n"
