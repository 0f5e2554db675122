"""Domain model: types, evaluation, validation, and constraint matrices."""

from .artifacts import IlpArtifacts, build_artifacts
from .metrics import (
    PER_MB,
    PER_VM,
    allocated_memory,
    compression_rates,
    eval_delays,
    eval_network_cost,
    eval_server_cost,
    metrics,
    stream_arrival_times,
)
from .serialize import (
    dumps_instance,
    dumps_plan,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    load_plan,
    loads_instance,
    loads_plan,
    metrics_to_dict,
    plan_from_dict,
    plan_to_dict,
)
from .types import (
    COMPRESSOR,
    EPS,
    MIXER,
    Endpoint,
    Instance,
    MediaCostModel,
    NetworkMatrix,
    Participant,
    Plan,
    PlanMetrics,
    QosSpec,
    ServerSpec,
    Site,
    StreamEdge,
    VmInstance,
    Violation,
)
from .validate import ALL_FAMILIES, STRUCTURAL_FAMILIES, carried_streams, validate_plan

__all__ = [
    "ALL_FAMILIES",
    "COMPRESSOR",
    "EPS",
    "Endpoint",
    "IlpArtifacts",
    "Instance",
    "MIXER",
    "MediaCostModel",
    "NetworkMatrix",
    "PER_MB",
    "PER_VM",
    "Participant",
    "Plan",
    "PlanMetrics",
    "QosSpec",
    "STRUCTURAL_FAMILIES",
    "ServerSpec",
    "Site",
    "StreamEdge",
    "Violation",
    "VmInstance",
    "allocated_memory",
    "build_artifacts",
    "carried_streams",
    "compression_rates",
    "dumps_instance",
    "dumps_plan",
    "eval_delays",
    "eval_network_cost",
    "eval_server_cost",
    "instance_from_dict",
    "instance_to_dict",
    "load_instance",
    "load_plan",
    "loads_instance",
    "loads_plan",
    "metrics",
    "metrics_to_dict",
    "plan_from_dict",
    "plan_to_dict",
    "stream_arrival_times",
    "validate_plan",
]
