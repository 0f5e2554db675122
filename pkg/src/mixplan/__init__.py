"""Cost-minimizing placement of video mixers and stream compressors.

Given conference participants spread over geo-distributed sites, a set
of candidate servers, pairwise network delays/prices, and an end-to-end
delay bound, this package decides how many mixer and compressor VMs to
create, where to put them, and how to wire the streams.

Entry points:

* `cram_allocate` - fast four-phase placement heuristic
* `brute_force_optimal` - provably optimal search for small instances
* `export_lp` / `solve_lp_document` - the same model as solver-ready LP text
* `validate_plan` / `metrics` - check and score any plan
* `scenarios` - reproducible benchmark instances over a bundled
  latency snapshot
* CLI: `mixplan solve|exact|validate|sweep|export-lp`
"""

from .errors import (
    BoundsExceededError,
    BudgetExceededError,
    InfeasibleError,
    InvalidInstanceError,
    LpFormatError,
    MixplanError,
    StructuralError,
)
from .exact import (
    LpDocument,
    LpSolution,
    SearchBounds,
    brute_force_optimal,
    export_lp,
    solve_lp_document,
)
from .heuristic import cram_allocate, dsort, min_mixers
from .model.metrics import (
    PER_MB,
    PER_VM,
    eval_delays,
    eval_network_cost,
    eval_server_cost,
    metrics,
)
from .model.serialize import (
    dumps_instance,
    dumps_plan,
    load_instance,
    load_plan,
    loads_instance,
    loads_plan,
)
from .model.types import (
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
    Violation,
    VmInstance,
)
from .model.validate import ALL_FAMILIES, STRUCTURAL_FAMILIES, validate_plan

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "MixplanError",
    "InvalidInstanceError",
    "StructuralError",
    "InfeasibleError",
    "BoundsExceededError",
    "BudgetExceededError",
    "LpFormatError",
    # domain types
    "EPS",
    "MIXER",
    "COMPRESSOR",
    "Site",
    "NetworkMatrix",
    "ServerSpec",
    "Participant",
    "MediaCostModel",
    "QosSpec",
    "Instance",
    "VmInstance",
    "Endpoint",
    "StreamEdge",
    "Plan",
    "PlanMetrics",
    "Violation",
    # evaluation
    "PER_MB",
    "PER_VM",
    "eval_server_cost",
    "eval_network_cost",
    "eval_delays",
    "metrics",
    "ALL_FAMILIES",
    "STRUCTURAL_FAMILIES",
    "validate_plan",
    # solvers
    "cram_allocate",
    "min_mixers",
    "dsort",
    "SearchBounds",
    "brute_force_optimal",
    "LpDocument",
    "LpSolution",
    "export_lp",
    "solve_lp_document",
    # io
    "load_instance",
    "loads_instance",
    "dumps_instance",
    "load_plan",
    "loads_plan",
    "dumps_plan",
]
