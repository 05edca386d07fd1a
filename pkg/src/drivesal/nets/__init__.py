"""Network architectures, forward passes, saliency plumbing, checkpoints."""

from drivesal.nets.checkpoint import (
    FORMAT_MAGIC,
    FORMAT_VERSION,
    load_checkpoint,
    manifest_for,
    save_checkpoint,
)
from drivesal.nets.forward import (
    action_from_output,
    agent_forward,
    net1_forward,
    roadsal_forward,
)
from drivesal.nets.saliency_ops import (
    NORMALIZE_EPS,
    incorporate_saliency,
    normalize_map,
    upsample_map,
)
from drivesal.nets.specs import (
    SPEC_KINDS,
    AgentSpec,
    Net1Spec,
    RoadSalSpec,
    check_params,
    init_params,
    spec_from_dict,
    zero_params,
)

__all__ = [
    "FORMAT_MAGIC",
    "FORMAT_VERSION",
    "NORMALIZE_EPS",
    "SPEC_KINDS",
    "AgentSpec",
    "Net1Spec",
    "RoadSalSpec",
    "action_from_output",
    "agent_forward",
    "check_params",
    "incorporate_saliency",
    "init_params",
    "load_checkpoint",
    "manifest_for",
    "net1_forward",
    "normalize_map",
    "roadsal_forward",
    "save_checkpoint",
    "spec_from_dict",
    "upsample_map",
    "zero_params",
]
