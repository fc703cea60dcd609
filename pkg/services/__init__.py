"""Service layer: anyon models, fusion states, protocols and analysis."""

from .anyon_model import AnyonModelData, AnyonModelError, ConsistencyError, build_model
from .consistency import ConsistencyReport, semion_gluing_check, verify_consistency
from .fusion_state import AnyonState, Chirality
from .protocol_runner import BranchTree, UnknownProtocolError, build_branch_tree, get_protocol, run_shots
from .report_renderer import ReportRenderError, render_table

__all__ = [
    "AnyonModelData",
    "AnyonModelError",
    "ConsistencyError",
    "build_model",
    "ConsistencyReport",
    "semion_gluing_check",
    "verify_consistency",
    "AnyonState",
    "Chirality",
    "BranchTree",
    "UnknownProtocolError",
    "build_branch_tree",
    "get_protocol",
    "run_shots",
    "ReportRenderError",
    "render_table",
]
