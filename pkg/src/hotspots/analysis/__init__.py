"""Gradient recovery, critical points, nodal sets and boundary identities."""

from .critical import (CriticalKind, CriticalPoint, CriticalSearch, VertexExtremum,
                       find_critical_points, index_of, vertex_extrema)
from .gradient import RecoveredGradient, directional_field, recover_gradient
from .identities import (check_monotone, count_critical_on_N, sign_component_check,
                         tao_identity_check, traced_vertex_incidence)
from .nodal import EndpointKind, NodalGraph, hausdorff, nodal_graph

__all__ = [
    "CriticalKind", "CriticalPoint", "CriticalSearch", "VertexExtremum", "find_critical_points",
    "index_of", "vertex_extrema", "RecoveredGradient", "directional_field", "recover_gradient",
    "check_monotone", "count_critical_on_N", "sign_component_check", "tao_identity_check",
    "traced_vertex_incidence", "EndpointKind", "NodalGraph", "hausdorff", "nodal_graph",
]
