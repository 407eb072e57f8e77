"""Information-propagation diagnostics for graphs and small message-passing models.

Over-smoothing, over-squashing, under-reaching and causal position bias,
measured on explicit topologies and on seeded reference models, plus
Jacobian bounds and bottleneck-reducing rewiring.
"""

__version__ = "0.1.0"

from .graph import (Graph, GraphError, WalkCountOverflow, adjacency_power, build_graph,  # noqa: E402
                    generate, receptive_field)
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "BACKEND",
    "Graph",
    "GraphError",
    "WalkCountOverflow",
    "__version__",
    "adjacency_power",
    "build_graph",
    "generate",
    "receptive_field",
]
