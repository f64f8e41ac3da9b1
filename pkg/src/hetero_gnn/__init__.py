"""GCN with anchor spectral features and a learned re-connected adjacency.

Submodules: ``graph_core`` (graphs, normalization, splits), ``datasets``,
``spectral`` (sc_dense / esc / esc_anch), ``structure_learn`` (A*),
``model`` (forward pass), ``train`` (gradients, Adam, experiments) and
``cli``.
"""

from .errors import HeteroGNNError
from .graph_core import Graph, homophily_ratio, normalize_sym, row_normalize, stratified_split
from .kernels import BACKEND
from .spectral import esc, esc_anch, sc_dense
from .train import HyperParams, fit, run_experiment

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Graph",
    "HeteroGNNError",
    "HyperParams",
    "esc",
    "esc_anch",
    "fit",
    "homophily_ratio",
    "normalize_sym",
    "row_normalize",
    "run_experiment",
    "sc_dense",
    "stratified_split",
]
