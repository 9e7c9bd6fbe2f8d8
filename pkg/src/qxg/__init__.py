"""Qualitative scene graphs from object traces, and explanations on top.

The pipeline in one breath: :mod:`qxg.scene` parses object traces,
:mod:`qxg.calculi` turns box geometry into symbolic spatial relations,
:mod:`qxg.builder` accumulates them frame by frame into a per-scene graph,
:mod:`qxg.explainer` trains per-action forests over relation chains and
ranks the object pairs behind an annotated action, :mod:`qxg.synthgen`
fabricates labeled scenarios to exercise all of it, and :mod:`qxg.bench`
times the hot path.
"""

from .builder import Builder, build, export_graph, import_graph
from .calculi import DEFAULT_CONFIG, CalculiConfig
from .explainer import build_dataset, evaluate, explain, load_model, save_model, train
from .scene import load_trace, serialize_scene
from .synthgen import generate_corpus, generate_dataset, generate_scene

__version__ = "0.1.0"

__all__ = [
    "Builder",
    "CalculiConfig",
    "DEFAULT_CONFIG",
    "build",
    "build_dataset",
    "evaluate",
    "explain",
    "export_graph",
    "generate_corpus",
    "generate_dataset",
    "generate_scene",
    "import_graph",
    "load_model",
    "load_trace",
    "save_model",
    "serialize_scene",
    "train",
    "__version__",
]
