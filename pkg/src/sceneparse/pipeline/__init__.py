"""Dataset handling, training orchestration, evaluation and rendering."""
from .config import RunConfig
from .dataset import Dataset, DatasetManifest, load_dataset, split_folds
from .metrics import Metrics, confusion_counts, evaluate
from .model import ParseResult, SceneParser
from .render import render_overlay, write_overlay
from .synth import SceneGrammar, default_grammar, generate_corpus, generate_scene, synth_corpus

__all__ = [
    "RunConfig",
    "Dataset",
    "DatasetManifest",
    "load_dataset",
    "split_folds",
    "Metrics",
    "confusion_counts",
    "evaluate",
    "ParseResult",
    "SceneParser",
    "render_overlay",
    "write_overlay",
    "SceneGrammar",
    "default_grammar",
    "generate_corpus",
    "generate_scene",
    "synth_corpus",
]
