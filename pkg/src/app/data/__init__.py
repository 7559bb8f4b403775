from src.app.data.episodes import Episode, check_episode_feasible, sample_episode
from src.app.data.images import bilinear_resize, decode_and_resize, index_image_folder
from src.app.data.index import DatasetIndex, ExampleRef, Modality, ModalityKind
from src.app.data.loader import ExampleLoader
from src.app.data.splits import ClassSplit, split_classes
from src.app.data.synthetic import (
    SyntheticSpec,
    generate_synthetic,
    load_synthetic_archive,
    save_synthetic_archive,
)

__all__ = [
    "ClassSplit",
    "DatasetIndex",
    "Episode",
    "ExampleLoader",
    "ExampleRef",
    "Modality",
    "ModalityKind",
    "SyntheticSpec",
    "bilinear_resize",
    "check_episode_feasible",
    "decode_and_resize",
    "generate_synthetic",
    "index_image_folder",
    "load_synthetic_archive",
    "sample_episode",
    "save_synthetic_archive",
    "split_classes",
]
