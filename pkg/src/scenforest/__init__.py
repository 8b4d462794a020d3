"""Highway scenario generation, forest-based clustering, and classification.

Pipeline: seeded traffic microsimulation -> time-headway scenario extraction
-> unsupervised random-forest clustering with path proximity -> proximity
matrix seriation and rendering -> range-file labeling -> confidence-
thresholded random-forest classification of new scenarios.
"""

from .dataset import (
    Dataset,
    LabeledDataset,
    ParseError,
    ProximityMatrix,
    load_dataset,
    load_labeled_dataset,
    load_matrix,
    save_dataset,
    save_labeled_dataset,
    save_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "LabeledDataset",
    "ParseError",
    "ProximityMatrix",
    "load_dataset",
    "load_labeled_dataset",
    "load_matrix",
    "save_dataset",
    "save_labeled_dataset",
    "save_matrix",
    "__version__",
]
