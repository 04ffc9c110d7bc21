"""Out-of-fold foundation-model row embeddings for categorical tables.

Fits the model on all folds but one, embeds the held-out rows, and writes
the reassembled matrix in the EMBEDV1 exchange format.
"""

from .exporter import (
    EmbedderUnavailableError,
    ExportJob,
    ExportResult,
    TabPFNEmbedder,
    export_embeddings,
)

__version__ = "0.1.0"
