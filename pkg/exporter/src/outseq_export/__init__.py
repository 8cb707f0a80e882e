"""Embedding exporter: writes the tagger toolkit's embedding file formats.

Static mode emits one vector per corpus vocabulary word in the classic text
layout; contextual mode emits JSON Lines with one record per sentence keyed
``<doc_id>:<sentence_index>`` and one vector per corpus token, pooling
subword pieces (mean or first-subword). Exports are deterministic: the same
job always produces identical files.
"""

__version__ = "0.1.0"

from .backends import MODEL_DIMS, resolve_model
from .export import ExportJob, export_contextual, export_static
