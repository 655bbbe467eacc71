"""Grounded coreference annotation platform.

Core pieces: corpus ingest (``ingest``), the annotation data model
(``model``), inter-annotator agreement (``agreement``), coreference
scoring and cluster conversion (``metrics``, ``clusters``), corpus and
CoNLL-2012 I/O (``corpus_io``, ``conll``), and the HTTP task service
(``service``).
"""

__version__ = "0.1.0"
