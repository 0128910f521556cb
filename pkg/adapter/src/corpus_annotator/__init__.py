"""corpus_annotator: raw post dumps to annotated interchange records."""

__version__ = "0.1.0"
