"""Synthetic corpus generation: entity values, unstructured text, tables."""
from .config import ConfigError, GeneratorConfig
from .entities import FormatError, entity_formats, generate_entity_value, pick_format
from .structured import (
    ALL_COLUMN_LABELS,
    Table,
    build_columnar_training_set,
    generate_multicolumn_dataset,
    generate_singlecolumn_dataset,
    read_table_csv,
    read_table_jsonl,
    table_manifest,
    table_row_to_document,
    table_to_documents,
    write_table_csv,
    write_table_jsonl,
)
from .unstructured import (
    DELIMITED_SEPARATORS,
    generate_unstructured_corpus,
    generate_unstructured_sample,
)
from .words import (
    CAPITALIZATION_DIST,
    JOIN_COUNT_DIST,
    JOIN_DELIMITERS,
    WordDistribution,
    generate_background_word,
)

__all__ = [
    "ALL_COLUMN_LABELS",
    "CAPITALIZATION_DIST",
    "ConfigError",
    "DELIMITED_SEPARATORS",
    "FormatError",
    "GeneratorConfig",
    "JOIN_COUNT_DIST",
    "JOIN_DELIMITERS",
    "Table",
    "WordDistribution",
    "build_columnar_training_set",
    "entity_formats",
    "generate_background_word",
    "generate_entity_value",
    "generate_multicolumn_dataset",
    "generate_singlecolumn_dataset",
    "generate_unstructured_corpus",
    "generate_unstructured_sample",
    "pick_format",
    "read_table_csv",
    "read_table_jsonl",
    "table_manifest",
    "table_row_to_document",
    "table_to_documents",
    "write_table_csv",
    "write_table_jsonl",
]
