"""Caching, sidecar metadata, external backend execution and citations."""

from .backend import (
    ExecutionRecord,
    load_templates,
    materialize_command,
    placeholders,
    run_backend,
    run_pipeline,
)
from .cache import (
    DEFAULT_RETENTION,
    HASH_ALGORITHM,
    TIME_FORMAT,
    Cache,
    ReuseDecision,
    RetentionPeriod,
    SidecarMetadata,
    format_retention,
    hash_input,
    hash_inputs,
    output_lock,
    parse_retention,
    read_sidecar,
    should_reuse,
    sidecar_path,
    write_sidecar,
)
from .citation import CitationConfig, citation_block

__all__ = [
    "DEFAULT_RETENTION", "HASH_ALGORITHM", "TIME_FORMAT", "Cache", "ReuseDecision",
    "RetentionPeriod", "SidecarMetadata", "format_retention", "hash_input", "hash_inputs",
    "output_lock", "parse_retention", "read_sidecar", "should_reuse", "sidecar_path",
    "write_sidecar", "ExecutionRecord", "load_templates", "materialize_command",
    "placeholders", "run_backend", "run_pipeline", "CitationConfig", "citation_block",
]
