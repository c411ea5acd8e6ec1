"""Deterministic federated pub/sub middleware.

The native module covers logical tags, the adaptive serializer and topology
validation. Benchmarks and daemons live in the hprm-bench, hprm-rti and
hprm-store executables.
"""

from ._hprm import (
    HprmError,
    Tag,
    classify,
    delay_tag,
    deserialize,
    format_report,
    measure_throughput,
    next_microstep,
    normalize_topology,
    payload_layout,
    percentile,
    serialize,
    validate_topology,
)

__all__ = [
    "HprmError",
    "Tag",
    "classify",
    "delay_tag",
    "deserialize",
    "format_report",
    "measure_throughput",
    "next_microstep",
    "normalize_topology",
    "payload_layout",
    "percentile",
    "serialize",
    "validate_topology",
]
