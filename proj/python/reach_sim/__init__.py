"""Python bindings for the community GPU network simulator."""

from ._core import (
    FEATURE_DIMS,
    TRACE_HEADER,
    ConfigError,
    ContractViolation,
    DispatchRejected,
    Engine,
    ProtocolError,
    Scenario,
    generate_workload,
    presets,
    protocol_roundtrip,
    reward,
    run,
)

__all__ = [
    "FEATURE_DIMS",
    "TRACE_HEADER",
    "ConfigError",
    "ContractViolation",
    "DispatchRejected",
    "Engine",
    "ProtocolError",
    "Scenario",
    "generate_workload",
    "presets",
    "protocol_roundtrip",
    "reward",
    "run",
]
