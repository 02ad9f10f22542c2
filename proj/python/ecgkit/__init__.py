from ._ecgkit import (
    CLASS_NAMES,
    LEAD_NAMES,
    Classifier,
    EcgError,
    apply_filter,
    design_bandpass,
    detect_qrs,
    detect_record,
    metrics,
    rasterize,
    read_record,
    write_record,
)

__all__ = [
    "CLASS_NAMES",
    "LEAD_NAMES",
    "Classifier",
    "EcgError",
    "apply_filter",
    "design_bandpass",
    "detect_qrs",
    "detect_record",
    "metrics",
    "rasterize",
    "read_record",
    "write_record",
]
