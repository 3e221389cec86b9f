"""Offline data collection: threshold sweeps, smoothing, normalisation,
splits and the JSON-lines dataset format."""
from .curves import (
    SCHEMA_VERSION,
    THETA_GRID,
    DatasetFormatError,
    ProblemCurve,
    SplitSpec,
    normalize_curve,
    quantize_image,
    read_dataset,
    split_dataset,
    write_dataset,
)
from .measure import (
    RawCurve,
    TimingPolicy,
    build_curve,
    collect_curves,
    machine_tag,
    measure_curve,
    measure_point,
    repeat_count,
)
from .savgol import review_curve, savgol_smooth

__all__ = [
    "SCHEMA_VERSION",
    "THETA_GRID",
    "DatasetFormatError",
    "ProblemCurve",
    "RawCurve",
    "SplitSpec",
    "TimingPolicy",
    "build_curve",
    "collect_curves",
    "machine_tag",
    "measure_curve",
    "measure_point",
    "normalize_curve",
    "quantize_image",
    "read_dataset",
    "repeat_count",
    "review_curve",
    "savgol_smooth",
    "split_dataset",
    "write_dataset",
]
