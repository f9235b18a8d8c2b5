"""livesense: real-time monostatic Wi-Fi CSI range-Doppler sensing engine.

Converts CSI frame streams into range/Doppler estimates, CFAR detections,
multi-target tracks, and breathing-rate indicators, with a physics-faithful
simulator as the test oracle and a WebSocket console API for live steering.
"""

from .clutter import BackgroundEstimator
from .config import (
    SPEED_OF_LIGHT,
    ConfigError,
    SensingConfig,
    apply_patch,
    load_config,
    parse_config,
    range_axis,
    subcarrier_frequencies,
    velocity_axis,
)
from .detect import Detection, cfar_detect, extract_detections, noise_floor
from .frames import FLAG_GAP_FILLED, FLAG_LOW_CONFIDENCE, CsiFrame
from .pipeline import BatchResult, FrameBuffer, GridResampler, Pipeline, batch_fingerprint
from .rdmap import RangeDopplerMap, RangeProfile, doppler_process, range_profile, refine_peak
from .simulator import (
    ImpairmentModel,
    Leakage,
    MicroMotion,
    Scene,
    TargetSpec,
    generate_frame,
    generate_trace,
    load_scene,
    parse_scene,
    realistic_impairments,
)
from .sync import SyncState, Synchronizer, apply_delay, estimate_coarse_delay, estimate_fine_delay, phase_correct
from .tracefile import TraceDecodeError, decode_trace, encode_trace, read_trace, write_trace
from .tracking import Tracker, TrackView
from .vitals import PresenceDecision, VitalsEstimate, presence_decision, vitals_estimate

__version__ = "0.1.0"

__all__ = [
    "BackgroundEstimator",
    "BatchResult",
    "ConfigError",
    "CsiFrame",
    "Detection",
    "FLAG_GAP_FILLED",
    "FLAG_LOW_CONFIDENCE",
    "FrameBuffer",
    "GridResampler",
    "ImpairmentModel",
    "Leakage",
    "MicroMotion",
    "Pipeline",
    "PresenceDecision",
    "RangeDopplerMap",
    "RangeProfile",
    "SPEED_OF_LIGHT",
    "Scene",
    "SensingConfig",
    "SyncState",
    "Synchronizer",
    "TargetSpec",
    "TraceDecodeError",
    "Tracker",
    "TrackView",
    "VitalsEstimate",
    "apply_delay",
    "apply_patch",
    "batch_fingerprint",
    "cfar_detect",
    "decode_trace",
    "doppler_process",
    "encode_trace",
    "estimate_coarse_delay",
    "estimate_fine_delay",
    "extract_detections",
    "generate_frame",
    "generate_trace",
    "load_config",
    "load_scene",
    "noise_floor",
    "parse_config",
    "parse_scene",
    "phase_correct",
    "presence_decision",
    "range_axis",
    "range_profile",
    "read_trace",
    "realistic_impairments",
    "refine_peak",
    "subcarrier_frequencies",
    "velocity_axis",
    "vitals_estimate",
    "write_trace",
]
