"""Sensing configuration: RF geometry, processing knobs, and the physical axes.

Everything downstream (simulator, sync, range-Doppler transform, CFAR,
tracking, vitals) is parameterized by a single immutable ``SensingConfig``.
The config file format is a flat ``key = value`` text document with ``#``
comments and dotted keys for the nested groups (e.g. ``cfar.pfa = 1e-3``).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s

MODES = ("gesture", "presence", "efficiency")

# Per-mode processing knobs: gesture trades compute for fine range
# interpolation, presence keeps the full window cheap, efficiency
# additionally decimates subcarriers 4x.
MODE_ZERO_PAD = {"gesture": 8, "presence": 2, "efficiency": 1}
MODE_DECIMATION = {"gesture": 1, "presence": 1, "efficiency": 4}

# Keys that size buffers/axes for the whole session; a running pipeline
# rejects patches to these with "restart required".
STRUCTURAL_KEYS = frozenset(
    {"n_subcarriers", "bandwidth_hz", "frame_interval_s", "doppler_batch"}
)


class ConfigError(ValueError):
    """Invalid configuration key, value, or combination."""


@dataclass(frozen=True)
class SicConfig:
    kind: str = "sliding_mean"  # sliding_mean | ema | template
    window_k: int = 64
    alpha: float = 0.02


@dataclass(frozen=True)
class CfarConfig:
    guard_r: int = 2
    guard_d: int = 2
    train_r: int = 6
    train_d: int = 4
    pfa: float = 1e-3


@dataclass(frozen=True)
class TrackConfig:
    gate_range_m: float = 0.5
    gate_vel_mps: float = 0.15
    confirm_hits: int = 3
    delete_misses: int = 3


@dataclass(frozen=True)
class VitalsConfig:
    window_frames: int = 1024
    band_hz: tuple[float, float] = (0.1, 0.5)
    prominence_db: float = 6.0


@dataclass(frozen=True)
class SensingConfig:
    """All runtime parameters of one sensing session.

    Derived quantities (subcarrier spacing, wavelength, bin spacings) are
    exposed as properties so they can never drift out of sync with the
    base parameters.
    """

    bandwidth_hz: float = 160e6
    n_subcarriers: int = 512
    carrier_freq_hz: float = 6e9
    frame_interval_s: float = 0.025
    doppler_batch: int = 32
    buffer_factor: int = 4
    mode: str = "gesture"
    max_range_m: float = 5.0
    zero_pad_factor: int | None = None  # None -> per-mode default
    sic: SicConfig = field(default_factory=SicConfig)
    cfar: CfarConfig = field(default_factory=CfarConfig)
    track: TrackConfig = field(default_factory=TrackConfig)
    vitals: VitalsConfig = field(default_factory=VitalsConfig)

    def __post_init__(self) -> None:
        if self.bandwidth_hz <= 0:
            raise ConfigError("bandwidth_hz must be > 0")
        if not _is_pow2(self.n_subcarriers):
            raise ConfigError("n_subcarriers must be a power of two")
        if not _is_pow2(self.doppler_batch):
            raise ConfigError("doppler_batch must be a power of two")
        if self.frame_interval_s <= 0:
            raise ConfigError("frame_interval_s must be > 0")
        if self.buffer_factor < 1:
            raise ConfigError("buffer_factor must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_range_m <= 0:
            raise ConfigError("max_range_m must be > 0")
        if self.zero_pad_factor is not None and self.zero_pad_factor < 1:
            raise ConfigError("zero_pad_factor must be >= 1")
        if self.sic.kind not in ("sliding_mean", "ema", "template"):
            raise ConfigError(f"unknown sic.kind {self.sic.kind!r}")
        if self.sic.window_k < 1:
            raise ConfigError("sic.window_k must be >= 1")
        if not 0.0 < self.sic.alpha <= 1.0:
            raise ConfigError("sic.alpha must be in (0, 1]")
        cf = self.cfar
        if cf.guard_r < 0 or cf.guard_d < 0:
            raise ConfigError("cfar guard cells must be >= 0")
        if cf.train_r < 1 or cf.train_d < 1:
            raise ConfigError("cfar training cells must be >= 1")
        if not 0.0 < cf.pfa < 1.0:
            raise ConfigError("cfar.pfa must be in (0, 1)")
        tr = self.track
        if tr.gate_range_m <= 0 or tr.gate_vel_mps <= 0:
            raise ConfigError("track gates must be > 0")
        if tr.confirm_hits < 1 or tr.delete_misses < 1:
            raise ConfigError("track confirm_hits/delete_misses must be >= 1")
        vt = self.vitals
        if vt.window_frames < 8:
            raise ConfigError("vitals.window_frames must be >= 8")
        lo, hi = vt.band_hz
        if not 0.0 < lo < hi:
            raise ConfigError("vitals.band_hz must satisfy 0 < lo < hi")

    # -- derived RF geometry ------------------------------------------------

    @property
    def subcarrier_spacing_hz(self) -> float:
        return self.bandwidth_hz / self.n_subcarriers

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def effective_zero_pad(self) -> int:
        if self.zero_pad_factor is not None:
            return self.zero_pad_factor
        return MODE_ZERO_PAD[self.mode]

    @property
    def decimation(self) -> int:
        return MODE_DECIMATION[self.mode]

    @property
    def range_bin_m(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz * self.effective_zero_pad)

    @property
    def velocity_bin_mps(self) -> float:
        return self.wavelength_m / (2.0 * self.doppler_batch * self.frame_interval_s)

    @property
    def max_velocity_mps(self) -> float:
        """Unambiguous velocity half-span (magnitude of the most negative bin)."""
        return self.wavelength_m / (4.0 * self.frame_interval_s)

    @property
    def profile_bins(self) -> int:
        """Length of the zero-padded range profile before cropping."""
        return (self.n_subcarriers // self.decimation) * self.effective_zero_pad

    @property
    def n_range_bins(self) -> int:
        return min(
            int(math.floor(self.max_range_m / self.range_bin_m)) + 1,
            self.profile_bins,
        )

    @property
    def buffer_capacity(self) -> int:
        return self.buffer_factor * self.doppler_batch


def subcarrier_frequencies(config: SensingConfig) -> np.ndarray:
    """Baseband frequency of each subcarrier: f_k = (k - N/2) * df, k = 0..N-1."""
    n = config.n_subcarriers
    df = config.subcarrier_spacing_hz
    return (np.arange(n) - n // 2) * df


def range_axis(config: SensingConfig) -> np.ndarray:
    """Range bin centers in metres, bin 0 at zero round-trip delay.

    Spacing is c / (2 * B * zero_pad); the axis covers [0, max_range_m].
    """
    spacing = config.range_bin_m
    return np.arange(config.n_range_bins) * spacing


def velocity_axis(config: SensingConfig) -> np.ndarray:
    """Zero-centered radial-velocity bin centers in m/s, ascending.

    Spacing is lambda / (2 * M * T); positive velocity means increasing
    range (target receding). The axis spans [-lambda/(4T), +lambda/(4T) -
    spacing] and contains exactly one zero bin for even M.
    """
    m = config.doppler_batch
    return (np.arange(m) - m // 2) * config.velocity_bin_mps


# -- flat key-value codec ----------------------------------------------------

_BASE_FIELDS = {
    "bandwidth_hz": float,
    "n_subcarriers": int,
    "carrier_freq_hz": float,
    "frame_interval_s": float,
    "doppler_batch": int,
    "buffer_factor": int,
    "mode": str,
    "max_range_m": float,
    "zero_pad_factor": "optional_int",
}

_GROUP_FIELDS = {
    "sic.kind": str,
    "sic.window_k": int,
    "sic.alpha": float,
    "cfar.guard_r": int,
    "cfar.guard_d": int,
    "cfar.train_r": int,
    "cfar.train_d": int,
    "cfar.pfa": float,
    "track.gate_range_m": float,
    "track.gate_vel_mps": float,
    "track.confirm_hits": int,
    "track.delete_misses": int,
    "vitals.window_frames": int,
    "vitals.band_hz": "float_pair",
    "vitals.prominence_db": float,
}

CONFIG_KEYS = frozenset(_BASE_FIELDS) | frozenset(_GROUP_FIELDS)


def _is_pow2(n: int) -> bool:
    return isinstance(n, int) and n > 0 and (n & (n - 1)) == 0


def _coerce(key: str, value, kind):
    """Coerce a raw string/JSON value to the declared type of a config key."""
    try:
        if kind is int:
            if isinstance(value, str):
                return int(value, 0)
            if isinstance(value, float) and not value.is_integer():
                raise ValueError("not an integer")
            return int(value)
        if kind is float:
            return float(value)
        if kind is str:
            return str(value).strip()
        if kind == "optional_int":
            if value is None:
                return None
            if isinstance(value, str):
                v = value.strip().lower()
                if v in ("auto", "none", ""):
                    return None
                return int(v, 0)
            return int(value)
        if kind == "float_pair":
            if isinstance(value, str):
                parts = [p for p in value.replace(",", " ").split() if p]
            else:
                parts = list(value)
            if len(parts) != 2:
                raise ValueError("expected two values")
            return (float(parts[0]), float(parts[1]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {key!r}: {value!r} ({exc})") from None
    raise AssertionError(f"unhandled kind {kind!r}")


def parse_kv_text(text: str):
    """Parse ``key = value`` lines (with ``#`` comments and ``[section]``
    headers) into a list of (section_or_None, key, raw_value) triples."""
    entries = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            entries.append((section, None, None))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        entries.append((section, key.strip(), value.strip()))
    return entries


def config_from_items(items: dict) -> SensingConfig:
    """Build a SensingConfig from a flat {dotted_key: value} mapping.

    Unknown keys are errors; values may be raw strings (config file) or
    JSON-typed (websocket patches).
    """
    return apply_patch(SensingConfig(), items, allow_structural=True)


def apply_patch(
    config: SensingConfig, patch: dict, *, allow_structural: bool = False
) -> SensingConfig:
    """Return a new config with ``patch`` applied; validates keys and values.

    Structural keys (subcarrier count, bandwidth, frame interval, batch
    size) are rejected unless ``allow_structural`` because a running
    session cannot resize its buffers.
    """
    base_updates: dict = {}
    group_updates: dict[str, dict] = {}
    for key, value in patch.items():
        key = str(key).strip()
        if key in _BASE_FIELDS:
            if key in STRUCTURAL_KEYS and not allow_structural:
                raise ConfigError(f"{key!r} is structural: restart required")
            base_updates[key] = _coerce(key, value, _BASE_FIELDS[key])
        elif key in _GROUP_FIELDS:
            group, _, sub = key.partition(".")
            group_updates.setdefault(group, {})[sub] = _coerce(
                key, value, _GROUP_FIELDS[key]
            )
        else:
            raise ConfigError(f"unknown config key {key!r}")

    for group, updates in group_updates.items():
        base_updates[group] = dataclasses.replace(getattr(config, group), **updates)
    try:
        return dataclasses.replace(config, **base_updates)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> SensingConfig:
    """Load a SensingConfig from a flat key-value file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def parse_config(text: str) -> SensingConfig:
    items = {}
    for section, key, value in parse_kv_text(text):
        if section is not None:
            raise ConfigError(f"unexpected section [{section}] in config file")
        items[key] = value
    return config_from_items(items)


def format_config(config: SensingConfig) -> str:
    """Render a config as the flat key-value file format (parse round-trips)."""
    lines = []
    for key in _BASE_FIELDS:
        value = getattr(config, key)
        if value is None:
            value = "auto"
        lines.append(f"{key} = {value}")
    for key in _GROUP_FIELDS:
        group, _, sub = key.partition(".")
        value = getattr(getattr(config, group), sub)
        if isinstance(value, tuple):
            value = ", ".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def config_to_dict(config: SensingConfig) -> dict:
    """Flat JSON-friendly view of a config (dotted keys, used on the wire)."""
    out: dict = {}
    for key in _BASE_FIELDS:
        out[key] = getattr(config, key)
    for key in _GROUP_FIELDS:
        group, _, sub = key.partition(".")
        value = getattr(getattr(config, group), sub)
        out[key] = list(value) if isinstance(value, tuple) else value
    return out
