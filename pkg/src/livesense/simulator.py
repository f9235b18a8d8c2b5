"""Physics-faithful CSI simulator: ground-truth targets plus hardware impairments.

The channel model is a sum of a direct Tx-Rx coupling (leakage) tap and
point targets, each contributing a carrier-phase term (Doppler across
frames) and a subcarrier-phase term (delay across frequency) driven by the
same round-trip range R(t), so range walk and Doppler stay mutually
consistent. Impairments are applied multiplicatively afterwards:

    csi[k] = [ L e^{-j2 pi f_k tau_L}
               + sum_i a_i e^{-j4 pi f_c R_i(t)/c} e^{-j4 pi f_k R_i(t)/c}
               + n_k ] * e^{j phi_m} * e^{-j2 pi f_k delta_m}

Frame generation is pure given (scene, config, frame index): the RNG is
keyed by (seed, frame index), so frames can be produced in any order or in
parallel with bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SPEED_OF_LIGHT, ConfigError, SensingConfig, parse_kv_text, subcarrier_frequencies
from .frames import CsiFrame


@dataclass(frozen=True)
class MicroMotion:
    """Sinusoidal range modulation (breathing-scale, sub-resolution)."""

    amp_m: float
    freq_hz: float
    phase_rad: float = 0.0


@dataclass(frozen=True)
class TargetSpec:
    range0_m: float
    velocity_mps: float = 0.0
    amplitude: float = 1.0
    micro: MicroMotion | None = None

    def __post_init__(self) -> None:
        if self.range0_m < 0:
            raise ValueError("range0_m must be >= 0")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be > 0")

    def range_at(self, t: float) -> float:
        r = self.range0_m + self.velocity_mps * t
        if self.micro is not None:
            r += self.micro.amp_m * np.sin(
                2.0 * np.pi * self.micro.freq_hz * t + self.micro.phase_rad
            )
        return r


@dataclass(frozen=True)
class Leakage:
    amplitude: float = 1.0
    delay_s: float = 0.0


@dataclass(frozen=True)
class ImpairmentModel:
    """Hardware non-idealities: coupling, noise, clock errors, frame loss.

    cpo redraws a uniform(-pi, pi] common phase offset independently per
    frame (worst case); sfo is a deterministic fractional-delay drift
    delta_m = sfo_ppm * 1e-6 * m * T plus optional Gaussian jitter.
    """

    leakage: Leakage = field(default_factory=Leakage)
    noise_power: float = 0.0  # per-subcarrier complex Gaussian variance
    cpo: bool = False
    sfo_ppm: float = 0.0
    sfo_jitter_std_s: float = 0.0
    timing_jitter_s: float = 0.0  # timestamp jitter std, seconds
    drop_prob: float = 0.0

    def __post_init__(self) -> None:
        if self.noise_power < 0 or self.leakage.amplitude < 0:
            raise ValueError("noise_power and leakage amplitude must be >= 0")
        if self.leakage.delay_s < 0:
            raise ValueError("leakage delay_s must be >= 0")
        if not 0.0 <= self.drop_prob < 1.0:
            raise ValueError("drop_prob must be in [0, 1)")


@dataclass(frozen=True)
class Scene:
    targets: tuple[TargetSpec, ...] = ()
    impairments: ImpairmentModel = field(default_factory=ImpairmentModel)
    rng_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(self.targets))


def realistic_impairments(
    noise_power: float = 0.0,
    leakage_amplitude: float = 1.0,
    drop_prob: float = 0.02,
) -> ImpairmentModel:
    """Default 'everything on' impairment set used by accuracy harnesses."""
    return ImpairmentModel(
        leakage=Leakage(amplitude=leakage_amplitude, delay_s=0.0),
        noise_power=noise_power,
        cpo=True,
        sfo_ppm=20.0,
        sfo_jitter_std_s=0.05e-9,
        timing_jitter_s=2e-3,
        drop_prob=drop_prob,
    )


def _frame_rng(scene: Scene, m: int) -> np.random.Generator:
    return np.random.default_rng((scene.rng_seed, m, 0))


def _drop_rng(scene: Scene, m: int) -> np.random.Generator:
    return np.random.default_rng((scene.rng_seed, m, 1))


def generate_frame(scene: Scene, config: SensingConfig, m: int) -> CsiFrame:
    """Synthesize the CSI frame with index m (t_m = m * T).

    All per-frame random draws happen in a fixed order and are taken even
    when the corresponding impairment is disabled, so scenes sharing a seed
    share phase/noise/jitter realizations regardless of toggles.
    """
    if m < 0:
        raise ValueError("frame index must be >= 0")
    imp = scene.impairments
    n = config.n_subcarriers
    t = config.frame_interval_s * m
    f_k = subcarrier_frequencies(config)
    f_c = config.carrier_freq_hz

    rng = _frame_rng(scene, m)
    noise_re = rng.standard_normal(n)
    noise_im = rng.standard_normal(n)
    cpo_phase = rng.uniform(-np.pi, np.pi)
    sfo_jitter = rng.standard_normal()
    timing_jitter = rng.standard_normal()

    csi = np.zeros(n, dtype=np.complex128)
    if imp.leakage.amplitude > 0:
        csi += imp.leakage.amplitude * np.exp(-2j * np.pi * f_k * imp.leakage.delay_s)
    for target in scene.targets:
        r = target.range_at(t)
        carrier = np.exp(-4j * np.pi * f_c * r / SPEED_OF_LIGHT)
        csi += target.amplitude * carrier * np.exp(-4j * np.pi * f_k * r / SPEED_OF_LIGHT)
    if imp.noise_power > 0:
        sigma = np.sqrt(imp.noise_power / 2.0)
        csi += sigma * (noise_re + 1j * noise_im)

    delta = imp.sfo_ppm * 1e-6 * t + imp.sfo_jitter_std_s * sfo_jitter
    if imp.cpo:
        csi *= np.exp(1j * cpo_phase)
    if delta != 0.0:
        csi *= np.exp(-2j * np.pi * f_k * delta)

    # Jitter is clamped to +-0.45 T so timestamps stay strictly monotonic.
    jitter = imp.timing_jitter_s * timing_jitter
    limit = 0.45 * config.frame_interval_s
    timestamp = t + float(np.clip(jitter, -limit, limit))
    return CsiFrame(timestamp=timestamp, seq=m, csi=csi)


def frame_dropped(scene: Scene, m: int) -> bool:
    """Whether frame m is lost in transit (independent per frame)."""
    if scene.impairments.drop_prob <= 0.0:
        return False
    return bool(_drop_rng(scene, m).uniform() < scene.impairments.drop_prob)


def generate_trace(scene: Scene, config: SensingConfig, n_frames: int) -> list[CsiFrame]:
    """Frames m = 0..n_frames-1 with dropped frames removed (seq gaps visible)."""
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    return [
        generate_frame(scene, config, m)
        for m in range(n_frames)
        if not frame_dropped(scene, m)
    ]


# -- scene file codec ---------------------------------------------------------

_SCENE_KEYS = {
    "rng_seed": int,
    "leakage.amplitude": float,
    "leakage.delay_s": float,
    "noise_power": float,
    "cpo": bool,
    "sfo_ppm": float,
    "sfo_jitter_std_s": float,
    "timing_jitter_s": float,
    "drop_prob": float,
}

_TARGET_KEYS = {
    "range0_m": float,
    "velocity_mps": float,
    "amplitude": float,
    "micro.amp_m": float,
    "micro.freq_hz": float,
    "micro.phase_rad": float,
}


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def parse_scene(text: str) -> Scene:
    """Parse the scene file: flat impairment keys plus repeated [target] blocks."""
    top: dict = {}
    targets: list[dict] = []
    for section, key, value in parse_kv_text(text):
        if key is None:  # section header
            if section != "target":
                raise ConfigError(f"unknown scene section [{section}]")
            targets.append({})
            continue
        if section is None:
            if key not in _SCENE_KEYS:
                raise ConfigError(f"unknown scene key {key!r}")
            kind = _SCENE_KEYS[key]
            try:
                top[key] = _parse_bool(value) if kind is bool else kind(value)
            except ValueError as exc:
                raise ConfigError(f"invalid value for {key!r}: {exc}") from None
        else:
            if key not in _TARGET_KEYS:
                raise ConfigError(f"unknown target key {key!r}")
            try:
                targets[-1][key] = _TARGET_KEYS[key](value)
            except ValueError as exc:
                raise ConfigError(f"invalid value for {key!r}: {exc}") from None
    return scene_from_dict({"top": top, "targets": targets})


def scene_from_dict(data: dict) -> Scene:
    """Build a Scene from {'top': {...}, 'targets': [{...}]} (JSON-friendly)."""
    top = dict(data.get("top", {}))
    target_specs = []
    for tdict in data.get("targets", []):
        micro = None
        if any(k.startswith("micro.") for k in tdict):
            micro = MicroMotion(
                amp_m=float(tdict.get("micro.amp_m", 0.0)),
                freq_hz=float(tdict.get("micro.freq_hz", 0.0)),
                phase_rad=float(tdict.get("micro.phase_rad", 0.0)),
            )
        try:
            target_specs.append(
                TargetSpec(
                    range0_m=float(tdict.get("range0_m", 0.0)),
                    velocity_mps=float(tdict.get("velocity_mps", 0.0)),
                    amplitude=float(tdict.get("amplitude", 1.0)),
                    micro=micro,
                )
            )
        except ValueError as exc:
            raise ConfigError(f"invalid [target]: {exc}") from None
    try:
        impairments = ImpairmentModel(
            leakage=Leakage(
                amplitude=float(top.get("leakage.amplitude", 1.0)),
                delay_s=float(top.get("leakage.delay_s", 0.0)),
            ),
            noise_power=float(top.get("noise_power", 0.0)),
            cpo=bool(top.get("cpo", False)),
            sfo_ppm=float(top.get("sfo_ppm", 0.0)),
            sfo_jitter_std_s=float(top.get("sfo_jitter_std_s", 0.0)),
            timing_jitter_s=float(top.get("timing_jitter_s", 0.0)),
            drop_prob=float(top.get("drop_prob", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid scene: {exc}") from None
    return Scene(
        targets=tuple(target_specs),
        impairments=impairments,
        rng_seed=int(top.get("rng_seed", 0)),
    )


def format_scene(scene: Scene) -> str:
    imp = scene.impairments
    lines = [
        f"rng_seed = {scene.rng_seed}",
        f"leakage.amplitude = {imp.leakage.amplitude}",
        f"leakage.delay_s = {imp.leakage.delay_s}",
        f"noise_power = {imp.noise_power}",
        f"cpo = {'true' if imp.cpo else 'false'}",
        f"sfo_ppm = {imp.sfo_ppm}",
        f"sfo_jitter_std_s = {imp.sfo_jitter_std_s}",
        f"timing_jitter_s = {imp.timing_jitter_s}",
        f"drop_prob = {imp.drop_prob}",
    ]
    for target in scene.targets:
        lines.append("")
        lines.append("[target]")
        lines.append(f"range0_m = {target.range0_m}")
        lines.append(f"velocity_mps = {target.velocity_mps}")
        lines.append(f"amplitude = {target.amplitude}")
        if target.micro is not None:
            lines.append(f"micro.amp_m = {target.micro.amp_m}")
            lines.append(f"micro.freq_hz = {target.micro.freq_hz}")
            lines.append(f"micro.phase_rad = {target.micro.phase_rad}")
    return "\n".join(lines) + "\n"


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scene(fh.read())
