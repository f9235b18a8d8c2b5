"""Shared fixtures and scene helpers for the test suite."""

import dataclasses

import pytest

from livesense import ImpairmentModel, Leakage, Scene, SensingConfig, TargetSpec


@pytest.fixture
def config():
    """The demo configuration: 160 MHz, 512 tones, 6 GHz, 25 ms, M=32."""
    return SensingConfig()


def make_config(**overrides) -> SensingConfig:
    return dataclasses.replace(SensingConfig(), **overrides)


def clean_impairments(**overrides) -> ImpairmentModel:
    """Leakage-only baseline: no noise, no clock errors, no drops."""
    defaults = dict(
        leakage=Leakage(amplitude=1.0, delay_s=0.0),
        noise_power=0.0,
        cpo=False,
        sfo_ppm=0.0,
        sfo_jitter_std_s=0.0,
        timing_jitter_s=0.0,
        drop_prob=0.0,
    )
    defaults.update(overrides)
    return ImpairmentModel(**defaults)


def single_target_scene(
    range_m: float,
    velocity: float = 0.0,
    amplitude: float = 0.1,
    seed: int = 1,
    **impairment_overrides,
) -> Scene:
    return Scene(
        targets=(TargetSpec(range0_m=range_m, velocity_mps=velocity, amplitude=amplitude),),
        impairments=clean_impairments(**impairment_overrides),
        rng_seed=seed,
    )
