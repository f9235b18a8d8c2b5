"""Binary trace codec: byte-exact layout, round trips, error reporting."""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from livesense import (
    CsiFrame,
    Scene,
    SensingConfig,
    decode_trace,
    encode_trace,
    generate_trace,
    read_trace,
    write_trace,
)
from livesense.tracefile import (
    TraceDecodeError,
    decode_frame_payload,
    decode_header,
    encode_frame,
    encode_header,
)

from conftest import clean_impairments, make_config


class TestHeader:
    def test_golden_bytes(self):
        # magic "CSI1" = 43 53 49 31, then little-endian packed fields.
        config = SensingConfig()
        blob = encode_header(config)
        assert blob[:4] == bytes([0x43, 0x53, 0x49, 0x31])
        assert blob[4:6] == struct.pack("<H", 1)
        assert blob[6:10] == struct.pack("<I", 512)
        assert blob[10:18] == struct.pack("<d", 6e9)
        assert blob[18:26] == struct.pack("<d", 160e6)
        assert blob[26:34] == struct.pack("<d", 0.025)
        assert len(blob) == 34

    def test_header_round_trip(self):
        config = make_config(n_subcarriers=256, carrier_freq_hz=5.5e9)
        header = decode_header(encode_header(config))
        assert header.n_subcarriers == 256
        assert header.carrier_freq_hz == 5.5e9
        assert header.matches(config)

    def test_bad_magic(self):
        with pytest.raises(TraceDecodeError, match="bad magic"):
            decode_header(b"NOPE" + bytes(30))

    def test_truncated_header(self):
        with pytest.raises(TraceDecodeError, match="truncated header"):
            decode_header(b"CSI1\x01")


class TestRoundTrip:
    def test_encode_decode_encode_is_identity(self, config):
        scene = Scene(impairments=clean_impairments(noise_power=0.01), rng_seed=1)
        frames = generate_trace(scene, config, 16)
        blob = encode_trace(frames, config)
        header, decoded = decode_trace(blob)
        assert header.matches(config)
        assert len(decoded) == 16
        assert encode_trace(decoded, config) == blob

    def test_decoded_values_are_float32_of_original(self, config):
        frames = generate_trace(Scene(rng_seed=2), config, 2)
        _, decoded = decode_trace(encode_trace(frames, config))
        for orig, back in zip(frames, decoded):
            np.testing.assert_array_equal(
                back.csi, orig.csi.astype(np.complex64).astype(np.complex128)
            )
            assert back.timestamp == orig.timestamp
            assert back.seq == orig.seq
            assert back.flags == orig.flags

    def test_file_round_trip(self, config, tmp_path):
        frames = generate_trace(Scene(rng_seed=3), config, 8)
        path = tmp_path / "t.csi"
        write_trace(path, frames, config)
        header, decoded = read_trace(path)
        assert header.matches(config)
        assert len(decoded) == 8

    @settings(max_examples=20, deadline=None)
    @given(
        n_frames=st.integers(min_value=0, max_value=5),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_random_traces_round_trip(self, n_frames, seed):
        config = make_config(n_subcarriers=16)
        rng = np.random.default_rng(seed)
        frames = [
            CsiFrame(
                timestamp=float(i) * 0.025,
                seq=i * 3,
                csi=(rng.standard_normal(16) + 1j * rng.standard_normal(16)).astype(
                    np.complex64
                ),
                flags=int(rng.integers(0, 4)),
            )
            for i in range(n_frames)
        ]
        blob = encode_trace(frames, config)
        _, decoded = decode_trace(blob)
        assert encode_trace(decoded, config) == blob


class TestErrors:
    def test_truncated_mid_frame_names_index_and_offset(self, config):
        frames = generate_trace(Scene(rng_seed=4), config, 3)
        blob = encode_trace(frames, config)
        cut = blob[: len(blob) - 10]
        with pytest.raises(TraceDecodeError, match="mid-frame 2") as err:
            decode_trace(cut)
        record = 13 + 8 * 512
        assert err.value.byte_offset == 34 + 2 * record

    def test_frame_size_mismatch(self):
        with pytest.raises(TraceDecodeError, match="expected"):
            decode_frame_payload(bytes(20), 512)

    def test_encode_rejects_wrong_n(self, config):
        frame = CsiFrame(0.0, 0, np.zeros(16, dtype=complex))
        with pytest.raises(ValueError, match="subcarriers"):
            encode_trace([frame], config)

    def test_udp_payload_round_trip(self, config):
        frames = generate_trace(Scene(rng_seed=5), config, 1)
        payload = encode_frame(frames[0])
        frame = decode_frame_payload(payload, 512)
        np.testing.assert_array_equal(
            frame.csi, frames[0].csi.astype(np.complex64).astype(np.complex128)
        )
