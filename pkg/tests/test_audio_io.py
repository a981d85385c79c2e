import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from palmsonic.audio_io import (
    AudioClip,
    UnsupportedEncodingError,
    WavFormatError,
    apply_window,
    frame_signal,
    load_wav,
    pre_emphasize,
    resample,
    write_wav,
)


def _wav_bytes(fmt_tag, n_channels, rate, bits, payload):
    block = n_channels * bits // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, fmt_tag, n_channels, rate, rate * block, block, bits
    )
    header += b"data" + struct.pack("<I", len(payload))
    return header + payload


class TestLoadWav:
    def test_16bit_full_scale_scaling(self, tmp_path):
        payload = struct.pack("<3h", 0, 16384, -32768)
        p = tmp_path / "clip.wav"
        p.write_bytes(_wav_bytes(1, 1, 16000, 16, payload))
        clip = load_wav(p)
        assert clip.sample_rate_hz == 16000
        assert clip.source_id == "clip"
        np.testing.assert_allclose(clip.samples, [0.0, 0.5, -1.0])

    def test_stereo_channel_mean(self, tmp_path):
        frames = [(32767, 0), (0, 0), (-32768, -32768)]
        payload = b"".join(struct.pack("<2h", l, r) for l, r in frames)
        p = tmp_path / "st.wav"
        p.write_bytes(_wav_bytes(1, 2, 8000, 16, payload))
        clip = load_wav(p)
        np.testing.assert_allclose(clip.samples, [32767 / 32768 / 2, 0.0, -1.0])

    def test_20_second_clip_sample_count(self, tmp_path):
        # duration times rate: 20 s at 16 kHz is 320000 samples
        rate, n = 16000, 320000
        payload = np.zeros(n, dtype="<i2").tobytes()
        p = tmp_path / "long.wav"
        p.write_bytes(_wav_bytes(1, 1, rate, 16, payload))
        assert load_wav(p).samples.size == 320000

    def test_8bit_unsigned(self, tmp_path):
        p = tmp_path / "u8.wav"
        p.write_bytes(_wav_bytes(1, 1, 8000, 8, bytes([128, 255, 0])))
        clip = load_wav(p)
        np.testing.assert_allclose(clip.samples, [0.0, 127 / 128, -1.0])

    def test_24bit_pcm(self, tmp_path):
        vals = [0, 2**23 - 1, -(2**23)]
        payload = b"".join(v.to_bytes(3, "little", signed=True) for v in vals)
        p = tmp_path / "p24.wav"
        p.write_bytes(_wav_bytes(1, 1, 16000, 24, payload))
        clip = load_wav(p)
        np.testing.assert_allclose(clip.samples, [0.0, (2**23 - 1) / 2**23, -1.0])

    def test_float32(self, tmp_path):
        payload = struct.pack("<3f", 0.25, -0.5, 1.0)
        p = tmp_path / "f32.wav"
        p.write_bytes(_wav_bytes(3, 1, 44100, 32, payload))
        clip = load_wav(p)
        np.testing.assert_allclose(clip.samples, [0.25, -0.5, 1.0])

    def test_malformed_header_rejected(self, tmp_path):
        p = tmp_path / "bad.wav"
        p.write_bytes(b"RIFX0000WAVE")
        with pytest.raises(WavFormatError):
            load_wav(p)

    def test_unsupported_codec_rejected(self, tmp_path):
        p = tmp_path / "ulaw.wav"
        p.write_bytes(_wav_bytes(7, 1, 8000, 8, bytes(8)))  # mu-law tag
        with pytest.raises(UnsupportedEncodingError):
            load_wav(p)

    def test_empty_payload_rejected(self, tmp_path):
        p = tmp_path / "empty.wav"
        p.write_bytes(_wav_bytes(1, 1, 8000, 16, b""))
        with pytest.raises(WavFormatError):
            load_wav(p)

    def test_write_read_roundtrip_within_one_step(self, tmp_path, rng):
        x = np.clip(rng.normal(0, 0.3, 1000), -1, 1)
        clip = AudioClip(samples=x, sample_rate_hz=16000, source_id="rt")
        p = tmp_path / "rt.wav"
        write_wav(p, clip)
        back = load_wav(p)
        assert back.sample_rate_hz == 16000
        assert np.max(np.abs(back.samples - x)) <= 1.0 / 32768 + 1e-12


class TestResample:
    def test_identity_when_rates_match(self, rng):
        clip = AudioClip(rng.uniform(-1, 1, 500), 16000, "id")
        out = resample(clip, 16000)
        assert out.samples is clip.samples

    def test_doubling_length(self):
        clip = AudioClip(np.zeros(8000), 8000, "z")
        assert resample(clip, 16000).samples.size == 16000

    def test_sine_peak_survives_downsampling(self):
        rate, target = 48000, 16000
        t = np.arange(rate) / rate
        clip = AudioClip(0.5 * np.sin(2 * np.pi * 440 * t), rate, "sine")
        out = resample(clip, target)
        spec = np.abs(np.fft.rfft(out.samples))
        peak_hz = np.argmax(spec) * target / out.samples.size
        assert abs(peak_hz - 440) <= target / out.samples.size + 1e-9

    def test_bad_target_rejected(self):
        with pytest.raises(ValueError):
            resample(AudioClip(np.zeros(10), 8000, "x"), 0)


class TestPreEmphasize:
    def test_alpha_zero_is_identity(self, rng):
        clip = AudioClip(rng.uniform(-1, 1, 300), 16000, "i")
        np.testing.assert_array_equal(pre_emphasize(clip, 0.0).samples, clip.samples)

    def test_constant_input_recurrence(self):
        clip = AudioClip(np.full(5, 0.5), 16000, "c")
        out = pre_emphasize(clip, 0.97)
        np.testing.assert_allclose(out.samples, [0.5, 0.015, 0.015, 0.015, 0.015])

    def test_alternating_input_recurrence(self):
        x = 0.5 * (-1.0) ** np.arange(6)
        out = pre_emphasize(AudioClip(x, 16000, "a"), 0.97)
        np.testing.assert_allclose(np.abs(out.samples[1:]), 0.985)
        assert out.clipped is False

    def test_clamp_sets_flag(self):
        x = np.array([1.0, -1.0, 1.0])
        out = pre_emphasize(AudioClip(x, 16000, "cl"), 0.97)
        assert out.clipped is True
        assert np.max(np.abs(out.samples)) <= 1.0

    def test_alpha_out_of_range(self):
        with pytest.raises(ValueError):
            pre_emphasize(AudioClip(np.zeros(4), 8000, "x"), 1.0)


class TestFraming:
    def test_spec_frame_count(self):
        clip = AudioClip(np.zeros(16000), 16000, "s")
        assert frame_signal(clip, 400, 160).n_frames == 98

    def test_exact_fit_gives_one_frame(self):
        clip = AudioClip(np.arange(400) / 400.0, 16000, "one")
        fs = frame_signal(clip, 400, 160)
        assert fs.n_frames == 1
        np.testing.assert_array_equal(fs.frames[0], clip.samples)

    def test_short_input_gives_zero_frames(self):
        clip = AudioClip(np.zeros(399), 16000, "short")
        assert frame_signal(clip, 400, 160).n_frames == 0

    def test_frame_contents_follow_hops(self):
        clip = AudioClip(np.arange(20) / 20.0, 16000, "h")
        fs = frame_signal(clip, 4, 3)
        np.testing.assert_array_equal(fs.frames[2], clip.samples[6:10])

    @settings(max_examples=100, deadline=None)
    @given(
        n=st.integers(2, 5000),
        frame_len=st.integers(2, 600),
        hop_len=st.integers(1, 400),
    )
    def test_frame_count_formula(self, n, frame_len, hop_len):
        clip = AudioClip(np.zeros(n), 16000, "p")
        fs = frame_signal(clip, frame_len, hop_len)
        expected = (n - frame_len) // hop_len + 1 if n >= frame_len else 0
        assert fs.n_frames == expected


class TestWindowing:
    def test_periodic_hann_length_4(self):
        clip = AudioClip(np.ones(4), 16000, "w")
        fs = apply_window(frame_signal(clip, 4, 4), "hann")
        np.testing.assert_allclose(fs.frames[0], [0.0, 0.5, 1.0, 0.5], atol=1e-12)

    def test_zeros_stay_zero(self):
        clip = AudioClip(np.zeros(8), 16000, "z")
        fs = apply_window(frame_signal(clip, 8, 8), "hamming")
        np.testing.assert_array_equal(fs.frames, np.zeros((1, 8)))

    def test_hamming_endpoint(self):
        clip = AudioClip(np.ones(16), 16000, "h")
        fs = apply_window(frame_signal(clip, 16, 16), "hamming")
        assert fs.frames[0, 0] == pytest.approx(0.08, abs=1e-12)

    def test_double_windowing_rejected(self):
        clip = AudioClip(np.ones(8), 16000, "d")
        fs = apply_window(frame_signal(clip, 4, 2), "hann")
        with pytest.raises(ValueError):
            apply_window(fs, "hann")

    def test_window_preserves_shape(self, rng):
        clip = AudioClip(rng.uniform(-1, 1, 2000), 16000, "s")
        before = frame_signal(clip, 256, 101)
        after = apply_window(before, "hamming")
        assert after.frames.shape == before.frames.shape
