import numpy as np
import pytest

from palmsonic.audio_io import AudioClip

ACCEPTANCE_RESULTS = []


def record_acceptance(name: str, passed: bool, detail: str = ""):
    ACCEPTANCE_RESULTS.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"ACCEPTANCE {name}: {status}{suffix}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_tone(freq_hz, seconds=1.0, rate=16000, amp=0.5, source_id="tone"):
    t = np.arange(int(round(seconds * rate))) / rate
    return AudioClip(
        samples=amp * np.sin(2 * np.pi * freq_hz * t),
        sample_rate_hz=rate,
        source_id=source_id,
    )


def make_noise(rng, seconds=1.0, rate=16000, amp=0.1, source_id="noise"):
    x = rng.normal(0.0, amp, int(round(seconds * rate)))
    return AudioClip(
        samples=np.clip(x, -1.0, 1.0), sample_rate_hz=rate, source_id=source_id
    )
