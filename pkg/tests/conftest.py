import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shona_asr.audio import AudioBuffer


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tone_1khz():
    t = np.arange(16000) / 16000.0
    return AudioBuffer(0.5 * np.sin(2 * np.pi * 1000.0 * t), 16000)


def make_tone(freq_hz: float, duration_s: float = 1.0, amplitude: float = 0.5,
              sample_rate: int = 16000) -> AudioBuffer:
    t = np.arange(int(duration_s * sample_rate)) / sample_rate
    return AudioBuffer(amplitude * np.sin(2 * np.pi * freq_hz * t), sample_rate)
