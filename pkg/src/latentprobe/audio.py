"""WAV ingestion, silence trimming, and chunking of speech audio."""

from __future__ import annotations

import os
import wave
from dataclasses import dataclass

import numpy as np
from scipy.signal import resample_poly

from .errors import EmptyClipError, FormatError, ParameterError, UnsupportedFormatError

PCM_SCALE = 32768.0

# Silence gate: short-time RMS frames, threshold relative to the clip's peak RMS.
GATE_WINDOW_S = 0.025
GATE_HOP_S = 0.010
DEFAULT_TRIM_DB = 40.0


@dataclass
class AudioClip:
    """Mono audio in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int
    id: str = ""

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ParameterError(f"clip {self.id!r}: samples must be 1-D")
        if self.sample_rate <= 0:
            raise ParameterError(f"clip {self.id!r}: sample_rate must be positive")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class FrameConfig:
    """Short-time analysis framing: window/hop in seconds plus a taper name."""

    window_length: float = 0.025
    hop_length: float = 0.010
    window_function: str = "hamming"

    def __post_init__(self) -> None:
        if not 0 < self.hop_length <= self.window_length:
            raise ParameterError("need 0 < hop_length <= window_length")

    def window(self, sample_rate: int) -> np.ndarray:
        n = int(round(self.window_length * sample_rate))
        if self.window_function == "hamming":
            return np.hamming(n)
        if self.window_function == "hann":
            return np.hanning(n)
        if self.window_function == "rect":
            return np.ones(n)
        raise ParameterError(f"unknown window function {self.window_function!r}")


def frame_view(x: np.ndarray, win: int, hop: int) -> np.ndarray:
    """Frames x into overlapping rows of length win every hop samples.

    Returns a read-only view (n_frames, win); no padding, trailing partial
    frames are not produced.
    """
    if len(x) < win:
        return np.empty((0, win), dtype=x.dtype)
    view = np.lib.stride_tricks.sliding_window_view(x, win)
    return view[::hop]


def load_wav(path: str) -> AudioClip:
    """Reads a PCM16 RIFF/WAVE file as a normalized mono clip.

    Stereo is downmixed by averaging channels; int16 samples are divided by
    32768. Float, 24-bit and compressed encodings are rejected.
    """
    try:
        with wave.open(str(path), "rb") as wf:
            sampwidth = wf.getsampwidth()
            channels = wf.getnchannels()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        msg = str(exc).lower()
        if "unknown format" in msg or "compression" in msg:
            raise UnsupportedFormatError(f"{path}: {exc}") from exc
        raise FormatError(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise FormatError(f"{path}: truncated WAV header") from exc
    if sampwidth != 2:
        raise UnsupportedFormatError(
            f"{path}: only PCM16 is supported, got sample width {sampwidth}"
        )
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    if channels > 1:
        n = len(data) // channels
        data = data[: n * channels].reshape(n, channels).mean(axis=1)
    clip_id = os.path.splitext(os.path.basename(str(path)))[0]
    return AudioClip(samples=data, sample_rate=rate, id=clip_id)


def write_wav(clip: AudioClip, path: str) -> None:
    """Writes a clip as mono PCM16. Samples are clipped to [-1, 1]."""
    x = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.clip(np.round(x * PCM_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(pcm.tobytes())


def _gate_frames(clip: AudioClip) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Short-time RMS per gate frame; returns (rms, starts, win, hop)."""
    win = max(1, int(round(GATE_WINDOW_S * clip.sample_rate)))
    hop = max(1, int(round(GATE_HOP_S * clip.sample_rate)))
    x = clip.samples
    if len(x) < win:
        # One pseudo-frame covering the whole clip.
        rms = np.array([np.sqrt(np.mean(x**2))]) if len(x) else np.array([0.0])
        return rms, np.array([0]), max(len(x), 1), hop
    frames = frame_view(x, win, hop)
    rms = np.sqrt(np.mean(frames**2, axis=1))
    starts = np.arange(len(rms)) * hop
    return rms, starts, win, hop


def _active_mask(clip: AudioClip, threshold_db: float) -> tuple[np.ndarray, np.ndarray, int]:
    rms, starts, win, _ = _gate_frames(clip)
    peak = rms.max() if len(rms) else 0.0
    if peak <= 0.0:
        raise EmptyClipError(f"clip {clip.id!r} is entirely silent")
    floor = peak * 10.0 ** (-threshold_db / 20.0)
    return rms >= floor, starts, win


def trim_silence(clip: AudioClip, threshold_db: float = DEFAULT_TRIM_DB) -> AudioClip:
    """Removes leading and trailing regions quieter than threshold_db below peak RMS.

    Idempotent: cuts land on gate-frame boundaries so re-trimming removes
    nothing further.
    """
    if threshold_db <= 0:
        raise ParameterError("threshold_db must be positive")
    active, starts, win = _active_mask(clip, threshold_db)
    idx = np.nonzero(active)[0]
    first, last = idx[0], idx[-1]
    lo = starts[first]
    if last == len(active) - 1:
        # the tail shorter than one gate frame inherits its neighbor's state
        hi = len(clip.samples)
    else:
        hi = min(starts[last] + win, len(clip.samples))
    return AudioClip(samples=clip.samples[lo:hi].copy(), sample_rate=clip.sample_rate, id=clip.id)


def chunk_nonsilent(clip: AudioClip, chunk_length: float = 0.8,
                    threshold_db: float = DEFAULT_TRIM_DB) -> list[AudioClip]:
    """Cuts the non-silent audio into consecutive fixed-length chunks.

    Silent gate frames anywhere in the clip are dropped, the remainder is
    concatenated, and a trailing piece shorter than chunk_length is discarded.
    """
    if chunk_length <= 0:
        raise ParameterError("chunk_length must be positive")
    try:
        active, starts, win = _active_mask(clip, threshold_db)
    except EmptyClipError:
        return []
    keep = np.zeros(len(clip.samples), dtype=bool)
    for i in np.nonzero(active)[0]:
        keep[starts[i]: starts[i] + win] = True
    voiced = clip.samples[keep]
    n_chunk = int(round(chunk_length * clip.sample_rate))
    chunks = []
    for k in range(len(voiced) // n_chunk):
        chunks.append(AudioClip(
            samples=voiced[k * n_chunk:(k + 1) * n_chunk].copy(),
            sample_rate=clip.sample_rate,
            id=f"{clip.id}#{k}",
        ))
    return chunks


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited resampling via a polyphase FIR filter."""
    if target_rate <= 0:
        raise ParameterError("target_rate must be positive")
    if target_rate == clip.sample_rate:
        return AudioClip(samples=clip.samples.copy(), sample_rate=clip.sample_rate, id=clip.id)
    g = np.gcd(int(target_rate), int(clip.sample_rate))
    y = resample_poly(clip.samples, target_rate // g, clip.sample_rate // g)
    return AudioClip(samples=y, sample_rate=target_rate, id=clip.id)
