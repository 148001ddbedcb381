"""Per-utterance acoustic features: pitch, formants, spectral shape, MFCCs.

Low-level descriptors are computed on short frames (10 ms hop throughout),
then summarized into utterance-level functionals. Pitch-dependent features
use voiced frames only; plain mfccN_mean covers all frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .audio import AudioClip, FrameConfig, frame_view, resample, trim_silence
from .errors import EmptyClipError, EmptyTrackError, LatentProbeError, ParameterError

SEMITONE_REF_HZ = 27.5

# YIN pitch tracking
YIN_WINDOW_S = 0.040
YIN_HOP_S = 0.010
YIN_FMIN = 50.0
YIN_FMAX = 600.0
YIN_THRESHOLD = 0.15

# Formant tracking
FORMANT_RATE = 8000
FORMANT_ORDER = 10
FORMANT_PREEMPHASIS = 0.97
FORMANT_MAX_BANDWIDTH = 400.0

# Mel filterbank
MFCC_N_FILTERS = 26
MFCC_FMIN = 20.0
LOG_FLOOR = 1e-30

CANONICAL_FEATURES = (
    "F0semitone_mean",
    "F0semitone_p20",
    "F0semitone_p50",
    "F0semitone_p80",
    "F0semitone_cv",
    "F1freq_mean",
    "F2freq_mean",
    "F3freq_mean",
    "alphaRatioV_mean",
    "hammarbergIndexV_mean",
    "slopeV_0_500_mean",
    "slopeV_500_1500_mean",
    "mfcc1_mean",
    "mfcc2_mean",
    "mfcc3_mean",
    "mfcc4_mean",
    "mfcc1V_mean",
    "mfcc2V_mean",
    "mfcc3V_mean",
    "mfcc4V_mean",
)


def to_semitone(f_hz):
    """Logarithmic pitch scale with 27.5 Hz at semitone 0."""
    return 12.0 * np.log2(np.asarray(f_hz, dtype=np.float64) / SEMITONE_REF_HZ)


@dataclass
class F0Track:
    """Per-frame pitch on the semitone scale; 0 is the unvoiced sentinel."""

    frame_times: np.ndarray
    f0_semitone: np.ndarray
    voicing: np.ndarray


@dataclass
class FeatureVector:
    """One utterance's named feature values in canonical order."""

    values: dict[str, float]
    usable: bool = True
    reason: str | None = None

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    @classmethod
    def unusable(cls, reason: str) -> "FeatureVector":
        return cls(values={}, usable=False, reason=reason)


def f0_track(clip: AudioClip) -> F0Track:
    """Tracks fundamental frequency with the YIN difference function.

    40 ms frames every 10 ms; lags searched over 50-600 Hz; frames whose
    cumulative-mean-normalized difference never dips below 0.15 are unvoiced.
    """
    sr = clip.sample_rate
    hop = int(round(YIN_HOP_S * sr))
    tau_max = int(sr / YIN_FMIN)
    w_int = int(round(YIN_WINDOW_S * sr / 2))
    span = w_int + tau_max
    tau_min = max(2, int(np.ceil(sr / YIN_FMAX)))
    frames = frame_view(clip.samples, span, hop)
    if len(frames) == 0:
        raise EmptyTrackError(f"clip {clip.id!r} shorter than one pitch window")

    # Difference function d(tau) = e0 + e(tau) - 2 r(tau), r via FFT
    # cross-correlation of the integration window against the whole frame.
    n = len(frames)
    nfft = 1
    while nfft < 2 * span:
        nfft *= 2
    spec_full = np.fft.rfft(frames, nfft)
    spec_head = np.fft.rfft(frames[:, :w_int], nfft)
    corr = np.fft.irfft(np.conj(spec_head) * spec_full, nfft)[:, : tau_max + 1]
    sq = np.concatenate(
        [np.zeros((n, 1)), np.cumsum(frames.astype(np.float64) ** 2, axis=1)], axis=1
    )
    e0 = sq[:, w_int] - sq[:, 0]
    taus = np.arange(tau_max + 1)
    e_tau = sq[:, taus + w_int] - sq[:, taus]
    d = np.maximum(e0[:, None] + e_tau - 2.0 * corr, 0.0)

    csum = np.cumsum(d[:, 1:], axis=1)
    cmndf = np.ones_like(d)
    with np.errstate(divide="ignore", invalid="ignore"):
        cmndf[:, 1:] = np.where(csum > 0, d[:, 1:] * taus[1:] / csum, 1.0)

    f0 = np.zeros(n)
    voiced = np.zeros(n, dtype=bool)
    for i in range(n):
        c = cmndf[i]
        below = np.nonzero(c[tau_min: tau_max + 1] < YIN_THRESHOLD)[0]
        if below.size == 0:
            continue
        tau = below[0] + tau_min
        while tau + 1 <= tau_max and c[tau + 1] < c[tau]:
            tau += 1
        # Parabolic refinement of the difference-function minimum.
        if 1 <= tau < tau_max:
            y0, y1, y2 = d[i, tau - 1], d[i, tau], d[i, tau + 1]
            denom = y0 - 2.0 * y1 + y2
            shift = 0.5 * (y0 - y2) / denom if abs(denom) > 1e-30 else 0.0
            shift = float(np.clip(shift, -0.5, 0.5))
        else:
            shift = 0.0
        hz = sr / (tau + shift)
        if YIN_FMIN <= hz <= YIN_FMAX:
            f0[i] = hz
            voiced[i] = True
    semitone = np.zeros(n)
    semitone[voiced] = to_semitone(f0[voiced])
    times = np.arange(n) * hop / sr
    return F0Track(frame_times=times, f0_semitone=semitone, voicing=voiced)


def _levinson(r: np.ndarray, order: int) -> np.ndarray | None:
    """Levinson-Durbin recursion; returns LPC polynomial [1, a1..ap] or None."""
    if r[0] <= 0:
        return None
    a = np.zeros(order + 1)
    a[0] = 1.0
    err = r[0]
    for i in range(1, order + 1):
        acc = r[i] + np.dot(a[1:i], r[1:i][::-1])
        k = -acc / err
        a[1: i + 1] = a[1: i + 1] + k * a[i - 1::-1][:i]
        err *= 1.0 - k * k
        if err <= 0:
            return None
    return a


def lpc_formants(clip: AudioClip) -> np.ndarray:
    """Per-frame formant frequencies (F1, F2, F3) in Hz.

    The clip is resampled to 8 kHz and pre-emphasized; order-10 LPC poles with
    bandwidth under 400 Hz, sorted by frequency, give the formants. A frame
    fills as many of its three slots as it has qualifying poles; the rest
    stay NaN and drop out of the functionals.
    """
    if len(clip.samples) == 0:
        raise EmptyClipError(f"clip {clip.id!r} is empty")
    low = resample(clip, FORMANT_RATE)
    x = low.samples
    x = np.append(x[:1], x[1:] - FORMANT_PREEMPHASIS * x[:-1])
    sr = FORMANT_RATE
    win = int(round(0.025 * sr))
    hop = int(round(0.010 * sr))
    ham = np.hamming(win)
    frames = frame_view(x, win, hop)
    out = np.full((len(frames), 3), np.nan)
    for i, fr in enumerate(frames):
        fw = fr * ham
        r = np.correlate(fw, fw, "full")[win - 1: win + FORMANT_ORDER]
        a = _levinson(r, FORMANT_ORDER)
        if a is None:
            continue
        roots = np.roots(a)
        roots = roots[np.imag(roots) > 0]
        if len(roots) == 0:
            continue
        freq = np.angle(roots) * sr / (2.0 * np.pi)
        with np.errstate(divide="ignore"):
            bw = -np.log(np.abs(roots)) * sr / np.pi
        ok = (bw < FORMANT_MAX_BANDWIDTH) & (freq > 50.0)
        cand = np.sort(freq[ok])[:3]
        out[i, : len(cand)] = cand
    return out


def _power_frames(clip: AudioClip, cfg: FrameConfig) -> tuple[np.ndarray, np.ndarray]:
    """Windowed magnitude-squared spectra; returns (power, bin_freqs)."""
    sr = clip.sample_rate
    win = int(round(cfg.window_length * sr))
    hop = int(round(cfg.hop_length * sr))
    taper = cfg.window(sr)
    frames = frame_view(clip.samples, win, hop)
    spec = np.fft.rfft(frames * taper, axis=1)
    power = np.abs(spec) ** 2
    freqs = np.fft.rfftfreq(win, d=1.0 / sr)
    return power, freqs


def spectral_frame_measures(clip: AudioClip, cfg: FrameConfig | None = None) -> dict[str, np.ndarray]:
    """Alpha ratio, Hammarberg index, and band slopes per frame.

    Alpha ratio: dB of summed 50-1000 Hz energy minus dB of summed 1-5 kHz
    energy. Hammarberg: dB gap between the strongest bin below 2 kHz and the
    strongest one in 2-5 kHz. Slopes: least-squares slope of the dB power
    spectrum against Hz inside 0-500 and 500-1500. Zero-energy frames are NaN.
    """
    cfg = cfg or FrameConfig()
    if clip.sample_rate < 10000:
        raise ParameterError("sample rate must be at least 10 kHz for 5 kHz bands")
    power, freqs = _power_frames(clip, cfg)
    n = len(power)
    out = {k: np.full(n, np.nan) for k in
           ("alpha_ratio_db", "hammarberg_db", "slope_0_500", "slope_500_1500")}
    lo_band = (freqs >= 50.0) & (freqs <= 1000.0)
    hi_band = (freqs > 1000.0) & (freqs <= 5000.0)
    pk_lo = (freqs >= 0.0) & (freqs <= 2000.0)
    pk_hi = (freqs > 2000.0) & (freqs <= 5000.0)
    # DC carries the windowed frame mean, and its log-power expectation sits
    # 3 dB under the other bins (one chi-squared degree of freedom, not two),
    # so including it would tilt every slope upward; band starts above 0 Hz.
    s1 = (freqs > 0.0) & (freqs <= 500.0)
    s2 = (freqs >= 500.0) & (freqs <= 1500.0)
    for i in range(n):
        p = power[i]
        if p.sum() <= 0:
            continue
        e_lo, e_hi = p[lo_band].sum(), p[hi_band].sum()
        if e_lo > 0 and e_hi > 0:
            out["alpha_ratio_db"][i] = 10.0 * (np.log10(e_lo) - np.log10(e_hi))
        m_lo, m_hi = p[pk_lo].max(), p[pk_hi].max()
        if m_lo > 0 and m_hi > 0:
            out["hammarberg_db"][i] = 10.0 * (np.log10(m_lo) - np.log10(m_hi))
        db = 10.0 * np.log10(np.maximum(p, LOG_FLOOR))
        for key, band in (("slope_0_500", s1), ("slope_500_1500", s2)):
            f = freqs[band]
            y = db[band]
            fm = f - f.mean()
            denom = np.dot(fm, fm)
            if denom > 0:
                out[key][i] = np.dot(fm, y - y.mean()) / denom
    return out


def _mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_inv(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sr: int, n_fft_bins: int, n_filters: int,
                   fmin: float = MFCC_FMIN, fmax: float | None = None,
                   bin_freqs: np.ndarray | None = None) -> np.ndarray:
    """Triangular filters on the mel scale; shape (n_filters, n_fft_bins).

    bin_freqs, when given, pins the triangles to the caller's actual DFT bin
    frequencies; otherwise bins are assumed evenly spaced up to Nyquist.
    """
    fmax = fmax if fmax is not None else sr / 2.0
    edges = _mel_inv(np.linspace(_mel(fmin), _mel(fmax), n_filters + 2))
    if bin_freqs is not None:
        freqs = np.asarray(bin_freqs, dtype=np.float64)
        if len(freqs) != n_fft_bins:
            raise ParameterError("bin_freqs length must equal n_fft_bins")
    else:
        freqs = np.linspace(0.0, sr / 2.0, n_fft_bins)
    bank = np.zeros((n_filters, n_fft_bins))
    for j in range(n_filters):
        left, center, right = edges[j], edges[j + 1], edges[j + 2]
        up = (freqs - left) / max(center - left, 1e-12)
        down = (right - freqs) / max(right - center, 1e-12)
        bank[j] = np.maximum(0.0, np.minimum(up, down))
    return bank


def mfcc(clip: AudioClip, n_coeffs: int = 4, cfg: FrameConfig | None = None) -> np.ndarray:
    """Mel-frequency cepstral coefficients 1..n_coeffs per frame.

    26 mel filters from 20 Hz to Nyquist over the frame power spectrum, log
    energies, orthonormal type-II DCT; the gain-carrying 0th coefficient is
    dropped.
    """
    if n_coeffs < 1:
        raise ParameterError("n_coeffs must be at least 1")
    cfg = cfg or FrameConfig()
    power, freqs = _power_frames(clip, cfg)
    bank = mel_filterbank(clip.sample_rate, power.shape[1], MFCC_N_FILTERS,
                          bin_freqs=freqs)
    logmel = np.log(np.maximum(power @ bank.T, LOG_FLOOR))
    coeffs = dct(logmel, type=2, norm="ortho", axis=1)
    return coeffs[:, 1: n_coeffs + 1]


def mel_spectrogram(clip: AudioClip, n_bins: int = 80, cfg: FrameConfig | None = None) -> np.ndarray:
    """Log-mel magnitude spectrogram, frames x n_bins."""
    if n_bins < 1:
        raise ParameterError("n_bins must be at least 1")
    cfg = cfg or FrameConfig()
    power, freqs = _power_frames(clip, cfg)
    mag = np.sqrt(power)
    bank = mel_filterbank(clip.sample_rate, mag.shape[1], n_bins, bin_freqs=freqs)
    return np.log(np.maximum(mag @ bank.T, LOG_FLOOR))


def apply_functionals(track: np.ndarray, voicing: np.ndarray | None = None,
                      scope: str = "all") -> dict[str, float]:
    """Summarizes a per-frame track into {mean, cv, p20, p50, p80}.

    NaN frames are excluded. scope="voiced" restricts to frames flagged
    voiced. cv is the standard deviation over |mean|; it is NaN when the mean
    is within 1e-12 of zero.
    """
    values = np.asarray(track, dtype=np.float64)
    if scope == "voiced":
        if voicing is None:
            raise ParameterError("voiced scope requires a voicing mask")
        values = values[np.asarray(voicing, dtype=bool)]
    elif scope != "all":
        raise ParameterError(f"unknown scope {scope!r}")
    values = values[np.isfinite(values)]
    if len(values) == 0:
        raise EmptyTrackError("no in-scope frames for functional")
    mean = float(np.mean(values))
    std = float(np.std(values))
    cv = std / abs(mean) if abs(mean) >= 1e-12 else float("nan")
    p20, p50, p80 = np.percentile(values, [20, 50, 80])
    return {"mean": mean, "cv": cv, "p20": float(p20), "p50": float(p50), "p80": float(p80)}


def extract_features(clip: AudioClip, trim_db: float = 40.0,
                     min_voiced_frames: int = 3) -> FeatureVector:
    """Computes the canonical feature vector for one utterance.

    The clip is silence-trimmed, descriptor tracks are computed on a shared
    10 ms grid, and functionals are taken over voiced frames (plain mfccN_mean
    over all frames). Returns an unusable vector instead of raising when the
    clip is silent or has too few voiced frames.
    """
    try:
        trimmed = trim_silence(clip, threshold_db=trim_db)
        track = f0_track(trimmed)
    except (EmptyClipError, EmptyTrackError) as exc:
        return FeatureVector.unusable(str(exc))
    if int(track.voicing.sum()) < min_voiced_frames:
        return FeatureVector.unusable(
            f"clip {clip.id!r}: only {int(track.voicing.sum())} voiced frames"
        )

    cfg = FrameConfig()
    spectral = spectral_frame_measures(trimmed, cfg)
    cepstra = mfcc(trimmed, n_coeffs=4, cfg=cfg)
    formants = lpc_formants(trimmed)

    n = min(len(track.voicing), len(cepstra), len(formants),
            len(spectral["alpha_ratio_db"]))
    voiced = track.voicing[:n]
    if int(voiced.sum()) < min_voiced_frames:
        return FeatureVector.unusable(f"clip {clip.id!r}: voiced frames lost in alignment")

    values: dict[str, float] = {}

    f0_stats = apply_functionals(track.f0_semitone[:n], voiced, scope="voiced")
    values["F0semitone_mean"] = f0_stats["mean"]
    values["F0semitone_p20"] = f0_stats["p20"]
    values["F0semitone_p50"] = f0_stats["p50"]
    values["F0semitone_p80"] = f0_stats["p80"]
    values["F0semitone_cv"] = f0_stats["cv"]

    for j, name in enumerate(("F1freq_mean", "F2freq_mean", "F3freq_mean")):
        values[name] = _voiced_mean(formants[:n, j], voiced)
    values["alphaRatioV_mean"] = _voiced_mean(spectral["alpha_ratio_db"][:n], voiced)
    values["hammarbergIndexV_mean"] = _voiced_mean(spectral["hammarberg_db"][:n], voiced)
    values["slopeV_0_500_mean"] = _voiced_mean(spectral["slope_0_500"][:n], voiced)
    values["slopeV_500_1500_mean"] = _voiced_mean(spectral["slope_500_1500"][:n], voiced)

    for j in range(4):
        col = cepstra[:n, j]
        values[f"mfcc{j + 1}_mean"] = float(np.mean(col[np.isfinite(col)]))
    for j in range(4):
        values[f"mfcc{j + 1}V_mean"] = _voiced_mean(cepstra[:n, j], voiced)

    ordered = {name: values[name] for name in CANONICAL_FEATURES}
    return FeatureVector(values=ordered)


def _voiced_mean(track: np.ndarray, voiced: np.ndarray) -> float:
    vals = track[voiced]
    vals = vals[np.isfinite(vals)]
    return float(np.mean(vals)) if len(vals) else float("nan")


@dataclass
class FeatureTable:
    """Rectangular utterance-by-feature table with style labels."""

    ids: list[str]
    styles: list[str]
    names: list[str]
    values: np.ndarray  # N x F, NaN marks missing cells

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(set(self.ids)) != len(self.ids):
            dupes = sorted({i for i in self.ids if self.ids.count(i) > 1})
            raise LatentProbeError(f"duplicate utterance ids: {dupes[:5]}")
        if self.values.shape != (len(self.ids), len(self.names)):
            raise LatentProbeError("feature table is not rectangular")

    @classmethod
    def from_rows(cls, rows: list[tuple[str, str, FeatureVector]],
                  names: tuple[str, ...] = CANONICAL_FEATURES) -> "FeatureTable":
        ids, styles, data = [], [], []
        for utt_id, style, fv in rows:
            ids.append(utt_id)
            styles.append(style)
            if fv.usable:
                data.append([fv.values.get(nm, float("nan")) for nm in names])
            else:
                data.append([float("nan")] * len(names))
        values = np.array(data) if data else np.empty((0, len(names)))
        return cls(ids=ids, styles=styles, names=list(names), values=values)

    def to_csv(self, path: str) -> None:
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["utterance_id", "style", *self.names])
            for i, utt_id in enumerate(self.ids):
                row = [utt_id, self.styles[i]]
                for v in self.values[i]:
                    row.append("" if not np.isfinite(v) else repr(float(v)))
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path: str) -> "FeatureTable":
        import csv

        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[:2] != ["utterance_id", "style"]:
                raise LatentProbeError(f"{path}: expected utterance_id,style,... header")
            names = header[2:]
            ids, styles, data = [], [], []
            for row in reader:
                if not row:
                    continue
                if len(row) != len(header):
                    raise LatentProbeError(f"{path}: ragged row for id {row[0]!r}")
                ids.append(row[0])
                styles.append(row[1])
                data.append([float(c) if c != "" else float("nan") for c in row[2:]])
        values = np.array(data) if data else np.empty((0, len(names)))
        return cls(ids=ids, styles=styles, names=names, values=values)
