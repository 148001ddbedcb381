"""Synthetic corpus with planted ground truth.

Style-clustered latents, analytically planted latent-to-feature maps, and
rendered harmonic waveforms whose acoustic parameters are affine in the
latent vector. The corpus serves as the verification oracle for the whole
pipeline: every relationship the analysis should find is planted here by
construction.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .audio import AudioClip, write_wav
from .embeddings import EmbeddingSet
from .errors import ParameterError
from .features import CANONICAL_FEATURES, FeatureTable, _mel, to_semitone

DEFAULT_STYLE_NAMES = (
    "NEUTRAL", "HAPPY", "SAD", "BADGUY",
    "FROMAFAR", "PROXY", "OLDMAN", "LITTLECREATURE",
)
DEFAULT_TASKS = ("style", "speaker", "vae-tts")
FORMANT_BANDWIDTHS = (110.0, 130.0, 180.0)

# substream indices for per-purpose seeded generators
_SS_LATENTS = 1
_SS_TASKS = 3
_SS_PLANT = 4
_SS_NOISE = 5
_SS_RENDER = 6
_SS_COUPLING = 7
_SS_DURATION = 8


@dataclass
class PlantedFeature:
    """Linear latent-to-feature recipe: value = w·z + b + Normal(0, sigma).

    sigma may be given directly or resolved from target_r2 against the
    empirical variance of w·z.
    """

    weights: np.ndarray
    intercept: float = 0.0
    sigma: float | None = None
    target_r2: float | None = None


@dataclass
class RenderStyle:
    """Per-style rendering anchors."""

    f0_base_hz: float
    slope_db_per_octave: float
    formants: tuple[float, float, float]
    mel_tilt_db: float = 0.0
    h1_gain_db: float = 0.0
    aspiration_db: float = -10.0


@dataclass
class SynthSpec:
    """Everything needed to generate one deterministic synthetic corpus."""

    n_styles: int = 8
    n_per_style: int = 2000
    latent_dim: int = 8
    signal_dims: tuple[int, ...] = (0, 1, 2)
    style_names: tuple[str, ...] | None = None
    tasks: tuple[str, ...] = DEFAULT_TASKS
    cluster_sep: float = 2.5
    plant: dict[str, PlantedFeature] | None = None
    render_styles: list[RenderStyle] | None = None
    sample_rate: int = 22050
    duration_range: tuple[float, float] = (0.8, 1.2)
    pad_silence: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_styles < 1 or self.n_per_style < 1 or self.latent_dim < 1:
            raise ParameterError("counts must be positive")
        if any(d < 0 or d >= self.latent_dim for d in self.signal_dims):
            raise ParameterError(
                f"signal_dims {self.signal_dims} outside [0, {self.latent_dim})"
            )
        if self.style_names is None:
            names = list(DEFAULT_STYLE_NAMES[: self.n_styles])
            while len(names) < self.n_styles:
                names.append(f"STYLE{len(names)}")
            self.style_names = tuple(names)
        if len(self.style_names) != self.n_styles:
            raise ParameterError("style_names length must equal n_styles")
        if self.plant is not None:
            for name, pf in self.plant.items():
                pf.weights = np.asarray(pf.weights, dtype=np.float64)
                if pf.weights.shape != (self.latent_dim,):
                    raise ParameterError(f"plant {name!r}: bad weight shape")
                if pf.sigma is not None and pf.sigma < 0:
                    raise ParameterError(f"plant {name!r}: negative sigma")
        if self.render_styles is not None:
            if len(self.render_styles) != self.n_styles:
                raise ParameterError("render_styles length must equal n_styles")
            for rs in self.render_styles:
                if not 50.0 <= rs.f0_base_hz <= 600.0:
                    raise ParameterError(
                        f"style F0 base {rs.f0_base_hz} outside [50, 600] Hz"
                    )

    def style_of(self, index: int) -> str:
        return self.style_names[index // self.n_per_style]

    @property
    def n_total(self) -> int:
        return self.n_styles * self.n_per_style


def _rng(spec: SynthSpec, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((spec.seed, *key)))


def style_means(spec: SynthSpec) -> np.ndarray:
    """Cluster means: differ across styles only in the signal dimensions.

    When the styles fit on the corners of the signal-dim hypercube the means
    are placed there (evenly separated, no seed luck involved); otherwise
    they are seeded Gaussian draws scaled by cluster_sep.
    """
    means = np.zeros((spec.n_styles, spec.latent_dim))
    n_sig = len(spec.signal_dims)
    if n_sig and spec.n_styles <= 2 ** n_sig:
        for s in range(spec.n_styles):
            for j, d in enumerate(spec.signal_dims):
                means[s, d] = spec.cluster_sep * (1.0 if (s >> j) & 1 else -1.0)
    elif n_sig:
        rng = _rng(spec, 0)
        for j, d in enumerate(spec.signal_dims):
            means[:, d] = spec.cluster_sep * rng.standard_normal(spec.n_styles)
    return means


def _utt_ids(spec: SynthSpec) -> list[str]:
    return [f"u{i:05d}" for i in range(spec.n_total)]


def synth_latents(spec: SynthSpec) -> EmbeddingSet:
    """Base latent vectors: one unit-variance Gaussian cluster per style."""
    means = style_means(spec)
    rng = _rng(spec, _SS_LATENTS)
    z = rng.standard_normal((spec.n_total, spec.latent_dim))
    for s in range(spec.n_styles):
        lo = s * spec.n_per_style
        z[lo: lo + spec.n_per_style] += means[s]
    ids = _utt_ids(spec)
    return EmbeddingSet(
        task="base",
        dim=spec.latent_dim,
        rows={u: z[i] for i, u in enumerate(ids)},
        labels={u: spec.style_of(i) for i, u in enumerate(ids)},
    )


def derive_task_embeddings(spec: SynthSpec, base: EmbeddingSet) -> dict[str, EmbeddingSet]:
    """Per-task views of the base latents: per-dim rescale plus small noise.

    Every task keeps the planted structure (per-dimension signal survives a
    positive rescale, linear probes survive affine maps) while the tasks stay
    numerically distinct, like embeddings from different upstream models.
    """
    ids = sorted(base.rows)
    Z = np.stack([base.rows[u] for u in ids])
    out: dict[str, EmbeddingSet] = {}
    for t, task in enumerate(spec.tasks):
        rng = _rng(spec, _SS_TASKS, t)
        scale = rng.uniform(0.8, 1.25, size=spec.latent_dim)
        noise = 0.05 * rng.standard_normal(Z.shape)
        Zt = Z * scale + noise
        out[task] = EmbeddingSet(
            task=task,
            dim=spec.latent_dim,
            rows={u: Zt[i] for i, u in enumerate(ids)},
            labels=dict(base.labels),
        )
    return out


def default_plant(spec: SynthSpec) -> dict[str, PlantedFeature]:
    """One planted linear map per canonical feature, target R² 0.8."""
    rng = _rng(spec, _SS_PLANT)
    plant: dict[str, PlantedFeature] = {}
    for name in CANONICAL_FEATURES:
        w = rng.standard_normal(spec.latent_dim)
        w = w / np.linalg.norm(w)
        plant[name] = PlantedFeature(
            weights=w,
            intercept=float(rng.uniform(-2.0, 2.0)),
            target_r2=0.8,
        )
    return plant


def synth_features(spec: SynthSpec, latents: EmbeddingSet) -> FeatureTable:
    """Analytic feature table: planted linear maps of the latents plus noise.

    This path never touches audio; it exercises the statistics layer against
    exactly known ground truth.
    """
    plant = spec.plant if spec.plant is not None else default_plant(spec)
    ids = sorted(latents.rows)
    Z = np.stack([latents.rows[u] for u in ids])
    names = list(plant)
    values = np.empty((len(ids), len(names)))
    rng = _rng(spec, _SS_NOISE)
    for j, name in enumerate(names):
        pf = plant[name]
        signal = Z @ pf.weights + pf.intercept
        sigma = pf.sigma
        if sigma is None and pf.target_r2 is not None:
            if not 0.0 < pf.target_r2 <= 1.0:
                raise ParameterError(f"plant {name!r}: target_r2 outside (0, 1]")
            s2 = float(np.var(signal))
            sigma = float(np.sqrt(s2 * (1.0 - pf.target_r2) / pf.target_r2))
        sigma = sigma or 0.0
        values[:, j] = signal + sigma * rng.standard_normal(len(ids))
    return FeatureTable(
        ids=ids,
        styles=[latents.labels[u] for u in ids],
        names=names,
        values=values,
    )


def synth_utterance(f0: float, slope: float, formants: tuple[float, float, float],
                    duration: float, rate: int, seed: int,
                    jitter_depth: float = 0.05, pad_silence: float = 0.0,
                    mel_tilt_db: float = 0.0, h1_gain_db: float = 0.0,
                    aspiration_db: float | None = None,
                    clip_id: str = "synth") -> AudioClip:
    """Renders one harmonic utterance with controlled acoustic parameters.

    A harmonic stack at f0 with per-harmonic rolloff of `slope` dB per
    octave passes through three second-order resonators at the formant
    frequencies. Slow seeded jitter of ±jitter_depth modulates f0; the
    result is peak-normalized to 0.5 and optionally padded with silence.

    mel_tilt_db adds a broadband gain of mel_tilt_db * mel(f)/1000 dB to
    each harmonic, a tilt that is linear on the mel axis and therefore
    moves the low cepstral coefficients linearly. h1_gain_db boosts or
    cuts the fundamental alone, the breathy-to-pressed voice quality
    axis, which the lowest mel channels track exactly in dB.

    aspiration_db, when given, mixes in flat seeded noise at that level
    relative to a unit harmonic. It gives the band above the resonances
    real content, without which those channels sit on the analysis
    window's leakage floor and shadow the loudest component instead of
    responding to the controls.
    """
    if not 50.0 <= f0 <= 600.0:
        raise ParameterError(f"f0 {f0} Hz outside [50, 600]")
    if duration <= 0:
        raise ParameterError("duration must be positive")
    nyquist = rate / 2.0
    if max(formants) >= nyquist:
        raise ParameterError(
            f"formant {max(formants):.0f} Hz at or above Nyquist {nyquist:.0f} Hz"
        )
    if not 0.0 <= jitter_depth < 0.5:
        raise ParameterError("jitter_depth must lie in [0, 0.5)")

    rng = np.random.default_rng(seed)
    n = int(round(duration * rate))
    t = np.arange(n) / rate
    # slow sinusoidal f0 modulation, depth relative to f0
    mod_hz = rng.uniform(3.0, 5.0)
    mod_phase = rng.uniform(0.0, 2.0 * np.pi)
    inst_f0 = f0 * (1.0 + jitter_depth * np.sin(2.0 * np.pi * mod_hz * t + mod_phase))
    phase = 2.0 * np.pi * np.cumsum(inst_f0) / rate

    f0_max = f0 * (1.0 + jitter_depth)
    n_harm = max(1, int(0.95 * nyquist / f0_max))
    src = np.zeros(n)
    for k in range(1, n_harm + 1):
        gain_db = slope * np.log2(k) + mel_tilt_db * _mel(k * f0) / 1000.0
        if k == 1:
            gain_db += h1_gain_db
        src += 10.0 ** (gain_db / 20.0) * np.sin(k * phase)

    x = src
    for freq, bw in zip(formants, FORMANT_BANDWIDTHS):
        r = np.exp(-np.pi * bw / rate)
        theta = 2.0 * np.pi * freq / rate
        x = lfilter([1.0], [1.0, -2.0 * r * np.cos(theta), r * r], x)
    if aspiration_db is not None:
        # injected after the resonators so the noise spectrum stays flat
        x = x + 10.0 ** (aspiration_db / 20.0) * rng.standard_normal(n)

    peak = np.max(np.abs(x))
    if peak > 0:
        x = x * (0.5 / peak)
    if pad_silence > 0:
        pad = np.zeros(int(round(pad_silence * rate)))
        x = np.concatenate([pad, x, pad])
    return AudioClip(samples=x, sample_rate=rate, id=clip_id)


@dataclass
class RenderParams:
    """Resolved per-utterance rendering controls."""

    f0_hz: float
    slope_db_per_octave: float
    formants: tuple[float, float, float]
    jitter_depth: float
    duration: float
    mel_tilt_db: float = 0.0
    h1_gain_db: float = 0.0
    aspiration_db: float = -10.0


@dataclass
class _Coupling:
    """Global affine maps from latent space to rendering controls.

    The f0 coupling is kept small on purpose: pitch enters spectral
    measures through harmonic-comb sampling, which is the one genuinely
    nonlinear pathway in the renderer, so a tight f0 spread keeps every
    extracted feature close to linear in the latent.
    """

    w_semitone: np.ndarray
    w_slope: np.ndarray
    w_logfsc: np.ndarray
    w_jitter: np.ndarray
    w_tilt: np.ndarray
    w_asp: np.ndarray
    base_semitone: float = field(default=0.0)
    base_slope: float = -8.5
    base_formants: tuple[float, float, float] = (700.0, 1220.0, 2600.0)
    base_jitter: float = 0.025
    base_aspiration: float = -10.0


def _coupling(spec: SynthSpec) -> _Coupling:
    rng = _rng(spec, _SS_COUPLING)

    def unit(scale: float) -> np.ndarray:
        v = rng.standard_normal(spec.latent_dim)
        return scale * v / np.linalg.norm(v)

    return _Coupling(
        w_semitone=unit(0.15),
        w_slope=unit(1.0),
        w_logfsc=unit(0.09),
        w_jitter=unit(0.004),
        w_tilt=unit(0.8),
        w_asp=unit(1.9),
        base_semitone=float(to_semitone(120.0)),
    )


def derive_render_styles(spec: SynthSpec) -> list[RenderStyle]:
    """Per-style rendering anchors, user-supplied or evaluated at the mean.

    When the SynthSpec carries explicit ``render_styles`` those are returned
    untouched and rendering anchors each utterance on its style's entry.
    Otherwise anchors are the global latent-to-control maps evaluated at
    the style's latent mean.
    """
    if spec.render_styles is not None:
        return list(spec.render_styles)
    coup = _coupling(spec)
    means = style_means(spec)
    styles = []
    for s in range(spec.n_styles):
        m = means[s]
        semitone = coup.base_semitone + float(coup.w_semitone @ m)
        f0 = float(np.clip(27.5 * 2.0 ** (semitone / 12.0), 55.0, 580.0))
        slope = float(np.clip(coup.base_slope + coup.w_slope @ m, -11.0, -2.5))
        fsc = float(np.exp(np.clip(coup.w_logfsc @ m, -0.26, 0.26)))
        styles.append(RenderStyle(
            f0_base_hz=f0,
            slope_db_per_octave=slope,
            formants=tuple(f * fsc for f in coup.base_formants),
            mel_tilt_db=float(np.clip(coup.w_tilt @ m, -4.0, 4.0)),
            aspiration_db=float(np.clip(
                coup.base_aspiration + coup.w_asp @ m, -18.0, -4.0)),
        ))
    return styles


def render_params(spec: SynthSpec, base: EmbeddingSet) -> dict[str, RenderParams]:
    """Per-utterance acoustic controls, each affine in the base latent.

    Because the latent-to-control maps are global affine functions, every
    extracted acoustic feature inherits a (near-)linear dependence on the
    latent, which is exactly the structure the probes are meant to find.

    With explicit per-style anchors the same coupling vectors act on the
    deviation from the style's latent mean, so each control is anchored at
    the requested per-style value and stays affine within the style.
    """
    coup = _coupling(spec)
    dur_rng = _rng(spec, _SS_DURATION)
    custom = spec.render_styles is not None
    if custom:
        anchors = derive_render_styles(spec)
        means = style_means(spec)
        index_of = {name: s for s, name in enumerate(spec.style_names)}
    out: dict[str, RenderParams] = {}
    for u in sorted(base.rows):
        z = base.rows[u]
        if custom:
            s = index_of[base.labels[u]]
            style, dz = anchors[s], z - means[s]
            semitone = float(to_semitone(style.f0_base_hz) + coup.w_semitone @ dz)
            slope_raw = style.slope_db_per_octave + coup.w_slope @ dz
            fsc = float(np.exp(np.clip(coup.w_logfsc @ dz, -0.26, 0.26)))
            formants = tuple(f * fsc for f in style.formants)
            tilt_raw = style.mel_tilt_db + coup.w_tilt @ dz
            asp_raw = style.aspiration_db + coup.w_asp @ dz
        else:
            semitone = coup.base_semitone + float(coup.w_semitone @ z)
            slope_raw = coup.base_slope + coup.w_slope @ z
            fsc = float(np.exp(np.clip(coup.w_logfsc @ z, -0.26, 0.26)))
            formants = tuple(f * fsc for f in coup.base_formants)
            tilt_raw = coup.w_tilt @ z
            asp_raw = coup.base_aspiration + coup.w_asp @ z
        f0 = float(np.clip(27.5 * 2.0 ** (semitone / 12.0), 55.0, 580.0))
        # slope stays above -11: steeper rolloffs starve the upper
        # resonances and the pole fit collapses onto the low harmonics
        slope = float(np.clip(slope_raw, -11.0, -2.5))
        jit = float(np.clip(coup.base_jitter + coup.w_jitter @ z, 0.004, 0.06))
        out[u] = RenderParams(
            f0_hz=f0,
            slope_db_per_octave=slope,
            formants=formants,
            jitter_depth=jit,
            duration=float(dur_rng.uniform(*spec.duration_range)),
            mel_tilt_db=float(np.clip(tilt_raw, -4.0, 4.0)),
            aspiration_db=float(np.clip(asp_raw, -18.0, -4.0)),
        )
    return out


def synth_corpus(spec: SynthSpec, out_dir: str, write_wavs: bool = True) -> dict[str, str]:
    """Writes a complete corpus: wavs, manifest, per-task embedding CSVs.

    Returns the paths of everything written. Layout under out_dir:
    manifest.csv, embeddings_<task>.csv, wav/<utterance_id>.wav.
    """
    from .embeddings import save_embeddings

    os.makedirs(out_dir, exist_ok=True)
    base = synth_latents(spec)
    tasks = derive_task_embeddings(spec, base)
    paths: dict[str, str] = {}
    for task, emb in tasks.items():
        p = os.path.join(out_dir, f"embeddings_{task}.csv")
        save_embeddings(emb, p)
        paths[f"embeddings_{task}"] = p

    manifest = os.path.join(out_dir, "manifest.csv")
    wav_dir = os.path.join(out_dir, "wav")
    if write_wavs:
        os.makedirs(wav_dir, exist_ok=True)
        params = render_params(spec, base)
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance_id", "style", "path"])
        for i, u in enumerate(sorted(base.rows)):
            rel = os.path.join("wav", f"{u}.wav")
            writer.writerow([u, base.labels[u], rel])
            if write_wavs:
                rp = params[u]
                clip = synth_utterance(
                    rp.f0_hz, rp.slope_db_per_octave, rp.formants,
                    rp.duration, spec.sample_rate,
                    seed=np.random.SeedSequence((spec.seed, _SS_RENDER, i)).generate_state(1)[0],
                    jitter_depth=rp.jitter_depth,
                    pad_silence=spec.pad_silence,
                    mel_tilt_db=rp.mel_tilt_db,
                    h1_gain_db=rp.h1_gain_db,
                    aspiration_db=rp.aspiration_db,
                    clip_id=u,
                )
                write_wav(clip, os.path.join(out_dir, rel))
    paths["manifest"] = manifest
    return paths
