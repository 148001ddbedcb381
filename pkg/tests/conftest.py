"""Shared fixtures: tones, noise clips, and one analytic synthetic corpus."""

import numpy as np
import pytest

from latentprobe import (
    AudioClip,
    SynthSpec,
    derive_task_embeddings,
    join,
    synth_features,
    synth_latents,
)

SR = 22050


def make_tone(freq: float, duration: float = 1.0, sr: int = SR,
              amp: float = 0.3, clip_id: str = "tone") -> AudioClip:
    t = np.arange(int(round(duration * sr))) / sr
    return AudioClip(amp * np.sin(2.0 * np.pi * freq * t), sr, id=clip_id)


def make_noise(duration: float = 1.0, sr: int = SR, amp: float = 0.3,
               seed: int = 0, clip_id: str = "noise") -> AudioClip:
    rng = np.random.default_rng(seed)
    n = int(round(duration * sr))
    return AudioClip(amp * rng.standard_normal(n), sr, id=clip_id)


@pytest.fixture(scope="session")
def analytic_spec() -> SynthSpec:
    return SynthSpec(n_styles=8, n_per_style=250, seed=0)


@pytest.fixture(scope="session")
def analytic_corpus(analytic_spec):
    """Latents, per-task embeddings, analytic features, and joined datasets.

    2000 utterances across 8 styles; features come from the planted linear
    maps, never from audio, so statistics-layer assertions stay exact.
    """
    base = synth_latents(analytic_spec)
    tasks = derive_task_embeddings(analytic_spec, base)
    feats = synth_features(analytic_spec, base)
    datasets = {task: join(emb, feats) for task, emb in tasks.items()}
    return {"spec": analytic_spec, "base": base, "tasks": tasks,
            "features": feats, "datasets": datasets}
