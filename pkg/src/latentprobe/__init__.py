"""latentprobe: relate speech style-embedding spaces to acoustic features.

The pipeline: extract interpretable acoustic features from WAV corpora,
join them with per-utterance latent embeddings, score each latent dimension
against style labels with mutual information, probe each feature with OLS
hyperplanes scored by absolute Pearson correlation, reduce latent spaces to
2-D (PCA, t-SNE, UMAP), and overlay per-feature gradient directions. A
synthetic corpus generator with planted structure provides ground truth for
verifying every stage.
"""

__version__ = "0.1.0"

from .audio import (
    AudioClip,
    FrameConfig,
    chunk_nonsilent,
    load_wav,
    resample,
    trim_silence,
    write_wav,
)
from .dimred import (
    REDUCERS,
    Reduced2D,
    pca2,
    run_reducer,
    standardize,
    tsne2,
    umap2,
)
from .embeddings import (
    EmbeddingSet,
    JoinedDataset,
    join,
    load_embeddings,
    save_embeddings,
)
from .errors import (
    EmptyClipError,
    EmptyTrackError,
    FormatError,
    JoinError,
    LatentProbeError,
    NumericalError,
    ParameterError,
    UnderdeterminedError,
    UnsupportedFormatError,
    ValidationError,
)
from .features import (
    CANONICAL_FEATURES,
    F0Track,
    FeatureTable,
    FeatureVector,
    apply_functionals,
    extract_features,
    f0_track,
    lpc_formants,
    mel_spectrogram,
    mfcc,
    spectral_frame_measures,
)
from .gradients import (
    GradientArrow,
    GradientField,
    apcc_average_table,
    gradient_field,
)
from .report import AnalysisReport, run_analysis, write_report
from .stats import (
    LinearProbe,
    apcc,
    apcc_null_quantile,
    apcc_table,
    digamma,
    mi_table,
    mutual_info_cd,
    ols_fit,
    select_features,
)
from .svg import contact_sheet, render_svg
from .synthgen import (
    PlantedFeature,
    RenderStyle,
    SynthSpec,
    derive_task_embeddings,
    render_params,
    style_means,
    synth_corpus,
    synth_features,
    synth_latents,
    synth_utterance,
)
from .tables import NamedTable

__all__ = [
    "__version__",
    "AudioClip", "FrameConfig", "load_wav", "write_wav", "trim_silence",
    "chunk_nonsilent", "resample",
    "CANONICAL_FEATURES", "F0Track", "FeatureVector", "FeatureTable",
    "f0_track", "lpc_formants", "spectral_frame_measures", "mfcc",
    "mel_spectrogram", "apply_functionals", "extract_features",
    "EmbeddingSet", "JoinedDataset", "load_embeddings", "save_embeddings",
    "join",
    "NamedTable",
    "mutual_info_cd", "mi_table", "ols_fit", "apcc", "apcc_table",
    "select_features", "LinearProbe", "apcc_null_quantile", "digamma",
    "REDUCERS", "Reduced2D", "standardize", "pca2", "tsne2", "umap2",
    "run_reducer",
    "GradientArrow", "GradientField", "gradient_field", "apcc_average_table",
    "SynthSpec", "PlantedFeature", "RenderStyle", "synth_latents",
    "derive_task_embeddings", "style_means", "render_params",
    "synth_features", "synth_utterance", "synth_corpus",
    "render_svg", "contact_sheet",
    "AnalysisReport", "run_analysis", "write_report",
    "LatentProbeError", "FormatError", "UnsupportedFormatError",
    "EmptyClipError", "EmptyTrackError", "ParameterError", "ValidationError",
    "JoinError", "UnderdeterminedError", "NumericalError",
]
