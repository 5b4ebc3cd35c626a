"""Fake-speech detection via modulation-spectrogram / SSL-embedding fusion."""

from .audio_io import CLIP_SAMPLES, SAMPLE_RATE, AudioClip, fix_length, load_wav, synth_clip
from .classifier import HeadParams, head_logits, pool_features, score
from .embeddings import EmbeddingMatrix, project_embeddings, read_matrix, write_matrix
from .fusion import FusedFeature, FusionParams, multi_head_fuse, scaled_dot_attention
from .metrics import EerResult, ScoreRecord, compute_eer, density_export, grouped_eer, relative_improvement
from .modspec import ModSpectrogram, Stft, dft_any_length, modspec_feature, modulation_spectrogram, stft
from .protocol import ProtocolEntry, class_weights, parse_asvspoof_protocol, parse_manifest

__version__ = "0.1.0"
