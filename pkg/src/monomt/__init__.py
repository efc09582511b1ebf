"""Machine translation trained from monolingual corpora alone, at desk scale.

A dual attentional encoder-decoder: one shared bidirectional GRU
encoder over fixed cross-lingual embeddings, one decoder per language,
trained by rotating denoising (adjacent-swap corruption) and
on-the-fly backtranslation objectives, optionally mixed with a small
parallel corpus. Everything runs on a CPU-sized numpy autodiff engine
and is verifiable end to end on synthetic language pairs with known
ground truth.
"""

from .config import RunConfig
from .data import Batch, Vocabulary, build_vocab, length_filter, make_batches
from .decoding import beam_search, greedy_decode, translate_corpus
from .embeddings import (CrossLingualSpace, EmbeddingMatrix, load_embeddings,
                         procrustes_map, word_by_word_translate)
from .evaluation import BleuReport, bleu, perplexity
from .model import ModelConfig, TranslationModel, load_checkpoint, save_checkpoint
from .noise import corrupt
from .bpe import MergeTable, apply_bpe, learn_bpe, undo_bpe
from .synthetic import LangPairSpec, PairGenerator, write_toy_dataset
from .training import Adam, TrainSettings, train

__version__ = "0.1.0"

__all__ = [
    "Adam", "Batch", "BleuReport", "CrossLingualSpace", "EmbeddingMatrix",
    "LangPairSpec", "MergeTable", "ModelConfig", "PairGenerator", "RunConfig",
    "TrainSettings", "TranslationModel", "Vocabulary", "apply_bpe", "beam_search",
    "bleu", "build_vocab", "corrupt", "greedy_decode", "learn_bpe",
    "length_filter", "load_checkpoint", "load_embeddings", "make_batches",
    "perplexity", "procrustes_map", "save_checkpoint", "train",
    "translate_corpus", "undo_bpe", "word_by_word_translate", "write_toy_dataset",
]
