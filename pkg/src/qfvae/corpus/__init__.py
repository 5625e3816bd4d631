"""Synthetic controllable-prosody corpus."""

from qfvae.corpus.models import CorpusSpec, ProsodyRanges, TokenTruth, Utterance
from qfvae.corpus.storage import read_corpus, split_corpus, write_corpus
from qfvae.corpus.synthesis import gen_utterance, generate_corpus, probe_token_f0, synthesize

__all__ = [
    "CorpusSpec",
    "ProsodyRanges",
    "TokenTruth",
    "Utterance",
    "gen_utterance",
    "generate_corpus",
    "probe_token_f0",
    "read_corpus",
    "split_corpus",
    "synthesize",
    "write_corpus",
]
