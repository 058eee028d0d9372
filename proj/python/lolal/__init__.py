"""Python bindings for the lolal active-learning library.

Samples are plain dicts with ``id``, ``parent``, ``child``, ``lolbin`` and an
optional ``label``, the same fields as a line of a corpus file.
"""

import json

from . import _core
from ._core import LolalError, rank_round_robin, tokenize, tokenize_line, uncertainty_score

__all__ = [
    "LolalError",
    "Pipeline",
    "generate_corpus",
    "nb_anomaly_scores",
    "rank_round_robin",
    "simulate",
    "tokenize",
    "tokenize_line",
    "uncertainty_score",
]


def _to_jsonl(samples):
    return "".join(json.dumps(s) + "\n" for s in samples)


def _from_jsonl(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def generate_corpus(spec=None):
    """Returns (labeled, unlabeled) lists of sample dicts."""
    labeled, unlabeled = _core.generate_corpus(json.dumps(spec) if spec else "")
    return _from_jsonl(labeled), _from_jsonl(unlabeled)


def nb_anomaly_scores(train, assigned, query, query_class):
    return _core.nb_anomaly_scores(train, list(assigned), query, list(query_class))


class Pipeline:
    """Dictionary, embeddings and featurization settings trained on command text."""

    def __init__(self, core):
        self._core = core

    @classmethod
    def train(cls, samples, mode="fasttext", dim=16, epochs=20, seed=1, feature_set="S+V(W)"):
        return cls(_core.Pipeline.train(_to_jsonl(samples), mode, dim, epochs, seed, feature_set))

    @classmethod
    def load(cls, path):
        return cls(_core.Pipeline.load(str(path)))

    def save(self, path):
        self._core.save(str(path))

    @property
    def width(self):
        return self._core.width

    @property
    def names(self):
        return self._core.names

    @property
    def vocabulary(self):
        return self._core.vocabulary

    def token_scores(self, labeled):
        return self._core.token_scores(_to_jsonl(labeled))

    def featurize(self, samples, labeled):
        """Feature matrix (numpy) of `samples`, scoring tokens from `labeled`."""
        return self._core.featurize(_to_jsonl(samples), _to_jsonl(labeled))


def simulate(labeled, extra=(), strategies=("lolal", "random"), iterations=50, batch_size=5,
             seed_labels=10, runs=5, seed=1, dim=16, epochs=20):
    """Runs the oracle-driven loop and returns the report as a dict."""
    text = _core.simulate(_to_jsonl(labeled), _to_jsonl(extra), list(strategies), iterations,
                          batch_size, seed_labels, runs, seed, dim, epochs)
    return json.loads(text)
