"""Knowledge-table export: subset a node-embedding source to a vocabulary."""

import os

import numpy as np

from .formats import ConfigurationError, ExportError, read_embedding, \
    write_embedding, write_wordlist


class KnowledgeSource:
    """Word -> vector map backed by an embedding file plus word-list sidecar."""

    def __init__(self, emb_path: str | os.PathLike, words_path: str | os.PathLike):
        if not os.path.exists(emb_path) or not os.path.exists(words_path):
            raise ConfigurationError(
                f"node-embedding source missing: {emb_path} / {words_path}")
        matrix = read_embedding(emb_path)
        with open(words_path, "r", encoding="utf-8") as fh:
            words = [line.strip() for line in fh if line.strip()]
        if len(words) != matrix.shape[0]:
            raise ConfigurationError(
                f"source word list has {len(words)} entries for "
                f"{matrix.shape[0]} embedding rows")
        self.d = int(matrix.shape[1])
        self._vectors: dict[str, np.ndarray] = {}
        for word, row in zip(words, matrix):
            self._vectors.setdefault(word.casefold(), row)

    def lookup(self, word: str) -> np.ndarray | None:
        return self._vectors.get(word.casefold())

    def pool(self, tokens: list[str]) -> np.ndarray:
        """Mean vector over tokens; out-of-vocabulary tokens pool as zeros."""
        acc = np.zeros(self.d, dtype=np.float64)
        if not tokens:
            return acc.reshape(1, -1).astype(np.float32)
        for tok in tokens:
            vec = self.lookup(tok)
            if vec is not None:
                acc += vec
        acc /= len(tokens)
        return acc.reshape(1, -1).astype(np.float32)


def export_knowledge(vocabulary: list[str], source: KnowledgeSource,
                     emb_path: str | os.PathLike,
                     words_path: str | os.PathLike) -> list[str]:
    """Write the table files for ``vocabulary``; returns the words kept.

    Duplicates keep their first occurrence; words absent from the source are
    omitted (the engine maps them to zero at lookup time). An empty vocabulary
    is an error, not an empty file.
    """
    if not vocabulary:
        raise ExportError("empty vocabulary")
    kept: list[str] = []
    seen: set[str] = set()
    rows: list[np.ndarray] = []
    for word in vocabulary:
        folded = word.casefold()
        if folded in seen:
            continue
        seen.add(folded)
        vec = source.lookup(folded)
        if vec is None:
            continue
        kept.append(folded)
        rows.append(vec)
    if not kept:
        raise ExportError("no vocabulary word exists in the node-embedding source")
    write_embedding(np.stack(rows), emb_path)
    write_wordlist(kept, words_path)
    return kept
