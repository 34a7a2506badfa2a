"""Loading, validation, standardization, and correlation diagnostics for
word-embedding matrices.

The text format is one word per line followed by its space-separated
coordinates, optionally preceded by a ``m d`` header line.  Matrices are
frozen after construction; :func:`standardize` returns a new matrix
instead of mutating.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmbeddingLoadError,
    RelcompError,
    UnknownWordError,
    ZeroVarianceError,
)

logger = logging.getLogger(__name__)

TEXT_NO_HEADER = "no-header"
TEXT_WITH_HEADER = "with-header"
FORMAT_AUTO = "auto"

HISTOGRAM_CSV_HEADER = "bin_lower,bin_upper,count"


@dataclass(eq=False)
class EmbeddingMatrix:
    """A vocabulary plus an (m, d) matrix of word vectors, one row per word.

    Invariants enforced at construction: every entry is finite, vocabulary
    entries are unique, and the row count matches the vocabulary size.
    The vector array is made read-only, so instances can be shared freely
    across threads.
    """

    vocab: list[str]
    vectors: np.ndarray
    standardized: bool = False
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[1] < 1:
            raise RelcompError(f"expected an (m, d) matrix, got shape {vectors.shape}")
        if len(self.vocab) != vectors.shape[0]:
            raise RelcompError(
                f"vocabulary size {len(self.vocab)} does not match "
                f"{vectors.shape[0]} rows"
            )
        if not np.all(np.isfinite(vectors)):
            raise RelcompError("embedding matrix contains non-finite values")
        index: dict[str, int] = {}
        for i, word in enumerate(self.vocab):
            if word in index:
                raise RelcompError(f"duplicate word in vocabulary: {word!r}")
            index[word] = i
        vectors.setflags(write=False)
        self.vectors = vectors
        self.vocab = list(self.vocab)
        self._index = index

    @property
    def n_words(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, word) -> bool:
        return word in self._index

    def index_of(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise UnknownWordError(word) from None

    def lookup(self, word: str) -> np.ndarray:
        """Return the (read-only) embedding row for ``word``."""
        return self.vectors[self.index_of(word)]


@dataclass
class StandardizationStats:
    """Per-dimension means and population standard deviations.

    ``invert`` undoes the standardizing transform, so
    ``stats.invert(standardized.vectors)`` recovers the original matrix.
    """

    means: np.ndarray
    stddevs: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        stddevs = np.asarray(self.stddevs, dtype=np.float64)
        if means.shape != stddevs.shape or means.ndim != 1:
            raise RelcompError("means and stddevs must be 1-d vectors of equal length")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(stddevs))):
            raise RelcompError("standardization stats contain non-finite values")
        if np.any(stddevs <= 0):
            raise ZeroVarianceError(np.nonzero(stddevs <= 0)[0].tolist())
        self.means = means
        self.stddevs = stddevs

    def invert(self, standardized: np.ndarray) -> np.ndarray:
        return np.asarray(standardized, dtype=np.float64) * self.stddevs + self.means


@dataclass
class CorrelationReport:
    """Pairwise Pearson correlations between embedding dimensions.

    The diagonal is set to exactly 1, summary statistics cover all
    d*(d-1) off-diagonal entries (both triangles), and the histogram
    spans [-1, 1] with equal-width bins.
    """

    matrix: np.ndarray
    mean_abs_offdiag: float
    sd_offdiag: float
    histogram: list[tuple[float, float, int]]
    n_words: int

    def summary_dict(self, include_matrix: bool = False) -> dict:
        out = {
            "dim": int(self.matrix.shape[0]),
            "n_words": int(self.n_words),
            "bins": len(self.histogram),
            "mean_abs_offdiag": self.mean_abs_offdiag,
            "sd_offdiag": self.sd_offdiag,
        }
        if include_matrix:
            out["matrix"] = self.matrix.tolist()
        return out

    def write_json(self, path, include_matrix: bool = False) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary_dict(include_matrix), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_histogram_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(HISTOGRAM_CSV_HEADER + "\n")
            for lower, upper, count in self.histogram:
                fh.write(f"{lower!r},{upper!r},{count}\n")


def _looks_like_header(line: str) -> bool:
    tokens = line.split()
    if len(tokens) != 2:
        return False
    return all(tok.isdigit() for tok in tokens)


def load_embeddings(path, fmt: str = FORMAT_AUTO) -> EmbeddingMatrix:
    """Parse an embedding text file into a validated :class:`EmbeddingMatrix`.

    Parameters
    ----------
    path : str or Path
        File with one ``word v1 ... vd`` line per word, optionally
        preceded by a ``m d`` header.
    fmt : str
        ``"no-header"``, ``"with-header"``, or ``"auto"`` (detect a header
        as a first line of exactly two unsigned integers).

    Raises
    ------
    EmbeddingLoadError
        On malformed lines, inconsistent dimensionality, duplicate words,
        or non-finite values; the message carries the 1-based line number.
    """
    if fmt not in (FORMAT_AUTO, TEXT_NO_HEADER, TEXT_WITH_HEADER):
        raise RelcompError(f"unknown embedding format: {fmt!r}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except UnicodeDecodeError as exc:
        raise EmbeddingLoadError(f"not valid UTF-8: {exc}") from None

    header_m = header_d = None
    start = 0
    if lines:
        first = lines[0].strip()
        if fmt == TEXT_WITH_HEADER or (fmt == FORMAT_AUTO and _looks_like_header(first)):
            tokens = first.split()
            if len(tokens) != 2 or not all(t.isdigit() for t in tokens):
                raise EmbeddingLoadError(
                    f"expected header 'm d', got {first!r}", line_number=1
                )
            header_m, header_d = int(tokens[0]), int(tokens[1])
            start = 1

    vocab: list[str] = []
    rows: list[list[float]] = []
    seen: dict[str, int] = {}
    dim = header_d
    for offset, raw in enumerate(lines[start:], start=start + 1):
        if not raw.strip():
            continue
        tokens = raw.split()
        if len(tokens) < 2:
            raise EmbeddingLoadError(
                f"expected 'word v1 ... vd', got {raw!r}", line_number=offset
            )
        word, values = tokens[0], tokens[1:]
        if word in seen:
            raise EmbeddingLoadError(
                f"duplicate word {word!r} (first seen on line {seen[word]})",
                line_number=offset,
            )
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise EmbeddingLoadError(
                f"expected {dim} values, got {len(values)}", line_number=offset
            )
        try:
            row = [float(v) for v in values]
        except ValueError as exc:
            raise EmbeddingLoadError(str(exc), line_number=offset) from None
        if not all(np.isfinite(row)):
            raise EmbeddingLoadError("non-finite value", line_number=offset)
        seen[word] = offset
        vocab.append(word)
        rows.append(row)

    if not rows:
        raise EmbeddingLoadError("no embedding rows found")
    if header_m is not None and header_m != len(rows):
        raise EmbeddingLoadError(
            f"header declares {header_m} rows but file has {len(rows)}"
        )
    return EmbeddingMatrix(vocab=vocab, vectors=np.array(rows), standardized=False)


def _column_stats(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    means = matrix.mean(axis=0)
    variances = matrix.var(axis=0)  # population (divide by m)
    zero = np.nonzero(variances == 0.0)[0]
    if zero.size:
        raise ZeroVarianceError(zero.tolist())
    return means, np.sqrt(variances)


def standardize(
    emb: EmbeddingMatrix, stats_words: list[str] | None = None
) -> tuple[EmbeddingMatrix, StandardizationStats]:
    """Shift and scale every dimension to zero mean and unit variance.

    Statistics use the population convention (divide by m), so the output
    column variances equal 1 exactly up to rounding.  By default they are
    computed over the full vocabulary; ``stats_words`` restricts the rows
    used for the statistics while the transform is still applied to every
    row.

    Returns the standardized matrix together with the
    :class:`StandardizationStats` that invert the transform.

    Raises
    ------
    ZeroVarianceError
        If any dimension of the statistics rows has zero variance.
    """
    if emb.n_words < 2:
        raise RelcompError("standardization needs at least 2 words")
    if stats_words is None:
        basis = emb.vectors
    else:
        idx = [emb.index_of(w) for w in stats_words]
        if len(idx) < 2:
            raise RelcompError("standardization needs at least 2 statistics words")
        basis = emb.vectors[idx]
    means, stddevs = _column_stats(basis)
    transformed = (emb.vectors - means) / stddevs
    out = EmbeddingMatrix(
        vocab=list(emb.vocab), vectors=transformed, standardized=True
    )
    return out, StandardizationStats(means=means, stddevs=stddevs)


def correlation_report(emb: EmbeddingMatrix, bins: int = 100) -> CorrelationReport:
    """Pearson correlation between every pair of embedding dimensions.

    Correlations are computed over all words, the diagonal is set (not
    computed) to 1, and the histogram covers the off-diagonal values on
    [-1, 1] with ``bins`` equal-width bins.

    Raises
    ------
    ZeroVarianceError
        If any dimension is constant.
    """
    if emb.n_words < 3:
        raise RelcompError("correlation report needs at least 3 words")
    if bins < 1:
        raise RelcompError("bins must be a positive integer")
    m, d = emb.vectors.shape
    means, stddevs = _column_stats(emb.vectors)
    z = (emb.vectors - means) / stddevs
    corr = z.T @ z / m
    corr = (corr + corr.T) / 2.0  # enforce exact symmetry
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)

    off = corr[~np.eye(d, dtype=bool)]
    if off.size:
        mean_abs = float(np.mean(np.abs(off)))
        sd = float(np.std(off))
    else:
        mean_abs = 0.0
        sd = 0.0
    counts, edges = np.histogram(off, bins=bins, range=(-1.0, 1.0))
    histogram = [
        (float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)
    ]
    return CorrelationReport(
        matrix=corr,
        mean_abs_offdiag=mean_abs,
        sd_offdiag=sd,
        histogram=histogram,
        n_words=m,
    )
