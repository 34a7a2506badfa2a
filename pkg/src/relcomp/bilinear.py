"""Bilinear composition of relation vectors from word-embedding pairs.

The operator computes r(h, t) = h^T A t + P h + Q t, where A is a
third-order tensor of pairwise interaction weights and P, Q are the
first-order projection matrices.  The "diagonal" constraint mode
restricts P and Q to scalar multiples of the identity (P = p I,
Q = q I), which is the form used during training.  PairDiff, the plain
vector offset r = h - t, is the special case A = 0, P = I, Q = -I.
"""

from __future__ import annotations

import hashlib
import json
import warnings

import numpy as np

from .errors import DimensionMismatchError, RelcompError

GENERAL = "general"
DIAGONAL = "diagonal"


class BilinearOperator:
    """Parameters (A, P, Q) of the composition r(h, t) = h^T A t + P h + Q t.

    Attributes
    ----------
    tensor_A : ndarray, shape (d, d, d)
        Slice ``tensor_A[k]`` holds the pairwise weights feeding output
        dimension k.
    constraint_mode : str
        ``"general"`` (full P, Q matrices) or ``"diagonal"`` (P = p I,
        Q = q I).
    p, q : float or None
        The diagonal-mode scalars; ``None`` in general mode.

    Parameter arrays are frozen at construction and composition never
    mutates them, so operators are safe to share between threads.
    """

    def __init__(self, tensor_A, *, P=None, Q=None, p=None, q=None):
        A = np.array(tensor_A, dtype=np.float64)
        if A.ndim != 3 or not (A.shape[0] == A.shape[1] == A.shape[2]):
            raise DimensionMismatchError(
                f"tensor must have shape (d, d, d), got {A.shape}"
            )
        if not np.all(np.isfinite(A)):
            raise RelcompError("tensor contains non-finite entries")
        d = A.shape[0]

        has_matrices = P is not None or Q is not None
        has_scalars = p is not None or q is not None
        if has_matrices == has_scalars:
            raise RelcompError("give either matrices (P, Q) or scalars (p, q)")

        if has_scalars:
            if p is None or q is None:
                raise RelcompError("diagonal mode needs both p and q")
            p = float(p)
            q = float(q)
            if not (np.isfinite(p) and np.isfinite(q)):
                raise RelcompError("p and q must be finite")
            self.constraint_mode = DIAGONAL
            self.p = p
            self.q = q
            self._P_full = None
            self._Q_full = None
        else:
            if P is None or Q is None:
                raise RelcompError("general mode needs both P and Q")
            P = np.array(P, dtype=np.float64)
            Q = np.array(Q, dtype=np.float64)
            if P.shape != (d, d) or Q.shape != (d, d):
                raise DimensionMismatchError(
                    f"P and Q must have shape ({d}, {d}), got {P.shape} and {Q.shape}"
                )
            if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Q))):
                raise RelcompError("P or Q contains non-finite entries")
            P.setflags(write=False)
            Q.setflags(write=False)
            self.constraint_mode = GENERAL
            self.p = None
            self.q = None
            self._P_full = P
            self._Q_full = Q

        A.setflags(write=False)
        self.tensor_A = A

    @classmethod
    def general(cls, tensor_A, P, Q) -> "BilinearOperator":
        return cls(tensor_A, P=P, Q=Q)

    @classmethod
    def diagonal(cls, tensor_A, p, q) -> "BilinearOperator":
        return cls(tensor_A, p=p, q=q)

    @classmethod
    def zero(cls, d: int) -> "BilinearOperator":
        """The all-zero operator: r(h, t) = 0 for every pair."""
        return cls.general(
            np.zeros((d, d, d)), np.zeros((d, d)), np.zeros((d, d))
        )

    @classmethod
    def pairdiff(cls, d: int) -> "BilinearOperator":
        """The vector-offset operator r(h, t) = h - t in diagonal form."""
        return cls.diagonal(np.zeros((d, d, d)), 1.0, -1.0)

    @property
    def d(self) -> int:
        return self.tensor_A.shape[0]

    @property
    def P(self) -> np.ndarray:
        """The P matrix; in diagonal mode this materializes p * I exactly."""
        if self.constraint_mode == DIAGONAL:
            return self.p * np.eye(self.d)
        return self._P_full

    @property
    def Q(self) -> np.ndarray:
        if self.constraint_mode == DIAGONAL:
            return self.q * np.eye(self.d)
        return self._Q_full

    def __repr__(self):
        if self.constraint_mode == DIAGONAL:
            return (
                f"BilinearOperator(d={self.d}, diagonal, p={self.p!r}, q={self.q!r})"
            )
        return f"BilinearOperator(d={self.d}, general)"


def _check_vector(v, d: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (d,):
        raise DimensionMismatchError(
            f"{name} must have shape ({d},), got {v.shape}"
        )
    return v


def compose(op: BilinearOperator, h, t) -> np.ndarray:
    """Relation vector r(h, t) with r_k = sum_ij A[k,i,j] h_i t_j + (P h)_k + (Q t)_k."""
    d = op.d
    h = _check_vector(h, d, "h")
    t = _check_vector(t, d, "t")
    bilinear = op.tensor_A.reshape(d, d * d) @ np.outer(h, t).ravel()
    if op.constraint_mode == DIAGONAL:
        linear = op.p * h + op.q * t
    else:
        linear = op._P_full @ h + op._Q_full @ t
    return bilinear + linear


def compose_many(op: BilinearOperator, H, T) -> np.ndarray:
    """Vectorized :func:`compose` over row-aligned (n, d) arrays of pairs."""
    d = op.d
    H = np.asarray(H, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if H.ndim != 2 or H.shape[1] != d or H.shape != T.shape:
        raise DimensionMismatchError(
            f"H and T must both have shape (n, {d}), got {H.shape} and {T.shape}"
        )
    outer = (H[:, :, None] * T[:, None, :]).reshape(H.shape[0], d * d)
    bilinear = outer @ op.tensor_A.reshape(d, d * d).T
    if op.constraint_mode == DIAGONAL:
        linear = op.p * H + op.q * T
    else:
        linear = H @ op._P_full.T + T @ op._Q_full.T
    return bilinear + linear


def pairdiff(h, t, inv_sigma=None) -> np.ndarray:
    """Vector offset h - t, optionally rescaled per dimension by 1/sigma."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1:
        raise DimensionMismatchError(f"h must be a vector, got shape {h.shape}")
    t = _check_vector(t, h.shape[0], "t")
    diff = h - t
    if inv_sigma is None:
        return diff
    inv_sigma = _check_vector(inv_sigma, h.shape[0], "inv_sigma")
    if np.any(inv_sigma <= 0):
        raise RelcompError("inv_sigma entries must be strictly positive")
    return diff * inv_sigma


def relational_distance_sq(op: BilinearOperator, pair1, pair2) -> float:
    """Squared Euclidean distance between the two pairs' relation vectors."""
    r1 = compose(op, *pair1)
    r2 = compose(op, *pair2)
    delta = r1 - r2
    return float(delta @ delta)


def _cosine_flagged(r1: np.ndarray, r2: np.ndarray) -> tuple[float, bool]:
    n1 = float(np.linalg.norm(r1))
    n2 = float(np.linalg.norm(r2))
    if n1 == 0.0 or n2 == 0.0:
        return 0.0, True
    sim = float(r1 @ r2) / (n1 * n2)
    return min(1.0, max(-1.0, sim)), False


def relational_similarity(op: BilinearOperator, pair1, pair2) -> float:
    """Cosine similarity between the two pairs' relation vectors.

    A zero-norm relation vector has no direction; the similarity is
    defined as 0 and a RuntimeWarning is emitted.
    """
    sim, degenerate = _cosine_flagged(compose(op, *pair1), compose(op, *pair2))
    if degenerate:
        warnings.warn(
            "zero-norm relation vector; similarity defined as 0", RuntimeWarning
        )
    return sim


def frobenius_norm_A(op: BilinearOperator) -> float:
    """Frobenius norm of the interaction tensor: sqrt of the sum of squares."""
    return float(np.sqrt(np.sum(op.tensor_A * op.tensor_A)))


def operator_to_dict(op: BilinearOperator) -> dict:
    """JSON-ready dict with d, mode, p, q, and row-major flattened A, P, Q."""
    return {
        "d": op.d,
        "constraint_mode": op.constraint_mode,
        "p": op.p,
        "q": op.q,
        "A": op.tensor_A.ravel().tolist(),
        "P": np.asarray(op.P).ravel().tolist(),
        "Q": np.asarray(op.Q).ravel().tolist(),
    }


def operator_from_dict(doc: dict) -> BilinearOperator:
    try:
        d = int(doc["d"])
        mode = doc["constraint_mode"]
        A = np.array(doc["A"], dtype=np.float64).reshape(d, d, d)
    except (KeyError, TypeError, ValueError) as exc:
        raise RelcompError(f"malformed operator document: {exc}") from None
    if mode == DIAGONAL:
        op = BilinearOperator.diagonal(A, doc["p"], doc["q"])
    elif mode == GENERAL:
        try:
            P = np.array(doc["P"], dtype=np.float64).reshape(d, d)
            Q = np.array(doc["Q"], dtype=np.float64).reshape(d, d)
        except (KeyError, TypeError, ValueError) as exc:
            raise RelcompError(f"malformed operator document: {exc}") from None
        op = BilinearOperator.general(A, P, Q)
    else:
        raise RelcompError(f"unknown constraint mode: {mode!r}")
    if mode == DIAGONAL and "P" in doc:
        stored_P = np.array(doc["P"], dtype=np.float64).reshape(d, d)
        stored_Q = np.array(doc["Q"], dtype=np.float64).reshape(d, d)
        if not (np.array_equal(stored_P, op.P) and np.array_equal(stored_Q, op.Q)):
            raise RelcompError(
                "diagonal-mode document stores P or Q inconsistent with p, q"
            )
    return op


def save_operator(op: BilinearOperator, path) -> None:
    """Write the operator as a single JSON document; round-trips value-exact."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(operator_to_dict(op), fh)
        fh.write("\n")


def load_operator(path) -> BilinearOperator:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise RelcompError(f"operator file is not valid JSON: {exc}") from None
    return operator_from_dict(doc)


def operator_digest(op: BilinearOperator) -> str:
    """Stable hex digest of the operator's exact parameter values."""
    h = hashlib.sha256()
    h.update(op.constraint_mode.encode())
    h.update(np.int64(op.d).tobytes())
    h.update(np.ascontiguousarray(op.tensor_A).tobytes())
    if op.constraint_mode == DIAGONAL:
        h.update(np.float64(op.p).tobytes())
        h.update(np.float64(op.q).tobytes())
    else:
        h.update(np.ascontiguousarray(op._P_full).tobytes())
        h.update(np.ascontiguousarray(op._Q_full).tobytes())
    return h.hexdigest()
