"""PCA reduction of prompt embeddings into the feature map used downstream.

The embedding rows are centred, their population covariance is diagonalised by
cyclic Jacobi rotations (deterministic, dense, symmetric), and the features are
the coordinates on the top-d eigenvectors. Each eigenvector's sign is fixed by
making its first nonzero component positive.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import ConfigurationError, NumericalError

_JACOBI_MAX_SWEEPS = 100
_SIGN_EPS = 1e-12


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = _JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) with eigenvectors in columns, unsorted.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigurationError(f"need a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=1e-10):
        raise ConfigurationError("matrix must be symmetric")
    n = a.shape[0]
    vectors = np.eye(n)
    scale = max(float(np.abs(a).max()), 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            return np.diag(a).copy(), vectors
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-30 * scale:
                    continue
                phi = (a[q, q] - a[p, p]) / (2.0 * apq)
                if phi == 0.0:
                    t = 1.0
                else:
                    t = np.sign(phi) / (abs(phi) + np.sqrt(phi * phi + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = a[:, p].copy()
                rot_q = a[:, q].copy()
                a[:, p] = c * rot_p - s * rot_q
                a[:, q] = s * rot_p + c * rot_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                vec_p = vectors[:, p].copy()
                vec_q = vectors[:, q].copy()
                vectors[:, p] = c * vec_p - s * vec_q
                vectors[:, q] = s * vec_p + c * vec_q
    raise NumericalError(f"Jacobi rotations did not converge in {max_sweeps} sweeps")


def pca_reduce(embeddings: np.ndarray, dim: int):
    """Project K embedding rows onto the top-``dim`` principal directions.

    Returns (features K x d, basis p x d, mean p-vector); features are
    ``(e(x) - mean) @ basis``.
    """
    table = np.asarray(embeddings, dtype=float)
    if table.ndim != 2 or table.shape[0] < 1 or table.shape[1] < 1:
        raise ConfigurationError(f"embeddings must be K x p, got shape {table.shape}")
    if not np.all(np.isfinite(table)):
        raise ConfigurationError("embeddings must be finite")
    n_rows, width = table.shape
    if not 1 <= dim <= min(n_rows, width):
        raise ConfigurationError(
            f"dim must satisfy 1 <= d <= min(K, p) = {min(n_rows, width)}, got {dim}"
        )
    mean = table.mean(axis=0)
    centred = table - mean
    covariance = centred.T @ centred / n_rows
    values, vectors = jacobi_eigh(covariance)
    order = sorted(range(width), key=lambda i: (-values[i], i))
    basis = vectors[:, order[:dim]].copy()
    for j in range(dim):
        column = basis[:, j]
        nonzero = np.nonzero(np.abs(column) > _SIGN_EPS)[0]
        if nonzero.size and column[nonzero[0]] < 0:
            basis[:, j] = -column
    return centred @ basis, basis, mean


def explained_variances(embeddings: np.ndarray) -> np.ndarray:
    """All covariance eigenvalues in descending order."""
    table = np.asarray(embeddings, dtype=float)
    centred = table - table.mean(axis=0)
    values, _ = jacobi_eigh(centred.T @ centred / table.shape[0])
    return np.sort(values)[::-1]


def load_embeddings_csv(path: str | Path) -> np.ndarray:
    """Read an embedding table from CSV with header arm_id,e_1,...,e_p."""
    path = Path(path)
    rows: dict[int, list[float]] = {}
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or header[0].strip() != "arm_id":
            raise ConfigurationError(f"embedding file {path} must start with an arm_id column")
        for row in reader:
            if not row:
                continue
            rows[int(row[0])] = [float(v) for v in row[1:]]
    if not rows:
        raise ConfigurationError(f"embedding file {path} holds no rows")
    n_arms = max(rows) + 1
    missing = [a for a in range(n_arms) if a not in rows]
    if missing:
        raise ConfigurationError(f"embedding file {path} is missing arms {missing}")
    return np.array([rows[a] for a in range(n_arms)], dtype=float)


def write_features_csv(path: str | Path, features: np.ndarray) -> None:
    feats = np.asarray(features, dtype=float)
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["arm_id"] + [f"phi_{j + 1}" for j in range(feats.shape[1])])
        for arm, row in enumerate(feats):
            writer.writerow([arm] + [repr(float(v)) for v in row])
