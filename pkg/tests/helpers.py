import numpy as np
from fedprep.datakit import Column, ColumnarDataset


def numeric_dataset(X: np.ndarray, missing: np.ndarray | None = None, prefix: str = "x") -> ColumnarDataset:
    M = np.zeros(X.shape, dtype=bool) if missing is None else missing
    return ColumnarDataset(tuple(Column.numeric(f"{prefix}{j}", X[:, j], M[:, j]) for j in range(X.shape[1])))


def linear_missing_data(seed: int = 0, n: int = 500, rate: float = 0.1):
    """Five correlated columns; x3 and x4 lose ``rate`` of their cells completely at random."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 5))
    X[:, 3] = 2 * X[:, 0] + 0.1 * rng.normal(size=n)
    X[:, 4] = X[:, :4] @ [1.0, 2.0, -1.0, 0.5] + 0.1 * rng.normal(size=n)
    M = np.zeros_like(X, dtype=bool)
    M[:, 3] = rng.random(n) < rate
    M[:, 4] = rng.random(n) < rate
    return X, M, numeric_dataset(X, M)
