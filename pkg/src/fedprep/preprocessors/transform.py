"""Client-side application of fitted parameters."""

from __future__ import annotations

from ..datakit import ColumnarDataset
from ..errors import TransformError
from ._common import TRANSFORMERS
from .spec import FitParameters


def transform(params: FitParameters, local: ColumnarDataset, client: int | None = None) -> ColumnarDataset:
    """Apply ``params`` to one client's data; pure and deterministic."""
    fn = TRANSFORMERS.get(params.kind)
    if fn is None:
        raise TransformError(f"no transform for {params.kind!r}")
    return fn(params, local, client)
