"""Input validation helpers for the estimator API."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .data import Dataset, InterventionRun
from .errors import SchemaError


def as_dataset(X, names=None) -> Dataset:
    """Coerce estimator input into a :class:`Dataset`.

    Accepts a Dataset (returned unchanged), a pandas-style frame (column
    names are used) or any 2-D array-like (columns are named X0, X1, ...).
    """
    if isinstance(X, Dataset):
        return X
    if hasattr(X, "columns") and hasattr(X, "to_numpy"):
        frame_names = [str(c) for c in X.columns]
        values = check_array(X.to_numpy(), dtype=float, ensure_all_finite=True)
        return Dataset(names or frame_names, values)
    values = check_array(np.asarray(X), dtype=float, ensure_all_finite=True)
    if names is None:
        names = [f"X{i}" for i in range(values.shape[1])]
    return Dataset(names, values)


def check_interventions(interventions, obs: Dataset):
    """Validate that intervention runs line up with the observational data."""
    runs = list(interventions)
    for run in runs:
        if not isinstance(run, InterventionRun):
            raise SchemaError(
                f"interventions must be InterventionRun objects, got {type(run)!r}"
            )
        if run.data.names != obs.names:
            raise SchemaError(
                f"intervention on {run.target!r} has columns {run.data.names}, "
                f"expected {obs.names}"
            )
    return runs
