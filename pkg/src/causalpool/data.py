"""Loading, validation and pooling of observational and interventional time series.

The pooled representation appends one context column per intervention run:
the column holds the intervention constant on the rows of its own regime
block and zero everywhere else, so a single dataset carries both kinds of
data for downstream conditional-independence testing.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .errors import (
    DegenerateColumn,
    DuplicateTarget,
    ParseError,
    SchemaError,
    ShapeError,
)

OBS = "obs"
REGIME_COLUMN = "__regime__"


def int_label(k: int) -> str:
    return f"int:{k}"


def _as_regime_array(regime, n_rows):
    arr = np.asarray(regime, dtype=object)
    if arr.shape != (n_rows,):
        raise ShapeError(f"regime has {arr.shape} entries for {n_rows} rows")
    return arr


class Dataset:
    """An equally sampled multivariate time series with per-row regime labels.

    Parameters
    ----------
    names : sequence of str
        Unique variable identifiers, one per column.
    values : array-like of shape (T, N)
        Row-major time series, no missing values.
    regime : sequence of str, optional
        Per-row labels, ``"obs"`` or ``"int:<k>"``. Labels must form
        contiguous blocks. Defaults to all-observational.
    """

    def __init__(self, names, values, regime=None):
        names = tuple(str(n) for n in names)
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate variable names in {names}")
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise ShapeError(f"values must be 2-D, got shape {values.shape}")
        T, N = values.shape
        if T < 1:
            raise ShapeError("dataset needs at least one row")
        if N != len(names):
            raise ShapeError(f"{len(names)} names for {N} columns")
        if not np.isfinite(values).all():
            bad = np.argwhere(~np.isfinite(values))[0]
            raise ParseError(int(bad[0]), int(bad[1]), "non-finite value in dataset")
        if regime is None:
            regime = [OBS] * T
        regime = _as_regime_array(regime, T)
        _check_contiguous(regime)
        self.names = names
        self.values = values
        self.values.setflags(write=False)
        self.regime = regime
        self.regime.setflags(write=False)
        self._check_obs_variation()

    def _check_obs_variation(self):
        obs_rows = self.regime == OBS
        if obs_rows.sum() < 2:
            return
        block = self.values[obs_rows]
        for j, name in enumerate(self.names):
            if np.ptp(block[:, j]) == 0.0:
                raise DegenerateColumn(name)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def blocks(self):
        """Contiguous (label, slice) regime blocks in row order."""
        out = []
        start = 0
        for i in range(1, self.n_rows + 1):
            if i == self.n_rows or self.regime[i] != self.regime[start]:
                out.append((self.regime[start], slice(start, i)))
                start = i
        return out

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise SchemaError(f"no variable named {name!r}") from None

    def with_regime(self, regime) -> "Dataset":
        return Dataset(self.names, self.values, regime)

    def __eq__(self, other):
        return (
            isinstance(other, Dataset)
            and self.names == other.names
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.regime, other.regime)
        )

    def __repr__(self):
        return f"Dataset(T={self.n_rows}, vars={list(self.names)})"


def _check_contiguous(regime):
    seen = set()
    prev = None
    for label in regime:
        if label != prev:
            if label in seen:
                raise ShapeError(f"regime label {label!r} occurs in two separate blocks")
            seen.add(label)
            prev = label


class InterventionRun:
    """A hard intervention: one target held at a constant during one block.

    The wrapped dataset must satisfy ``data[:, target] == value`` exactly on
    every row; interventions are known-target by construction.
    """

    def __init__(self, target: str, value: float, data: Dataset):
        if target not in data.names:
            raise SchemaError(f"target {target!r} not among {data.names}")
        value = float(value)
        col = data.column(target)
        if not np.all(col == value):
            raise ShapeError(
                f"target column {target!r} is not identically {value!r}"
            )
        self.target = target
        self.value = value
        self.data = data

    def __repr__(self):
        return f"InterventionRun(target={self.target!r}, value={self.value}, T={self.data.n_rows})"


class PooledDataset:
    """Observational rows followed by intervention blocks, plus context columns.

    Context column ``k`` equals the intervention constant on its own block
    and zero elsewhere; exactly one intervention is active per row
    (diagonal design).
    """

    def __init__(self, base: Dataset, context_names=(), context_columns=None):
        context_names = tuple(context_names)
        if context_columns is None:
            context_columns = np.zeros((base.n_rows, 0))
        context_columns = np.asarray(context_columns, dtype=float)
        if context_columns.shape != (base.n_rows, len(context_names)):
            raise ShapeError(
                f"context matrix {context_columns.shape} does not match "
                f"{base.n_rows} rows x {len(context_names)} names"
            )
        if set(context_names) & set(base.names):
            raise SchemaError("context names collide with system variable names")
        self.base = base
        self.context_names = context_names
        self.context_columns = context_columns
        self.context_columns.setflags(write=False)
        self._validate_context()

    def _validate_context(self):
        blocks = dict((label, sl) for label, sl in self.base.blocks())
        active = np.zeros(self.base.n_rows, dtype=int)
        for k, name in enumerate(self.context_names):
            col = self.context_columns[:, k]
            label = int_label(k)
            if label not in blocks:
                raise SchemaError(f"no regime block for context column {name!r}")
            sl = blocks[label]
            inside = col[sl]
            outside = np.delete(col, np.arange(sl.start, sl.stop))
            xi = inside[0] if inside.size else 0.0
            if xi == 0.0:
                raise DegenerateColumn(name)
            if not np.all(inside == xi) or not np.all(outside == 0.0):
                raise ShapeError(
                    f"context column {name!r} must be {xi} on its block and 0 elsewhere"
                )
            active[sl] += 1
        if np.any(active > 1):
            raise ShapeError("more than one intervention active on the same row")

    @property
    def n_rows(self) -> int:
        return self.base.n_rows

    @property
    def all_names(self):
        return self.base.names + self.context_names

    def matrix(self) -> np.ndarray:
        """System columns followed by context columns, one row per sample."""
        if not self.context_names:
            return self.base.values
        return np.hstack([self.base.values, self.context_columns])

    def blocks(self):
        return self.base.blocks()

    def __repr__(self):
        return (
            f"PooledDataset(T={self.n_rows}, vars={list(self.base.names)}, "
            f"context={list(self.context_names)})"
        )


def context_name(target: str) -> str:
    """Name of the context variable attached to an intervention target."""
    return f"C{target}"


def pool(obs: Dataset, runs) -> PooledDataset:
    """Concatenate observational data and intervention runs into one dataset.

    Rows appear in argument order: the observational block first, then each
    run's block. Context column ``k`` is zero outside block ``k`` and equal
    to the run's intervention constant inside it.
    """
    runs = list(runs)
    if not all(r == OBS for r in obs.regime):
        raise SchemaError("the obs argument contains non-observational rows")
    for run in runs:
        if run.data.names != obs.names:
            raise SchemaError(
                f"intervention variables {run.data.names} != observational {obs.names}"
            )
    targets = [run.target for run in runs]
    if len(set(targets)) != len(targets):
        raise DuplicateTarget(f"duplicate intervention targets in {targets}")
    values = np.vstack([obs.values] + [run.data.values for run in runs])
    regime = [OBS] * obs.n_rows
    for k, run in enumerate(runs):
        # block labels are assigned by position; the runs' own labels may
        # carry a different k from an earlier pooling
        regime += [int_label(k)] * run.data.n_rows
    base = Dataset(obs.names, values, regime)
    context_names = tuple(context_name(run.target) for run in runs)
    context = np.zeros((base.n_rows, len(runs)))
    offset = obs.n_rows
    for k, run in enumerate(runs):
        if run.value == 0.0:
            raise DegenerateColumn(context_names[k])
        context[offset : offset + run.data.n_rows, k] = run.value
        offset += run.data.n_rows
    return PooledDataset(base, context_names, context)


def standardize(d: PooledDataset) -> PooledDataset:
    """Rescale each system column to zero mean and unit variance.

    Moments are taken over the pooled rows; context columns are left
    untouched because their exact zero/constant coding carries the regime
    information.
    """
    values = d.base.values.copy()
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    keep = std > 0
    values[:, keep] = (values[:, keep] - mean[keep]) / std[keep]
    base = Dataset(d.base.names, values, d.base.regime)
    return PooledDataset(base, d.context_names, d.context_columns)


def default_intervention_value(obs: Dataset, target: str) -> float:
    """Deterministic intervention constant: observational mean + 2 std."""
    col = obs.column(target)
    return float(col.mean() + 2.0 * col.std())


# ---------------------------------------------------------------------------
# CSV / JSON serialization


def load_csv(source) -> Dataset:
    """Parse a UTF-8 CSV with a header row into a :class:`Dataset`.

    A trailing ``__regime__`` column, when present, supplies per-row labels;
    otherwise every row is observational.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ShapeError("empty CSV") from None
    header = [h.strip() for h in header]
    has_regime = bool(header) and header[-1] == REGIME_COLUMN
    names = header[:-1] if has_regime else header
    if len(set(names)) != len(names):
        raise SchemaError(f"duplicate column names in header {names}")
    rows, regime = [], []
    for i, row in enumerate(reader):
        if not row:
            continue
        if len(row) != len(header):
            raise ShapeError(f"row {i} has {len(row)} cells, header has {len(header)}")
        cells = row[:-1] if has_regime else row
        parsed = []
        for j, cell in enumerate(cells):
            try:
                x = float(cell)
            except ValueError:
                raise ParseError(i, j) from None
            if not np.isfinite(x):
                raise ParseError(i, j, f"non-finite value {cell!r} at row {i}, column {j}")
            parsed.append(x)
        rows.append(parsed)
        regime.append(row[-1].strip() if has_regime else OBS)
    if not rows:
        raise ShapeError("CSV has a header but no data rows")
    return Dataset(names, np.array(rows), regime)


def write_csv(d: Dataset) -> str:
    """Serialize a dataset to CSV text (always includes the regime column)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(list(d.names) + [REGIME_COLUMN])
    for i in range(d.n_rows):
        writer.writerow([f"{x:.17g}" for x in d.values[i]] + [d.regime[i]])
    return out.getvalue()


def to_json(d: Dataset) -> str:
    return json.dumps(
        {
            "names": list(d.names),
            "values": [[float(x) for x in row] for row in d.values],
            "regime": list(d.regime),
        },
        sort_keys=True,
    )


def from_json(text: str) -> Dataset:
    obj = json.loads(text)
    return Dataset(obj["names"], np.array(obj["values"], dtype=float), obj["regime"])
