"""Observed-data containers, nuisance triples and the WATE functionals."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

import numpy as np

from .weights import WeightSpec, lambda_eval

OMEGA_FLOOR = 1e-12


class InputError(ValueError):
    """Malformed or out-of-domain input data."""


class Sample(NamedTuple):
    x: np.ndarray
    a: int
    y: int


@dataclass(frozen=True)
class Dataset:
    """``n`` observations ``(x, a, y)`` with ``x`` in ``[0, 1]^d``.

    Stored column-wise; iterate with :meth:`samples` when a row view is needed.
    """

    X: np.ndarray
    a: np.ndarray
    y: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        a = np.asarray(self.a)
        y = np.asarray(self.y)
        if X.shape[0] == 0:
            raise InputError("dataset must be nonempty")
        if a.shape != (X.shape[0],) or y.shape != (X.shape[0],):
            raise InputError("a and y must be vectors matching the number of rows of X")
        if np.any((a != 0) & (a != 1)) or np.any((y != 0) & (y != 1)):
            raise InputError("treatment and outcome must be binary")
        if np.any((X < 0.0) | (X > 1.0)) or not np.all(np.isfinite(X)):
            raise InputError("covariates must lie in [0, 1]")
        for name, val in (("X", X), ("a", a.astype(np.int64)), ("y", y.astype(np.int64))):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def samples(self):
        for i in range(self.n):
            yield Sample(self.X[i], int(self.a[i]), int(self.y[i]))

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.a[idx], self.y[idx], dict(self.metadata))


def read_csv(path, rescale: bool = False) -> Dataset:
    """Load ``x1..xd, a, y`` columns from a headed UTF-8 CSV.

    With ``rescale`` covariates are min-max mapped into ``[0, 1]`` and the
    per-column ranges are recorded in ``Dataset.metadata``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError("empty CSV file") from None
        d = len(header) - 2
        expected = [f"x{j + 1}" for j in range(d)] + ["a", "y"]
        if d < 1 or header != expected:
            raise InputError(f"header must be {','.join(expected) if d >= 1 else 'x1..xd,a,y'}, got {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != d + 2:
                raise InputError(f"row {lineno}: expected {d + 2} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise InputError(f"row {lineno}: non-numeric field") from None
            for name, v in (("a", vals[d]), ("y", vals[d + 1])):
                if v not in (0.0, 1.0):
                    raise InputError(f"row {lineno}: {name}={row[d if name == 'a' else d + 1].strip()} is not binary")
            rows.append(vals)
    if not rows:
        raise InputError("CSV has no data rows")
    arr = np.asarray(rows)
    X = arr[:, :d]
    meta = {"rescaled": False}
    if rescale:
        lo, hi = X.min(axis=0), X.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        X = (X - lo) / span
        meta = {"rescaled": True, "x_min": lo.tolist(), "x_max": hi.tolist()}
    else:
        bad = np.nonzero(np.any((X < 0.0) | (X > 1.0), axis=1))[0]
        if bad.size:
            raise InputError(f"row {bad[0] + 2}: covariate outside [0, 1] (use rescaling)")
    return Dataset(X, arr[:, d].astype(np.int64), arr[:, d + 1].astype(np.int64), meta)


def write_csv(path, data: Dataset) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j + 1}" for j in range(data.d)] + ["a", "y"])
        for i in range(data.n):
            w.writerow([repr(float(v)) for v in data.X[i]] + [int(data.a[i]), int(data.y[i])])


@dataclass(frozen=True)
class NuisanceValues:
    """Values ``(q1, q0, e)`` of a nuisance triple at ``m`` covariate points."""

    q1: np.ndarray
    q0: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        arrs = [np.ascontiguousarray(v, dtype=float).reshape(-1) for v in (self.q1, self.q0, self.e)]
        if not (arrs[0].shape == arrs[1].shape == arrs[2].shape) or arrs[0].size == 0:
            raise ValueError("q1, q0, e must be nonempty vectors of equal length")
        for name, v in zip(("q1", "q0", "e"), arrs):
            if not np.all((v > 0.0) & (v < 1.0)):
                raise ValueError(f"{name} values must lie strictly inside (0, 1)")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def from_array(cls, arr) -> NuisanceValues:
        arr = np.asarray(arr, dtype=float)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2])

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.q1, self.q0, self.e])

    @property
    def m(self) -> int:
        return self.e.shape[0]

    @property
    def tau(self) -> np.ndarray:
        return self.q1 - self.q0

    def __len__(self):
        return self.m


class NuisanceModel(Protocol):
    """Anything that maps covariates to nuisance values in ``(0, 1)^3``."""

    def predict(self, X) -> NuisanceValues: ...


@dataclass(frozen=True)
class FunctionNuisance:
    """Nuisance model backed by three vectorized callables of ``X`` (shape ``(n, d)``)."""

    q1_fn: object
    q0_fn: object
    e_fn: object

    def predict(self, X) -> NuisanceValues:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return NuisanceValues(self.q1_fn(X), self.q0_fn(X), self.e_fn(X))


def conditional_pmf(v: NuisanceValues, i: int, a: int, y: int) -> float:
    """``P(A=a, Y=y | X=x_i)`` under the nuisance triple."""
    e = v.e[i]
    q = v.q1[i] if a == 1 else v.q0[i]
    pa = e if a == 1 else 1.0 - e
    return float(pa * (q if y == 1 else 1.0 - q))


def pmf_table(v: NuisanceValues) -> np.ndarray:
    """``(m, 2, 2)`` array of ``P(A=a, Y=y | x_i)`` indexed ``[i, a, y]``."""
    out = np.empty((v.m, 2, 2))
    out[:, 1, 1] = v.e * v.q1
    out[:, 1, 0] = v.e * (1.0 - v.q1)
    out[:, 0, 1] = (1.0 - v.e) * v.q0
    out[:, 0, 0] = (1.0 - v.e) * (1.0 - v.q0)
    return out


def omega(v: NuisanceValues, w: WeightSpec) -> float:
    """Average weight ``mean_i lambda(e(x_i))`` under the empirical marginal."""
    val = float(np.mean(lambda_eval(w, v.e)))
    if not val > OMEGA_FLOOR:
        raise ValueError(f"weight normalizer {val!r} is not positive; positivity or weight failure")
    return val


def psi(v: NuisanceValues, w: WeightSpec) -> float:
    """Weighted average of the blip ``q1 - q0`` with weights ``lambda(e)``."""
    omega(v, w)
    lam = lambda_eval(w, v.e)
    return float(np.dot(lam, v.tau) / lam.sum())
