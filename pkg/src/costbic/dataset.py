"""Binary-outcome datasets with per-variable data-collection costs."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from .model_space import ModelIndicator


class DatasetError(ValueError):
    """Input data violates a dataset invariant."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response, design matrix (column 0 is the intercept), names and costs.

    Arrays are copied and made read-only on construction.
    """

    y: np.ndarray
    X: np.ndarray
    names: tuple[str, ...]
    costs: np.ndarray

    def __post_init__(self):
        y, X, costs = _frozen(self.y), _frozen(self.X), _frozen(self.costs)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "names", tuple(str(s) for s in self.names))

        if y.ndim != 1 or X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DatasetError(f"shape mismatch: y {y.shape}, X {X.shape}")
        p = X.shape[1] - 1
        if len(self.names) != p or costs.shape != (p,):
            raise DatasetError(
                f"{p} predictors but {len(self.names)} names and {costs.size} costs"
            )
        if len(set(self.names)) != p:
            raise DatasetError("duplicate variable names")
        if not np.all((y == 0) | (y == 1)):
            bad = y[(y != 0) & (y != 1)][0]
            raise DatasetError(f"non-binary response value {bad!r}")
        if y.min() == y.max():
            raise DatasetError("constant response: need at least one 0 and one 1")
        if not np.all(np.isfinite(X)):
            raise DatasetError("non-finite entry in design matrix")
        if not np.all(X[:, 0] == 1.0):
            raise DatasetError("column 0 of X must be the all-ones intercept")
        if not np.all(np.isfinite(costs)) or np.any(costs <= 0):
            j = int(np.flatnonzero(~(np.isfinite(costs) & (costs > 0)))[0])
            raise DatasetError(f"non-positive cost {costs[j]!r} for {self.names[j]!r}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1] - 1

    def design(self, gamma: ModelIndicator) -> np.ndarray:
        """Columns of X belonging to ``gamma`` (intercept first)."""
        if gamma.p != self.p:
            raise ValueError(f"model over p={gamma.p}, dataset has p={self.p}")
        return self.X[:, gamma.columns]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        """Dataset restricted to the given 1-based predictors, in that order."""
        idx = list(indices)
        return Dataset(
            y=self.y,
            X=self.X[:, [0, *idx]],
            names=[self.names[j - 1] for j in idx],
            costs=self.costs[[j - 1 for j in idx]] if idx else np.zeros(0),
        )

    def equals(self, other: "Dataset") -> bool:
        return (
            self.names == other.names
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.costs, other.costs)
        )


def _parse_float(cell: str, where: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DatasetError(f"non-numeric cell {cell!r} at {where}") from None
    if not math.isfinite(value):
        raise DatasetError(f"non-finite cell {cell!r} at {where}")
    return value


def read_costs(costs_path) -> dict[str, float]:
    costs: dict[str, float] = {}
    with open(costs_path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    for lineno, row in enumerate(rows, start=1):
        if len(row) != 2:
            raise DatasetError(f"costs line {lineno}: expected 'name,cost', got {row}")
        name, raw = row[0].strip(), row[1].strip()
        try:
            value = float(raw)
        except ValueError:
            if lineno == 1:
                continue  # header row
            raise DatasetError(f"costs line {lineno}: non-numeric cost {raw!r}") from None
        if name in costs:
            raise DatasetError(f"duplicate cost entry for {name!r}")
        if not math.isfinite(value) or value <= 0:
            raise DatasetError(f"non-positive cost {value!r} for {name!r}")
        costs[name] = value
    return costs


def load_dataset(data_path, costs_path) -> Dataset:
    """Read a data CSV (response first) and a ``name,cost`` CSV."""
    with open(data_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{data_path}: empty file") from None
        if len(header) < 1:
            raise DatasetError(f"{data_path}: missing header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetError(f"line {lineno}: {len(row)} cells, header has {len(header)}")
            rows.append([_parse_float(c.strip(), f"line {lineno}") for c in row])
    if not rows:
        raise DatasetError(f"{data_path}: no observations")

    names = header[1:]
    table = np.array(rows, dtype=float)
    cost_map = read_costs(costs_path)
    missing = [nm for nm in names if nm not in cost_map]
    extra = [nm for nm in cost_map if nm not in names]
    if missing:
        raise DatasetError(f"missing cost entries for {missing}")
    if extra:
        raise DatasetError(f"cost entries for unknown variables {extra}")

    y = table[:, 0]
    X = np.column_stack([np.ones(len(rows)), table[:, 1:]])
    return Dataset(y=y, X=X, names=names, costs=[cost_map[nm] for nm in names])


def write_dataset(d: Dataset, data_path, costs_path, response_name: str = "y") -> None:
    """Write ``d`` in the format :func:`load_dataset` reads, losslessly."""
    with open(data_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([response_name, *d.names])
        for yi, row in zip(d.y, d.X[:, 1:]):
            w.writerow([repr(int(yi)), *(repr(float(v)) for v in row)])
    with open(costs_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for name, c in zip(d.names, d.costs):
            w.writerow([name, repr(float(c))])


@dataclass
class SyntheticSpec:
    """Recipe for a simulated dataset.

    ``beta`` holds the intercept first, then one coefficient per predictor.
    ``correlation`` is either a full ``p x p`` matrix or a mapping from
    1-based index pairs to pairwise correlations (unlisted pairs are 0).
    """

    n: int
    beta: Sequence[float]
    costs: Sequence[float] | None = None
    correlation: np.ndarray | Mapping[tuple[int, int], float] | None = None
    seed: int = 0
    names: Sequence[str] | None = None

    @property
    def p(self) -> int:
        return len(self.beta) - 1

    def correlation_matrix(self) -> np.ndarray:
        p = self.p
        if self.correlation is None:
            return np.eye(p)
        if isinstance(self.correlation, Mapping):
            R = np.eye(p)
            for (a, b), r in self.correlation.items():
                if not (1 <= a <= p and 1 <= b <= p) or a == b:
                    raise DatasetError(f"bad correlation pair ({a}, {b})")
                R[a - 1, b - 1] = R[b - 1, a - 1] = r
            return R
        R = np.array(self.correlation, dtype=float)
        if R.shape != (p, p) or not np.allclose(R, R.T) or not np.allclose(np.diag(R), 1):
            raise DatasetError("correlation must be a symmetric unit-diagonal p x p matrix")
        return R

    def to_dict(self) -> dict:
        out = {
            "n": int(self.n),
            "beta": [float(b) for b in self.beta],
            "costs": None if self.costs is None else [float(c) for c in self.costs],
            "seed": int(self.seed),
            "names": None if self.names is None else list(self.names),
        }
        if isinstance(self.correlation, Mapping):
            out["correlation_pairs"] = [
                [int(a), int(b), float(r)] for (a, b), r in sorted(self.correlation.items())
            ]
        elif self.correlation is not None:
            out["correlation"] = np.asarray(self.correlation, dtype=float).tolist()
        return out

    @classmethod
    def from_dict(cls, cfg: Mapping) -> "SyntheticSpec":
        corr = cfg.get("correlation")
        if cfg.get("correlation_pairs"):
            corr = {(int(a), int(b)): float(r) for a, b, r in cfg["correlation_pairs"]}
        return cls(
            n=int(cfg["n"]),
            beta=[float(b) for b in cfg["beta"]],
            costs=cfg.get("costs"),
            correlation=corr,
            seed=int(cfg.get("seed", 0)),
            names=cfg.get("names"),
        )

    @classmethod
    def from_file(cls, path) -> "SyntheticSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def synthesize(spec: SyntheticSpec) -> Dataset:
    """Correlated Gaussian predictors and Bernoulli-logit outcomes."""
    p = spec.p
    if p < 0 or spec.n < 2:
        raise DatasetError("need n >= 2 and a coefficient vector with an intercept")
    R = spec.correlation_matrix()
    try:
        L = np.linalg.cholesky(R) if p else np.zeros((0, 0))
    except np.linalg.LinAlgError:
        raise DatasetError("correlation matrix is not positive definite") from None

    rng = np.random.default_rng(spec.seed)
    Z = rng.standard_normal((spec.n, p)) @ L.T
    X = np.column_stack([np.ones(spec.n), Z])
    prob = expit(X @ np.asarray(spec.beta, dtype=float))
    y = (rng.random(spec.n) < prob).astype(float)

    costs = np.ones(p) if spec.costs is None else spec.costs
    names = spec.names or [f"X{j}" for j in range(1, p + 1)]
    return Dataset(y=y, X=X, names=names, costs=costs)
