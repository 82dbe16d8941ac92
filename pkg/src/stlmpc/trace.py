"""Numeric containers shared across the package.

States and actions are plain 1-D float arrays. A :class:`Trajectory` attaches
dimension names and a sampling period to a ``(T, n)`` array of samples, and a
:class:`Dataset` stores transitions column-wise as three aligned arrays.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

STD_FLOOR = 1e-8


class DimensionError(ValueError):
    """Raised when array shapes or dimension names do not line up."""


def as_vector(values, dim: int | None = None, what: str = "vector") -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"{what} must be 1-D, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"{what} has length {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{what} contains non-finite entries: {v}")
    return v


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples of a named state signal."""

    names: tuple[str, ...]
    samples: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        names = tuple(self.names)
        samples = np.array(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples.reshape(-1, len(names))
        if samples.ndim != 2 or samples.shape[1] != len(names):
            raise DimensionError(
                f"samples of shape {samples.shape} do not match {len(names)} names")
        if samples.shape[0] < 1:
            raise DimensionError("a trajectory needs at least one sample")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if len(set(names)) != len(names):
            raise DimensionError(f"duplicate dimension names in {names}")
        samples.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.samples[:, self.names.index(name)]
        except ValueError:
            raise DimensionError(f"unknown dimension name {name!r}; "
                                 f"trajectory has {list(self.names)}") from None

    def signals(self) -> dict[str, np.ndarray]:
        return {name: self.samples[:, i] for i, name in enumerate(self.names)}

    @classmethod
    def from_columns(cls, columns: dict[str, Sequence[float]], dt: float = 1.0) -> "Trajectory":
        names = tuple(columns)
        data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
        return cls(names, data, dt)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.names)
            for row in self.samples:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def read_csv(cls, path: str | Path, dt: float = 1.0) -> "Trajectory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise DimensionError(f"{path}: empty trace file")
        header = [h.strip() for h in rows[0]]
        data = [[float(v) for v in r] for r in rows[1:] if r]
        return cls(tuple(header), np.array(data, dtype=float).reshape(-1, len(header)), dt)


class Transition(NamedTuple):
    state: np.ndarray
    action: np.ndarray
    next_state: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """Transitions ``(s, a, s')`` stored as aligned row arrays."""

    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    split_fraction: float = 0.9

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.states, dtype=float))
        a = np.asarray(self.actions, dtype=float)
        sp = np.atleast_2d(np.asarray(self.next_states, dtype=float))
        if a.ndim == 1:
            a = a.reshape(len(s), -1)
        if not (len(s) == len(a) == len(sp)):
            raise DimensionError(f"row counts differ: {len(s)}, {len(a)}, {len(sp)}")
        if s.shape[1] != sp.shape[1]:
            raise DimensionError("state and next_state dimensions differ")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError(f"split_fraction must lie in (0, 1), got {self.split_fraction}")
        for arr in (s, a, sp):
            arr.setflags(write=False)
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "actions", a)
        object.__setattr__(self, "next_states", sp)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def action_dim(self) -> int:
        return self.actions.shape[1]

    @property
    def deltas(self) -> np.ndarray:
        return self.next_states - self.states

    @property
    def inputs(self) -> np.ndarray:
        return np.hstack([self.states, self.actions])

    @property
    def transitions(self) -> list[Transition]:
        return list(self)

    def __iter__(self) -> Iterator[Transition]:
        for s, a, sp in zip(self.states, self.actions, self.next_states):
            yield Transition(s, a, sp)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.states[idx], self.actions[idx], self.next_states[idx],
                       self.split_fraction)

    @classmethod
    def from_transitions(cls, transitions: Iterable[Transition],
                         split_fraction: float = 0.9) -> "Dataset":
        transitions = list(transitions)
        if not transitions:
            raise DimensionError("no transitions given")
        s, a, sp = zip(*transitions)
        return cls(np.array(s, dtype=float), np.array(a, dtype=float).reshape(len(s), -1),
                   np.array(sp, dtype=float), split_fraction)

    @classmethod
    def concatenate(cls, parts: Sequence["Dataset"], split_fraction: float = 0.9) -> "Dataset":
        return cls(np.vstack([p.states for p in parts]),
                   np.vstack([p.actions for p in parts]),
                   np.vstack([p.next_states for p in parts]), split_fraction)

    def to_csv(self, path: str | Path) -> None:
        n, m = self.state_dim, self.action_dim
        header = ([f"s{i}" for i in range(n)] + [f"a{i}" for i in range(m)]
                  + [f"sp{i}" for i in range(n)])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in np.hstack([self.states, self.actions, self.next_states]):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def read_csv(cls, path: str | Path, split_fraction: float = 0.9) -> "Dataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DimensionError(f"{path}: empty dataset file") from None
            n = sum(1 for h in header if h.startswith("s") and not h.startswith("sp"))
            m = sum(1 for h in header if h.startswith("a"))
            expected = ([f"s{i}" for i in range(n)] + [f"a{i}" for i in range(m)]
                        + [f"sp{i}" for i in range(n)])
            if [h.strip() for h in header] != expected:
                raise DimensionError(f"{path}: malformed dataset header {header}")
            try:
                data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
            except ValueError as exc:
                raise DimensionError(f"{path}: malformed dataset row ({exc})") from None
        if data.size == 0:
            raise DimensionError(f"{path}: dataset has no rows")
        if data.shape[1] != 2 * n + m:
            raise DimensionError(f"{path}: rows have {data.shape[1]} columns, expected {2 * n + m}")
        return cls(data[:, :n], data[:, n:n + m], data[:, n + m:], split_fraction)

    def save_npz(self, path: str | Path) -> None:
        np.savez(path, states=self.states, actions=self.actions,
                 next_states=self.next_states, split_fraction=self.split_fraction)

    @classmethod
    def load_npz(cls, path: str | Path) -> "Dataset":
        with np.load(path) as z:
            return cls(z["states"], z["actions"], z["next_states"], float(z["split_fraction"]))


def load_dataset(path: str | Path, split_fraction: float = 0.9) -> Dataset:
    path = Path(path)
    if path.suffix == ".npz":
        return Dataset.load_npz(path)
    return Dataset.read_csv(path, split_fraction)


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray = field(repr=False)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        std = np.array(self.std, dtype=float).reshape(-1)
        if mean.shape != std.shape:
            raise DimensionError("mean and std lengths differ")
        if np.any(std <= 0):
            raise ValueError("std entries must be positive")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def __len__(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float))


def compute_norm_stats(rows) -> NormStats:
    """Per-dimension mean and population standard deviation.

    Standard deviations below ``STD_FLOOR`` are replaced by 1.0 so constant
    dimensions pass through normalization unscaled.
    """
    try:
        data = np.asarray(rows, dtype=float)
    except ValueError:
        raise DimensionError("rows have unequal lengths") from None
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 1:
        raise DimensionError(f"need at least two equal-length rows, got shape {data.shape}")
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return NormStats(mean, std)


def _check_len(v: np.ndarray, stats: NormStats) -> None:
    if v.shape[-1] != len(stats):
        raise DimensionError(f"vector length {v.shape[-1]} does not match stats length {len(stats)}")


def normalize(v, stats: NormStats) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    _check_len(v, stats)
    return (v - stats.mean) / stats.std


def denormalize(v, stats: NormStats) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    _check_len(v, stats)
    return v * stats.std + stats.mean


def split(dataset: Dataset, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Shuffle under ``seed`` and partition into train and validation sets.

    The train part receives ``ceil(split_fraction * N)`` transitions.
    """
    n = len(dataset)
    # guard against products like 0.7 * 10 == 7.000000000000001
    n_train = math.ceil(dataset.split_fraction * n - 1e-9)
    perm = np.random.default_rng(seed).permutation(n)
    return dataset.subset(perm[:n_train]), dataset.subset(perm[n_train:])
