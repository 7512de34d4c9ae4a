"""Mixed continuous / integer / categorical tuning-parameter domains.

A point in a space is a plain tuple (one entry per dimension). Surrogate
models work on the unit-hypercube encoding produced by :func:`encode`:
continuous and integer dims are scaled affinely to [0, 1], categorical dims
are one-hot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

ThetaValue = tuple


class DomainError(ValueError):
    """Raised when a value does not belong to the domain it is used with."""


@dataclass(frozen=True)
class Continuous:
    lo: float
    hi: float
    name: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise DomainError(f"continuous dim needs finite lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> int:
        return 1


@dataclass(frozen=True)
class Integer:
    lo: int
    hi: int
    name: str = ""

    def __post_init__(self):
        if self.lo > self.hi:
            raise DomainError(f"integer dim needs lo <= hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> int:
        return 1


@dataclass(frozen=True)
class Categorical:
    labels: tuple
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.labels:
            raise DomainError("categorical dim needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise DomainError(f"categorical labels must be distinct: {self.labels}")

    @property
    def width(self) -> int:
        return len(self.labels)


Dim = Union[Continuous, Integer, Categorical]


@dataclass(frozen=True)
class ParameterSpace:
    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        if not self.dims:
            raise DomainError("a parameter space needs at least one dim")

    @property
    def width(self) -> int:
        """Length of the encoded vector."""
        return sum(d.width for d in self.dims)

    @property
    def names(self) -> list[str]:
        return [d.name or f"x{i}" for i, d in enumerate(self.dims)]

    def __len__(self) -> int:
        return len(self.dims)

    def validate(self, theta: Sequence) -> ThetaValue:
        """Return ``theta`` normalized to a tuple of python scalars, or raise."""
        if len(theta) != len(self.dims):
            raise DomainError(f"expected {len(self.dims)} entries, got {len(theta)}")
        out = []
        for d, v in zip(self.dims, theta):
            if isinstance(d, Continuous):
                if isinstance(v, (bool, str)) or not isinstance(v, (int, float, np.integer, np.floating)):
                    raise DomainError(f"{d.name or 'continuous dim'}: not a number: {v!r}")
                v = float(v)
                if not (d.lo <= v <= d.hi):
                    raise DomainError(f"{d.name or 'continuous dim'}: {v} outside [{d.lo}, {d.hi}]")
            elif isinstance(d, Integer):
                if isinstance(v, (bool, np.bool_)) or not isinstance(v, (int, np.integer)):
                    if isinstance(v, (float, np.floating)) and float(v).is_integer():
                        v = int(v)
                    else:
                        raise DomainError(f"{d.name or 'integer dim'}: not an integer: {v!r}")
                v = int(v)
                if not (d.lo <= v <= d.hi):
                    raise DomainError(f"{d.name or 'integer dim'}: {v} outside [{d.lo}, {d.hi}]")
            else:
                if v not in d.labels:
                    raise DomainError(f"{d.name or 'categorical dim'}: unknown label {v!r}")
            out.append(v)
        return tuple(out)

    def to_json(self) -> list[dict]:
        out = []
        for d in self.dims:
            if isinstance(d, Continuous):
                out.append({"kind": "continuous", "name": d.name, "lo": d.lo, "hi": d.hi})
            elif isinstance(d, Integer):
                out.append({"kind": "integer", "name": d.name, "lo": d.lo, "hi": d.hi})
            else:
                out.append({"kind": "categorical", "name": d.name, "labels": list(d.labels)})
        return out

    @classmethod
    def from_json(cls, spec: list[dict]) -> "ParameterSpace":
        if not isinstance(spec, list):
            raise DomainError("space must be a list of dims")
        dims = []
        for item in spec:
            kind = item.get("kind")
            name = item.get("name", "")
            if kind == "continuous":
                dims.append(Continuous(float(item["lo"]), float(item["hi"]), name))
            elif kind == "integer":
                dims.append(Integer(int(item["lo"]), int(item["hi"]), name))
            elif kind == "categorical":
                dims.append(Categorical(tuple(item["labels"]), name))
            else:
                raise DomainError(f"unknown dim kind {kind!r}")
        return cls(tuple(dims))


def encode(space: ParameterSpace, theta: Sequence) -> np.ndarray:
    theta = space.validate(theta)
    v = np.empty(space.width)
    pos = 0
    for d, x in zip(space.dims, theta):
        if isinstance(d, Continuous):
            v[pos] = (x - d.lo) / (d.hi - d.lo)
        elif isinstance(d, Integer):
            v[pos] = 0.5 if d.hi == d.lo else (x - d.lo) / (d.hi - d.lo)
        else:
            v[pos:pos + d.width] = 0.0
            v[pos + d.labels.index(x)] = 1.0
        pos += d.width
    return v


def decode(space: ParameterSpace, v: Sequence[float]) -> ThetaValue:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != space.width:
        raise DomainError(f"encoded vector must have width {space.width}, got shape {v.shape}")
    out = []
    pos = 0
    for d in space.dims:
        if isinstance(d, Continuous):
            x = d.lo + float(v[pos]) * (d.hi - d.lo)
            out.append(min(max(x, d.lo), d.hi))
        elif isinstance(d, Integer):
            x = math.floor(d.lo + float(v[pos]) * (d.hi - d.lo) + 0.5)
            out.append(int(min(max(x, d.lo), d.hi)))
        else:
            # np.argmax returns the first maximum, i.e. the smallest label index on ties
            out.append(d.labels[int(np.argmax(v[pos:pos + d.width]))])
        pos += d.width
    return tuple(out)


def sample_uniform(space: ParameterSpace, rng: np.random.Generator) -> ThetaValue:
    out = []
    for d in space.dims:
        if isinstance(d, Continuous):
            out.append(float(rng.uniform(d.lo, d.hi)))
        elif isinstance(d, Integer):
            out.append(int(rng.integers(d.lo, d.hi + 1)))
        else:
            out.append(d.labels[int(rng.integers(len(d.labels)))])
    return tuple(out)


def resample_dim(space: ParameterSpace, theta: ThetaValue, rng: np.random.Generator) -> ThetaValue:
    """Copy of ``theta`` with one uniformly chosen dim redrawn uniformly."""
    i = int(rng.integers(len(space.dims)))
    fresh = sample_uniform(ParameterSpace((space.dims[i],)), rng)[0]
    out = list(theta)
    out[i] = fresh
    return tuple(out)
