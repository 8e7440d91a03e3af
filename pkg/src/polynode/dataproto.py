"""Biaxial loading protocols, synthetic data generation and CSV interchange.

The five stretch-path families drive a virtual plane-stress rig: a scalar
path parameter rises monotonically from 1 to lambda_max and maps to the two
in-plane stretches. Datasets are stored column-wise as numpy arrays; the CSV
format is `protocol,lambda_x,lambda_y,sigma_xx,sigma_yy` with full-precision
decimals, UTF-8 and LF line endings.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DomainError, ParseError
from . import material
from . import oracles

__all__ = [
    "PROTOCOL_TAGS",
    "LoadingProtocol",
    "DataRecord",
    "Dataset",
    "ByProtocol",
    "ByPathFraction",
    "Split",
    "default_protocols",
    "protocol_path",
    "generate_synthetic",
    "save_csv",
    "load_csv",
    "split",
    "feasibility_report",
]

PROTOCOL_TAGS = ("offx", "offy", "equibiaxial", "stripx", "stripy", "custom")

CSV_HEADER = ["protocol", "lambda_x", "lambda_y", "sigma_xx", "sigma_yy"]


@dataclass(frozen=True)
class LoadingProtocol:
    """One stretch-path family with its range and sampling density."""

    kind: str
    lambda_max: float = 1.15
    n_points: int = 100
    path: np.ndarray | None = None  # explicit (n, 2) stretches for 'custom'

    def __post_init__(self):
        if self.kind not in PROTOCOL_TAGS:
            raise ConfigError(f"unknown protocol kind '{self.kind}'")
        if self.kind == "custom":
            if self.path is None:
                raise ConfigError("custom protocols need an explicit path")
        elif self.n_points < 1:
            raise ConfigError("n_points must be positive")


def default_protocols(lambda_max: float = 1.15, n_points: int = 100):
    """The five standard protocols sharing one range and density."""
    return [LoadingProtocol(kind, lambda_max, n_points)
            for kind in ("offx", "offy", "equibiaxial", "stripx", "stripy")]


def protocol_path(p: LoadingProtocol) -> np.ndarray:
    """Stretch pairs (lambda_xx, lambda_yy) along the path, shape (n, 2)."""
    if p.kind == "custom":
        path = np.asarray(p.path, dtype=float)
        if path.ndim != 2 or path.shape[1] != 2:
            raise ConfigError("custom path must have shape (n, 2)")
        if np.any(path <= 0):
            raise DomainError("custom path stretches must be positive")
        return path
    if p.lambda_max <= 1.0:
        raise DomainError(f"lambda_max must exceed 1, got {p.lambda_max}")
    lam = np.linspace(1.0, p.lambda_max, p.n_points)
    one = np.ones_like(lam)
    table = {
        "offx": (np.sqrt(lam), lam),
        "offy": (lam, np.sqrt(lam)),
        "equibiaxial": (lam, lam),
        "stripx": (lam, one),
        "stripy": (one, lam),
    }
    lx, ly = table[p.kind]
    return np.column_stack([lx, ly])


class DataRecord(NamedTuple):
    protocol: str
    lam_x: float
    lam_y: float
    sig_xx: float
    sig_yy: float


@dataclass
class Dataset:
    """Column-wise stress-stretch records with provenance."""

    protocol: np.ndarray
    lam_x: np.ndarray
    lam_y: np.ndarray
    sig_xx: np.ndarray
    sig_yy: np.ndarray
    source: str = ""

    def __post_init__(self):
        n = len(self.protocol)
        for name in ("lam_x", "lam_y", "sig_xx", "sig_yy"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if len(arr) != n:
                raise ConfigError("dataset columns must have equal length")
        self.protocol = np.asarray(self.protocol, dtype=object)

    def __len__(self) -> int:
        return len(self.protocol)

    def records(self):
        for i in range(len(self)):
            yield DataRecord(str(self.protocol[i]), float(self.lam_x[i]),
                             float(self.lam_y[i]), float(self.sig_xx[i]),
                             float(self.sig_yy[i]))

    def protocols(self):
        """Distinct protocol tags in first-appearance order."""
        seen = []
        for tag in self.protocol:
            if tag not in seen:
                seen.append(tag)
        return seen

    def subset(self, mask: np.ndarray, source_suffix: str = "") -> "Dataset":
        return Dataset(
            protocol=self.protocol[mask],
            lam_x=self.lam_x[mask],
            lam_y=self.lam_y[mask],
            sig_xx=self.sig_xx[mask],
            sig_yy=self.sig_yy[mask],
            source=self.source + source_suffix,
        )

    def peak_stress(self) -> float:
        return float(max(np.max(np.abs(self.sig_xx)), np.max(np.abs(self.sig_yy))))


def generate_synthetic(model, protocols) -> Dataset:
    """Evaluate a material model along every protocol path.

    ``model`` may be an oracle parameter record or a trained/untrained
    learned model; evaluation is deterministic either way.
    """
    tags, lx, ly = [], [], []
    for p in protocols:
        path = protocol_path(p)
        tags.extend([p.kind] * len(path))
        lx.append(path[:, 0])
        ly.append(path[:, 1])
    lam_x = np.concatenate(lx)
    lam_y = np.concatenate(ly)
    if isinstance(model, material.NodeMaterialModel):
        sxx, syy = material.biaxial_stress(model, lam_x, lam_y)
        source = "synthetic:learned"
    else:
        sxx, syy = oracles.oracle_stress(model, lam_x, lam_y)
        source = f"synthetic:{model.kind}"
    return Dataset(protocol=np.array(tags, dtype=object), lam_x=lam_x,
                   lam_y=lam_y, sig_xx=sxx, sig_yy=syy, source=source)


# -- CSV interchange -----------------------------------------------------------


def save_csv(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in dataset.records():
            writer.writerow([rec.protocol, "%.17g" % rec.lam_x, "%.17g" % rec.lam_y,
                             "%.17g" % rec.sig_xx, "%.17g" % rec.sig_yy])


def load_csv(path) -> Dataset:
    """Parse a dataset file, reporting the offending line on any defect."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", where=f"{path}:1") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise ParseError(f"expected header {','.join(CSV_HEADER)}",
                             where=f"{path}:1")
        tags, cols = [], [[], [], [], []]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(f"expected 5 columns, got {len(row)}",
                                 where=f"{path}:{lineno}")
            tag = row[0].strip()
            if tag not in PROTOCOL_TAGS:
                raise ParseError(f"unknown protocol tag '{tag}'",
                                 where=f"{path}:{lineno}")
            values = []
            for name, cell in zip(CSV_HEADER[1:], row[1:]):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(f"non-numeric value '{cell}' in column {name}",
                                     where=f"{path}:{lineno}") from None
            if values[0] <= 0 or values[1] <= 0:
                raise ParseError("stretches must be positive",
                                 where=f"{path}:{lineno}")
            if not all(math.isfinite(v) for v in values):
                raise ParseError("values must be finite", where=f"{path}:{lineno}")
            tags.append(tag)
            for col, v in zip(cols, values):
                col.append(v)
    return Dataset(protocol=np.array(tags, dtype=object),
                   lam_x=np.array(cols[0]), lam_y=np.array(cols[1]),
                   sig_xx=np.array(cols[2]), sig_yy=np.array(cols[3]),
                   source=str(path))


# -- splitting -----------------------------------------------------------------


@dataclass(frozen=True)
class ByProtocol:
    """Whole protocols go to the training side; the rest validate."""

    train: frozenset

    def __init__(self, train):
        object.__setattr__(self, "train", frozenset(train))


@dataclass(frozen=True)
class ByPathFraction:
    """The first ceil(f*n) records of each protocol's path train."""

    fraction: float


@dataclass(frozen=True)
class Split:
    train: Dataset
    validation: Dataset
    rule: object


def split(dataset: Dataset, rule) -> Split:
    """Partition a dataset for train/validation evaluation."""
    if len(dataset) == 0:
        raise ConfigError("cannot split an empty dataset")
    present = dataset.protocols()
    if isinstance(rule, ByProtocol):
        unknown = rule.train - set(present)
        if unknown:
            raise ConfigError(f"split names absent protocols: {sorted(unknown)}")
        mask = np.array([tag in rule.train for tag in dataset.protocol])
    elif isinstance(rule, ByPathFraction):
        f = rule.fraction
        if not 0.0 < f < 1.0:
            raise ConfigError("fraction must lie strictly between 0 and 1")
        mask = np.zeros(len(dataset), dtype=bool)
        for tag in present:
            idx = np.flatnonzero(dataset.protocol == tag)
            n_train = int(math.ceil(f * len(idx) - 1e-9))
            mask[idx[:n_train]] = True
    else:
        raise ConfigError(f"unknown split rule {rule!r}")
    if not mask.any() or mask.all():
        raise ConfigError("split leaves one side empty")
    return Split(train=dataset.subset(mask, "#train"),
                 validation=dataset.subset(~mask, "#validation"),
                 rule=rule)


def feasibility_report(dataset: Dataset) -> dict:
    """Check that every record maps into the invariant cone of the rig."""
    cx = dataset.lam_x**2
    cy = dataset.lam_y**2
    cz = 1.0 / (cx * cy)
    I1 = cx + cy + cz
    I2 = cx * cy + cx * cz + cy * cz
    bad = np.flatnonzero((I1 < 3.0 - 1e-12) | (I2 < 3.0 - 1e-12))
    return {
        "records": len(dataset),
        "violations": [int(i) for i in bad],
        "feasible": bad.size == 0,
        "I1_range": [float(I1.min()), float(I1.max())] if len(dataset) else None,
        "I2_range": [float(I2.min()), float(I2.max())] if len(dataset) else None,
    }
