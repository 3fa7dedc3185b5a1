"""Multi-label dataset loading, discretization, and per-client partitioning.

Supports the dense Mulan ARFF flavor (numeric features, nominal {0,1} labels,
optional XML label manifest) and a plain CSV layout where the last L columns
are the binary labels. Missing values are a load error; sparse ARFF is not
supported.
"""

from __future__ import annotations

import csv
import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class MultiLabelDataset:
    """An N x D real feature matrix paired with an N x L binary label matrix."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str]
    label_names: list[str]

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if features.ndim != 2 or labels.ndim != 2:
            raise ValueError("features and labels must be 2-D matrices")
        if features.shape[0] != labels.shape[0]:
            raise ValueError("features and labels must have the same row count")
        if features.shape[0] < 1 or features.shape[1] < 1 or labels.shape[1] < 1:
            raise ValueError("need N >= 1, D >= 1, L >= 1")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must contain only 0 or 1")
        labels = labels.astype(np.int8)
        if len(self.feature_names) != features.shape[1]:
            raise ValueError("feature_names length must equal D")
        if len(self.label_names) != labels.shape[1]:
            raise ValueError("label_names length must equal L")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def num_instances(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_labels(self) -> int:
        return self.labels.shape[1]

    def subset(self, rows: np.ndarray) -> "MultiLabelDataset":
        """Dataset restricted to the given row indices (in the given order)."""
        return MultiLabelDataset(
            self.features[rows], self.labels[rows], list(self.feature_names), list(self.label_names)
        )


@dataclass(frozen=True)
class DiscretizedDataset:
    """Bin codes for every feature plus the untouched label matrix."""

    codes: np.ndarray
    bin_edges: list[np.ndarray]
    labels: np.ndarray
    num_bins: int

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 2 or codes.size == 0:
            raise ValueError("codes must be a non-empty 2-D matrix")
        if not np.issubdtype(codes.dtype, np.integer):
            raise ValueError("codes must be integers")
        if codes.min() < 0 or codes.max() >= self.num_bins:
            raise ValueError("every code must lie in [0, num_bins)")
        for edges in self.bin_edges:
            if np.any(np.diff(edges) < 0):
                raise ValueError("bin edges must be nondecreasing")
        object.__setattr__(self, "codes", codes)

    @property
    def num_instances(self) -> int:
        return self.codes.shape[0]

    @property
    def num_features(self) -> int:
        return self.codes.shape[1]

    @property
    def num_labels(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class PartitionPlan:
    """Assignment of each instance to one of M clients."""

    assignments: np.ndarray
    num_clients: int
    seed: int

    def __post_init__(self):
        assignments = np.asarray(self.assignments, dtype=np.int64)
        if self.num_clients < 2:
            raise ValueError("M must be a minimum of 2")
        if assignments.min() < 0 or assignments.max() >= self.num_clients:
            raise ValueError("client ids must lie in [0, num_clients)")
        counts = np.bincount(assignments, minlength=self.num_clients)
        if (counts == 0).any():
            raise ValueError("every client must receive at least one instance")
        object.__setattr__(self, "assignments", assignments)

    def client_rows(self, client_id: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == client_id)

    def to_json(self) -> dict:
        return {
            "seed": int(self.seed),
            "num_clients": int(self.num_clients),
            "assignments": [int(a) for a in self.assignments],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PartitionPlan":
        return cls(
            assignments=np.asarray(obj["assignments"], dtype=np.int64),
            num_clients=int(obj["num_clients"]),
            seed=int(obj["seed"]),
        )


# ---------------------------------------------------------------------------
# ARFF loading (dense Mulan flavor)

def _parse_arff_header(lines: list[str]):
    """Returns (attributes, data_start) where attributes is [(name, kind), ...].

    kind is 'numeric' or a frozenset of nominal values.
    """
    attributes = []
    saw_relation = False
    for lineno, raw in enumerate(lines):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        lowered = line.lower()
        if lowered.startswith("@relation"):
            saw_relation = True
        elif lowered.startswith("@attribute"):
            rest = line[len("@attribute"):].strip()
            if rest.startswith(("'", '"')):
                quote = rest[0]
                end = rest.index(quote, 1)
                name, decl = rest[1:end], rest[end + 1:].strip()
            else:
                parts = rest.split(None, 1)
                if len(parts) != 2:
                    raise ValueError(f"malformed ARFF header: bad attribute line {lineno + 1}: {line!r}")
                name, decl = parts
            if decl.startswith("{"):
                if not decl.endswith("}"):
                    raise ValueError(f"malformed ARFF header: unclosed nominal set on line {lineno + 1}")
                values = frozenset(v.strip().strip("'\"") for v in decl[1:-1].split(","))
                attributes.append((name, values))
            elif decl.lower().split()[0] in ("numeric", "real", "integer"):
                attributes.append((name, "numeric"))
            else:
                raise ValueError(f"malformed ARFF header: unsupported attribute type {decl!r}")
        elif lowered.startswith("@data"):
            if not saw_relation or not attributes:
                raise ValueError("malformed ARFF header: @data before @relation/@attribute")
            return attributes, lineno + 1
        else:
            raise ValueError(f"malformed ARFF header: unexpected line {lineno + 1}: {line!r}")
    raise ValueError("malformed ARFF header: missing @data section")


def _read_label_xml(path: Path) -> list[str]:
    """Label names from a Mulan XML manifest (<labels><label name=.../></labels>)."""
    root = ET.parse(path).getroot()
    names = [el.attrib["name"] for el in root.iter() if el.tag.split("}")[-1] == "label"]
    if not names:
        raise ValueError(f"no <label> entries found in {path}")
    return names


def load_arff(path: str | Path, label_count_or_xml: int | str | Path) -> MultiLabelDataset:
    """Load a dense Mulan-style ARFF file.

    The labels are either the last `label_count_or_xml` attributes (Mulan
    convention) or, when a path to an XML manifest is given, the attributes
    named there. Label values must be 0 or 1; missing values ('?') are an
    error.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    attributes, data_start = _parse_arff_header(lines)

    if isinstance(label_count_or_xml, int):
        num_labels = label_count_or_xml
        if num_labels < 1 or len(attributes) < num_labels + 1:
            raise ValueError("attribute count must be >= label count + 1")
        label_idx = list(range(len(attributes) - num_labels, len(attributes)))
    else:
        wanted = _read_label_xml(Path(label_count_or_xml))
        by_name = {name: i for i, (name, _) in enumerate(attributes)}
        missing = [n for n in wanted if n not in by_name]
        if missing:
            raise ValueError(f"label names from XML absent from ARFF attributes: {missing}")
        label_idx = sorted(by_name[n] for n in wanted)
        if len(attributes) < len(label_idx) + 1:
            raise ValueError("attribute count must be >= label count + 1")

    label_set = set(label_idx)
    for i in label_idx:
        name, kind = attributes[i]
        if isinstance(kind, frozenset) and not kind <= {"0", "1"}:
            raise ValueError(f"label attribute {name!r} is not a nominal {{0,1}} attribute")

    feature_idx = [i for i in range(len(attributes)) if i not in label_set]
    feature_rows, label_rows = [], []
    for lineno, raw in enumerate(lines[data_start:], start=data_start + 1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if line.startswith("{"):
            raise ValueError(f"sparse ARFF data is not supported (line {lineno})")
        cells = [c.strip().strip("'\"") for c in line.split(",")]
        if len(cells) != len(attributes):
            raise ValueError(f"row on line {lineno} has {len(cells)} fields, expected {len(attributes)}")
        if "?" in cells:
            raise ValueError(f"missing value on line {lineno}")
        try:
            feature_rows.append([float(cells[i]) for i in feature_idx])
        except ValueError:
            raise ValueError(f"non-numeric feature value on line {lineno}") from None
        row_labels = []
        for i in label_idx:
            if cells[i] not in ("0", "1"):
                raise ValueError(f"non-binary label value {cells[i]!r} on line {lineno}")
            row_labels.append(int(cells[i]))
        label_rows.append(row_labels)

    if not feature_rows:
        raise ValueError("ARFF file has an empty data section")
    return MultiLabelDataset(
        features=np.asarray(feature_rows, dtype=np.float64),
        labels=np.asarray(label_rows, dtype=np.int8),
        feature_names=[attributes[i][0] for i in feature_idx],
        label_names=[attributes[i][0] for i in label_idx],
    )


# ---------------------------------------------------------------------------
# CSV loading / saving

def load_csv(path: str | Path, num_labels: int) -> MultiLabelDataset:
    """Load a headered CSV whose last `num_labels` columns are binary labels."""
    if num_labels < 1:
        raise ValueError("num_labels must be >= 1")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("CSV file is empty (no header row)") from None
        if len(header) < num_labels + 1:
            raise ValueError("CSV must have at least one feature column plus the label columns")
        num_features = len(header) - num_labels
        feature_rows, label_rows = [], []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise ValueError(f"row on line {lineno} has {len(cells)} fields, expected {len(header)}")
            try:
                feature_rows.append([float(c) for c in cells[:num_features]])
            except ValueError:
                raise ValueError(f"non-numeric feature value on line {lineno}") from None
            row_labels = []
            for c in cells[num_features:]:
                if c not in ("0", "1"):
                    raise ValueError(f"label value {c!r} on line {lineno} is not 0 or 1")
                row_labels.append(int(c))
            label_rows.append(row_labels)
    if not feature_rows:
        raise ValueError("CSV file has no data rows")
    return MultiLabelDataset(
        features=np.asarray(feature_rows, dtype=np.float64),
        labels=np.asarray(label_rows, dtype=np.int8),
        feature_names=header[:num_features],
        label_names=header[num_features:],
    )


def save_csv(ds: MultiLabelDataset, path: str | Path) -> None:
    """Write a dataset as headered CSV; floats use repr so reloads round-trip."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + list(ds.label_names))
        for x, y in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(v) for v in y])


# ---------------------------------------------------------------------------
# Discretization

def discretize(ds: MultiLabelDataset, bins: int = 10) -> DiscretizedDataset:
    """Equal-width binning per feature over that feature's [min, max].

    Constant features map entirely to bin 0; each feature's maximum maps to
    bin `bins` - 1.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    n, d = ds.features.shape
    codes = np.zeros((n, d), dtype=np.int64)
    edges: list[np.ndarray] = []
    for j in range(d):
        col = ds.features[:, j]
        lo, hi = col.min(), col.max()
        if hi > lo:
            width = (hi - lo) / bins
            codes[:, j] = np.minimum(((col - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
            edges.append(lo + width * np.arange(1, bins))
        else:
            edges.append(np.full(bins - 1, lo))
    return DiscretizedDataset(codes=codes, bin_edges=edges, labels=ds.labels, num_bins=bins)


# ---------------------------------------------------------------------------
# Partitioning and splitting

def _primary_labels(labels: np.ndarray) -> np.ndarray:
    """Lowest-index positive label per row; all-zero rows get sentinel class L."""
    n, num_labels = labels.shape
    primary = np.full(n, num_labels, dtype=np.int64)
    has_any = labels.any(axis=1)
    primary[has_any] = labels[has_any].argmax(axis=1)
    return primary


def partition_noniid(ds: MultiLabelDataset, num_clients: int, alpha: float = 0.5,
                     seed: int = 0) -> PartitionPlan:
    """Label-skewed Dirichlet partition of the instances across clients.

    Each instance's class is its lowest-index positive label (all-zero label
    vectors form their own class). Per-class client proportions are drawn from
    Dirichlet(alpha); smaller alpha gives more skew. Deterministic for a fixed
    seed, and every client is guaranteed at least one instance.
    """
    if num_clients < 2:
        raise ValueError("M must be a minimum of 2")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    n = ds.num_instances
    if num_clients > n:
        raise ValueError(f"cannot split {n} instances across {num_clients} clients")

    rng = np.random.default_rng(seed)
    classes = _primary_labels(ds.labels)
    assignments = np.empty(n, dtype=np.int64)
    for c in np.unique(classes):
        rows = np.flatnonzero(classes == c)
        rng.shuffle(rows)
        proportions = rng.dirichlet(np.full(num_clients, alpha))
        counts = np.floor(proportions * rows.size).astype(np.int64)
        # Distribute the rounding remainder to the largest proportions.
        for i in np.argsort(-proportions, kind="stable")[: rows.size - counts.sum()]:
            counts[i] += 1
        stops = np.cumsum(counts)
        starts = stops - counts
        for client, (lo, hi) in enumerate(zip(starts, stops)):
            assignments[rows[lo:hi]] = client

    # Top up empty clients from the currently largest one.
    sizes = np.bincount(assignments, minlength=num_clients)
    for client in np.flatnonzero(sizes == 0):
        donor = int(sizes.argmax())
        moved = np.flatnonzero(assignments == donor)[0]
        assignments[moved] = client
        sizes[donor] -= 1
        sizes[client] += 1

    return PartitionPlan(assignments=assignments, num_clients=num_clients, seed=seed)


def split_train_test(ds: MultiLabelDataset, test_fraction: float,
                     seed: int = 0) -> tuple[MultiLabelDataset, MultiLabelDataset]:
    """Deterministic shuffled split into (train, test); both parts non-empty."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    n = ds.num_instances
    if n < 2:
        raise ValueError("need at least 2 instances to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = min(max(int(round(n * test_fraction)), 1), n - 1)
    return ds.subset(np.sort(order[n_test:])), ds.subset(np.sort(order[:n_test]))


def save_partition(plan: PartitionPlan, path: str | Path) -> None:
    Path(path).write_text(json.dumps(plan.to_json()) + "\n", encoding="utf-8")


def load_partition(path: str | Path) -> PartitionPlan:
    return PartitionPlan.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
