"""Citation-network text ingestion, synthetic graphs, splits, and the
binary graph cache."""

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .graph import Graph
from .sparse import SparseMatrix, normalize_adjacency

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetManifest:
    """Where a raw text dataset lives and what to expect in it."""

    name: str
    content_path: str
    cites_path: str
    feature_kind: str = "binary"
    expected_nodes: int | None = None
    expected_classes: int | None = None

    def __post_init__(self):
        if self.feature_kind not in ("binary", "real"):
            raise InputError(f"feature_kind must be binary or real, got {self.feature_kind!r}")


@dataclass
class SplitMasks:
    """Disjoint boolean masks over the nodes of one graph."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        self.train = np.asarray(self.train, dtype=bool)
        self.val = np.asarray(self.val, dtype=bool)
        self.test = np.asarray(self.test, dtype=bool)
        n = len(self.train)
        if len(self.val) != n or len(self.test) != n:
            raise InputError("split masks must have equal length")
        overlap = (self.train & self.val) | (self.train & self.test) | (self.val & self.test)
        if overlap.any():
            raise InputError(f"split masks overlap at node {int(np.flatnonzero(overlap)[0])}")

    def check(self, labels, num_classes, val_size=None, test_size=None):
        """Enforce the configured sizes and per-class training coverage."""
        if val_size is not None and int(self.val.sum()) != val_size:
            raise InputError(f"val split has {int(self.val.sum())} nodes, expected {val_size}")
        if test_size is not None and int(self.test.sum()) != test_size:
            raise InputError(f"test split has {int(self.test.sum())} nodes, expected {test_size}")
        covered = np.unique(np.asarray(labels)[self.train])
        for c in range(num_classes):
            if c not in covered:
                raise InputError(f"class {c} has no training nodes")


def load_citation_text(manifest: DatasetManifest, row_normalize: bool = True) -> Graph:
    """Parse `<id> <feat...> <label>` content lines and `<citing> <cited>`
    cites lines into a Graph.

    Node ids become dense indices in first-appearance order; label strings
    become class ids in lexicographic order. Edges naming unknown ids are
    skipped and counted in a single warning. With row_normalize each
    feature row is divided by its sum (zero rows stay zero).
    """
    content = Path(manifest.content_path)
    cites = Path(manifest.cites_path)
    for p in (content, cites):
        if not p.is_file():
            raise InputError(f"dataset file not found: {p}")

    ids: dict[str, int] = {}
    rows: list[np.ndarray] = []
    label_strs: list[str] = []
    width = None
    with open(content) as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise InputError(f"{content}:{lineno}: expected id, features, label")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise InputError(
                    f"{content}:{lineno}: {len(parts)} columns, expected {width}"
                )
            node_id, feats, label = parts[0], parts[1:-1], parts[-1]
            if node_id in ids:
                raise InputError(f"{content}:{lineno}: duplicate node id {node_id!r}")
            try:
                rows.append(np.array([float(x) for x in feats]))
            except ValueError:
                raise InputError(f"{content}:{lineno}: non-numeric feature value") from None
            ids[node_id] = len(ids)
            label_strs.append(label)
    if not ids:
        raise InputError(f"{content}: no nodes found")

    classes = sorted(set(label_strs))
    class_of = {name: i for i, name in enumerate(classes)}
    labels = np.array([class_of[s] for s in label_strs], dtype=np.int64)

    edges = []
    skipped = 0
    with open(cites) as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise InputError(f"{cites}:{lineno}: expected two node ids")
            a, b = parts
            if a not in ids or b not in ids:
                skipped += 1
                continue
            edges.append((ids[a], ids[b]))
    if skipped:
        log.warning("%s: skipped %d edges naming unknown node ids", cites, skipped)

    features = np.vstack(rows)
    if row_normalize:
        sums = features.sum(axis=1, keepdims=True)
        features = np.divide(features, sums, out=np.zeros_like(features), where=sums != 0)

    g = Graph.build(edges, features, labels, num_classes=len(classes))
    if manifest.expected_nodes is not None and g.num_nodes != manifest.expected_nodes:
        raise InputError(
            f"{manifest.name}: loaded {g.num_nodes} nodes, manifest expects {manifest.expected_nodes}"
        )
    if manifest.expected_classes is not None and g.num_classes != manifest.expected_classes:
        raise InputError(
            f"{manifest.name}: loaded {g.num_classes} classes, manifest expects {manifest.expected_classes}"
        )
    return g


def citation_label_names(manifest: DatasetManifest) -> list[str]:
    """Lexicographically sorted label strings of a content file, matching
    the class-id order produced by load_citation_text."""
    seen = set()
    with open(manifest.content_path) as f:
        for line in f:
            parts = line.split()
            if parts:
                seen.add(parts[-1])
    return sorted(seen)


def generate_sbm(
    blocks: int, nodes_per_block: int, p_in: float, p_out: float, d: int, seed: int
) -> Graph:
    """Stochastic block model with block ids as labels.

    Features are a one-hot block indicator (at column block % d) plus
    uniform noise in [0, 0.1); everything is drawn from one generator so a
    fixed seed reproduces the graph exactly.
    """
    if blocks < 1 or nodes_per_block < 1:
        raise InputError("SBM needs at least one block with at least one node")
    if d < 1:
        raise InputError("SBM feature dimension must be >= 1")
    if not 0.0 <= p_out < p_in <= 1.0:
        raise InputError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")

    n = blocks * nodes_per_block
    labels = np.repeat(np.arange(blocks), nodes_per_block)
    rng = np.random.default_rng(seed)

    prob = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    upper = np.triu(rng.random((n, n)) < prob, k=1)
    edges = list(zip(*np.nonzero(upper)))

    features = rng.uniform(0.0, 0.1, (n, d))
    features[np.arange(n), labels % d] += 1.0
    return Graph.build(edges, features, labels, num_classes=blocks)


def per_class_sample(labels, candidates, per_class, rng, scores=None, epsilon=0.0):
    """Pick per_class nodes for every class from the candidate index set.

    Classes are visited in ascending order. Within a class the candidates
    are kept in ascending node order, or ranked by descending score when
    scores is given. Each slot takes the best remaining candidate with
    probability epsilon, otherwise one uniformly at random from the
    remainder; with epsilon == 0 no bias coin is ever drawn, so the stream
    of generator calls is exactly that of plain uniform sampling.
    """
    labels = np.asarray(labels)
    candidates = np.asarray(candidates)
    chosen = []
    for c in range(int(labels.max()) + 1 if len(labels) else 0):
        cls = candidates[labels[candidates] == c]
        if len(cls) < per_class:
            raise InputError(
                f"class {c} has {len(cls)} candidates, needs {per_class}"
            )
        if scores is not None:
            cls = cls[np.argsort(-np.asarray(scores)[cls], kind="stable")]
        remaining = list(cls)
        for _ in range(per_class):
            if epsilon > 0.0 and rng.random() < epsilon:
                pick = remaining.pop(0)
            else:
                pick = remaining.pop(int(rng.integers(len(remaining))))
            chosen.append(int(pick))
    return np.array(sorted(chosen), dtype=np.int64)


def make_uniform_splits(
    g: Graph, per_class_train: int, val_size: int, test_size: int, seed: int
) -> SplitMasks:
    """Test then val drawn uniformly without replacement, then training
    nodes drawn uniformly per class from what remains."""
    n = g.num_nodes
    budget = val_size + test_size + per_class_train * g.num_classes
    if budget > n:
        raise InputError(f"splits need {budget} nodes but the graph has {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    test_idx = perm[:test_size]
    val_idx = perm[test_size:test_size + val_size]

    held = np.zeros(n, dtype=bool)
    held[test_idx] = True
    held[val_idx] = True
    train_idx = per_class_sample(g.labels, np.flatnonzero(~held), per_class_train, rng)

    masks = SplitMasks(
        train=np.isin(np.arange(n), train_idx),
        val=np.isin(np.arange(n), val_idx),
        test=np.isin(np.arange(n), test_idx),
    )
    masks.check(g.labels, g.num_classes, val_size=val_size, test_size=test_size)
    return masks


_CACHE_HEADER = struct.Struct("<4Q")


def save_cache(path, g: Graph, name: str, label_names=None):
    """Write the canonical binary cache and its JSON sidecar.

    Layout: four little-endian u64 counts (n, m, d, num_classes), then the
    adjacency CSR as row_offsets (n+1 i64), col_indices (2m i64), values
    (2m f64), then features (n*d f64) and labels (n i64).
    """
    path = Path(path)
    adj = g.adjacency
    with open(path, "wb") as f:
        f.write(_CACHE_HEADER.pack(g.num_nodes, g.num_edges, g.num_features, g.num_classes))
        f.write(np.ascontiguousarray(adj.row_offsets, dtype="<i8").tobytes())
        f.write(np.ascontiguousarray(adj.col_indices, dtype="<i8").tobytes())
        f.write(np.ascontiguousarray(adj.values, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(g.features, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(g.labels, dtype="<i8").tobytes())
    sidecar = {
        "name": name,
        "n": g.num_nodes,
        "m": g.num_edges,
        "d": g.num_features,
        "num_classes": g.num_classes,
        "label_names": list(label_names) if label_names is not None else None,
    }
    with open(path.with_suffix(path.suffix + ".json"), "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")


def load_cache(path):
    """Read a binary cache back into a (Graph, sidecar dict) pair. The
    sidecar is synthesized from the filename if its file is missing."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"cache file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _CACHE_HEADER.size:
        raise InputError(f"{path}: truncated cache header")
    n, m, d, num_classes = _CACHE_HEADER.unpack_from(raw)
    sizes = [(n + 1, "<i8"), (2 * m, "<i8"), (2 * m, "<f8"), (n * d, "<f8"), (n, "<i8")]
    expected = _CACHE_HEADER.size + sum(count * 8 for count, _ in sizes)
    if len(raw) != expected:
        raise InputError(f"{path}: cache is {len(raw)} bytes, expected {expected}")
    arrays = []
    offset = _CACHE_HEADER.size
    for count, dtype in sizes:
        arrays.append(np.frombuffer(raw, dtype=dtype, count=count, offset=offset).copy())
        offset += count * 8
    row_offsets, col_indices, values, features, labels = arrays

    adj = SparseMatrix(int(n), int(n), row_offsets, col_indices, values)
    g = Graph(
        num_nodes=int(n),
        num_edges=int(m),
        adjacency=adj,
        norm_adjacency=normalize_adjacency(adj),
        features=features.reshape(int(n), int(d)),
        labels=labels,
        num_classes=int(num_classes),
    )
    sidecar_path = path.with_suffix(path.suffix + ".json")
    if sidecar_path.is_file():
        meta = json.loads(sidecar_path.read_text())
    else:
        meta = {"name": path.stem, "n": int(n), "m": int(m), "d": int(d),
                "num_classes": int(num_classes), "label_names": None}
    return g, meta
