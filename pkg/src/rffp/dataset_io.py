"""
On-disk formats and corpus assembly.

Signal files (``.rfs``) are a 24-byte little-endian header followed by
float32 samples::

    magic   4s   b"RFS1"
    version u32  1
    count   u64  number of samples (> 0)
    rate    f64  sample rate in Hz

Manifests are JSON Lines: a header record, then one record per slice. Each
slice points at its clean parent capture; :func:`materialize` adds the
entry's seeded AWGN to the parent and cuts the slice, so re-corrupting a
corpus at another SNR only rewrites the manifest.

Models are a JSON descriptor plus a ``.bin`` blob of little-endian float64
arrays whose names, shapes and offsets the descriptor lists.
"""
import csv
import io
import json
import os
import struct
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._util import atomic_write_bytes, atomic_write_text
from .errors import DegenerateDataError, FormatError, InvalidInputError
from .rng import Stream, derive_seed
from .signal import Signal, add_awgn, detect_bursts, synth_generate

SIGNAL_MAGIC = b"RFS1"
SIGNAL_VERSION = 1
_HEADER = struct.Struct("<4sIQd")

MANIFEST_FORMAT = "rffp-manifest"
MANIFEST_VERSION = 1
MODEL_VERSION = 1
SPLITS = ("train", "validation", "test")


# ---------------------------------------------------------------------------
# signals
# ---------------------------------------------------------------------------

def encode_signal(signal):
    x = signal.samples if isinstance(signal, Signal) else np.asarray(signal, dtype=np.float64).ravel()
    rate = signal.sample_rate_hz if isinstance(signal, Signal) else 1.0
    if x.size == 0:
        raise InvalidInputError("cannot write an empty signal")
    return _HEADER.pack(SIGNAL_MAGIC, SIGNAL_VERSION, x.size, float(rate)) + x.astype("<f4").tobytes()


def decode_signal(data, source="<bytes>"):
    if len(data) < _HEADER.size:
        raise FormatError("header", f"{source}: file is {len(data)} bytes, shorter than the {_HEADER.size}-byte header")
    magic, version, count, rate = _HEADER.unpack_from(data)
    if magic != SIGNAL_MAGIC:
        raise FormatError("magic", f"{source}: bad magic {magic!r}")
    if version != SIGNAL_VERSION:
        raise FormatError("version", f"{source}: unsupported version {version}")
    if count == 0:
        raise FormatError("sample_count", f"{source}: zero sample count")
    if not (rate > 0 and np.isfinite(rate)):
        raise FormatError("sample_rate", f"{source}: invalid sample rate {rate}")
    expected = _HEADER.size + 4 * count
    if len(data) != expected:
        raise FormatError("payload", f"{source}: expected {expected} bytes for {count} samples, found {len(data)}")
    x = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).astype(np.float64)
    if not np.all(np.isfinite(x)):
        raise FormatError("payload", f"{source}: non-finite samples")
    return Signal(x, rate)


def write_signal(path, signal):
    atomic_write_bytes(path, encode_signal(signal))


def read_signal(path):
    with open(path, "rb") as fh:
        return decode_signal(fh.read(), str(path))


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    id: str
    signal_file: str
    class_index: int
    parent_index: int
    slice_index: int
    label_path: Tuple[str, ...]
    snr_db: Optional[float]
    seed: int
    split: str
    start: int
    length: int

    def to_record(self):
        d = asdict(self)
        d["label_path"] = list(self.label_path)
        return d

    @classmethod
    def from_record(cls, d):
        try:
            d = dict(d)
            d["label_path"] = tuple(d["label_path"])
            entry = cls(**d)
        except (TypeError, KeyError) as exc:
            raise FormatError("entry", f"malformed manifest entry {d!r}: {exc}") from None
        if entry.split not in SPLITS:
            raise FormatError("split", f"entry {entry.id}: unknown split {entry.split!r}")
        return entry


@dataclass
class CorpusManifest:
    entries: List[ManifestEntry]
    global_seed: int
    root_dir: str = "."
    format_version: int = MANIFEST_VERSION
    meta: dict = field(default_factory=dict)

    def split(self, name):
        return [e for e in self.entries if e.split == name]

    def filter(self, predicate):
        return replace(self, entries=[e for e in self.entries if predicate(e)])

    def label_paths(self):
        seen = []
        for e in self.entries:
            if e.label_path not in seen:
                seen.append(e.label_path)
        return seen

    def resolve(self, entry):
        return os.path.join(self.root_dir, entry.signal_file)

    def to_text(self):
        header = {"format": MANIFEST_FORMAT, "format_version": self.format_version,
                  "global_seed": self.global_seed, "meta": self.meta}
        lines = [json.dumps(header, sort_keys=True)]
        lines += [json.dumps(e.to_record(), sort_keys=True) for e in self.entries]
        return "\n".join(lines) + "\n"


def write_manifest(path, manifest):
    atomic_write_text(path, manifest.to_text())


def parse_manifest(text, root_dir="."):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("header", "empty manifest")
    try:
        header = json.loads(lines[0])
        records = [json.loads(ln) for ln in lines[1:]]
    except json.JSONDecodeError as exc:
        raise FormatError("json", f"manifest line {exc.lineno}: {exc.msg}") from None
    if header.get("format") != MANIFEST_FORMAT:
        raise FormatError("format", f"not a manifest (format={header.get('format')!r})")
    if header.get("format_version") != MANIFEST_VERSION:
        raise FormatError("format_version", f"unsupported manifest version {header.get('format_version')}")
    entries = [ManifestEntry.from_record(r) for r in records]
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise FormatError("id", "duplicate entry ids")
    return CorpusManifest(entries, int(header["global_seed"]), root_dir,
                          MANIFEST_VERSION, header.get("meta", {}))


def read_manifest(path):
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(fh.read(), os.path.dirname(os.path.abspath(path)))


def corruption_seed(global_seed, snr_db, class_index, parent_index):
    return derive_seed(global_seed, "awgn", float(snr_db), class_index, parent_index)


def resnr_manifest(manifest, snr_db):
    """Same clean parents and slices, corrupted at ``snr_db`` (``None`` for clean)."""
    entries = []
    for e in manifest.entries:
        seed = 0 if snr_db is None else corruption_seed(manifest.global_seed, snr_db, e.class_index, e.parent_index)
        entries.append(replace(e, snr_db=None if snr_db is None else float(snr_db), seed=seed))
    return replace(manifest, entries=entries, meta=dict(manifest.meta, snr_db=snr_db))


class ParentCache:
    """Small cache so slices of one parent share a single read + corruption."""

    def __init__(self, manifest):
        self.manifest = manifest
        self._key = None
        self._value = None

    def get(self, entry):
        key = (entry.signal_file, entry.snr_db, entry.seed)
        if key != self._key:
            parent = read_signal(self.manifest.resolve(entry))
            if entry.snr_db is not None:
                parent = add_awgn(parent, entry.snr_db, entry.seed)
            self._key, self._value = key, parent
        return self._value


def materialize(manifest, entry, cache=None):
    """The entry's slice as a :class:`Signal` (noisy unless ``snr_db`` is None)."""
    parent = (cache or ParentCache(manifest)).get(entry)
    if entry.start + entry.length > len(parent):
        raise FormatError("start", f"entry {entry.id}: slice beyond the end of {entry.signal_file}")
    x = parent.samples[entry.start:entry.start + entry.length]
    return Signal(x, parent.sample_rate_hz, label_path=entry.label_path, snr_db=entry.snr_db,
                  seed=entry.seed, meta={"id": entry.id})


def materialize_all(manifest, entries=None):
    cache = ParentCache(manifest)
    return [materialize(manifest, e, cache) for e in (manifest.entries if entries is None else entries)]


def _assign_splits(n, fractions, seed, class_index):
    """Per-class split labels for ``n`` parents, ordered by a seeded hash."""
    order = sorted(range(n), key=lambda i: derive_seed(seed, "split", class_index, i))
    n_train = int(round(fractions[0] * n))
    n_val = min(int(round(fractions[1] * n)), n - n_train)
    labels = [None] * n
    for rank, i in enumerate(order):
        labels[i] = "train" if rank < n_train else ("validation" if rank < n_train + n_val else "test")
    return labels


def build_corpus(specs, per_class, snr_db, seed, out_dir, slice_length=1024, slices_per_parent=4,
                 splits=(0.7, 0.1, 0.2), sample_rate_hz=1.0):
    """Generate parents, segment their steady state and write files + manifest.

    Each parent is a burst (ramp then steady state long enough for
    ``slices_per_parent`` slices) between seeded stretches of silence. Steady
    state is found by burst detection on the noisy capture. Splits are drawn
    per parent, per class, so all slices of a parent share a split.

    Returns the manifest, which is also written to ``out_dir/manifest.jsonl``.
    """
    specs = list(specs)
    if not specs:
        raise InvalidInputError("no device specs given")
    counts = [per_class] * len(specs) if np.isscalar(per_class) else list(per_class)
    if len(counts) != len(specs) or min(counts) < 1:
        raise InvalidInputError("per_class must be a positive count or one count per spec")
    if len(splits) != 3 or min(splits) < 0 or abs(sum(splits) - 1.0) > 1e-9:
        raise InvalidInputError("splits must be three non-negative fractions summing to 1")
    if slice_length < 16 or slices_per_parent < 1:
        raise InvalidInputError("slice_length must be >= 16 and slices_per_parent >= 1")
    paths = [s.class_path for s in specs]
    if len(set(paths)) != len(paths):
        raise InvalidInputError("duplicate class paths in specs")

    sig_dir = os.path.join(out_dir, "signals")
    os.makedirs(sig_dir, exist_ok=True)
    entries = []
    for ci, spec in enumerate(specs):
        spec.validate()
        split_of = _assign_splits(counts[ci], splits, seed, ci)
        for pi in range(counts[ci]):
            rs = Stream(derive_seed(seed, "layout", ci, pi))
            lead = int(rs.integers(64, 257))
            tail = int(rs.integers(64, 257))
            burst_len = spec.ramp_length + slices_per_parent * slice_length + 384
            burst = synth_generate(spec, burst_len, derive_seed(seed, "parent", ci, pi), sample_rate_hz)
            clean = np.concatenate([np.zeros(lead), burst.samples, np.zeros(tail)])
            parent = Signal(clean, sample_rate_hz, label_path=spec.class_path)
            rel = f"signals/c{ci:03d}_p{pi:04d}.rfs"
            write_signal(os.path.join(out_dir, rel), parent)

            cseed = corruption_seed(seed, snr_db, ci, pi)
            noisy = add_awgn(parent, snr_db, cseed)
            start, avail = _steady_window(noisy, lead + spec.ramp_length, burst_len - spec.ramp_length)
            n_slices = min(slices_per_parent, avail // slice_length)
            if n_slices == 0:
                raise DegenerateDataError(f"{rel}: steady state shorter than one slice")
            for si in range(n_slices):
                entries.append(ManifestEntry(
                    id=f"c{ci:03d}p{pi:04d}s{si:02d}", signal_file=rel, class_index=ci,
                    parent_index=pi, slice_index=si, label_path=tuple(spec.class_path),
                    snr_db=float(snr_db), seed=cseed, split=split_of[pi],
                    start=start + si * slice_length, length=slice_length))

    meta = {"snr_db": float(snr_db), "slice_length": slice_length, "slices_per_parent": slices_per_parent,
            "splits": list(splits), "classes": [list(p) for p in paths]}
    manifest = CorpusManifest(entries, int(seed), os.path.abspath(out_dir), MANIFEST_VERSION, meta)
    write_manifest(os.path.join(out_dir, "manifest.jsonl"), manifest)
    return manifest


def _steady_window(noisy, fallback_start, fallback_len):
    """Longest steady segment from burst detection, or the known layout."""
    from .signal import windowed_rms
    rms = windowed_rms(noisy.samples)
    segs = [s for s in detect_bursts(noisy, 0.3 * rms.max(), min_gap=256) if s.kind == "steady"]
    if segs:
        best = max(segs, key=len)
        return best.start_index, len(best)
    return fallback_start, fallback_len


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

@dataclass
class FeatureTable:
    ids: List[str]
    label_paths: List[Tuple[str, ...]]
    splits: List[str]
    names: Tuple[str, ...]
    values: np.ndarray
    flags: List[str] = field(default_factory=list)
    source: str = ""

    def rows(self, split):
        idx = [i for i, s in enumerate(self.splits) if s == split]
        return idx

    def subset(self, idx):
        idx = list(idx)
        return FeatureTable([self.ids[i] for i in idx], [self.label_paths[i] for i in idx],
                            [self.splits[i] for i in idx], self.names, self.values[idx],
                            [self.flags[i] for i in idx], self.source)

    def select(self, names):
        pos = [self.names.index(n) for n in names]
        return replace(self, names=tuple(names), values=self.values[:, pos])


LABEL_COLUMNS = ("id", "split", "label_path")


def features_to_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(LABEL_COLUMNS) + list(table.names) + ["flags"])
    for i in range(len(table.ids)):
        w.writerow([table.ids[i], table.splits[i], "/".join(table.label_paths[i])]
                   + ["%.12g" % v for v in table.values[i]] + [table.flags[i]])
    return buf.getvalue()


def write_features(path, table):
    atomic_write_text(path, features_to_csv(table))


def read_features(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("header", f"{path}: empty feature file") from None
        if tuple(header[:3]) != LABEL_COLUMNS or header[-1] != "flags":
            raise FormatError("header", f"{path}: unexpected columns {header[:3]}...")
        names = tuple(header[3:-1])
        ids, paths, splits, flags, rows = [], [], [], [], []
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(header):
                raise FormatError("row", f"{path}:{lineno}: {len(row)} fields, expected {len(header)}")
            ids.append(row[0])
            splits.append(row[1])
            paths.append(tuple(row[2].split("/")))
            rows.append([float(v) for v in row[3:-1]])
            flags.append(row[-1])
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return FeatureTable(ids, paths, splits, names, values, flags)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

def _blob_path(path):
    base = path[:-5] if path.endswith(".json") else path
    return base + ".bin"


def save_model(path, kind, meta: Dict, arrays: Dict[str, np.ndarray]):
    """Write ``path`` (JSON descriptor) and its ``.bin`` array blob atomically."""
    layout, chunks, offset = [], [], 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name], dtype="<f8")
        layout.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(a.tobytes())
        offset += a.nbytes
    blob = b"".join(chunks)
    descriptor = {"kind": kind, "format_version": MODEL_VERSION, "meta": meta,
                  "arrays": layout, "blob": os.path.basename(_blob_path(path)), "blob_bytes": len(blob)}
    atomic_write_bytes(_blob_path(path), blob)
    atomic_write_text(path, json.dumps(descriptor, sort_keys=True, indent=1) + "\n")


def load_model(path, kind=None):
    with open(path, encoding="utf-8") as fh:
        try:
            desc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError("descriptor", f"{path}: {exc.msg}") from None
    if desc.get("format_version") != MODEL_VERSION:
        raise FormatError("format_version", f"{path}: unsupported model version {desc.get('format_version')}")
    if kind is not None and desc.get("kind") != kind:
        raise FormatError("kind", f"{path}: expected a {kind} model, found {desc.get('kind')!r}")
    with open(os.path.join(os.path.dirname(path), desc["blob"]), "rb") as fh:
        blob = fh.read()
    if len(blob) != desc["blob_bytes"]:
        raise FormatError("blob", f"{path}: blob has {len(blob)} bytes, expected {desc['blob_bytes']}")
    arrays = {}
    for item in desc["arrays"]:
        n = int(np.prod(item["shape"])) if item["shape"] else 1
        a = np.frombuffer(blob, dtype="<f8", count=n, offset=item["offset"])
        arrays[item["name"]] = a.reshape(item["shape"]).astype(np.float64)
    return desc["kind"], desc["meta"], arrays


def sdae_state(model):
    arrays = {}
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"W{i:02d}"] = W
        arrays[f"b{i:02d}"] = b
    meta = {"layer_sizes": list(model.layer_sizes), "ref_min": model.ref_min, "ref_max": model.ref_max,
            "train_meta": model.train_meta}
    return meta, arrays


def sdae_from_state(meta, arrays):
    from .compress import SdaeModel
    n = len(meta["layer_sizes"]) - 1
    return SdaeModel(tuple(meta["layer_sizes"]), [arrays[f"W{i:02d}"] for i in range(n)],
                     [arrays[f"b{i:02d}"] for i in range(n)], meta["ref_min"], meta["ref_max"],
                     meta.get("train_meta", {}))


def lof_state(model):
    meta = {"k": model.k, "metric": model.metric, "threshold": model.threshold, "dimension": model.dimension}
    return meta, {"reference_points": model.reference_points}


def lof_from_state(meta, arrays):
    from .anomaly import lof_fit
    pts = arrays["reference_points"]
    if pts.shape[1] != meta["dimension"]:
        raise FormatError("dimension", f"descriptor dimension {meta['dimension']} but points have {pts.shape[1]}")
    return lof_fit(pts, meta["k"], meta["metric"], meta["threshold"])


def cascade_state(cascade):
    nodes, arrays = {}, {}
    for i, (node, clf) in enumerate(sorted(cascade.node_classifiers.items())):
        meta, arr = clf.state()
        key = f"n{i:03d}"
        nodes[node] = dict(meta, key=key)
        for name, a in arr.items():
            arrays[f"{key}/{name}"] = a
    meta = {"tree": [list(e) for e in cascade.tree.edges], "confidence_floor": cascade.confidence_floor,
            "train_counts": cascade.train_counts, "nodes": nodes}
    return meta, arrays


def cascade_from_state(meta, arrays):
    from .hierarchy import HierarchyCascade, KnnClassifier, LabelTree
    tree = LabelTree([tuple(e) for e in meta["tree"]])
    classifiers = {}
    for node, m in meta["nodes"].items():
        if m.get("kind") != "knn":
            raise FormatError("kind", f"node {node!r}: unsupported classifier {m.get('kind')!r}")
        key = m["key"]
        classifiers[node] = KnnClassifier.from_state(m, {n.split("/", 1)[1]: a for n, a in arrays.items()
                                                         if n.startswith(key + "/")})
    return HierarchyCascade(tree, classifiers, float(meta["confidence_floor"]),
                            dict(meta.get("train_counts", {})))
