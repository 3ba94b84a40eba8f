"""Embedding store: validation, ingestion and the on-disk formats.

One record = one utterance: id, identity, bona fide / spoof label, dataset
tag and a fixed-dimension embedding vector. Vector values are held as
float32; scoring widens to float64.

Two file formats carry the same records:

JSONL
    One UTF-8 object per line, LF endings, keys ``utterance_id`` (str),
    ``identity_id`` (str), ``label`` ("bonafide" | "spoof"), ``dataset``
    (str), ``embedding`` (array of numbers). Values are written as the
    shortest decimal that round-trips the widened float64, so reading
    recovers the stored float32 bit-for-bit.

Binary ("PVE1")
    magic ``PVE1`` (4 bytes) | format version u16 LE | dim u32 LE |
    record count u64 LE | model_name (u16 LE length + UTF-8), then per
    record: utterance_id (u16 LE length + UTF-8), identity_id (u16 LE
    length + UTF-8), label u8 (0 = bonafide, 1 = spoof), dataset tag
    (u16 LE length + UTF-8), dim x f32 LE values.

Stores are mutable while being built (``append``) and immutable after
``freeze()``; every reader returns a frozen store. Concurrent reads of a
frozen store are safe.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels

MAGIC = b"PVE1"
FORMAT_VERSION = 1


class StoreError(Exception):
    """Base class for store construction and lookup failures."""


class IngestError(StoreError):
    """A record failed validation during ingestion.

    ``line`` carries the 1-based JSONL line (or binary record ordinal) when
    known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(StoreError):
    """Binary file could not be parsed; ``offset`` is the failing byte."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class Label(enum.Enum):
    BONAFIDE = "bonafide"
    SPOOF = "spoof"


_LABEL_TO_BYTE = {Label.BONAFIDE: 0, Label.SPOOF: 1}
_BYTE_TO_LABEL = {0: Label.BONAFIDE, 1: Label.SPOOF}


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    identity_id: str
    label: Label
    dataset: str
    embedding: np.ndarray  # float32, read-only


def validate_embedding(values, *, context=None):
    """Validate and return an embedding as a read-only float32 vector.

    Rejects empty, non-1D, non-finite and all-zero vectors (cosine similarity
    is undefined on the zero vector, so it is refused at ingestion).
    """

    def fail(msg):
        raise IngestError(msg, line=context)

    try:
        vec = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError):
        fail("embedding must be a sequence of numbers")
    if vec.ndim != 1 or vec.size == 0:
        fail("embedding must be a non-empty 1-D sequence of numbers")
    if not np.all(np.isfinite(vec)):
        fail("embedding contains non-finite values")
    with np.errstate(over="ignore"):
        vec32 = vec.astype(np.float32)
    if not np.all(np.isfinite(vec32)):
        fail("embedding value overflows float32 storage")
    if not np.any(vec32):
        fail("zero embedding vector rejected (cosine similarity undefined)")
    vec32.flags.writeable = False
    return vec32


class EmbeddingStore:
    """In-memory collection of utterance records with a consistent dim.

    Equality compares records and dim; ``model_name`` is extractor
    provenance carried only by the binary format and compared separately.
    """

    def __init__(self, model_name=""):
        self.model_name = model_name
        self._ids: list[str] = []
        self._identities: list[str] = []
        self._labels: list[Label] = []
        self._datasets: list[str] = []
        self._rows: list[np.ndarray] = []
        self._index: dict[str, int] = {}
        self._dim = None
        self._frozen = False
        self._matrix32 = None
        self._matrix64 = None
        self._nsq_cache: dict[str, np.ndarray] = {}
        self._pools = None
        self._identity_set = None

    # -- construction -------------------------------------------------------

    def append(self, utterance_id, identity_id, label, dataset, values, *, context=None):
        """Add one record. Fails on duplicate ids and dim mismatches.

        The first record fixes the store dim; an empty store has dim None.
        """
        if self._frozen:
            raise StoreError("store is frozen; ingestion is single-writer")

        def fail(msg):
            raise IngestError(msg, line=context)

        if not isinstance(utterance_id, str) or not utterance_id:
            fail("utterance_id must be a non-empty string")
        if not isinstance(identity_id, str) or not identity_id:
            fail("identity_id must be a non-empty string")
        if not isinstance(dataset, str):
            fail("dataset must be a string")
        if isinstance(label, str):
            try:
                label = Label(label)
            except ValueError:
                fail(f"label must be 'bonafide' or 'spoof', got {label!r}")
        if utterance_id in self._index:
            fail(f"duplicate utterance_id {utterance_id!r}")
        vec = validate_embedding(values, context=context)
        if self._dim is None:
            self._dim = int(vec.size)
        elif vec.size != self._dim:
            fail(f"embedding dim {vec.size} does not match store dim {self._dim}")
        self._index[utterance_id] = len(self._ids)
        self._ids.append(utterance_id)
        self._identities.append(identity_id)
        self._labels.append(label)
        self._datasets.append(dataset)
        self._rows.append(vec)

    def freeze(self):
        """Seal the store; builds the matrix and lookup tables."""
        if self._frozen:
            return self
        if self._rows:
            mat = np.vstack(self._rows)
        else:
            mat = np.empty((0, 0), dtype=np.float32)
        mat.flags.writeable = False
        self._matrix32 = mat
        pools: dict[str, list[str]] = {}
        for uid, ident, label in zip(self._ids, self._identities, self._labels):
            if label is Label.BONAFIDE:
                pools.setdefault(ident, []).append(uid)
        self._pools = {
            ident: tuple(sorted(uids)) for ident, uids in pools.items()
        }
        self._identity_set = frozenset(self._identities)
        self._frozen = True
        return self

    @classmethod
    def from_records(cls, records: Iterable[UtteranceRecord], model_name=""):
        store = cls(model_name=model_name)
        for rec in records:
            store.append(rec.utterance_id, rec.identity_id, rec.label, rec.dataset, rec.embedding)
        return store.freeze()

    # -- access -------------------------------------------------------------

    def __len__(self):
        return len(self._ids)

    @property
    def dim(self):
        return self._dim

    @property
    def frozen(self):
        return self._frozen

    def utterance_ids(self):
        return tuple(self._ids)

    def identities(self):
        if self._identity_set is not None:
            return self._identity_set
        return frozenset(self._identities)

    def datasets(self):
        return sorted(set(self._datasets))

    def try_row(self, utterance_id):
        return self._index.get(utterance_id)

    def row(self, utterance_id):
        idx = self._index.get(utterance_id)
        if idx is None:
            raise StoreError(f"unknown utterance_id {utterance_id!r}")
        return idx

    def record_at(self, idx) -> UtteranceRecord:
        return UtteranceRecord(
            self._ids[idx], self._identities[idx], self._labels[idx],
            self._datasets[idx], self._rows[idx],
        )

    def get(self, utterance_id) -> UtteranceRecord:
        return self.record_at(self.row(utterance_id))

    def records(self):
        return [self.record_at(i) for i in range(len(self._ids))]

    def label_at(self, idx) -> Label:
        return self._labels[idx]

    def identity_at(self, idx):
        return self._identities[idx]

    def dataset_at(self, idx):
        return self._datasets[idx]

    def filter_records(self, identity=None, label=None):
        """Exact filter by identity and/or label, in store order."""
        out = []
        for i in range(len(self._ids)):
            if identity is not None and self._identities[i] != identity:
                continue
            if label is not None and self._labels[i] is not label:
                continue
            out.append(self.record_at(i))
        return out

    @property
    def matrix32(self):
        self._require_frozen()
        return self._matrix32

    @property
    def matrix64(self):
        """Float64 copy of the vectors, built lazily for scoring."""
        self._require_frozen()
        if self._matrix64 is None:
            m = np.ascontiguousarray(self._matrix32, dtype=np.float64)
            m.flags.writeable = False
            self._matrix64 = m
        return self._matrix64

    @property
    def norm_squares(self):
        """Squared row norms under the active backend's accumulation order.

        Cached per backend so bitwise self-match snapping stays exact after
        a backend switch.
        """
        self._require_frozen()
        backend = kernels.active_backend()
        nsq = self._nsq_cache.get(backend)
        if nsq is None:
            nsq = kernels.row_norm_squares(self.matrix64)
            nsq.flags.writeable = False
            self._nsq_cache[backend] = nsq
        return nsq

    def bona_fide_pool(self, identity):
        """(sorted utterance ids, aligned row indices) of an identity's bona
        fide records, or None if it has none."""
        self._require_frozen()
        ids = self._pools.get(identity)
        if not ids:
            return None
        rows = np.array([self._index[u] for u in ids], dtype=np.int64)
        return ids, rows

    def _require_frozen(self):
        if not self._frozen:
            raise StoreError("store must be frozen first")

    def __eq__(self, other):
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        if len(self) != len(other) or self._dim != other._dim:
            return False
        for i in range(len(self)):
            if (self._ids[i] != other._ids[i]
                    or self._identities[i] != other._identities[i]
                    or self._labels[i] is not other._labels[i]
                    or self._datasets[i] != other._datasets[i]
                    or self._rows[i].tobytes() != other._rows[i].tobytes()):
                return False
        return True

    def stats(self):
        """Summary statistics for CLI reporting."""
        n_bona = sum(1 for l in self._labels if l is Label.BONAFIDE)
        pools = {}
        for uid, ident, label in zip(self._ids, self._identities, self._labels):
            if label is Label.BONAFIDE:
                pools[ident] = pools.get(ident, 0) + 1
        sizes = sorted(pools.values())
        pool_stats = None
        if sizes:
            pool_stats = {
                "min": sizes[0],
                "mean": sum(sizes) / len(sizes),
                "max": sizes[-1],
            }
        return {
            "records": len(self._ids),
            "dim": self._dim,
            "model_name": self.model_name,
            "identities": len(set(self._identities)),
            "bonafide": n_bona,
            "spoof": len(self._ids) - n_bona,
            "datasets": self.datasets(),
            "bonafide_pool_sizes": pool_stats,
        }


@dataclass(frozen=True)
class ReferenceSet:
    """Bona fide embeddings of one identity, rows sorted by utterance_id."""

    identity: str
    utterance_ids: tuple
    vectors: np.ndarray  # (k, dim) float32, aligned with utterance_ids

    def __post_init__(self):
        if len(self.utterance_ids) == 0:
            raise StoreError("reference set must be non-empty")
        if self.vectors.shape[0] != len(self.utterance_ids):
            raise StoreError("reference vectors misaligned with utterance ids")
        order = sorted(range(len(self.utterance_ids)), key=lambda i: self.utterance_ids[i])
        if order != list(range(len(self.utterance_ids))):
            object.__setattr__(self, "utterance_ids", tuple(self.utterance_ids[i] for i in order))
            vecs = self.vectors[order]
            vecs.flags.writeable = False
            object.__setattr__(self, "vectors", vecs)

    def __len__(self):
        return len(self.utterance_ids)


def reference_set(store: EmbeddingStore, identity: str) -> ReferenceSet:
    """All bona fide records of ``identity``; spoofs are never admitted."""
    if identity not in store.identities():
        raise StoreError(f"unknown identity {identity!r}")
    pool = store.bona_fide_pool(identity)
    if pool is None:
        raise StoreError(f"identity {identity!r} has no bona fide records")
    ids, rows = pool
    vecs = store.matrix32[rows]
    vecs.flags.writeable = False
    return ReferenceSet(identity, ids, vecs)


def subsample_reference(ref: ReferenceSet, k: int, seed: int) -> ReferenceSet:
    """Uniform k-subset without replacement, a pure function of (ref, k, seed)."""
    if k <= 0 or k > len(ref):
        raise StoreError(f"subsample size {k} not in [1, {len(ref)}]")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(ref), size=k, replace=False))
    vecs = ref.vectors[idx]
    vecs.flags.writeable = False
    return ReferenceSet(ref.identity, tuple(ref.utterance_ids[i] for i in idx), vecs)


# ------------------------------------------------------------------- JSONL


_JSONL_KEYS = ("utterance_id", "identity_id", "label", "dataset", "embedding")


def ingest_jsonl(path) -> EmbeddingStore:
    """Read a JSONL store. Raises IngestError naming the offending line."""
    store = EmbeddingStore()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"invalid JSON: {exc}", line=lineno) from None
            if not isinstance(obj, dict):
                raise IngestError("record must be a JSON object", line=lineno)
            missing = [k for k in _JSONL_KEYS if k not in obj]
            if missing:
                raise IngestError(f"missing keys: {', '.join(missing)}", line=lineno)
            store.append(
                obj["utterance_id"], obj["identity_id"], obj["label"],
                obj["dataset"], obj["embedding"], context=lineno,
            )
    return store.freeze()


def write_jsonl(store: EmbeddingStore, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in store.records():
            obj = {
                "utterance_id": rec.utterance_id,
                "identity_id": rec.identity_id,
                "label": rec.label.value,
                "dataset": rec.dataset,
                "embedding": [float(v) for v in rec.embedding],
            }
            fh.write(json.dumps(obj, ensure_ascii=False))
            fh.write("\n")


# ------------------------------------------------------------------- binary


def _pack_str(text):
    data = text.encode("utf-8")
    if len(data) > 0xFFFF:
        raise StoreError(f"string field too long for format ({len(data)} bytes)")
    return struct.pack("<H", len(data)) + data


class _Cursor:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        end = self.pos + n
        if end > len(self.data):
            raise FormatError(
                f"truncated file: {what} needs {n} bytes at offset {self.pos}",
                offset=len(self.data),
            )
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def u8(self, what):
        return self.take(1, what)[0]

    def u16(self, what):
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what):
        return struct.unpack("<Q", self.take(8, what))[0]

    def string(self, what):
        n = self.u16(f"{what} length")
        raw = self.take(n, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"{what} is not valid UTF-8", offset=self.pos - n) from None


def write_binary(store: EmbeddingStore, path):
    """Write the PVE1 binary layout; vector values bit-for-bit float32."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HIQ", FORMAT_VERSION, store.dim or 0, len(store)))
        fh.write(_pack_str(store.model_name))
        for rec in store.records():
            fh.write(_pack_str(rec.utterance_id))
            fh.write(_pack_str(rec.identity_id))
            fh.write(struct.pack("<B", _LABEL_TO_BYTE[rec.label]))
            fh.write(_pack_str(rec.dataset))
            fh.write(rec.embedding.astype("<f4", copy=False).tobytes())


def ingest_binary(path) -> EmbeddingStore:
    """Read a PVE1 binary store; structural failures raise FormatError with
    the failing byte offset, semantic ones IngestError with the record ordinal."""
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data)
    magic = cur.take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    version = cur.u16("format version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}", offset=4)
    dim = cur.u32("dim")
    count = cur.u64("record count")
    model_name = cur.string("model_name")
    store = EmbeddingStore(model_name=model_name)
    vec_bytes = 4 * dim
    for ordinal in range(1, count + 1):
        utterance_id = cur.string("utterance_id")
        identity_id = cur.string("identity_id")
        label_byte = cur.u8("label")
        if label_byte not in _BYTE_TO_LABEL:
            raise FormatError(f"invalid label byte {label_byte}", offset=cur.pos - 1)
        dataset = cur.string("dataset tag")
        raw = cur.take(vec_bytes, "vector values")
        values = np.frombuffer(raw, dtype="<f4").astype(np.float32)
        store.append(
            utterance_id, identity_id, _BYTE_TO_LABEL[label_byte], dataset,
            values, context=ordinal,
        )
    if cur.pos != len(data):
        raise FormatError(
            f"trailing data after {count} declared records", offset=cur.pos
        )
    return store.freeze()
