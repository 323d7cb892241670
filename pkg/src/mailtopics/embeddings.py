"""Dense document vectors: EMB1 files and a batched HTTP embedding client.

EMB1 layout: ``b"EMB1"``, u32 row count, u32 dim (both little-endian), then
``count * dim`` little-endian float32 values in row-major order. An optional
sidecar ``<file>.ids`` (one id per line) lets rows be matched to documents by
id instead of by position.
"""

from __future__ import annotations

import logging
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np

from .errors import CorruptHeader, CountMismatch, DimMismatchAcrossBatches, DimZero, ServiceUnavailable

log = logging.getLogger(__name__)

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")


@dataclass
class EmbeddingMatrix:
    vectors: np.ndarray
    doc_ids: list[str]

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors)
        if self.vectors.ndim != 2:
            self.vectors = self.vectors.reshape(len(self.doc_ids), -1)
        if len(self.doc_ids) != self.vectors.shape[0]:
            raise CountMismatch(f"{len(self.doc_ids)} ids for {self.vectors.shape[0]} rows")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.doc_ids)

    def take(self, rows: Sequence[int]) -> "EmbeddingMatrix":
        rows = list(rows)
        return EmbeddingMatrix(self.vectors[rows], [self.doc_ids[i] for i in rows])


def save_embeddings(m: EmbeddingMatrix, path: str | Path, write_ids: bool = True) -> None:
    data = np.ascontiguousarray(m.vectors, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, data.shape[0], data.shape[1] if data.ndim == 2 else 0))
        fh.write(data.tobytes(order="C"))
    if write_ids:
        Path(str(path) + ".ids").write_text("".join(f"{i}\n" for i in m.doc_ids), encoding="utf-8")


def read_emb1(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CorruptHeader(f"{path}: file shorter than header")
    magic, count, dim = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptHeader(f"{path}: bad magic {magic!r}")
    if dim == 0:
        raise DimZero(f"{path}: dim is zero")
    expected = _HEADER.size + 4 * count * dim
    if len(raw) != expected:
        raise CorruptHeader(f"{path}: header says {count}x{dim} but payload is {len(raw) - _HEADER.size} bytes")
    return np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(count, dim).astype(np.float32)


def load_embeddings(path: str | Path, expected_ids: Sequence[str]) -> EmbeddingMatrix:
    """Load an EMB1 file with rows aligned to ``expected_ids``.

    Without an id sidecar, rows are taken positionally and the row count
    must equal ``len(expected_ids)``. With a sidecar, rows are selected by id,
    so a file covering a superset of the corpus is accepted.
    """
    vectors = read_emb1(path)
    expected_ids = [str(i) for i in expected_ids]
    sidecar = Path(str(path) + ".ids")
    if sidecar.exists():
        file_ids = sidecar.read_text(encoding="utf-8").splitlines()
        if len(file_ids) != len(vectors):
            raise CorruptHeader(f"{sidecar}: {len(file_ids)} ids for {len(vectors)} rows")
        index = {doc_id: row for row, doc_id in enumerate(file_ids)}
        missing = [i for i in expected_ids if i not in index]
        if missing:
            raise CountMismatch(f"{len(missing)} expected ids absent from {path} (first: {missing[0]!r})")
        vectors = vectors[[index[i] for i in expected_ids]]
    elif len(vectors) != len(expected_ids):
        raise CountMismatch(f"{path} has {len(vectors)} rows, expected {len(expected_ids)}")
    if len(vectors) and np.isnan(vectors).all(axis=1).any():
        raise CorruptHeader(f"{path}: contains an all-NaN row")
    return EmbeddingMatrix(vectors, expected_ids)


@dataclass
class ProviderConfig:
    mode: str = "file"  # file | remote
    file_path: str | None = None
    endpoint_url: str | None = None
    batch_size: int = 32
    timeout_s: float = 60.0
    retries: int = 3
    parallelism: int = 1
    backoff_s: float = 0.5
    headers: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.mode not in ("file", "remote"):
            raise ValueError(f"unknown provider mode {self.mode!r}")


def _post_batch(client: httpx.Client, cfg: ProviderConfig, texts: list[str]) -> list[list[float]]:
    last: Exception | None = None
    for attempt in range(cfg.retries + 1):
        try:
            resp = client.post(cfg.endpoint_url, json={"texts": texts}, headers=cfg.headers)
            if resp.status_code == 200:
                rows = resp.json()["embeddings"]
                if len(rows) != len(texts):
                    raise ServiceUnavailable(f"service returned {len(rows)} rows for {len(texts)} texts")
                return rows
            last = ServiceUnavailable(f"HTTP {resp.status_code}")
        except httpx.HTTPError as exc:
            last = exc
        if attempt < cfg.retries and cfg.backoff_s:
            time.sleep(cfg.backoff_s * 2**attempt)
    raise ServiceUnavailable(f"{cfg.endpoint_url}: giving up after {cfg.retries + 1} attempts ({last})")


def fetch_embeddings(
    texts: Sequence[str],
    cfg: ProviderConfig,
    doc_ids: Sequence[str] | None = None,
    client: httpx.Client | None = None,
) -> EmbeddingMatrix:
    """Embed ``texts`` through the remote service in order-preserving batches."""
    texts = list(texts)
    ids = [str(i) for i in (doc_ids if doc_ids is not None else range(len(texts)))]
    if not texts:
        return EmbeddingMatrix(np.zeros((0, 0), dtype=np.float32), [])
    if not cfg.endpoint_url:
        raise ValueError("remote mode needs endpoint_url")

    batches = [texts[i : i + cfg.batch_size] for i in range(0, len(texts), cfg.batch_size)]
    own_client = client is None
    client = client or httpx.Client(timeout=cfg.timeout_s)
    try:
        if cfg.parallelism > 1:
            with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
                results = list(pool.map(lambda b: _post_batch(client, cfg, b), batches))
        else:
            results = [_post_batch(client, cfg, b) for b in batches]
    finally:
        if own_client:
            client.close()

    dim = None
    for n, rows in enumerate(results):
        for row in rows:
            if dim is None:
                dim = len(row)
            elif len(row) != dim:
                raise DimMismatchAcrossBatches(f"batch {n} returned dim {len(row)}, expected {dim}")
    if not dim:
        raise DimZero("service returned zero-length vectors")
    vectors = np.asarray([row for rows in results for row in rows], dtype=np.float32)
    log.info("fetched %d embeddings (dim %d) in %d requests", len(vectors), dim, len(batches))
    return EmbeddingMatrix(vectors, ids)
