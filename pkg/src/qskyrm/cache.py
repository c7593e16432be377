"""Write-once binary cache for computed spectra.

Eigenvectors dominate recomputation cost, so full eigensystems are stored
under a content key built from the physics inputs only. Files are immutable:
a computed entry is written atomically once and never touched again, which
makes concurrent readers and a single writer per key safe without locking.

Layout (little-endian): 8-byte magic "QSKYSPEC", one version byte, u64
Hilbert dimension, u64 retained count k, k real-double eigenvalues, dim*k
complex-double eigenvectors in row-major (dim, k) order, and a trailing u64
integrity checksum (leading 8 bytes of the SHA-256 of everything before it).
"""

import hashlib
import os
import struct
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import CacheError
from .spectral import EigenSystem

MAGIC = b"QSKYSPEC"
VERSION = 1
CACHE_DIR_ENV = "QSKYRM_CACHE_DIR"


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_DIR_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "qskyrm"


def cache_key(n: int, delta: float, dmi: float, boundary: bool,
              mode: str = "full", k: Optional[int] = None) -> str:
    """Stable content hash over the physics inputs.

    Floats enter through repr, so any change in value, however small,
    changes the key; output settings never enter.
    """
    payload = repr((int(n), float(delta), float(dmi), bool(boundary),
                    str(mode), None if k is None else int(k)))
    return hashlib.sha256(payload.encode("ascii")).hexdigest()[:32]


def _entry_path(cache_dir: Path, key: str) -> Path:
    return Path(cache_dir) / f"{key}.qsky"


def save_spectrum(cache_dir, key: str, es: EigenSystem) -> Path:
    """Persist an eigensystem under key; existing entries are left alone."""
    cache_dir = Path(cache_dir)
    path = _entry_path(cache_dir, key)
    if path.exists():
        return path
    cache_dir.mkdir(parents=True, exist_ok=True)
    w = np.ascontiguousarray(es.eigenvalues, dtype="<f8")
    v = np.ascontiguousarray(es.eigenvectors, dtype="<c16")
    body = (MAGIC + struct.pack("<B", VERSION)
            + struct.pack("<QQ", es.dimension, es.k)
            + w.tobytes() + v.tobytes())
    digest = hashlib.sha256(body).digest()[:8]
    # temp file in the same directory so the final rename is atomic
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(body)
            fh.write(digest)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_spectrum(cache_dir, key: str) -> Optional[EigenSystem]:
    """Fetch an entry; None when absent, CacheError when present but bad."""
    path = _entry_path(Path(cache_dir), key)
    if not path.exists():
        return None
    blob = path.read_bytes()
    if len(blob) < len(MAGIC) + 1 + 16 + 8:
        raise CacheError(f"{path}: truncated ({len(blob)} bytes)")
    if blob[:8] != MAGIC:
        raise CacheError(f"{path}: bad magic {blob[:8]!r}")
    if blob[8] != VERSION:
        raise CacheError(f"{path}: unsupported version {blob[8]}")
    body, tail = blob[:-8], blob[-8:]
    if hashlib.sha256(body).digest()[:8] != tail:
        raise CacheError(f"{path}: checksum mismatch")
    dim, k = struct.unpack_from("<QQ", blob, 9)
    off = 9 + 16
    need = off + 8 * k + 16 * dim * k + 8
    if len(blob) != need:
        raise CacheError(f"{path}: size {len(blob)} != expected {need}")
    w = np.frombuffer(blob, dtype="<f8", count=k, offset=off).copy()
    off += 8 * k
    v = np.frombuffer(blob, dtype="<c16", count=dim * k, offset=off)
    return EigenSystem(w, v.reshape(dim, k).copy(), int(dim))
