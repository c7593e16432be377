import numpy as np
import pytest

from qskyrm import CacheError, EigenSystem
from qskyrm.cache import (CACHE_DIR_ENV, cache_key, default_cache_dir,
                          load_spectrum, save_spectrum)


def _system(seed=0, dim=6, k=4):
    rng = np.random.default_rng(seed)
    w = np.sort(rng.normal(size=k))
    v = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    return EigenSystem(w, v, dim)


def test_round_trip_bitwise(tmp_path):
    es = _system()
    key = cache_key(2, 0.51, 0.3, True)
    save_spectrum(tmp_path, key, es)
    back = load_spectrum(tmp_path, key)
    assert back.dimension == es.dimension
    assert back.k == es.k
    assert back.eigenvalues.tobytes() == np.ascontiguousarray(
        es.eigenvalues).tobytes()
    assert back.eigenvectors.tobytes() == np.ascontiguousarray(
        es.eigenvectors).tobytes()


def test_missing_entry_is_none(tmp_path):
    assert load_spectrum(tmp_path, "0" * 32) is None


def test_write_once(tmp_path):
    key = cache_key(2, 0.51, 0.3, True)
    p1 = save_spectrum(tmp_path, key, _system(seed=1))
    stamp = p1.read_bytes()
    p2 = save_spectrum(tmp_path, key, _system(seed=2))
    assert p1 == p2
    # second save must not replace the original payload
    assert p2.read_bytes() == stamp


def test_key_sensitivity():
    base = cache_key(2, 0.51, 0.3, True)
    assert cache_key(3, 0.51, 0.3, True) != base
    assert cache_key(2, 0.52, 0.3, True) != base
    assert cache_key(2, 0.51, 0.3 + 1e-15, True) != base
    assert cache_key(2, 0.51, 0.3, False) != base
    assert cache_key(2, 0.51, 0.3, True, mode="lowest", k=8) != base
    assert cache_key(2, 0.51, 0.3, True) == base
    assert len(base) == 32


def test_corrupt_byte_detected(tmp_path):
    key = cache_key(2, 0.51, 0.3, True)
    path = save_spectrum(tmp_path, key, _system())
    blob = bytearray(path.read_bytes())
    blob[40] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(CacheError, match="checksum"):
        load_spectrum(tmp_path, key)


def test_truncation_detected(tmp_path):
    key = cache_key(2, 0.51, 0.3, True)
    path = save_spectrum(tmp_path, key, _system())
    blob = path.read_bytes()
    path.write_bytes(blob[:20])
    with pytest.raises(CacheError, match="truncated"):
        load_spectrum(tmp_path, key)
    # chopping whole trailing records fails the self-declared size check
    path.write_bytes(blob[:-96] + blob[-8:])
    with pytest.raises(CacheError):
        load_spectrum(tmp_path, key)


def test_bad_magic_and_version(tmp_path):
    key = cache_key(2, 0.51, 0.3, True)
    path = save_spectrum(tmp_path, key, _system())
    blob = bytearray(path.read_bytes())
    good = bytes(blob)
    blob[:8] = b"NOTSPECS"
    path.write_bytes(bytes(blob))
    with pytest.raises(CacheError, match="magic"):
        load_spectrum(tmp_path, key)
    blob = bytearray(good)
    blob[8] = 99
    path.write_bytes(bytes(blob))
    with pytest.raises(CacheError, match="version"):
        load_spectrum(tmp_path, key)


def test_env_var_overrides_default_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(CACHE_DIR_ENV, str(tmp_path / "spot"))
    assert default_cache_dir() == tmp_path / "spot"
    monkeypatch.delenv(CACHE_DIR_ENV)
    assert default_cache_dir().name == "qskyrm"
