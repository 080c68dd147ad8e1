from __future__ import annotations

import pytest

from cuspvariance import cache, qforms


@pytest.fixture
def store():
    s = qforms.FormStore()
    s.get(12, 60)
    s.get(24, 40)
    return s


def test_default_path_env(isolated_cache):
    assert cache.default_path() == isolated_cache


def test_default_path_home(monkeypatch):
    monkeypatch.delenv("CUSPVARIANCE_CACHE", raising=False)
    assert cache.default_path().parts[-3:] == (".cache", "cuspvariance", "eigencache.txt")


def test_round_trip(tmp_path, store):
    p = tmp_path / "c.txt"
    cache.save_store(store, p)
    back = cache.read_cache(p)
    assert sorted(back) == [12, 24]
    for k in (12, 24):
        orig = store.get(k, 2)
        for f, g in zip(orig, back[k]):
            assert g.n_max == f.n_max
            for n in range(1, f.n_max + 1):
                assert abs(g.lam_mp[n] - f.lam_mp[n]) <= 1e-28 * max(1, abs(f.lam_mp[n]))
    # the k = 12 form is rational, so its exact column survives
    assert back[12][0].exact_coeffs[2] == -24
    assert back[12][0].exact_coeffs[60] == store.get(12, 60)[0].exact_coeffs[60]


def test_rewrite_is_byte_identical(tmp_path, store):
    p, q = tmp_path / "a.txt", tmp_path / "b.txt"
    cache.save_store(store, p)
    s2 = qforms.FormStore()
    cache.load_into(s2, p)
    cache.save_store(s2, q)
    assert p.read_bytes() == q.read_bytes()


def test_header_and_rows(tmp_path, store):
    p = tmp_path / "c.txt"
    cache.save_store(store, p)
    lines = p.read_text().splitlines()
    assert lines[0] == cache.HEADER
    assert lines[1].startswith("12,0,1,")
    assert lines[2].split(",")[4] == "-24/1"


def test_merge_keeps_longer(tmp_path, store):
    p = tmp_path / "c.txt"
    cache.save_store(store, p)
    small = qforms.FormStore()
    small.get(12, 10)
    cache.save_store(small, p)
    assert cache.read_cache(p)[12].n_max == 60


def test_load_missing_file(tmp_path):
    assert cache.load_into(qforms.FormStore(), tmp_path / "none.txt") == 0


def test_loaded_store_serves_requests(tmp_path, store):
    p = tmp_path / "c.txt"
    cache.save_store(store, p)
    s2 = qforms.FormStore()
    assert cache.load_into(s2, p) == 2
    assert s2.get(12, 50)[0].lam[2] == pytest.approx(-24 / 2 ** 5.5, rel=1e-15)


@pytest.mark.parametrize("body", [
    "",
    "wrong header\n12,0,1,1.0\n",
    f"{cache.HEADER}\n12,0,1\n",
    f"{cache.HEADER}\n12,0,x,1.0\n",
    f"{cache.HEADER}\n12,0,1,1.0\n12,0,3,1.0\n",
    f"{cache.HEADER}\n12,1,1,1.0\n",
    f"{cache.HEADER}\n12,0,1,1.0,1/1\n12,0,2,1.0\n",
])
def test_format_errors(tmp_path, body):
    p = tmp_path / "bad.txt"
    p.write_text(body)
    with pytest.raises(cache.CacheFormatError):
        cache.read_cache(p)


def test_format_lambda_digits():
    s = cache.format_lambda("-0.53033008588991064870683624271963")
    assert s.startswith("-0.5303300858899106487068362427")
