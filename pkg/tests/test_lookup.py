from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import flagqec.lookup as lookup
from conftest import hex_code
from flagqec.codes import canonical_recovery
from flagqec.faultcode import FaultCheckMatrix, build_fault_check_matrix, unique_columns
from flagqec.gf2core import BitMatrix, BitVector, ShapeError
from flagqec.lookup import (
    DistinguishabilityError,
    FullSyndrome,
    LookupTable,
    MimSearcher,
    ResourceLimitError,
    build_cache,
    count_fault_combinations,
    decode,
    dump_table,
    load_table,
    memory_metrics,
    mim_decode,
    table_to_bytes,
    verify_distinguishability,
)


def _hf(d):
    return build_fault_check_matrix(hex_code(d))


def _unique(hf):
    """(key, class) of each distinct column in first-appearance order."""
    _, reps, _ = unique_columns(hf)
    return [(int(hf.keys[j]), int(hf.classes[j])) for j in reps]


def _oracle_table(hf, t):
    """key -> (class, weight) by explicit enumeration; None on a class conflict."""
    cols = _unique(hf)
    table = {0: (0, 0)}
    for m in range(1, t + 1):
        for combo in combinations(cols, m):
            key = cls = 0
            for k, c in combo:
                key ^= k
                cls ^= c
            if key in table:
                if table[key][0] != cls:
                    return None
                continue
            table[key] = (cls, m)
    return table


@pytest.mark.parametrize("d", [3, 5])
def test_table_matches_enumeration(d):
    hf = _hf(d)
    t = hex_code(d).t
    table = build_cache(hf, t)
    oracle = _oracle_table(hf, t)
    assert len(table) == len(oracle)
    for key, (cls, weight) in oracle.items():
        entry = table.get(key)
        assert entry is not None
        assert (entry.logical_class, entry.weight) == (cls, weight)


@pytest.mark.parametrize(
    "d, combos, cache",
    [(3, 20, 20), (5, 1953, 1587), (7, 349632, 262500)],
)
def test_metrics(d, combos, cache):
    hf = _hf(d)
    table = build_cache(hf, hex_code(d).t)
    m = memory_metrics(table, hf)
    assert (m.columns, m.fault_combinations, m.cache_size) == (hf.n_columns, combos, cache)
    assert m.table_bytes == table.nbytes


def test_combination_count():
    assert count_fault_combinations(62, 2) == 62 + 1891
    assert count_fault_combinations(20, 0) == 1
    table = build_cache(_hf(3), 0)
    assert len(table) == 1 and table.get(0).weight == 0


def test_radius_limits():
    hf = _hf(3)
    with pytest.raises(ValueError):
        build_cache(hf, -1)
    with pytest.raises(ValueError):
        build_cache(hf, lookup.MAX_PACKED_T + 1)
    with pytest.raises(ResourceLimitError):
        build_cache(_hf(5), 2, max_entries=1000)


def _mutated(hf, target, source, flip_class=True):
    arr = hf.matrix.to_array().copy()
    arr[:, target] = arr[:, source]
    if flip_class:
        arr[-1, target] ^= 1
    return FaultCheckMatrix(hf.code, BitMatrix(arr), hf.provenance, hf.data_errors)


def _check_witness(hf, witness, t):
    a, b = witness
    assert 0 < len(a) <= t and 0 < len(b) <= t
    arr = hf.matrix.to_array().astype(int)
    ca, cb = arr[:, list(a)].sum(axis=1) % 2, arr[:, list(b)].sum(axis=1) % 2
    np.testing.assert_array_equal(ca[:-1], cb[:-1])
    assert ca[-1] != cb[-1]


def test_conflict_reports_witness():
    hf = _hf(3)
    # a gate column copied onto another with the opposite logical class
    bad = _mutated(hf, hf.code.n + hf.r + 2, hf.code.n + hf.r + 8)
    rep = verify_distinguishability(bad, 1)
    assert not rep.distinguishable
    assert rep.t_eff == 0
    _check_witness(bad, rep.conflict_witness, 1)
    with pytest.raises(DistinguishabilityError) as err:
        build_cache(bad, 1)
    assert err.value.report == rep


def test_conflict_at_radius_two_keeps_t_eff_one():
    hf = _hf(5)
    arr = hf.matrix.to_array().copy()
    # make data column 0 equal to data columns 1 + 2 with a flipped class
    n = hf.code.n
    arr[:, 0] = arr[:, 1] ^ arr[:, 2]
    arr[-1, 0] ^= 1
    bad = FaultCheckMatrix(hf.code, BitMatrix(arr), hf.provenance, hf.data_errors)
    assert _oracle_table(bad, 1) is not None and _oracle_table(bad, 2) is None
    rep = verify_distinguishability(bad, 2)
    assert not rep.distinguishable and rep.t_eff == 1 and rep.d_eff == 3
    _check_witness(bad, rep.conflict_witness, 2)
    assert n > 2


@pytest.mark.parametrize("d", [3, 5, 7])
def test_hex_codes_distinguishable(d):
    rep = verify_distinguishability(_hf(d), hex_code(d).t)
    assert rep.distinguishable and rep.t_eff == hex_code(d).t


def test_full_syndrome_key():
    sigma = FullSyndrome(BitVector("101"), BitVector("010"))
    assert sigma.key() == 0b010101
    assert FullSyndrome.from_key(sigma.key(), 3) == sigma
    assert (sigma ^ sigma).key() == 0


def test_decode_uses_table_class(steane):
    hf = build_fault_check_matrix(steane)
    table = build_cache(hf, 1)
    # data error on qubit 2 has class 1: the recovery must cancel it up to a stabilizer
    sigma = FullSyndrome(BitVector("011"), BitVector.zeros(3))
    rec = decode(table, steane, sigma)
    e = BitVector.unit(7, 2)
    assert not (steane.h @ (rec ^ e)).any()
    assert (rec ^ e).parity() == 0
    missing = FullSyndrome(BitVector("111"), BitVector("111"))
    assert table.get(missing) is None
    assert decode(table, steane, missing) == canonical_recovery(steane, missing.s)
    with pytest.raises(ShapeError):
        decode(table, steane, FullSyndrome(BitVector("1"), BitVector("1")))


def test_lookup_many_matches_get():
    table = build_cache(_hf(5), 2)
    keys = np.concatenate([table.keys[::7], np.array([1 << 17, 3, (1 << 18) - 1], np.uint64)])
    found, classes = table.lookup_many(keys)
    for k, f, c in zip(keys.tolist(), found, classes):
        e = table.get(int(k))
        assert f == (e is not None)
        assert c == (e.logical_class if e else 0)


def test_table_file_round_trip(tmp_path):
    table = build_cache(_hf(5), 2)
    path = tmp_path / "d5.fqlt"
    dump_table(table, path)
    again = load_table(path)
    assert again == table
    assert table_to_bytes(again) == path.read_bytes()
    path.write_bytes(b"NOPE" + path.read_bytes()[4:])
    with pytest.raises(ValueError):
        load_table(path)
    path.write_bytes(table_to_bytes(table)[:-3])
    with pytest.raises(ValueError):
        load_table(path)


def test_table_rejects_unsorted_keys():
    with pytest.raises(ValueError):
        LookupTable(np.array([3, 1], np.uint64), np.zeros(2, np.uint8), 7, 3, 1)


# -- Meet-in-the-Middle ---------------------------------------------------------


def _mim_oracle(table, hf, key, rho):
    """First table hit over lexicographically ordered combinations of nonzero columns."""
    entry = table.get(key)
    if entry is not None:
        return entry.logical_class, 0
    cols = [c for c in _unique(hf) if c != (0, 0)]
    for m in range(1, rho + 1):
        for combo in combinations(cols, m):
            k, c = key, 0
            for ck, cc in combo:
                k ^= ck
                c ^= cc
            e = table.get(k)
            if e is not None:
                return e.logical_class ^ c, m
    return None


@pytest.fixture(scope="module")
def d5_tables():
    hf = _hf(5)
    return hf, build_cache(hf, 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, (1 << 18) - 1))
def test_mim_matches_lexicographic_oracle(d5_tables, key):
    hf, table = d5_tables
    searcher = MimSearcher(table, hf, 2)
    assert searcher.search(key) == _mim_oracle(table, hf, key, 2)


def test_mim_chunked_levels_match(d5_tables, monkeypatch):
    hf, table = d5_tables
    keys = [k for k in range(0, 1 << 18, 4099) if table.get(k) is None][:25]
    plain = MimSearcher(table, hf, 3)
    expected = [plain.search(k) for k in keys]
    monkeypatch.setattr(lookup, "_CHUNK", 100)
    chunked = MimSearcher(table, hf, 3)
    assert [chunked.search(k) for k in keys] == expected


def test_screened_first_found_matches_exact(monkeypatch):
    hf = _hf(5)
    table = build_cache(hf, 2)
    rng = np.random.default_rng(3)
    for trial in range(20):
        probes = rng.integers(0, 1 << 20, 5000, dtype=np.uint64)
        if trial % 2:
            probes[rng.integers(5000, size=3)] = table.keys[rng.integers(len(table), size=3)]
        monkeypatch.setattr(lookup, "_FILTER_MIN_PROBES", 1 << 62)
        exact = table.first_found(probes)
        monkeypatch.setattr(lookup, "_FILTER_MIN_PROBES", 1)
        assert table.first_found(probes) == exact
    assert set(table._screen(table.keys).tolist()) == set(range(len(table)))


def test_mim_screened_search_matches(monkeypatch):
    hf = _hf(5)
    keys = list(range(1, 1 << 18, 7919))[:30]
    expected = [MimSearcher(build_cache(hf, 2), hf, 3).search(k) for k in keys]
    monkeypatch.setattr(lookup, "_FILTER_MIN_PROBES", 1)
    screened = MimSearcher(build_cache(hf, 2), hf, 3)
    assert [screened.search(k) for k in keys] == expected


def test_mim_radius_zero_and_bounds(d5_tables):
    hf, table = d5_tables
    missing = next(k for k in range(1 << 18) if table.get(k) is None)
    assert MimSearcher(table, hf, 0).search(missing) is None
    assert MimSearcher(table, hf, 0).logical_class(missing) == 0
    with pytest.raises(ValueError):
        MimSearcher(table, hf, 8)


def test_mim_bridges_three_faults(d5_tables):
    hf, table = d5_tables
    cols = [c for c in _unique(hf) if c[0]]
    (k1, c1), (k2, c2), (k3, c3) = cols[3], cols[20], cols[41]
    key = k1 ^ k2 ^ k3
    if table.get(key) is None:
        cls, radius = MimSearcher(table, hf, 2).search(key)
        assert radius >= 1
        assert cls == _mim_oracle(table, hf, key, 2)[0]


def test_mim_decode(steane):
    hf = build_fault_check_matrix(steane)
    table = build_cache(hf, 1)
    sigma = FullSyndrome(BitVector("011"), BitVector.zeros(3))
    assert mim_decode(table, hf, steane, sigma) == decode(table, steane, sigma)
    with pytest.raises(ShapeError):
        mim_decode(table, hf, steane, FullSyndrome(BitVector("1"), BitVector("1")))
