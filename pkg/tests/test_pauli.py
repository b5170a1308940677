import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsqlab.errors import ResourceLimitError
from qsqlab.pauli import (
    STAB_NAMES,
    ObservableSum,
    PauliString,
    ProductStabState,
    all_stab_labels,
    enumerate_low_weight,
    expectation_stab,
    low_weight_count,
    observable_infinity_norm,
    pauli_coefficients,
    pauli_decompose,
    pauli_product,
    sample_stab_counts,
    sample_stab_product,
    stab_expectations,
)

pauli_text = st.integers(1, 4).flatmap(lambda n: st.text("IXYZ", min_size=n, max_size=n))


def test_support_and_weight():
    p = PauliString.from_str("XIZ")
    assert p.support == (0, 2)
    assert p.weight == 2
    assert PauliString.identity(3).support == ()
    assert str(p) == "XIZ"
    assert PauliString.from_index(3, p.index) == p


def test_single_qubit_products():
    x, y, z = (PauliString.from_str(c) for c in "XYZ")
    assert pauli_product(x, y) == (1j, z)
    assert pauli_product(y, x) == (-1j, z)
    for p in (x, y, z):
        assert pauli_product(p, p) == (1, PauliString.identity(1))


def test_two_qubit_product_example():
    phase, r = pauli_product(PauliString.from_str("XZ"), PauliString.from_str("ZZ"))
    assert r == PauliString.from_str("YI")
    dense = PauliString.from_str("XZ").to_dense() @ PauliString.from_str("ZZ").to_dense()
    np.testing.assert_allclose(dense, phase * r.to_dense(), atol=0)
    assert phase == -1j


def test_product_matches_dense_on_all_two_qubit_pairs():
    strings = ["".join(s) for s in itertools.product("IXYZ", repeat=2)]
    for a, b in itertools.product(strings, repeat=2):
        p, q = PauliString.from_str(a), PauliString.from_str(b)
        phase, r = pauli_product(p, q)
        np.testing.assert_allclose(p.to_dense() @ q.to_dense(), phase * r.to_dense(), atol=1e-15)
        assert set(r.support) <= set(p.support) | set(q.support)


def test_product_rejects_mismatched_sizes():
    with pytest.raises(ValueError):
        pauli_product(PauliString.from_str("X"), PauliString.from_str("XX"))


def test_expectation_examples():
    plus, zero = ProductStabState.from_names(["+"]), ProductStabState.from_names(["0"])
    x = PauliString.from_str("X")
    assert expectation_stab(plus, x) == 1
    assert expectation_stab(zero, x) == 0
    assert expectation_stab(ProductStabState.from_names(["+", "1"]), PauliString.from_str("XZ")) == -1


def test_expectation_matches_dense_n3():
    rng = np.random.default_rng(11)
    for _ in range(100):
        psi = sample_stab_product(3, rng)
        p = PauliString.from_index(3, int(rng.integers(64)))
        v = psi.vector()
        dense = float(np.real(v.conj() @ p.to_dense() @ v))
        assert expectation_stab(psi, p) == pytest.approx(dense, abs=1e-14)


def test_single_site_averages():
    for char in "XYZ":
        p = PauliString.from_str(char)
        values = [expectation_stab(ProductStabState((s,)), p) for s in range(6)]
        assert sum(values) == 0
        assert sum(v * v for v in values) / 6 == pytest.approx(1 / 3, abs=0)


@pytest.mark.parametrize(
    "n,k,region,count", [(1, 1, None, 4), (2, 1, None, 7), (4, 2, (0, 1), 16), (5, 2, None, 106)]
)
def test_enumeration_counts(n, k, region, count):
    strings = enumerate_low_weight(n, k, region)
    assert len(strings) == count == low_weight_count(n if region is None else len(region), k)
    assert len(set(strings)) == count
    if region is not None:
        assert all(set(p.support) <= set(region) for p in strings)
    assert strings == sorted(strings, key=PauliString.sort_key)


def test_enumeration_rejects_large_k():
    with pytest.raises(ValueError):
        enumerate_low_weight(2, 3)


def test_sampling_is_deterministic():
    a = sample_stab_product(5, np.random.default_rng(9))
    b = sample_stab_product(5, np.random.default_rng(9))
    assert a == b


def test_sampling_frequencies_n1():
    rng = np.random.default_rng(4)
    labels = np.array([sample_stab_product(1, rng).labels[0] for _ in range(60000)])
    p = 1 / 6
    band = 5 * math.sqrt(p * (1 - p) / 60000)
    freq = np.bincount(labels, minlength=6) / 60000
    assert np.all(np.abs(freq - p) <= band)


def test_sampling_independence_n2():
    from scipy.stats import chi2_contingency

    rng = np.random.default_rng(5)
    draws = np.array([sample_stab_product(2, rng).labels for _ in range(30000)])
    table = np.zeros((6, 6))
    np.add.at(table, (draws[:, 0], draws[:, 1]), 1)
    assert chi2_contingency(table)[1] > 1e-3


def test_aggregated_sampling_totals():
    rng = np.random.default_rng(0)
    labels, counts = sample_stab_counts(3, 10_000, rng)
    assert counts.sum() == 10_000
    assert len({tuple(r) for r in labels}) == labels.shape[0]


def test_infinity_norm_examples():
    assert observable_infinity_norm(ObservableSum(1, [("Z", 0.7)])) == pytest.approx(0.7)
    assert observable_infinity_norm(ObservableSum(1, [("Z", 0.5), ("X", 0.5)])) == pytest.approx(
        math.sqrt(0.5), abs=1e-14
    )
    assert observable_infinity_norm(ObservableSum.zero(3)) == 0.0


def test_infinity_norm_cap(monkeypatch):
    monkeypatch.setenv("QSQLAB_DENSE_CAP", "observable=2")
    with pytest.raises(ResourceLimitError):
        observable_infinity_norm(ObservableSum(3, [("XXX", 1.0)]))


def test_observable_sum_invariants():
    o = ObservableSum(2, [("ZI", 0.5), ("XX", 0.25), ("ZI", -0.5)])
    assert list(o.terms) == [PauliString.from_str("XX")]
    assert o.support == (0, 1)
    with pytest.raises(ValueError):
        ObservableSum(1, [("Z", 1j)])
    assert ObservableSum.from_json(o.to_json()) == o


def test_exhaustive_coefficient_identity():
    rng = np.random.default_rng(2)
    labels = all_stab_labels(3)
    for _ in range(5):
        strings = enumerate_low_weight(3, 2)
        picks = rng.choice(len(strings), size=4, replace=False)
        o = ObservableSum(3, [(strings[i], float(rng.normal())) for i in picks])
        values = sum(c * stab_expectations(labels, p) for p, c in o.terms.items())
        for p in enumerate_low_weight(3, 3):
            alpha = 3.0**p.weight * np.mean(values * stab_expectations(labels, p))
            assert alpha == pytest.approx(o.coefficient(p), abs=1e-12)


@given(pauli_text)
def test_decompose_roundtrip(text):
    p = PauliString.from_str(text)
    dense = p.to_dense()
    coeffs = pauli_coefficients(dense)
    assert coeffs[p.index] == pytest.approx(1)
    assert pauli_decompose(dense, atol=1e-12) == ObservableSum(p.n, [(p, 1.0)])


@settings(max_examples=30)
@given(st.lists(st.sampled_from(STAB_NAMES), min_size=1, max_size=4), pauli_text)
def test_expectation_property(names, text):
    psi = ProductStabState.from_names(names)
    p = PauliString.from_str((text * 4)[: len(names)])
    v = psi.vector()
    assert expectation_stab(psi, p) == pytest.approx(float(np.real(v.conj() @ p.to_dense() @ v)), abs=1e-14)
