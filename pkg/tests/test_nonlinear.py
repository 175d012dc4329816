import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spintorus.clifford import build_gamma
from spintorus.nonlinear import (
    PowerSeriesNonlinearity,
    bundled_cubic,
    bundled_geometric,
    decrement_index,
    difference_expansion,
    difference_quantity,
    difference_split_maximum,
    direct_quantity,
    evaluate,
    evaluate_on_field,
    growth_audit,
    growth_threshold,
    jacobian,
    load_nonlinearity,
    matrix_weights,
    modulation_weight_sum,
    multinomial_split,
    save_nonlinearity_file,
    load_nonlinearity_file,
)
from spintorus.spectral import FrequencyLattice, Multiplier, SpinorField, apply_multiplier, plane_wave, random_field


@pytest.fixture
def rng():
    return np.random.default_rng(99)


def _random_series(rng, d0=2, max_degree=3, n_terms=5):
    terms = {}
    for _ in range(n_terms):
        p = tuple(int(x) for x in rng.integers(0, max_degree + 1, size=d0))
        if sum(p) == 0:
            continue
        terms[p] = rng.standard_normal(d0) + 1j * rng.standard_normal(d0)
    return PowerSeriesNonlinearity(d0, terms)


def naive_evaluate(F, psi):
    """Oracle: expand every monomial from scratch, no shared powers."""
    psi = np.asarray(psi)
    out = np.zeros(F.d0, dtype=complex)
    for p, c in F.terms.items():
        mono = 1.0 + 0.0j
        for k, e in enumerate(p):
            mono *= psi[k] ** e
        out += mono * c
    return out


# ---------------------------------------------------------------------------
# evaluation


def test_evaluate_pure_cube():
    F = bundled_cubic(2)
    out = evaluate(F, np.array([2.0, 0.0], dtype=complex))
    assert np.allclose(out, [8.0, 0.0])


def test_vanishes_at_zero():
    F = bundled_cubic(4)
    assert np.allclose(evaluate(F, np.zeros(4, dtype=complex)), 0.0)
    with pytest.raises(ValueError, match="vanish"):
        PowerSeriesNonlinearity(2, {(0, 0): np.array([1.0, 0.0])})


def test_factorized_matches_naive(rng):
    for _ in range(20):
        F = _random_series(rng)
        psi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        fast = evaluate(F, psi)
        slow = naive_evaluate(F, psi)
        assert np.abs(fast - slow).max() <= 1e-14 * max(1.0, np.abs(slow).max())


def test_jacobian_matches_finite_differences(rng):
    F = _random_series(rng, n_terms=4)
    psi = 0.3 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    jac = jacobian(F, psi)
    h = 1e-7
    for b in range(2):
        e = np.zeros(2, dtype=complex)
        e[b] = h
        fd = (evaluate(F, psi + e) - evaluate(F, psi - e)) / (2 * h)
        assert np.abs(jac[:, b] - fd).max() <= 1e-6


# ---------------------------------------------------------------------------
# field evaluation


def test_field_zero_series():
    lat = FrequencyLattice(1, 5)
    F = PowerSeriesNonlinearity(2, {})
    f = plane_wave(lat, 2, [2], [1.0, 0.0])
    assert evaluate_on_field(F, f).l2_norm() == 0.0


def test_field_linear_series_is_a_multiplier(rng):
    # purely linear terms act as one constant matrix in frequency
    lat = FrequencyLattice(1, 6)
    c1 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    c2 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    F = PowerSeriesNonlinearity(2, {(1, 0): c1, (0, 1): c2})
    mat = np.stack([c1, c2], axis=1)  # columns are d/dpsi_k
    f = random_field(lat, 2, rng)
    lhs = evaluate_on_field(F, f)
    values = np.broadcast_to(mat, lat.shape + (2, 2))
    rhs = apply_multiplier(Multiplier(lat, "matrix", np.ascontiguousarray(values)), f)
    assert (lhs - rhs).l2_norm() <= 1e-12 * f.l2_norm()


def test_field_cubic_plane_wave_support():
    # monomials only: a plane wave at xi0 maps into {3 xi0}, conjugate-free
    lat = FrequencyLattice(1, 8)
    F = bundled_cubic(2)
    f = plane_wave(lat, 2, [2], [0.5, 0.0])
    out = evaluate_on_field(F, f)
    expect = SpinorField.zeros(lat, 2)
    expect.set_coefficient([6], [0.125, 0.0])
    assert (out - expect).l2_norm() <= 1e-12


def test_field_translation_covariance(rng):
    # translating the input translates the output: conjugation by phases
    lat = FrequencyLattice(1, 6)
    F = _random_series(rng, max_degree=2)
    f = random_field(lat, 2, rng)
    shift = np.exp(-1j * lat.xi[..., 0] * 0.7)[..., None]
    shifted = SpinorField(lat, 2, f.coeffs * shift)
    lhs = evaluate_on_field(F, shifted).coeffs
    rhs = evaluate_on_field(F, f).coeffs * shift
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(rhs).max())


def test_field_padding_guard(rng):
    from spintorus.nonlinear import padded_grid_size

    lat = FrequencyLattice(1, 8)
    assert padded_grid_size(lat, 3) >= 4 * 8 + 1


# ---------------------------------------------------------------------------
# combinatorics


def test_multinomial_basic_rows():
    s = multinomial_split((2, 0))
    assert s[((0, 0), (2, 0))] == 1
    assert s[((1, 0), (1, 0))] == 2
    assert s[((2, 0), (0, 0))] == 1
    assert sum(s.values()) == 2**2
    assert sum(multinomial_split((2, 3, 1)).values()) == 2**6


@settings(max_examples=40, deadline=None)
@given(
    p1=st.integers(0, 3),
    p2=st.integers(0, 3),
    seed=st.integers(0, 10_000),
)
def test_multinomial_expansion_identity(p1, p2, seed):
    rng = np.random.default_rng(seed)
    p = (p1, p2)
    u = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    direct = np.prod((u + v) ** np.array(p))
    expanded = sum(
        coeff * np.prod(u ** np.array(m)) * np.prod(v ** np.array(n))
        for (m, n), coeff in multinomial_split(p).items()
    )
    assert abs(direct - expanded) <= 1e-12 * max(1.0, abs(direct))


def test_decrement_index():
    assert decrement_index((2, 1), 1) == (1, 1)
    assert decrement_index((0, 3), 1) == (0, 3)  # clamped at zero
    assert decrement_index((2, 5), 2) == (2, 4)
    assert sum(decrement_index((4, 2), 1)) <= 6
    with pytest.raises(ValueError):
        decrement_index((1, 1), 3)


def test_difference_expansion_trivial_cases(rng):
    F = _random_series(rng)
    u = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    assert np.abs(difference_expansion(F, u, u)).max() == 0.0
    lin = PowerSeriesNonlinearity(
        2, {(1, 0): np.array([2.0, 0.0]), (0, 1): np.array([0.0, 1j])}
    )
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    expect = np.array([2.0 * (u - v)[0], 1j * (u - v)[1]])
    assert np.abs(difference_expansion(lin, u, v) - expect).max() <= 1e-14


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_difference_expansion_equals_direct(seed):
    rng = np.random.default_rng(seed)
    F = _random_series(rng, n_terms=6)
    u1 = 0.6 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    u2 = 0.6 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    lhs = difference_expansion(F, u1, u2)
    rhs = evaluate(F, u1) - evaluate(F, u2)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(rhs).max())


# ---------------------------------------------------------------------------
# literal neighbour-sum enumeration vs the collapsed closed forms


def _literal_direct(p, weights):
    """Oracle: nested sums over the neighbour indices done by explicit
    enumeration.  The summand never depends on the indices, so the result
    is (number of tuples) * E_mn * weight; we count by iterating."""
    best = 0.0
    for (m, n), coeff in multinomial_split(p).items():
        count = 0
        for _tuple in itertools.product((-1, 0, 1), repeat=sum(m) + sum(n)):
            count += 1  # literal enumeration of the collapsed sums
        assert count == 3 ** sum(p)
        for w in weights:
            best = max(best, float(count * coeff) * w)
    return best


def _literal_difference_core(p, i):
    """Oracle: enumerate all nested splits and all neighbour tuples of the
    contraction-step quantity in exact rational arithmetic."""
    q = decrement_index(p, i)
    best = Fraction(0)
    for (m, n), cmn in multinomial_split(q).items():
        for (k, l), akl in multinomial_split(m).items():
            for (r, s), brs in multinomial_split(n).items():
                count = 0
                for _tuple in itertools.product(
                    (-1, 0, 1), repeat=sum(k) + sum(l) + sum(r) + sum(s) + 1
                ):
                    count += 1
                assert count == 3 ** (sum(q) + 1)
                val = Fraction(count * akl * brs * p[i - 1] * cmn, sum(m) + 1)
                best = max(best, val)
    return best


@pytest.mark.parametrize(
    "p", [(1, 0), (0, 1), (2, 0), (1, 1), (3, 0), (2, 1), (1, 2), (0, 3)]
)
def test_direct_quantity_equals_literal_enumeration(p, rng):
    g = build_gamma(1)
    c = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    w = matrix_weights(g, c)
    assert direct_quantity(p, w) == _literal_direct(p, w)


@pytest.mark.parametrize(
    "p", [(1, 0), (2, 0), (1, 1), (3, 0), (2, 1), (1, 2), (0, 3)]
)
def test_difference_quantity_equals_literal_enumeration(p, rng):
    g = build_gamma(1)
    c = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    w = matrix_weights(g, c)
    for i in (1, 2):
        if p[i - 1] == 0:
            continue
        # exact rational agreement of the combinatorial cores ...
        literal_core = _literal_difference_core(p, i)
        closed_core = (
            3 ** (sum(decrement_index(p, i)) + 1)
            * p[i - 1]
            * difference_split_maximum(p, i)
        )
        assert closed_core == literal_core
        # ... and bit-identical reported floats
        assert difference_quantity(p, i, w) == float(literal_core) * sum(w)


# ---------------------------------------------------------------------------
# growth audit


def test_finite_series_passes_any_threshold(rng):
    g = build_gamma(1)
    F = bundled_cubic(2)
    for constant in (1.5, 2.83, 10.0):
        rep = growth_audit(F, g, constant)
        assert rep.proxy == 0.0
        assert rep.passed
        # the per-degree quantities are still computed and reported
        assert rep.direct[3] > 0 and rep.difference[2] > 0


def test_geometric_family_fails(rng):
    g = build_gamma(1)
    F = bundled_geometric(2, ratio=1.0, degree=30)
    rep = growth_audit(F, g, constant=2.83)
    assert rep.tail_ratio == 1.0
    # the represented roots reach at least 6 * r0 (times matrix factors)
    assert rep.proxy >= 6.0
    assert not rep.passed


def test_threshold_formula():
    assert growth_threshold(2.0, 1) == pytest.approx(
        2.0 ** (-0.75) * 2.0 ** (-0.5) / 3.0
    )


def test_verdict_monotone_under_scaling(rng):
    g = build_gamma(1)
    for F in (
        bundled_geometric(2, 1.0, 8),
        PowerSeriesNonlinearity(
            2, {(2, 0): np.array([1e-9, 0])}, tail_ratio=1e-9
        ),
    ):
        rep1 = growth_audit(F, g, 2.83)
        rep2 = growth_audit(F.scaled(7.0), g, 2.83)
        if not rep1.passed:
            assert not rep2.passed
        assert rep2.proxy >= rep1.proxy


def test_audit_rejects_empty():
    g = build_gamma(1)
    with pytest.raises(ValueError):
        growth_audit(PowerSeriesNonlinearity(2, {}), g, 2.0)


def test_modulation_weight_partial_sums_grow():
    a = modulation_weight_sum(3, 2.83, 5)
    b = modulation_weight_sum(3, 2.83, 50)
    assert b > a  # diagnostic only: the series has no finite limit
    assert b - a == pytest.approx(2 * 45, rel=0.05)


# ---------------------------------------------------------------------------
# serialization


def test_json_list_format_roundtrip(tmp_path, rng):
    F = _random_series(rng)
    path = tmp_path / "series.json"
    save_nonlinearity_file(F, str(path))
    G = load_nonlinearity_file(str(path))
    assert set(G.terms) == set(F.terms)
    for p in F.terms:
        assert np.abs(G.terms[p] - F.terms[p]).max() <= 1e-15
    # the plain-list format is accepted verbatim
    records = [
        {"p": list(p), "c": [[z.real, z.imag] for z in c]} for p, c in F.terms.items()
    ]
    H = load_nonlinearity(records)
    assert set(H.terms) == set(F.terms)
    assert H.tail_ratio is None


def test_json_object_format_carries_tail(tmp_path):
    F = bundled_geometric(2, 0.5, 4)
    path = tmp_path / "geo.json"
    save_nonlinearity_file(F, str(path))
    with open(path) as fh:
        obj = json.load(fh)
    assert obj["tail_ratio"] == 0.5
    G = load_nonlinearity_file(str(path))
    assert G.tail_ratio == 0.5


def test_load_rejects_garbage():
    with pytest.raises((ValueError, KeyError, TypeError)):
        load_nonlinearity({"nope": 1})
    with pytest.raises(ValueError):
        load_nonlinearity([])
