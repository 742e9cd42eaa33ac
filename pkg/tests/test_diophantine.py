import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heiskam import _core
from heiskam.diophantine import (certify, default_pair, make_pair, parse_real, parse_vector,
                                 small_divisor_table, smallest_divisors)
from heiskam.errors import DiophantineFailure, InputError, NotOrthogonal

# frozen from the exhaustive search over |m|_inf <= 200 (shared gamma = 1.5)
FROZEN_C_DEFAULT = 0.19137191714035978


def naive_constant(kappa, gamma, bound):
    """Direct double loop over the box; the oracle for certify()."""
    best = np.inf
    for m in itertools.product(range(-bound, bound + 1), repeat=len(kappa)):
        m = np.array(m)
        if not m.any():
            continue
        t = float(np.dot(kappa, m))
        val = abs(t - round(t)) * float(np.dot(m, m)) ** gamma
        best = min(best, val)
    return best


def test_default_pair_is_exactly_orthogonal(pair):
    assert abs(float(np.dot(pair.tau_vec, pair.eta_vec))) <= 1e-14
    assert pair.tau > 0 and pair.eta_norm > 0


def test_default_constant_frozen(pair):
    assert pair.c > 0
    assert pair.c == pytest.approx(FROZEN_C_DEFAULT, rel=1e-12)
    assert pair.search_bound == 200


@pytest.mark.parametrize("bound", [3, 7, 12])
def test_certify_matches_naive_search(bound):
    kappa = np.sqrt([2.0, 3.0])
    c, m, p, _ = certify(kappa, 1.5, bound)
    assert c == pytest.approx(naive_constant(kappa, 1.5, bound), rel=1e-12)
    m = np.array(m)
    assert abs(float(kappa @ m) - p) * float(m @ m) ** 1.5 == pytest.approx(c, rel=1e-12)


def test_constant_monotone_in_bound():
    cs = [make_pair([np.sqrt(2), np.sqrt(3)], [np.sqrt(3), -np.sqrt(2)], 1.5, b).c for b in (5, 20, 60, 200)]
    assert all(a >= b for a, b in zip(cs, cs[1:]))


def test_rational_coordinate_is_resonant():
    with pytest.raises(DiophantineFailure):
        make_pair([1.0, np.sqrt(2)], [np.sqrt(2), -1.0], 1.5, 20)


def test_not_orthogonal():
    with pytest.raises(NotOrthogonal):
        make_pair([np.sqrt(2), np.sqrt(3)], [1.0, 1.0], 1.5, 10)


def test_per_vector_exponent():
    p = make_pair([np.sqrt(2), np.sqrt(3)], [np.sqrt(3), -np.sqrt(2)], 1.5, 30, gamma_eta=2.0)
    assert p.exponent("eta") == 2.0 and p.exponent("tau") == 1.5
    assert p.c_eta >= p.c_tau  # larger exponent, larger weight, same minimizers or better


@pytest.mark.parametrize("token,value", [("sqrt2", np.sqrt(2)), ("-sqrt(3)", -np.sqrt(3)),
                                         ("2*sqrt5", 2 * np.sqrt(5)), ("1/3", 1 / 3), ("0.25", 0.25)])
def test_parse_real(token, value):
    assert parse_real(token) == value


def test_parse_rejects_garbage():
    with pytest.raises(InputError):
        parse_vector("sqrt2,banana")


def test_divisor_table_strata_and_bound(pair):
    tab = small_divisor_table(pair, "tau", 4)
    m = np.indices(tab.zeta.shape) - 4
    m1_zero = ~np.any(m[:2] != 0, axis=0)
    # zero set is exactly the m_1 = 0 stratum
    assert np.array_equal(np.abs(tab.zeta) < 1e-12, m1_zero)
    assert np.array_equal(tab.vanishing, m1_zero)
    # conjugate symmetry zeta(-m) = conj(zeta(m))
    assert np.allclose(tab.zeta[::-1, ::-1, ::-1, ::-1], np.conj(tab.zeta), atol=1e-15)
    mm = np.sum(m.astype(float) ** 2, axis=0)
    ratio = np.where(m1_zero, 0.0, tab.inv_mag / (1 + 4 * np.pi**2 * mm) ** pair.gamma)
    assert ratio.max() <= tab.bound_constant


def test_divisor_table_beyond_certificate(pair):
    small = make_pair(pair.tau_vec, pair.eta_vec, 1.5, 3)
    with pytest.raises(InputError):
        small_divisor_table(small, "tau", 4)


def test_smallest_divisors_sorted(pair):
    b = smallest_divisors(pair, "tau", 10, 20)
    mag = np.abs(np.exp(2j * np.pi * (b @ pair.tau_vec)) - 1)
    assert np.all(np.diff(mag) >= 0)
    assert np.all(np.abs(b).max(axis=1) <= 10) and np.all(np.any(b != 0, axis=1))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(1.1, 2.5), st.integers(5, 40))
def test_backends_agree_on_lattice_min(a, g, bound):
    kappa = np.array([np.sqrt(2) * a, np.sqrt(7) / a])
    outs = [impl.lattice_min(kappa, g, bound) for impl in _core.backends().values()]
    for val, m, p in outs[1:]:
        assert val == pytest.approx(outs[0][0], rel=1e-12)
