import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heiskam.errors import AliasRisk, NonZeroMean
from heiskam.lattice_fourier import (SmoothingProfile, TorusField, apply_translation_multiplier,
                                     coboundary_multiplier, evaluate, fit_from_samples, product,
                                     random_field, sample, smoothing_apply, sobolev_norm,
                                     sobolev_norm_at, zeta, zeta_at)

seeds = st.integers(0, 2**31 - 1)


def naive_norm(f, s):
    """Loop over nonzero coefficients; the oracle for sobolev_norm."""
    total = 0.0
    for idx in np.argwhere(f.coeffs != 0):
        m = idx - f.cutoff
        total += (1 + 4 * np.pi**2 * float(m @ m)) ** s * abs(f.coeffs[tuple(idx)]) ** 2
    return np.sqrt(total)


def naive_eval(f, x):
    out = 0j
    for idx in np.argwhere(f.coeffs != 0):
        m = idx - f.cutoff
        out += f.coeffs[tuple(idx)] * np.exp(2j * np.pi * float(m @ x))
    return out


def test_single_mode_norm():
    f = TorusField.from_modes(2, 2, {(1, 0, 0, 0): 1.0}, real_valued=False)
    assert sobolev_norm(f, 1) == pytest.approx(np.sqrt(1 + 4 * np.pi**2), rel=1e-15)
    assert sobolev_norm(TorusField.constant(2, 3, 1.0), 5.0) == 1.0


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(0.0, 4.0))
def test_norm_matches_oracle_and_is_monotone(seed, s):
    rng = np.random.default_rng(seed)
    modes = {tuple(rng.integers(-3, 4, 4)): complex(*rng.normal(size=2)) for _ in range(5)}
    f = TorusField.from_modes(2, 3, modes)
    assert sobolev_norm(f, s) == pytest.approx(naive_norm(f, s), rel=1e-13)
    assert sobolev_norm(f, 0) <= sobolev_norm(f, s) * (1 + 1e-15)
    assert sobolev_norm(f, 0) ** 2 == pytest.approx(np.sum(np.abs(f.coeffs) ** 2), rel=1e-14)


def test_real_symmetry_enforced():
    c = np.zeros((3, 3))
    c[0, 0] = 1.0
    with pytest.raises(ValueError):
        TorusField(c.astype(complex) * 1j, real_valued=True)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_translation_round_trip_and_pointwise(seed):
    rng = np.random.default_rng(seed)
    f = random_field(rng, 2, 3)
    k = rng.normal(size=4)
    back = apply_translation_multiplier(apply_translation_multiplier(f, k), -k)
    assert np.abs(back.coeffs - f.coeffs).max() <= 1e-15 * max(1.0, f.max_abs_coeff()) * 4
    x = rng.random(4)
    shifted = apply_translation_multiplier(f, k)
    assert evaluate(shifted, x[None]).item() == pytest.approx(naive_eval(f, x + k), abs=1e-12)
    zero = apply_translation_multiplier(f, np.zeros(4))
    assert np.array_equal(zero.coeffs, f.coeffs)


def test_coboundary_multiplier_rules(pair):
    f = TorusField.from_modes(2, 2, {(0, 0, 1, 0): 1.0, (1, 2, 0, 0): 0.5 - 0.2j})
    Lf = coboundary_multiplier(f, "tau", pair)
    assert Lf.coefficient((0, 0, 1, 0)) == 0  # m_1 = 0 stratum is killed
    with pytest.raises(NonZeroMean):
        coboundary_multiplier(f.with_mean(1.0), "tau", pair)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_coboundary_inverse_on_m1_nonzero(seed):
    from heiskam.diophantine import default_pair
    pair = default_pair(40)
    rng = np.random.default_rng(seed)
    f = random_field(rng, 2, 4)
    m = np.indices(f.coeffs.shape) - 4
    keep = np.any(m[:2] != 0, axis=0)
    f = TorusField(np.where(keep, f.coeffs, 0), True, check=False)
    Lf = coboundary_multiplier(f, "tau", pair)
    z = zeta(4, 4, pair.embedding("tau"))
    back = np.where(keep, Lf.coeffs / np.where(keep, z, 1), 0)
    assert np.linalg.norm(back - f.coeffs) <= 1e-12 * np.linalg.norm(f.coeffs)


def test_multipliers_commute(pair, rng):
    f = random_field(rng, 2, 4)
    prof = SmoothingProfile(5.0)
    a = smoothing_apply(coboundary_multiplier(coboundary_multiplier(f, "eta", pair), "tau", pair), prof)
    b = coboundary_multiplier(coboundary_multiplier(smoothing_apply(f, prof), "tau", pair), "eta", pair)
    assert np.abs(a.coeffs - b.coeffs).max() <= 1e-14 * f.max_abs_coeff()


def test_sparse_helpers_match_dense(pair, rng):
    f = random_field(rng, 2, 3)
    idx = np.argwhere(f.coeffs != 0)
    modes = idx - 3
    vals = f.coeffs[tuple(idx.T)]
    assert sobolev_norm_at(modes, vals, 2.5) == pytest.approx(sobolev_norm(f, 2.5), rel=1e-13)
    z = zeta(4, 3, pair.embedding("eta"))[tuple(idx.T)]
    assert np.allclose(zeta_at(modes, pair.embedding("eta")), z, atol=1e-15)


@pytest.mark.parametrize("shape", ["hard", "raised-cosine", "exponential"])
def test_smoothing_taper_and_mean(shape, rng):
    prof = SmoothingProfile(6.0, shape)
    r = np.linspace(0, 10, 401)
    w = prof.taper(r)
    assert np.all(w[r <= 3.0] == 1.0) and np.all(w[r >= 6.0] == 0.0)
    assert np.all(np.diff(w) <= 0)
    f = random_field(rng, 2, 5, zero_mean=False)
    assert smoothing_apply(f, prof).mean == f.mean
    # t >= 2N leaves band-limited fields untouched
    same = smoothing_apply(f, SmoothingProfile(10.0, shape))
    assert np.array_equal(same.coeffs, f.coeffs)


def test_smoothing_estimates_sweep():
    """|S_t f|_{s+k} <= C t^k |f|_s and |(I - S_t) f|_{s-k} <= C t^-k |f|_s with t-free C."""
    rng = np.random.default_rng(3)
    f = random_field(rng, 1, 40, decay=1.0)
    s, k = 2.0, 1.5
    direct, remainder = [], []
    for t in (4, 8, 16, 32):
        St = smoothing_apply(f, SmoothingProfile(float(t)))
        direct.append(sobolev_norm(St, s + k) / (t**k * sobolev_norm(f, s)))
        remainder.append(sobolev_norm(f - St, s - k) * t**k / sobolev_norm(f, s))
    # (2 pi sqrt(dim))^k bounds both constants for this taper
    bound = (2 * np.pi * np.sqrt(2)) ** k
    # the fitted constant is the max over the sweep; it must not exceed the analytic one
    assert max(direct) <= bound and max(remainder) <= bound


def test_evaluate_constant_and_mode():
    c = TorusField.constant(2, 2, 3.5)
    assert np.allclose(evaluate(c, np.random.default_rng(0).random((5, 4))), 3.5)
    f = TorusField.from_modes(2, 2, {(1, -2, 0, 1): 2.0 + 1.0j}, real_valued=False)
    p = np.array([0.1, 0.2, 0.3, 0.4])
    assert evaluate(f, p[None]).item() == pytest.approx((2 + 1j) * np.exp(2j * np.pi * (0.1 - 0.4 + 0.4)))


def test_evaluate_matches_oversampled_fft(rng):
    f = random_field(rng, 2, 3)
    grid = 16
    vals = sample(f, grid)
    idx = rng.integers(0, grid, size=(10, 4))
    x = idx / grid
    assert np.allclose(evaluate(f, x).real, vals[tuple(idx.T)], atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 4))
def test_fit_sample_round_trip(seed, cutoff):
    rng = np.random.default_rng(seed)
    f = random_field(rng, 2, cutoff, zero_mean=False)
    g = fit_from_samples(sample(f, 2 * cutoff + 2), cutoff)
    assert np.abs(g.coeffs - f.coeffs).max() <= 1e-13 * max(1.0, f.max_abs_coeff())


def test_fit_single_mode_and_constant():
    f = TorusField.from_modes(1, 2, {(1, -1): 0.5})
    g = fit_from_samples(sample(f, 6), 2)
    assert np.allclose(g.coeffs, f.coeffs, atol=1e-15)
    c = fit_from_samples(np.full((6, 6), 2.0), 2)
    assert c.mean == pytest.approx(2.0) and np.abs(c.with_mean(0).coeffs).max() < 1e-15


def test_marginal_grid_warns():
    with pytest.warns(AliasRisk):
        fit_from_samples(np.ones((5, 5)), 2)


def test_product_exact(rng):
    f, g = random_field(rng, 1, 3), random_field(rng, 1, 2)
    h = product(f, g)
    x = rng.random((7, 2))
    assert np.allclose(evaluate(h, x), evaluate(f, x) * evaluate(g, x), atol=1e-13)


def test_json_round_trip_sorted(rng):
    f = random_field(rng, 1, 2)
    d = f.to_dict()
    ms = [e[0] for e in d["entries"]]
    assert ms == sorted(ms)
    assert np.array_equal(TorusField.from_json(f.to_json()).coeffs, f.coeffs)
