import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heiskam import _core
from heiskam import heis_dynamics as D
from heiskam.errors import NontrivialClass
from heiskam.lattice_fourier import evaluate_stack, multi_indices, random_field
from heiskam.torus_cohomology import HeisVector

VF = D.TorusClassVectorField


def rvf(rng, N=3, scale=1.0, zero_mean=False, decay=3.0):
    return VF.from_components([random_field(rng, 2, N, decay=decay, zero_mean=zero_mean, scale=scale)
                               for _ in range(5)])


def smooth_vf(rng, N=4, amp=1e-4):
    """Low modes only, padded to cutoff N: the composition stays far below the alias floor."""
    comps = [random_field(rng, 2, 1, decay=0.0, zero_mean=False).resize(N) for _ in range(5)]
    v = VF.from_components(comps)
    return v * (amp / v.sup_norm())


def test_group_law():
    rng = np.random.default_rng(0)
    p, q, r = rng.normal(size=(3, 5))
    assert np.allclose(D.group_mul(D.group_mul(p, q), r), D.group_mul(p, D.group_mul(q, r)), atol=1e-14)
    assert np.allclose(D.group_mul(p, D.group_inv(p)), 0, atol=1e-15)
    e = np.eye(5)
    assert D.group_mul(e[0], e[2])[4] == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_d2_d1_vanishes(seed):
    from heiskam.diophantine import default_pair
    pair = default_pair(40)
    H = rvf(np.random.default_rng(seed))
    a, b = D.d1(H, pair)
    assert D.d2(a, b, pair).norm() <= 1e-12 * H.norm()


def test_bracket_single_component(rng):
    U, V = rvf(rng), rvf(rng)
    assert D.bracket(U, V).nonzero_components() == [4]
    c = D.bracket(VF.constant(HeisVector.basis(2, 0).to_array(), 2),
                  VF.constant(HeisVector.basis(2, 2).to_array(), 2))
    assert c.average().to_array()[4] == pytest.approx(1.0)


def test_commutator_zero_and_quadratic(pair):
    rng = np.random.default_rng(4)
    z = VF.zeros(2, 3)
    assert D.commutator_defect(z, z, pair).norm() == 0
    F0, G0 = rvf(rng, 4, 1e-2), rvf(rng, 4, 1e-2)
    e = [D.commutator_defect(F0 * 0.5**k, G0 * 0.5**k, pair, alias_tol=None).norm(0) for k in range(4)]
    for a, b in zip(e, e[1:]):
        assert 4 / 1.2 <= a / b <= 4 * 1.2


def test_commuting_model_maps(pair):
    z = VF.zeros(2, 3)
    assert D.commutes(z, z, pair)
    # constant center perturbations commute with everything
    c = VF.constant(np.array([0, 0, 0, 0, 1e-3]), 3)
    assert D.commutes(c, c * 2.0, pair)


def test_conjugation_matches_pointwise(pair):
    rng = np.random.default_rng(1)
    F, Hs = smooth_vf(rng), smooth_vf(rng)
    fm = D.PerturbedMap.model(pair, 1, F)
    x = rng.random((4, 200))
    exact = D.conjugate_pointwise(fm, Hs, x)
    g = D.conjugate_map(fm, Hs)
    got = evaluate_stack(g.F.coeffs, x.T.copy()).real
    assert np.abs(got - exact).max() <= 1e-10 * np.abs(exact).max()


def test_conjugation_round_trip(pair):
    rng = np.random.default_rng(1)
    F, Hs = smooth_vf(rng), smooth_vf(rng)
    fm = D.PerturbedMap.model(pair, 1, F)
    K = D.inverse_field(Hs)
    assert D.compose_fields(Hs, K).norm() <= 1e-14 * Hs.norm()
    back = D.conjugate_map(D.conjugate_map(fm, Hs), K)
    assert (back.F - F).norm() <= 1e-12 * F.norm()


def test_conjugation_by_zero_is_identity(pair, rng):
    F = smooth_vf(rng)
    fm = D.PerturbedMap.model(pair, 2, F)
    g = D.conjugate_map(fm, VF.zeros(2, 4))
    assert (g.F - F).norm() <= 1e-15 * F.norm()


def test_split_vf_recovers_coboundary(pair):
    rng = np.random.default_rng(1)
    H0 = rvf(rng, 4, zero_mean=True)
    A, B = D.d1(H0, pair)
    sp = D.split_vf(A, B, pair)
    assert sp.F_res.norm() <= 1e-13 * A.norm() and sp.G_res.norm() <= 1e-13 * B.norm()
    assert (sp.H - H0).zero_mean().norm() <= 1e-13 * H0.norm()


def test_split_vf_offcenter_average_is_nontrivial(pair, rng):
    H0 = rvf(rng, 3, zero_mean=True)
    A, B = D.d1(H0, pair)
    bad = A.with_average(np.array([1e-3, 0, 0, 0, 0]))
    sp = D.split_vf(bad, B, pair)
    assert sp.F_res.average().to_array()[0] == pytest.approx(1e-3)
    with pytest.raises(NontrivialClass):
        D.split_vf(bad, B, pair, require_trivial=True)


def test_vector_field_json_round_trip(rng):
    v = rvf(rng, 2)
    w = VF.from_dict(v.to_dict())
    assert np.array_equal(w.coeffs, v.coeffs)


@pytest.mark.skipif(len(_core.backends()) < 2, reason="compiled kernels not built")
def test_backends_agree_on_taylor_and_nudft():
    rng = np.random.default_rng(0)
    impls = _core.backends()
    alpha, inv = multi_indices(4, 4)
    derivs = rng.standard_normal((5, alpha.shape[0], 300))
    disp = rng.uniform(-1e-3, 1e-3, (300, 4))
    args = [_core._writable(a, t) for a, t in
            ((derivs, np.float64), (disp, np.float64), (alpha, np.int64), (inv, np.float64))]
    outs = [m.taylor_eval(*args, 1) for m in impls.values()]
    assert np.abs(outs[0] - outs[1]).max() <= 1e-13 * np.abs(outs[0]).max()
    coeffs = rng.standard_normal((5, 9**4)) + 1j * rng.standard_normal((5, 9**4))
    pts = rng.random((200, 4))
    outs = [m.nudft_eval(coeffs, 4, 4, pts, 1) for m in impls.values()]
    assert np.abs(outs[0] - outs[1]).max() <= 1e-11 * np.abs(outs[0]).max()
