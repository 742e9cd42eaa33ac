import numpy as np
import pytest

from heiskam import kam_engine as K
from heiskam.errors import NoConvergence, NontrivialClass
from heiskam.torus_cohomology import FamilyParameter, constraint_residual


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        K.KamConfig.from_dict({"r0": 3, "bogus": 1})
    cfg = K.KamConfig.from_dict({"t0": 6.0})
    assert cfg.t(2) == pytest.approx(6.0 * 1.4**2)
    assert K.KamConfig.from_dict(cfg.to_dict()) == cfg


def test_admissibility_and_err_bound_scaling():
    cfg = K.KamConfig()
    assert cfg.admissibility(8.0, 0.0, 1.0) == 0.0
    # with delta = 0 only the eps^2 term survives
    a, b = cfg.err_bound(8.0, 1e-6, 0.0), cfg.err_bound(8.0, 5e-7, 0.0)
    assert a / b == pytest.approx(4.0, rel=1e-12)


def test_algebraic_family_is_a_fixed_point(pair):
    fam = K.PerturbationFamily(pair, cutoff=2)
    sol = K.solve_parameter(fam)
    assert np.abs(sol.lam.chart_coords()).max() <= 1e-14
    F, G = fam.fields(sol.lam)
    assert F.norm() <= 1e-14 and G.norm() <= 1e-14


def test_shifted_family_parameter_found(pair):
    shift = np.zeros(9)
    shift[[0, 3, 6]] = [2e-4, -1e-4, 5e-5]
    fam, _ = K.manufactured_seed(pair, 1e-4, cutoff=2, seed=3, shift=shift)
    sol = K.solve_parameter(fam)
    assert abs(constraint_residual(sol.lam.values, pair)) <= 1e-14
    # the average map of the shifted base family vanishes at -shift (up to the conjugacy's own term)
    assert np.abs(sol.lam.chart_coords() + shift).max() <= 1e-6


def test_manufactured_seed_converges(pair):
    fam, Hs = K.manufactured_seed(pair, 1e-3, seed=0)
    H, lam, trace = K.run(fam)
    assert trace.converged and len(trace.records) <= 11
    assert trace.final_residual <= 1e-9
    eps = trace.eps()
    for a, b in zip(eps, eps[1:]):
        if a < 1e-4:
            assert b <= a**1.5
    assert np.abs(K.lambda_bar_class(lam, pair).values).max() <= 1e-12
    rows = trace.csv_rows()
    assert rows[0][:3] == ["n", "t", "eps"] and len(rows) == len(trace.records) + 1


def test_negative_control_fails(pair):
    fam = K.obstructed_family(pair, 1e-3)
    with pytest.raises((NoConvergence, NontrivialClass)) as info:
        K.run(fam)
    assert info.value.trace is not None


def test_family_param_rejects_bad_shape():
    with pytest.raises(ValueError):
        FamilyParameter(np.zeros((3, 5)))
