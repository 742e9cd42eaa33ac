"""Seeded self-checks behind ``heiskam verify-suite``.

Every row is (check, value, threshold, passed).  Nothing time-dependent is
reported, so a rerun with the same seed and thread cap writes the same bytes.
"""

import numpy as np

from .diophantine import default_pair, make_pair
from .heis_dynamics import TorusClassVectorField, bracket, d1, d2
from .lattice_fourier import coboundary_multiplier, random_field
from .torus_cohomology import cohomology_dimensions, solve_common_coboundary


def _row(name, value, threshold, le=True):
    ok = value <= threshold if le else value == threshold
    return [name, value, threshold, bool(ok)]


def _n3_pair():
    t = np.sqrt([2.0, 3.0, 5.0])
    return make_pair(t, np.cross(t, [1.0, np.sqrt(7.0), np.sqrt(11.0)]), 1.5, 40)


def _random_vf(rng, n, cutoff, scale=1.0):
    return TorusClassVectorField.from_components(
        [random_field(rng, n, cutoff, decay=2.0, scale=scale) for _ in range(2 * n + 1)])


def run_suite(seed, full=False):
    rng = np.random.default_rng(seed)
    pair = default_pair()
    rows = []

    coc, _, h1 = cohomology_dimensions(pair)
    rows.append(_row("cocycles_n2", coc, 9, le=False))
    rows.append(_row("h1_n2", h1, 7, le=False))
    rows.append(_row("h1_n3", cohomology_dimensions(_n3_pair())[2], 11, le=False))

    worst_res, worst_rec = 0.0, 0.0
    for _ in range(10):
        P = random_field(rng, 2, 16, decay=3.0)
        sol = solve_common_coboundary(coboundary_multiplier(P, "tau", pair),
                                      coboundary_multiplier(P, "eta", pair), pair)
        worst_res = max(worst_res, sol.residual_tau, sol.residual_eta)
        worst_rec = max(worst_rec, float(np.linalg.norm(sol.P.coeffs - P.coeffs) / np.linalg.norm(P.coeffs)))
    rows.append(_row("torus_residual_max", worst_res, 1e-10))
    rows.append(_row("torus_recovery_max", worst_rec, 1e-10))

    worst = 0.0
    for _ in range(5):
        H = _random_vf(rng, 2, 3)
        F, G = d1(H, pair)
        worst = max(worst, d2(F, G, pair).norm() / H.norm())
    rows.append(_row("d2_d1_relative", worst, 1e-12))

    U, V = _random_vf(rng, 2, 2), _random_vf(rng, 2, 2)
    nz = bracket(U, V).nonzero_components(1e-14 * U.norm() * V.norm())
    rows.append(_row("bracket_nonzero_components", len(nz), 1, le=False))

    rows.extend(_schrodinger_rows(rng, pair))
    if full:
        rows.extend(_kam_rows(pair))
    return rows


def _schrodinger_rows(rng, pair):
    from . import schrodinger_rep as S
    frame = S.build_frame(pair)
    ms = np.arange(-8, 9)
    worst_pi, worst_rec = 0.0, 0.0
    for _ in range(3):
        a, b = rng.uniform(0.6, 1.4, 2)
        cx, cy = rng.uniform(-2.0, 2.0, 2)
        Q = S.GridField.from_function(
            lambda x, y: np.exp(-(a * (x - cx) ** 2 + b * (y - cy) ** 2) / 2), 2, 20.0, 256)
        f = S.L_tau_apply(Q, frame)
        worst_pi = max(worst_pi, float(S.pi_norms(f, ms, frame).max()) / Q.l2())
        res = S.transfer_solve(f, S.L_eta_apply(Q, frame), frame)
        worst_rec = max(worst_rec, (res.P - Q).l2() / Q.l2())
    return [_row("pi_L_tau_relative", worst_pi, 1e-9),
            _row("schrodinger_recovery", worst_rec, 1e-7)]


def _kam_rows(pair):
    from . import kam_engine as K
    fam, _ = K.manufactured_seed(pair, 1e-3, 4, 0)
    _, _, trace = K.run(fam, K.KamConfig())
    return [_row("kam_iterations", len(trace.records) - 1, 10),
            _row("kam_residual", trace.final_residual, 1e-9)]
