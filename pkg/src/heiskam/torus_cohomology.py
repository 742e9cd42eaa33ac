"""Cohomological equations over the torus factor, constant (Lie algebra)
cohomology, and the finite-dimensional algebraic family of actions.

Basis order of the Heisenberg algebra is (X_1..X_n, Lambda_1..Lambda_n, Z)
with [X_i, Lambda_j] = delta_ij Z and all other brackets zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .diophantine import block_nonzero
from .errors import (CocycleViolation, ConstraintViolated, NonZeroMean, NotACochain,
                     ObstructionNonzero)
from .lattice_fourier import TorusField, sobolev_norm, sobolev_norm_at, zeta, zeta_at

COMPAT_TOL = 1e-10
STRATUM_TOL = 1e-12
CONSTRAINT_TOL = 1e-12


# -- constant vectors ---------------------------------------------------------

@dataclass(frozen=True)
class HeisVector:
    x_part: np.ndarray
    lam_part: np.ndarray
    z_part: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x_part", np.asarray(self.x_part, dtype=np.float64))
        object.__setattr__(self, "lam_part", np.asarray(self.lam_part, dtype=np.float64))
        object.__setattr__(self, "z_part", float(self.z_part))

    @property
    def n(self):
        return self.x_part.size

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=np.float64)
        n = (a.size - 1) // 2
        return cls(a[:n], a[n:2 * n], a[2 * n])

    @classmethod
    def zero(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0.0)

    @classmethod
    def basis(cls, n, k):
        a = np.zeros(2 * n + 1)
        a[k] = 1.0
        return cls.from_array(a)

    def to_array(self):
        return np.concatenate([self.x_part, self.lam_part, [self.z_part]])

    def offcenter(self):
        return np.concatenate([self.x_part, self.lam_part])

    def __add__(self, other):
        return HeisVector.from_array(self.to_array() + other.to_array())

    def __sub__(self, other):
        return HeisVector.from_array(self.to_array() - other.to_array())

    def __neg__(self):
        return HeisVector.from_array(-self.to_array())

    def __mul__(self, s):
        return HeisVector.from_array(s * self.to_array())

    __rmul__ = __mul__


def bracket_z(u, v):
    """Z coefficient of [u, v] for constant vectors (arrays or HeisVectors)."""
    u = u.to_array() if isinstance(u, HeisVector) else np.asarray(u)
    v = v.to_array() if isinstance(v, HeisVector) else np.asarray(v)
    n = (u.size - 1) // 2
    return float(np.dot(u[:n], v[n:2 * n]) - np.dot(u[n:2 * n], v[:n]))


def bracket_const(u, v):
    n = u.n
    return HeisVector(np.zeros(n), np.zeros(n), bracket_z(u, v))


def model_generator(pair, which):
    """Y_tau = sum tau_i X_i or Y_eta = sum eta_i Lambda_i."""
    z = np.zeros(pair.n)
    if which in ("tau", 1):
        return HeisVector(pair.tau_vec, z, 0.0)
    if which in ("eta", 2):
        return HeisVector(z, pair.eta_vec, 0.0)
    raise ValueError(f"unknown generator {which!r}")


# -- solvers on a single torus field -----------------------------------------

def _norm0(f):
    return sobolev_norm(f, 0)


def _check_mean(f, name):
    if abs(f.mean) > 1e-14 * max(1.0, _norm0(f)):
        raise NonZeroMean(f"{name} has mean {abs(f.mean):.3e}")


def _stratum(f, n, which):
    """Mask (True where the tau block, or eta block, of m is nonzero)."""
    return block_nonzero(n, f.cutoff, which)


@dataclass(frozen=True)
class CoboundarySolution:
    P: TorusField
    residual_tau: float
    residual_eta: float
    tame_ratios: dict = field(default_factory=dict)


def _rel(err, ref):
    return err / ref if ref > 0 else err


def tame_ratio(P, f, g, s, gamma):
    den = sobolev_norm(f, s + 2 * gamma) + sobolev_norm(g, s + 2 * gamma)
    return sobolev_norm(P, s) / den if den > 0 else 0.0


def solve_common_coboundary(f, g, pair, s_values=(0, 1, 2, 3)):
    """P with L_tau P = f and L_eta P = g for a band-limited cocycle (f, g)."""
    f, g = _common_cutoff(f, g)
    _check_mean(f, "f")
    _check_mean(g, "g")
    n, cut = pair.n, f.cutoff
    scale = _norm0(f) + _norm0(g)
    m1 = _stratum(f, n, "tau")
    zt = zeta(2 * n, cut, pair.embedding("tau"))
    ze = zeta(2 * n, cut, pair.embedding("eta"))
    obstruction = float(np.sqrt(np.sum(np.abs(f.coeffs[~m1]) ** 2)))
    if obstruction > STRATUM_TOL * scale:
        raise ObstructionNonzero(f"f has weight {obstruction:.3e} on the m_1 = 0 stratum")
    defect = float(np.sqrt(np.sum(np.abs(zt * g.coeffs - ze * f.coeffs) ** 2)))
    if defect > COMPAT_TOL * scale:
        raise CocycleViolation(f"L_tau g - L_eta f has norm {defect:.3e}")
    P = _primary_solution(f, g, m1, zt, ze)
    rt = _rel(float(np.sqrt(np.sum(np.abs(zt * P.coeffs - f.coeffs) ** 2))), _norm0(f))
    re = _rel(float(np.sqrt(np.sum(np.abs(ze * P.coeffs - g.coeffs) ** 2))), _norm0(g))
    ratios = {s: tame_ratio(P, f, g, s, pair.gamma) for s in s_values}
    return CoboundarySolution(P, rt, re, ratios)


def manufactured_modes(rng, pair, cutoff, support=2048, worst=64, decay=3.0):
    """Random sparse P on |m|_inf <= cutoff: (modes, values).

    The support mixes uniform modes with modes whose tau block (or eta block)
    is among the ``worst`` smallest divisors, paired with random other blocks;
    a quarter of the eta-worst modes get a zero tau block so both branches of
    the solver are exercised.  Values ~ (1 + m.m)^(-decay/2) times a complex Gaussian.
    """
    from .diophantine import smallest_divisors
    n = pair.n
    blocks = []
    for which, lo in (("tau", 0), ("eta", n)):
        b = smallest_divisors(pair, which, cutoff, worst)
        m = rng.integers(-cutoff, cutoff + 1, size=(worst, 2 * n))
        m[:, lo:lo + n] = b
        if which == "eta":
            m[: worst // 4, :n] = 0
        blocks.append(m)
    blocks.append(rng.integers(-cutoff, cutoff + 1, size=(support, 2 * n)))
    modes = np.unique(np.concatenate(blocks), axis=0)
    modes = modes[np.any(modes != 0, axis=1)]
    k = modes.shape[0]
    vals = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) * (1.0 + np.sum(modes**2, axis=1)) ** (-decay / 2)
    return modes, vals


def _common_cutoff(*fields):
    cut = max(h.cutoff for h in fields)
    return tuple(h.resize(cut) for h in fields)


def _divide(fc, gc, m1, origin, zt, ze):
    """P_m = f_m / zeta(m, tau) where m_1 != 0, g_m / zeta(m, eta) elsewhere, P_0 = 0."""
    c = np.zeros(np.shape(fc), dtype=np.complex128)
    c[m1] = fc[m1] / zt[m1]
    rest = ~m1 & ~origin
    c[rest] = gc[rest] / ze[rest]
    return c


def _primary_solution(f, g, m1, zt, ze):
    origin = np.zeros(m1.shape, dtype=bool)
    origin[(f.cutoff,) * f.dim] = True
    c = _divide(f.coeffs, g.coeffs, m1, origin, zt, ze)
    return TorusField(c, f.real_valued and g.real_valued, check=False)


@dataclass(frozen=True)
class ModeSolution:
    modes: np.ndarray     # (K, 2n) integer modes
    P: np.ndarray         # coefficients of P at ``modes``
    residual_tau: float
    residual_eta: float
    tame_ratios: dict = field(default_factory=dict)


def solve_on_modes(modes, f_vals, g_vals, pair, s_values=(0, 1, 2, 3)):
    """solve_common_coboundary for fields given by their nonzero coefficients.

    Same division as the dense solver, but the work scales with the support
    instead of the (2N+1)^{2n} box.  Modes must be distinct and lie within the
    certified search bound.
    """
    modes = np.asarray(modes, dtype=np.int64)
    f_vals = np.asarray(f_vals, dtype=np.complex128)
    g_vals = np.asarray(g_vals, dtype=np.complex128)
    n = pair.n
    K = modes.shape[0] if modes.ndim == 2 else -1
    if K < 0 or modes.shape[1] != 2 * n or f_vals.shape != (K,) or g_vals.shape != (K,):
        raise ValueError("modes must be (K, 2n) with K values each for f and g")
    if np.unique(modes, axis=0).shape[0] != modes.shape[0]:
        raise ValueError("modes are not distinct")
    if modes.size and np.abs(modes).max() > pair.search_bound:
        raise ValueError(f"modes exceed the certified bound {pair.search_bound}")
    f0 = float(np.linalg.norm(f_vals))
    g0 = float(np.linalg.norm(g_vals))
    origin = ~np.any(modes != 0, axis=1)
    for vals, name in ((f_vals, "f"), (g_vals, "g")):
        mean = float(np.abs(vals[origin]).sum())
        if mean > 1e-14 * max(1.0, float(np.linalg.norm(vals))):
            raise NonZeroMean(f"{name} has mean {mean:.3e}")
    scale = f0 + g0
    m1 = np.any(modes[:, :n] != 0, axis=1)
    zt = zeta_at(modes, pair.embedding("tau"))
    ze = zeta_at(modes, pair.embedding("eta"))
    obstruction = float(np.linalg.norm(f_vals[~m1]))
    if obstruction > STRATUM_TOL * scale:
        raise ObstructionNonzero(f"f has weight {obstruction:.3e} on the m_1 = 0 stratum")
    defect = float(np.linalg.norm(zt * g_vals - ze * f_vals))
    if defect > COMPAT_TOL * scale:
        raise CocycleViolation(f"L_tau g - L_eta f has norm {defect:.3e}")
    P = _divide(f_vals, g_vals, m1, origin, zt, ze)
    rt = _rel(float(np.linalg.norm(zt * P - f_vals)), f0)
    re = _rel(float(np.linalg.norm(ze * P - g_vals)), g0)
    ratios = {}
    for s in s_values:
        den = sobolev_norm_at(modes, f_vals, s + 2 * pair.gamma) + sobolev_norm_at(modes, g_vals, s + 2 * pair.gamma)
        ratios[s] = sobolev_norm_at(modes, P, s) / den if den > 0 else 0.0
    return ModeSolution(modes, P, rt, re, ratios)


def project_R(h, n=None):
    """Orthogonal projection killing every mode with m_1 = 0."""
    n = h.n if n is None else n
    return TorusField(np.where(_stratum(h, n, "tau"), h.coeffs, 0), h.real_valued, check=False)


@dataclass(frozen=True)
class SplitResult:
    P: TorusField
    f_res: TorusField
    g_res: TorusField
    used_fallback: bool
    ratios: dict = field(default_factory=dict)


def split_torus(f, g, phi, pair, s_values=(0, 1, 2, 3), allow_fallback=True):
    """(f, g) = (L_tau P, L_eta P) + (f_res, g_res) with residuals controlled by phi.

    phi must equal L_eta f - L_tau g.  When the primary P vanishes while phi
    does not, the single-mode fallback built on the largest phi coefficient
    is used (only if ``allow_fallback``).
    """
    f, g, phi = _common_cutoff(f, g, phi)
    for h, name in ((f, "f"), (g, "g"), (phi, "phi")):
        _check_mean(h, name)
    n, cut = pair.n, f.cutoff
    zt = zeta(2 * n, cut, pair.embedding("tau"))
    ze = zeta(2 * n, cut, pair.embedding("eta"))
    scale = _norm0(f) + _norm0(g) + _norm0(phi)
    defect = float(np.sqrt(np.sum(np.abs(ze * f.coeffs - zt * g.coeffs - phi.coeffs) ** 2)))
    if defect > COMPAT_TOL * max(scale, 1e-300):
        raise NotACochain(f"L_eta f - L_tau g - phi has norm {defect:.3e}")
    m1 = _stratum(f, n, "tau")
    P = _primary_solution(f, g, m1, zt, ze)
    used = False
    if allow_fallback and not np.any(P.coeffs) and np.any(phi.coeffs):
        # largest |phi_m|; argmax scans C order, so ties go to the lexicographically smallest m
        flat = int(np.argmax(np.abs(phi.coeffs)))
        idx = np.unravel_index(flat, phi.coeffs.shape)
        c = np.zeros_like(phi.coeffs)
        c[idx] = phi.coeffs[idx]
        if phi.real_valued:  # keep the field real by adding the conjugate mode
            mirror = tuple(2 * cut - i for i in idx)
            c[mirror] = np.conj(phi.coeffs[idx])
        P = TorusField(c, phi.real_valued, check=False)
        used = True
    f_res = TorusField(f.coeffs - zt * P.coeffs, f.real_valued, check=False)
    g_res = TorusField(g.coeffs - ze * P.coeffs, g.real_valued, check=False)
    ratios = {}
    for s in s_values:
        den = sobolev_norm(phi, s + 2 * pair.gamma)
        ratios[s] = (sobolev_norm(f_res, s) / den if den else 0.0,
                     sobolev_norm(g_res, s) / den if den else 0.0)
    return SplitResult(P, f_res, g_res, used, ratios)


# -- constant cohomology ---------------------------------------------------------

def _cocycle_row(pair):
    """Row a with a . (F, G) = tau . g_Lambda + eta . f_X (the cocycle relation)."""
    n = pair.n
    a = np.zeros(2 * (2 * n + 1))
    a[:n] = pair.eta_vec
    a[(2 * n + 1) + n:(2 * n + 1) + 2 * n] = pair.tau_vec
    return a


def _split_pair(v, n):
    return HeisVector.from_array(v[:2 * n + 1]), HeisVector.from_array(v[2 * n + 1:])


@dataclass(frozen=True)
class ConstantCocycles:
    matrix: np.ndarray   # columns: orthonormal basis of the cocycle space in R^{2(2n+1)}
    n: int

    @property
    def dimension(self):
        return self.matrix.shape[1]

    def pairs(self):
        return [_split_pair(self.matrix[:, k], self.n) for k in range(self.dimension)]


def constant_cocycle_space(pair):
    """Pairs (F, G) of constant vectors with [Y_tau, G] = [Y_eta, F]."""
    basis = null_space(_cocycle_row(pair)[None, :])
    return ConstantCocycles(basis, pair.n)


def is_constant_cocycle(F, G, pair, tol=1e-12):
    Yt, Ye = model_generator(pair, "tau"), model_generator(pair, "eta")
    lhs, rhs = bracket_z(Yt, G), bracket_z(Ye, F)
    scale = 1.0 + np.linalg.norm(F.to_array()) + np.linalg.norm(G.to_array())
    return abs(lhs - rhs) <= tol * scale


def constant_coboundary(H, pair):
    """(F, G) = ([Y_tau, H], [Y_eta, H]); only the centers are nonzero."""
    return (bracket_const(model_generator(pair, "tau"), H),
            bracket_const(model_generator(pair, "eta"), H))


def cohomology_basis(pair):
    """Orthonormal cocycles with zero centers; they span a complement of the coboundaries."""
    n = pair.n
    rows = np.zeros((3, 2 * (2 * n + 1)))
    rows[0] = _cocycle_row(pair)
    rows[1, 2 * n] = 1.0
    rows[2, 2 * (2 * n + 1) - 1] = 1.0
    return ConstantCocycles(null_space(rows), n)


def coboundary_image(pair):
    """Orthonormal basis of the image of H -> ([Y_tau, H], [Y_eta, H])."""
    n = pair.n
    cols = []
    for k in range(2 * n + 1):
        F, G = constant_coboundary(HeisVector.basis(n, k), pair)
        cols.append(np.concatenate([F.to_array(), G.to_array()]))
    a = np.array(cols).T
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    return u[:, s > 1e-12 * max(s.max(), 1.0)]


def cohomology_dimensions(pair):
    """(dim cocycles, dim coboundaries, dim H^1) computed by numerical rank."""
    cocycles = constant_cocycle_space(pair).dimension
    image = coboundary_image(pair).shape[1]
    return cocycles, image, cocycles - image


# -- the algebraic family -------------------------------------------------------

def chart_indices(n):
    """Positions in the flattened (2, 2n+1) coefficient array used as chart coordinates.

    The coefficient of Lambda_1 in the second generator is solved from the
    commutation relation and therefore left out.
    """
    full = list(range(2 * (2 * n + 1)))
    full.remove((2 * n + 1) + n)
    return np.array(full)


def constraint_residual(values, pair):
    """[Y_1 + F_1, Y_2 + F_2] (its Z coefficient); zero on the family."""
    values = np.asarray(values, dtype=np.float64).reshape(2, -1)
    Y1 = model_generator(pair, "tau").to_array()
    Y2 = model_generator(pair, "eta").to_array()
    return bracket_z(Y1 + values[0], Y2 + values[1])


@dataclass(frozen=True)
class FamilyParameter:
    """Constant perturbations (F_1, F_2) of the generators, stored as a (2, 2n+1) array."""

    values: np.ndarray
    chart_id: str = "lambda1-of-second"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64).reshape(2, -1))

    @property
    def n(self):
        return (self.values.shape[1] - 1) // 2

    def chart_coords(self):
        return self.values.reshape(-1)[chart_indices(self.n)]

    @classmethod
    def from_chart(cls, coords, pair):
        n = pair.n
        coords = np.asarray(coords, dtype=np.float64)
        full = np.zeros(2 * (2 * n + 1))
        full[chart_indices(n)] = coords
        v = full.reshape(2, -1)
        f1x, f1l = v[0, :n], v[0, n:2 * n]
        f2x, f2l = v[1, :n], v[1, n:2 * n]
        tau, eta = pair.tau_vec, pair.eta_vec
        denom = tau[0] + f1x[0]
        if abs(denom) < 1e-3 * abs(tau[0]):
            raise ConstraintViolated("chart point outside the validity radius (tau_1 + f_1^1 ~ 0)")
        rest = (np.dot(tau[1:], f2l[1:]) + np.dot(eta, f1x)
                + np.dot(f1x[1:], f2l[1:]) - np.dot(f1l, f2x))
        v[1, n] = -rest / denom
        return cls(v)

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((2, 2 * n + 1)))


def family_generators(lam, pair):
    """Constant fields (F_1, F_2) of the family member; checks the commutation relation."""
    res = constraint_residual(lam.values, pair)
    if abs(res) > CONSTRAINT_TOL * (1.0 + np.abs(lam.values).max()):
        raise ConstraintViolated(f"commutation relation violated by {res:.3e}")
    return HeisVector.from_array(lam.values[0]), HeisVector.from_array(lam.values[1])


def reduce_conjugacy(lam, pair):
    """Canonical member of the conjugacy class of ``lam`` under constant maps.

    Conjugating by exp(H) adds [H, Y_i + F_i] to the i-th field, which only
    moves the centers; H is the least-norm choice making both centers vanish.
    Returns (reduced parameter, H).
    """
    n = pair.n
    family_generators(lam, pair)
    V1 = model_generator(pair, "tau").to_array() + lam.values[0]
    V2 = model_generator(pair, "eta").to_array() + lam.values[1]
    # [H, V]_Z = h_X . v_Lambda - h_Lambda . v_X
    a = np.array([np.concatenate([V1[n:2 * n], -V1[:n]]),
                  np.concatenate([V2[n:2 * n], -V2[:n]])])
    rhs = -lam.values[:, 2 * n]
    h, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    H = HeisVector(h[:n], h[n:], 0.0)
    out = lam.values.copy()
    out[0, 2 * n] += bracket_z(H, V1)
    out[1, 2 * n] += bracket_z(H, V2)
    if np.max(np.abs(out[:, 2 * n])) > 1e-12 * (1.0 + np.abs(rhs).max()):
        raise ConstraintViolated("centers cannot be removed by a constant conjugacy")
    out[:, 2 * n] = 0.0  # exact target of the linear solve above
    return FamilyParameter(out, lam.chart_id), H
