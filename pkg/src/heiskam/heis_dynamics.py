"""Maps of the Heisenberg nilmanifold of the form p -> p . exp(Y + F(p)) with F a
torus-class vector field (coefficients depend only on (x, xi)).

Points and Lie algebra vectors share exponential coordinates
(x_1..x_n, xi_1..xi_n, t); the group law is the 2-step BCH formula
exp(A) exp(B) = exp(A + B + [A, B]/2), so the inverse of a point is its negative.

Nonlinear operators (composition with a perturbed map, conjugation, commutator
defect) are computed on a uniform grid of side G over T^{2n} and fitted back to
the cutoff box.  Composition with a small displacement uses either a Taylor
expansion from cached derivative tables (``method="taylor"``) or exact Fourier
summation at the displaced points (``method="direct"``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import _core
from .errors import AliasingExceeded, HeisKamError, InversionDiverged, NontrivialClass
from .lattice_fourier import (TorusField, derivative_samples, evaluate_stack, fit_stack,
                              grid_points, multi_indices, sample_stack, sobolev_norm,
                              taylor_order, translation_phase)
from .torus_cohomology import HeisVector, model_generator, split_torus

ALIAS_TOL = 1e-9
TABLE_BYTES = 256 * 2**20  # derivative tables above this size switch to direct summation
AVERAGE_TOL = 1e-10


def basis_order(n):
    return [f"X{k + 1}" for k in range(n)] + [f"Lambda{k + 1}" for k in range(n)] + ["Z"]


# -- vector fields ---------------------------------------------------------------------

class TorusClassVectorField:
    """2n+1 real band-limited coefficient functions on T^{2n}, stacked on axis 0."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs, check=True):
        c = np.array(coeffs, dtype=np.complex128, copy=True)
        if c.ndim < 3 or c.shape[0] != c.ndim:
            # 2n+1 components over a 2n-dimensional box
            raise ValueError(f"expected (2n+1, side, ..., side) with 2n axes, got {c.shape}")
        if check:
            for k in range(c.shape[0]):
                TorusField(c[k], True, check=True)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):
        raise AttributeError("TorusClassVectorField is immutable")

    @classmethod
    def from_components(cls, comps):
        cut = max(f.cutoff for f in comps)
        return cls(np.stack([f.resize(cut).coeffs for f in comps]), check=False)

    @classmethod
    def zeros(cls, n, cutoff):
        return cls(np.zeros((2 * n + 1,) + (2 * cutoff + 1,) * (2 * n)), check=False)

    @classmethod
    def constant(cls, vec, cutoff):
        a = vec.to_array() if isinstance(vec, HeisVector) else np.asarray(vec, dtype=np.float64)
        n = (a.size - 1) // 2
        c = np.zeros((2 * n + 1,) + (2 * cutoff + 1,) * (2 * n), dtype=np.complex128)
        c[(slice(None),) + (cutoff,) * (2 * n)] = a
        return cls(c, check=False)

    @property
    def n(self):
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def dim(self):
        return 2 * self.n

    @property
    def cutoff(self):
        return (self.coeffs.shape[1] - 1) // 2

    def component(self, k):
        return TorusField(self.coeffs[k], True, check=False)

    def components(self):
        return [self.component(k) for k in range(2 * self.n + 1)]

    def center(self):
        return self.component(2 * self.n)

    def average(self):
        return HeisVector.from_array(self.coeffs[(slice(None),) + (self.cutoff,) * self.dim].real)

    def with_average(self, vec):
        c = np.array(self.coeffs)
        a = vec.to_array() if isinstance(vec, HeisVector) else np.asarray(vec)
        c[(slice(None),) + (self.cutoff,) * self.dim] = a
        return TorusClassVectorField(c, check=False)

    def zero_mean(self):
        return self.with_average(np.zeros(2 * self.n + 1))

    def offcenter_only(self):
        c = np.array(self.coeffs)
        c[-1] = 0
        return TorusClassVectorField(c, check=False)

    def center_only(self):
        c = np.zeros_like(self.coeffs)
        c[-1] = self.coeffs[-1]
        return TorusClassVectorField(c, check=False)

    def resize(self, cutoff):
        if cutoff == self.cutoff:
            return self
        return TorusClassVectorField.from_components([f.resize(cutoff) for f in self.components()])

    def _aligned(self, other):
        cut = max(self.cutoff, other.cutoff)
        return self.resize(cut).coeffs, other.resize(cut).coeffs

    def __add__(self, other):
        a, b = self._aligned(other)
        return TorusClassVectorField(a + b, check=False)

    def __sub__(self, other):
        a, b = self._aligned(other)
        return TorusClassVectorField(a - b, check=False)

    def __neg__(self):
        return TorusClassVectorField(-self.coeffs, check=False)

    def __mul__(self, s):
        return TorusClassVectorField(self.coeffs * float(s), check=False)

    __rmul__ = __mul__

    def norm(self, s=0.0):
        """Root-sum-square of the component Sobolev norms."""
        return float(np.sqrt(sum(sobolev_norm(f, s) ** 2 for f in self.components())))

    def sup_norm(self, grid=None):
        """Max over components of the max modulus on a dense uniform grid."""
        grid = 4 * self.cutoff + 4 if grid is None else grid
        return float(np.abs(sample_stack(self.coeffs, grid)).max())

    def nonzero_components(self, tol=0.0):
        return [k for k in range(self.coeffs.shape[0]) if np.abs(self.coeffs[k]).max() > tol]

    def to_dict(self):
        return {"basis_order": basis_order(self.n),
                "components": [f.to_dict() for f in self.components()]}

    @classmethod
    def from_dict(cls, d):
        comps = [TorusField.from_dict(c) for c in d["components"]]
        n = comps[0].n
        if "basis_order" in d and list(d["basis_order"]) != basis_order(n):
            raise ValueError("unexpected basis order")
        if len(comps) != 2 * n + 1:
            raise ValueError(f"need {2 * n + 1} components, got {len(comps)}")
        return cls.from_components(comps)

    def __repr__(self):
        return f"TorusClassVectorField(n={self.n}, cutoff={self.cutoff})"


VF = TorusClassVectorField


def _as_array(v):
    return v.to_array() if isinstance(v, HeisVector) else np.asarray(v, dtype=np.float64)


# -- group law on points -------------------------------------------------------------

def bracket_z_arrays(u, v, n):
    """Z coefficient of [u, v] for stacks of vectors (leading axis = component)."""
    return np.sum(u[:n] * v[n:2 * n], axis=0) - np.sum(u[n:2 * n] * v[:n], axis=0)


def group_mul(p, q):
    """p . q in exponential coordinates; arrays of shape (2n+1, ...)."""
    n = (p.shape[0] - 1) // 2
    out = p + q
    out[2 * n] = out[2 * n] + 0.5 * bracket_z_arrays(p, q, n)
    return out


def group_inv(p):
    return -p


# -- brackets ---------------------------------------------------------------------------

def bracket(U, V, cutoff=None):
    """[U, V] for HeisVectors and/or vector fields; only the Z component can be nonzero.

    Field-field brackets are exact products (cutoff N_U + N_V) unless a smaller
    ``cutoff`` is requested.
    """
    if isinstance(U, HeisVector) and isinstance(V, HeisVector):
        from .torus_cohomology import bracket_const
        return bracket_const(U, V)
    if isinstance(U, HeisVector) or isinstance(V, HeisVector):
        sign = 1.0
        if isinstance(U, HeisVector):
            vec, fld = U.to_array(), V
        else:
            vec, fld, sign = V.to_array(), U, -1.0
        n = fld.n
        c = np.zeros_like(fld.coeffs)
        c[2 * n] = sign * (np.tensordot(vec[:n], fld.coeffs[n:2 * n], axes=1)
                           - np.tensordot(vec[n:2 * n], fld.coeffs[:n], axes=1))
        out = TorusClassVectorField(c, check=False)
        return out if cutoff is None else out.resize(cutoff)
    n = U.n
    full = U.cutoff + V.cutoff
    grid = 2 * full + 2
    u = sample_stack(U.resize(full).coeffs, grid)
    v = sample_stack(V.resize(full).coeffs, grid)
    z = bracket_z_arrays(u, v, n)
    c = np.zeros((2 * n + 1,) + (2 * full + 1,) * (2 * n), dtype=np.complex128)
    c[2 * n] = fit_stack(z[None], full, real=True)[0]
    out = TorusClassVectorField(c, check=False)
    return out if cutoff is None else out.resize(cutoff)


# -- maps ----------------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbedMap:
    """p -> p . exp(Y + F(p)); generator_index 1 is the tau map, 2 the eta map."""

    generator_index: int
    Y: HeisVector
    F: TorusClassVectorField

    @classmethod
    def model(cls, pair, i, F=None, cutoff=4):
        Y = model_generator(pair, i)
        F = TorusClassVectorField.zeros(pair.n, cutoff) if F is None else F
        return cls(i, Y, F)

    def translation(self):
        return self.Y.offcenter()

    def apply(self, points):
        """Image of points given as an array (2n+1, P) of exponential coordinates."""
        pts = np.asarray(points, dtype=np.float64)
        n = self.F.n
        vals = evaluate_stack(self.F.coeffs, np.ascontiguousarray(pts[:2 * n].T)).real
        step = vals + self.Y.to_array()[:, None]
        return group_mul(pts, step)


def compose_with_model(F, Y):
    """F o y for the translation y(p) = p . exp(Y): a phase on every coefficient."""
    shift = _as_array(Y)[:2 * F.n]
    ph = translation_phase(F.dim, F.cutoff, shift)
    return TorusClassVectorField(F.coeffs * ph[None], check=False)


class GridComposer:
    """Grid samples of x -> V(x + shift + disp(x)) for a fixed field V and shift.

    Taylor mode keeps derivative tables of the shifted field and grows their
    order on demand; direct mode sums the Fourier series at the displaced points.
    """

    def __init__(self, V, grid, shift=None, method="taylor"):
        if method not in ("taylor", "direct"):
            raise ValueError(f"unknown composition method {method!r}")
        coeffs = V.coeffs
        if shift is not None and np.any(shift):
            coeffs = coeffs * translation_phase(V.dim, V.cutoff, np.asarray(shift))[None]
        self.coeffs = np.ascontiguousarray(coeffs)
        self.dim = V.dim
        self.grid = grid
        self.method = method
        self._order = -1
        self._table = None
        self._points = None
        self._plain = None

    def plain(self):
        if self._plain is None:
            self._plain = sample_stack(self.coeffs, self.grid).reshape(self.coeffs.shape[0], -1)
        return self._plain

    def _table_for(self, order):
        if order > self._order:
            self._table = derivative_samples(self.coeffs, order, self.grid)
            self._order = order
        alpha, inv = multi_indices(self.dim, order)
        return self._table[:, :alpha.shape[0]], alpha, inv

    def _direct(self, disp):
        if self._points is None:
            self._points = grid_points(self.dim, self.grid)
        return evaluate_stack(self.coeffs, np.ascontiguousarray(self._points + disp)).real

    def at(self, disp):
        """disp: (P, dim) displacements at the grid points (C order), or None."""
        if disp is None:
            return self.plain()
        bound = float(np.abs(disp).max()) if disp.size else 0.0
        if bound == 0.0:
            return self.plain()
        if self.method == "direct":
            return self._direct(disp)
        order = taylor_order(self.coeffs, bound)
        terms = multi_indices(self.dim, order)[0].shape[0]
        if terms * self.coeffs.shape[0] * self.grid**self.dim * 8 > TABLE_BYTES:
            return self._direct(disp)
        table, alpha, inv = self._table_for(order)
        return _core.taylor_eval(np.ascontiguousarray(table), np.ascontiguousarray(disp),
                                 np.ascontiguousarray(alpha), np.ascontiguousarray(inv))


def default_grid(cutoff):
    return 2 * cutoff + 2


def fit_samples(values, cutoff, grid, alias_tol=ALIAS_TOL, scale=None):
    """Field from samples (2n+1, G**2n) plus the relative spectral weight beyond the cutoff.

    Raises AliasingExceeded when that weight exceeds ``alias_tol`` (None disables).
    """
    comps = values.shape[0]
    dim = int(round(np.log(values.shape[1]) / np.log(grid)))
    cube = values.reshape((comps,) + (grid,) * dim)
    coeffs = fit_stack(cube, cutoff, real=True)
    spec = sfft.fftn(cube, axes=tuple(range(1, dim + 1)), norm="forward", workers=_core.threads())
    power = np.abs(spec) ** 2
    freqs = np.abs(sfft.fftfreq(grid, 1.0 / grid))
    outside = np.zeros((grid,) * dim, dtype=bool)
    for k in range(dim):
        shape = [1] * dim
        shape[k] = grid
        outside = outside | (freqs.reshape(shape) > cutoff)
    total = float(np.sum(power))
    ref = total if scale is None else max(total, scale**2)
    # summed directly: total minus the in-box part would cancel to ~sqrt(eps)
    ratio = float(np.sqrt(np.sum(power[:, outside]) / ref)) if ref > 0 else 0.0
    if alias_tol is not None and ratio > alias_tol:
        raise AliasingExceeded(f"weight {ratio:.3e} beyond cutoff {cutoff} after refit")
    return TorusClassVectorField(coeffs, check=False), ratio


def _disp(samples, n):
    """Torus displacement (P, 2n) from component samples (2n+1, P)."""
    return np.ascontiguousarray(samples[:2 * n].T)


def compose_with_perturbed(F, fmap, method="taylor", grid=None, alias_tol=ALIAS_TOL, report=False):
    """F o f for f(p) = p . exp(Y + G(p)): F sampled at x + Y_T + G_T(x) and refitted."""
    n, cut = F.n, F.cutoff
    grid = default_grid(cut) if grid is None else grid
    G = fmap.F.resize(cut)
    g = sample_stack(G.coeffs, grid).reshape(2 * n + 1, -1)
    comp = GridComposer(F, grid, fmap.translation(), method)
    vals = comp.at(_disp(g, n))
    out, alias = fit_samples(vals, cut, grid, alias_tol, scale=F.norm())
    return (out, alias) if report else out


# -- linearized operators ---------------------------------------------------------------------

def _Y(pair, i):
    return model_generator(pair, i)


def d1(H, pair):
    """(H o y_i - H + [Y_i, H o y_i + H]/2) for i = 1, 2."""
    out = []
    for i in (1, 2):
        Y = _Y(pair, i)
        Hy = compose_with_model(H, Y)
        out.append(Hy - H + 0.5 * bracket(Y, Hy + H))
    return tuple(out)


def _d1_part(F, Y):
    Fy = compose_with_model(F, Y)
    return Fy - F + 0.5 * bracket(Y, Fy + F)


def d2(F, G, pair):
    """F o y_2 - F + [Y_2, F o y_2 + F]/2 - (G o y_1 - G + [Y_1, G o y_1 + G]/2)."""
    F, G = F.resize(max(F.cutoff, G.cutoff)), G.resize(max(F.cutoff, G.cutoff))
    return _d1_part(F, _Y(pair, 2)) - _d1_part(G, _Y(pair, 1))


# -- commutator ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class CommutatorReport:
    E: TorusClassVectorField
    d2: TorusClassVectorField
    full: TorusClassVectorField   # Z-exponent difference of f o g and g o f; zero iff they commute
    alias: float


def commutator_report(F, G, pair, method="taylor", grid=None, alias_tol=ALIAS_TOL):
    """Quadratic part E(F, G) of the commutator together with d2(F, G).

    f(p) = p exp(Y_1 + F), g(p) = p exp(Y_2 + G); f o g = g o f exactly when
    d2(F, G) + E(F, G) = 0.
    """
    n = pair.n
    cut = max(F.cutoff, G.cutoff)
    F, G = F.resize(cut), G.resize(cut)
    grid = default_grid(cut) if grid is None else grid
    Y1, Y2 = _Y(pair, 1), _Y(pair, 2)
    f_s = sample_stack(F.coeffs, grid).reshape(2 * n + 1, -1)
    g_s = sample_stack(G.coeffs, grid).reshape(2 * n + 1, -1)
    Fc = GridComposer(F, grid, Y2.offcenter(), method)
    Gc = GridComposer(G, grid, Y1.offcenter(), method)
    Fg, Fy2 = Fc.at(_disp(g_s, n)), Fc.plain()
    Gf, Gy1 = Gc.at(_disp(f_s, n)), Gc.plain()
    a, b = Fg - Fy2, Gf - Gy1
    e = a - b
    y1 = Y1.to_array()[:, None]
    y2 = Y2.to_array()[:, None]
    e[2 * n] += (0.5 * bracket_z_arrays(y2, a, n) - 0.5 * bracket_z_arrays(y1, b, n)
                 + 0.5 * bracket_z_arrays(g_s, Fg, n) - 0.5 * bracket_z_arrays(f_s, Gf, n))
    scale = F.norm() + G.norm()
    E, alias = fit_samples(e, cut, grid, alias_tol, scale=scale)
    D2 = d2(F, G, pair)
    return CommutatorReport(E, D2, D2 + E, alias)


def commutator_defect(F, G, pair, method="taylor", grid=None, alias_tol=ALIAS_TOL,
                      expect_commuting=False, tol=1e-10):
    """E(F, G); with ``expect_commuting`` also asserts d2(F, G) + E(F, G) = 0."""
    rep = commutator_report(F, G, pair, method, grid, alias_tol)
    if expect_commuting:
        scale = max(F.norm() + G.norm(), 1e-300)
        bad = rep.full.norm()
        if bad > tol * scale:
            raise HeisKamError(f"maps do not commute: defect {bad:.3e}")
    return rep.E


def commutes(F, G, pair, tol=1e-10, **kw):
    rep = commutator_report(F, G, pair, **kw)
    return rep.full.norm() <= tol * max(F.norm() + G.norm(), 1e-300)


# -- conjugation ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class ConjugationReport:
    iterations: int
    contraction: float
    alias: float


def _fixed_point(step, v0, max_iter, tol, what):
    """Iterate v <- step(v); require contraction and return (v, iterations, rate)."""
    v = v0
    prev = None
    rate = 0.0
    for it in range(1, max_iter + 1):
        nv = step(v)
        d = float(np.abs(nv - v).max()) if v.size else 0.0
        v = nv
        if prev is not None and prev > 0:
            rate = max(rate, d / prev)
            if d > prev and d > tol:
                raise InversionDiverged(f"{what}: iteration is not contracting (ratio {d / prev:.3g})")
        if d <= tol:
            return v, it, rate
        prev = d
    raise InversionDiverged(f"{what}: no convergence in {max_iter} iterations")


class Conjugator:
    """Conjugation by a fixed h(p) = p exp(H(p)), reusable across many maps.

    With Fh = F o h and Hg = H o g, the conjugate g = h^-1 o f o h has
        G = H + Fh - Hg + [H, Y + Fh]/2 - [H + Y + Fh, Hg]/2,
    where the torus part of g is found first by the fixed point
        v = H_T + Fh_T - H_T(x + Y_T + v),  v = G_T.
    Samples of H shifted by Y_T are cached per translation, so maps that differ
    only in F (for example a family over a parameter stencil) share them.
    """

    def __init__(self, H, cutoff=None, grid=None, method="taylor", alias_tol=ALIAS_TOL,
                 max_iter=30, tol=1e-16):
        cut = H.cutoff if cutoff is None else cutoff
        self.H = H.resize(cut)
        self.cutoff = cut
        self.grid = default_grid(cut) if grid is None else grid
        self.method = method
        self.alias_tol = alias_tol
        self.max_iter = max_iter
        self.tol = tol
        n = H.n
        self.h_s = sample_stack(self.H.coeffs, self.grid).reshape(2 * n + 1, -1)
        self._shifted = {}

    def _composer(self, shift):
        key = tuple(np.round(np.asarray(shift), 15))
        if key not in self._shifted:
            self._shifted[key] = GridComposer(self.H, self.grid, shift, self.method)
        return self._shifted[key]

    def apply(self, fmap, report=False, samples=False):
        H, n, grid = self.H, self.H.n, self.grid
        F = fmap.F.resize(self.cutoff)
        Y = fmap.Y.to_array()[:, None]
        h_s = self.h_s
        Fh = GridComposer(F, grid, None, self.method).at(_disp(h_s, n))
        Hy = self._composer(fmap.translation())
        base = h_s[:2 * n] + Fh[:2 * n]

        def step(v):
            return base - Hy.at(np.ascontiguousarray(v.T))[:2 * n]

        scale_t = max(float(np.abs(base).max()), 1e-300)
        v, its, rate = _fixed_point(step, np.array(base), self.max_iter,
                                    self.tol * max(scale_t, 1.0), "base displacement of the conjugate")
        Hg = Hy.at(np.ascontiguousarray(v.T))
        vals = h_s + Fh - Hg
        vals[2 * n] += (0.5 * bracket_z_arrays(h_s, Y + Fh, n)
                        - 0.5 * bracket_z_arrays(h_s + Y + Fh, Hg, n))
        G, alias = fit_samples(vals, self.cutoff, grid, self.alias_tol, scale=F.norm() + H.norm())
        out = PerturbedMap(fmap.generator_index, fmap.Y, G)
        extras = []
        if report:
            extras.append(ConjugationReport(its, rate, alias))
        if samples:
            extras.append({"H": h_s, "Fh": Fh, "Hg": Hg, "G": vals})
        return (out, *extras) if extras else out


def conjugate_map(fmap, H, method="taylor", grid=None, alias_tol=ALIAS_TOL, max_iter=30,
                  tol=1e-16, report=False):
    """g = h^-1 o f o h for h(p) = p exp(H(p)); returns the PerturbedMap of g."""
    cut = max(H.cutoff, fmap.F.cutoff)
    conj = Conjugator(H, cut, grid, method, alias_tol, max_iter, tol)
    return conj.apply(fmap, report=report)


def conjugation_closed_form(h_s, Fh, Hg, Y, n):
    """Sample values of H - Hg + [H + Hg, Y]/2 + Fh + [H, Fh]/2 - [H, Hg]/2 - [Fh, Hg]/2."""
    Y = np.asarray(Y)[:, None] if np.ndim(Y) == 1 else Y
    out = h_s - Hg + Fh
    out[2 * n] += (0.5 * bracket_z_arrays(h_s + Hg, Y, n) + 0.5 * bracket_z_arrays(h_s, Fh, n)
                   - 0.5 * bracket_z_arrays(h_s, Hg, n) - 0.5 * bracket_z_arrays(Fh, Hg, n))
    return out


def invert_points(H, q, max_iter=60, tol=1e-15):
    """Points p with p . exp(H(p)) = q, by the fixed point p_T = q_T - H_T(p_T)."""
    n = H.n
    q = np.asarray(q, dtype=np.float64)

    def evalH(pt):
        return evaluate_stack(H.coeffs, np.ascontiguousarray(pt.T)).real

    def step(pt):
        return q[:2 * n] - evalH(pt)[:2 * n]

    pt, _, _ = _fixed_point(step, np.array(q[:2 * n]), max_iter, tol, "inverse of h")
    return group_mul(q, -evalH(pt))


def conjugate_pointwise(fmap, H, x):
    """Exponent G(x) of g = h^-1 o f o h at torus points x (2n, P), by direct group arithmetic."""
    n = H.n
    x = np.asarray(x, dtype=np.float64)
    p = np.vstack([x, np.zeros((1, x.shape[1]))])
    hp = PerturbedMap(0, HeisVector.zero(n), H).apply(p)
    fhp = fmap.apply(hp)
    gp = invert_points(H, fhp)
    return group_mul(group_inv(p), gp) - fmap.Y.to_array()[:, None]


def inverse_field(H, method="taylor", grid=None, max_iter=30, tol=1e-16, alias_tol=ALIAS_TOL):
    """K with h^-1(q) = q exp(K(q)): K(q) = -H(q + w), w = -H_T(q + w)."""
    n, cut = H.n, H.cutoff
    grid = default_grid(cut) if grid is None else grid
    comp = GridComposer(H, grid, None, method)
    h_s = comp.plain()
    w, _, _ = _fixed_point(lambda w: -comp.at(np.ascontiguousarray(w.T))[:2 * n], -h_s[:2 * n],
                           max_iter, tol * max(1.0, float(np.abs(h_s).max())), "inverse field")
    vals = -comp.at(np.ascontiguousarray(w.T))
    K, _ = fit_samples(vals, cut, grid, alias_tol, scale=H.norm())
    return K


def compose_fields(Ha, Hb, method="taylor", grid=None, alias_tol=ALIAS_TOL):
    """Exponent of h_a o h_b: H_b + H_a o h_b + [H_b, H_a o h_b]/2."""
    n = Ha.n
    cut = max(Ha.cutoff, Hb.cutoff)
    Ha, Hb = Ha.resize(cut), Hb.resize(cut)
    grid = default_grid(cut) if grid is None else grid
    b = sample_stack(Hb.coeffs, grid).reshape(2 * n + 1, -1)
    a = GridComposer(Ha, grid, None, method).at(_disp(b, n))
    vals = b + a
    vals[2 * n] += 0.5 * bracket_z_arrays(b, a, n)
    out, _ = fit_samples(vals, cut, grid, alias_tol, scale=Ha.norm() + Hb.norm())
    return out


# -- splitting ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class VFSplit:
    H: TorusClassVectorField
    F_res: TorusClassVectorField
    G_res: TorusClassVectorField
    phi: TorusClassVectorField
    ratios: dict = field(default_factory=dict)


def split_vf(F, G, pair, s_values=(0, 1, 2), require_trivial=False):
    """(F, G) = d1(H) + (F_res, G_res) with residuals controlled by Phi = d2(F, G).

    Off-center components are split one at a time over the torus.  The
    constant off-center part of H removes the center averages, and the center
    equation is split after substituting the off-center solution.  Off-center
    averages cannot be produced by d1; they stay in the residual, or raise
    NontrivialClass when ``require_trivial``.
    """
    n = pair.n
    cut = max(F.cutoff, G.cutoff)
    F, G = F.resize(cut), G.resize(cut)
    aF, aG = F.average().to_array(), G.average().to_array()
    scale = F.norm() + G.norm()
    off = float(np.abs(np.concatenate([aF[:2 * n], aG[:2 * n]])).max())
    if require_trivial and off > AVERAGE_TOL * max(scale, 1e-300):
        raise NontrivialClass(f"off-center averages of size {off:.3e} are not coboundaries")
    phi = d2(F, G, pair)
    zF, zG = F.zero_mean(), G.zero_mean()
    zphi = d2(zF, zG, pair)
    hc = np.zeros((2 * n + 1,) + (2 * cut + 1,) * (2 * n), dtype=np.complex128)
    for k in range(2 * n):
        sp = split_torus(zF.component(k), zG.component(k), zphi.component(k), pair,
                         s_values=(), allow_fallback=False)
        hc[k] = sp.P.coeffs
    # constant part c of H: [Y_tau, c] = tau.c_Lambda and [Y_eta, c] = -eta.c_X absorb the center averages
    mid = (slice(None),) + (cut,) * (2 * n)
    cvec = np.zeros(2 * n + 1)
    cvec[n:2 * n] = aF[2 * n] * pair.tau_vec / np.dot(pair.tau_vec, pair.tau_vec)
    cvec[:n] = -aG[2 * n] * pair.eta_vec / np.dot(pair.eta_vec, pair.eta_vec)
    hc[mid] = hc[mid] + cvec
    HT = TorusClassVectorField(hc, check=False)
    # center: L_i H_Z = F_Z - [Y_i, H_T o y_i + H_T]/2
    rhs = []
    for i, src in ((1, F), (2, G)):
        Y = _Y(pair, i)
        HTy = compose_with_model(HT, Y)
        rhs.append(src.center() - (0.5 * bracket(Y, HTy + HT)).center())
    fz, gz = rhs[0].with_mean(0.0), rhs[1].with_mean(0.0)
    from .lattice_fourier import zeta
    zt = zeta(2 * n, cut, pair.embedding("tau"))
    ze = zeta(2 * n, cut, pair.embedding("eta"))
    phz = TorusField(ze * fz.coeffs - zt * gz.coeffs, True, check=False)
    spz = split_torus(fz, gz, phz, pair, s_values=(), allow_fallback=False)
    hc[2 * n] = spz.P.coeffs
    H = TorusClassVectorField(hc, check=False)
    D1, D2 = d1(H, pair)
    F_res, G_res = F - D1, G - D2
    ratios = {}
    sig = 2.0 * pair.gamma
    for s in s_values:
        den = phi.norm(s + sig)
        ratios[s] = {
            "F_res": F_res.zero_mean().norm(s) / den if den else 0.0,
            "G_res": G_res.zero_mean().norm(s) / den if den else 0.0,
            "H": H.norm(s) / max(F.norm(s + sig) + G.norm(s + sig), 1e-300),
        }
    return VFSplit(H, F_res, G_res, phi, ratios)
