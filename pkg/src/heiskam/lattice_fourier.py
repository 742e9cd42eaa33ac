"""Truncated Fourier series on the torus T^d (d = 2n).

A ``TorusField`` stores the coefficients c_m for |m|_inf <= N in a dense array
of shape (2N+1,)*d, index m + N.  Everything here is coefficient-wise algebra
plus uniform-grid sampling and fitting.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import lru_cache
from itertools import product as iproduct
from math import factorial

import numpy as np
import scipy.fft as sfft

from . import _core
from .errors import AliasRisk, NonZeroMean

SYMMETRY_TOL = 1e-14


@lru_cache(maxsize=64)
def mode_grid(dim, cutoff):
    """Integer mode coordinates, shape (dim, 2N+1, ..., 2N+1)."""
    side = 2 * cutoff + 1
    m = np.indices((side,) * dim) - cutoff
    m.setflags(write=False)
    return m


@lru_cache(maxsize=64)
def mode_norm_sq(dim, cutoff):
    out = np.sum(mode_grid(dim, cutoff).astype(np.float64) ** 2, axis=0)
    out.setflags(write=False)
    return out


def sobolev_weight(dim, cutoff, s):
    return (1.0 + 4.0 * np.pi**2 * mode_norm_sq(dim, cutoff)) ** s


def _flip(c):
    return c[(slice(None, None, -1),) * c.ndim]


class TorusField:
    """Immutable band-limited function on T^dim."""

    __slots__ = ("coeffs", "real_valued")

    def __init__(self, coeffs, real_valued=True, check=True):
        c = np.array(coeffs, dtype=np.complex128, copy=True)
        if c.ndim < 1 or len(set(c.shape)) != 1 or c.shape[0] % 2 != 1:
            raise ValueError(f"coefficient array must be a cube of odd side, got {c.shape}")
        if real_valued and check:
            scale = max(float(np.max(np.abs(c))), 1e-300)
            if np.max(np.abs(c - np.conj(_flip(c)))) > SYMMETRY_TOL * scale:
                raise ValueError("real_valued field needs c_{-m} = conj(c_m)")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "real_valued", bool(real_valued))

    def __setattr__(self, name, value):
        raise AttributeError("TorusField is immutable")

    # -- construction -----------------------------------------------------
    @classmethod
    def zeros(cls, n, cutoff, real_valued=True):
        return cls(np.zeros((2 * cutoff + 1,) * (2 * n)), real_valued)

    @classmethod
    def constant(cls, n, cutoff, value):
        c = np.zeros((2 * cutoff + 1,) * (2 * n), dtype=np.complex128)
        c[(cutoff,) * (2 * n)] = value
        return cls(c, real_valued=np.isreal(value))

    @classmethod
    def from_modes(cls, n, cutoff, modes, real_valued=True):
        """Build from {m: c_m}; for real fields c_{-m} is set to conj(c_m)."""
        c = np.zeros((2 * cutoff + 1,) * (2 * n), dtype=np.complex128)
        for m, val in modes.items():
            idx = tuple(int(k) + cutoff for k in m)
            mirror = tuple(2 * cutoff - i for i in idx)
            if real_valued and idx == mirror:
                c[idx] = np.real(val)
                continue
            c[idx] = val
            if real_valued:
                c[mirror] = np.conj(val)
        return cls(c, real_valued)

    # -- shape ------------------------------------------------------------
    @property
    def dim(self):
        return self.coeffs.ndim

    @property
    def n(self):
        return self.coeffs.ndim // 2

    @property
    def cutoff(self):
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def mean(self):
        return complex(self.coeffs[(self.cutoff,) * self.dim])

    def coefficient(self, m):
        if max(abs(int(k)) for k in m) > self.cutoff:
            return 0j
        return complex(self.coeffs[tuple(int(k) + self.cutoff for k in m)])

    # -- algebra ----------------------------------------------------------
    def _like(self, c, real_valued=None):
        rv = self.real_valued if real_valued is None else real_valued
        return TorusField(c, rv, check=False)

    def _aligned(self, other):
        if not isinstance(other, TorusField):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        cut = max(self.cutoff, other.cutoff)
        return self.resize(cut).coeffs, other.resize(cut).coeffs, self.real_valued and other.real_valued

    def __add__(self, other):
        a, b, rv = self._aligned(other)
        return TorusField(a + b, rv, check=False)

    def __sub__(self, other):
        a, b, rv = self._aligned(other)
        return TorusField(a - b, rv, check=False)

    def __neg__(self):
        return self._like(-self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, TorusField):
            return NotImplemented
        rv = self.real_valued and np.isreal(scalar)
        return self._like(self.coeffs * scalar, rv)

    __rmul__ = __mul__

    def with_mean(self, value=0.0):
        c = np.array(self.coeffs)
        c[(self.cutoff,) * self.dim] = value
        return self._like(c, self.real_valued and np.isreal(value))

    def resize(self, cutoff):
        """Pad with zeros or truncate to a new cutoff box."""
        if cutoff == self.cutoff:
            return self
        side = 2 * cutoff + 1
        out = np.zeros((side,) * self.dim, dtype=np.complex128)
        k = min(cutoff, self.cutoff)
        src = tuple(slice(self.cutoff - k, self.cutoff + k + 1) for _ in range(self.dim))
        dst = tuple(slice(cutoff - k, cutoff + k + 1) for _ in range(self.dim))
        out[dst] = self.coeffs[src]
        return self._like(out)

    def derivative(self, alpha):
        """Partial derivative of multi-order ``alpha``."""
        c = np.array(self.coeffs)
        m = mode_grid(self.dim, self.cutoff)
        for k, a in enumerate(alpha):
            if a:
                c = c * (2j * np.pi * m[k]) ** a
        return self._like(c)

    def real_part(self):
        return TorusField(0.5 * (self.coeffs + np.conj(_flip(self.coeffs))), True, check=False)

    def max_abs_coeff(self):
        return float(np.max(np.abs(self.coeffs)))

    def __repr__(self):
        return f"TorusField(n={self.n}, cutoff={self.cutoff}, real_valued={self.real_valued})"

    # -- serialization ----------------------------------------------------
    def to_dict(self):
        nz = np.argwhere(self.coeffs != 0)
        entries = []
        for idx in nz:  # argwhere walks C order, i.e. lexicographic in m
            m = [int(i) - self.cutoff for i in idx]
            v = self.coeffs[tuple(idx)]
            entries.append([m, float(v.real), float(v.imag)])
        return {"n": self.n, "cutoff": self.cutoff, "real_valued": self.real_valued, "entries": entries}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        n, cutoff = int(d["n"]), int(d["cutoff"])
        c = np.zeros((2 * cutoff + 1,) * (2 * n), dtype=np.complex128)
        for m, re, im in d["entries"]:
            if len(m) != 2 * n or max(abs(int(k)) for k in m) > cutoff:
                raise ValueError(f"entry {m} outside the cutoff box")
            c[tuple(int(k) + cutoff for k in m)] = complex(re, im)
        return cls(c, bool(d.get("real_valued", True)))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def random_field(rng, n, cutoff, decay=2.0, real_valued=True, zero_mean=True, scale=1.0):
    """Random field with coefficients ~ (1+|m|^2)^(-decay/2) times a Gaussian."""
    dim = 2 * n
    shape = (2 * cutoff + 1,) * dim
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c *= (1.0 + mode_norm_sq(dim, cutoff)) ** (-decay / 2.0)
    if real_valued:
        c = 0.5 * (c + np.conj(_flip(c)))
    if zero_mean:
        c[(cutoff,) * dim] = 0.0
    return TorusField(scale * c, real_valued, check=False)


# -- norms and multipliers --------------------------------------------------

def sobolev_norm(f, s):
    """( sum_m (1 + 4 pi^2 m.m)^s |f_m|^2 )^(1/2)."""
    w = sobolev_weight(f.dim, f.cutoff, s)
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def translation_phase(dim, cutoff, kappa):
    kappa = np.asarray(kappa, dtype=np.float64)
    if kappa.shape != (dim,):
        raise ValueError(f"translation vector must have length {dim}")
    m = mode_grid(dim, cutoff)
    theta = np.tensordot(kappa, m.astype(np.float64), axes=1)
    return np.exp(2j * np.pi * theta)


def apply_translation_multiplier(f, kappa):
    """f(x + kappa) as a coefficient-wise phase."""
    return f._like(f.coeffs * translation_phase(f.dim, f.cutoff, kappa))


def zeta(dim, cutoff, kappa):
    """Small divisors exp(2 pi i m.kappa) - 1 on the mode box."""
    return translation_phase(dim, cutoff, kappa) - 1.0


def zeta_at(modes, kappa):
    """Small divisors at an explicit mode list of shape (K, dim)."""
    theta = np.asarray(modes, dtype=np.float64) @ np.asarray(kappa, dtype=np.float64)
    return np.exp(2j * np.pi * theta) - 1.0


def sobolev_norm_at(modes, values, s):
    """Sobolev norm of the field whose only nonzero coefficients sit at ``modes``."""
    w = (1.0 + 4.0 * np.pi**2 * np.sum(np.asarray(modes, dtype=np.float64) ** 2, axis=1)) ** s
    return float(np.sqrt(np.sum(w * np.abs(values) ** 2)))


def coboundary_multiplier(f, which, pair, check_mean=True):
    """L_kappa f = f(. + kappa) - f with kappa the tau- or eta-embedding of ``pair``."""
    if check_mean and abs(f.mean) > 1e-14 * max(1.0, f.max_abs_coeff()):
        raise NonZeroMean(f"mean coefficient {abs(f.mean):.3e} is not zero")
    kappa = pair.embedding(which)
    return f._like(f.coeffs * zeta(f.dim, f.cutoff, kappa))


# -- smoothing ---------------------------------------------------------------

_SHAPES = ("hard", "raised-cosine", "exponential")


@dataclass(frozen=True)
class SmoothingProfile:
    t: float
    shape: str = "raised-cosine"

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown taper {self.shape!r}; choose from {_SHAPES}")
        if not self.t > 0:
            raise ValueError("smoothing scale must be positive")

    def taper(self, r):
        r = np.asarray(r, dtype=np.float64)
        lo, hi = 0.5 * self.t, self.t
        if self.shape == "hard":
            return np.where(r <= lo, 1.0, 0.0)
        u = np.clip((r - lo) / (hi - lo), 0.0, 1.0)
        if self.shape == "raised-cosine":
            return 0.5 * (1.0 + np.cos(np.pi * u))
        # C-infinity step built from exp(-1/x)
        with np.errstate(divide="ignore", over="ignore"):
            a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
            b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
        return b / (a + b)


def smoothing_apply(f, prof):
    # taper radius is |m|_inf, so t >= 2 N leaves every field on the box untouched
    w = prof.taper(np.abs(mode_grid(f.dim, f.cutoff)).max(axis=0))
    c = f.coeffs * w
    c[(f.cutoff,) * f.dim] = f.mean
    return f._like(c)


# -- evaluation, sampling, fitting --------------------------------------------

def evaluate(f, points):
    """Exact Fourier sum at one point (shape (dim,)) or many (shape (P, dim))."""
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    vals = evaluate_stack(f.coeffs[None], pts)[0]
    return complex(vals[0]) if single else vals


def evaluate_stack(coeff_stack, points):
    """Evaluate several coefficient cubes (stacked on axis 0) at the same points."""
    coeff_stack = np.asarray(coeff_stack, dtype=np.complex128)
    k = coeff_stack.shape[0]
    dim = coeff_stack.ndim - 1
    cutoff = (coeff_stack.shape[1] - 1) // 2
    flat = np.ascontiguousarray(coeff_stack.reshape(k, -1))
    return _core.nudft_eval(flat, dim, cutoff, np.ascontiguousarray(points, dtype=np.float64))


def grid_points(dim, grid):
    """Uniform grid j/G on each axis, shape (G**dim, dim), C order."""
    axes = np.indices((grid,) * dim).reshape(dim, -1).T
    return axes / float(grid)


def _embed(coeffs, grid, axes_start=0):
    """Place a coefficient cube into an FFT array of side ``grid`` (aliasing wraps)."""
    dim = coeffs.ndim - axes_start
    cutoff = (coeffs.shape[axes_start] - 1) // 2
    lead = coeffs.shape[:axes_start]
    idx = np.arange(-cutoff, cutoff + 1) % grid
    out = np.zeros(lead + (grid,) * dim, dtype=np.complex128)
    if 2 * cutoff + 1 <= grid:
        out[(Ellipsis,) + np.ix_(*([idx] * dim))] = coeffs
    else:
        np.add.at(out, (Ellipsis,) + np.ix_(*([idx] * dim)), coeffs)
    return out


def sample_stack(coeff_stack, grid, real=True):
    """Values of stacked fields on the uniform grid; leading axis kept."""
    dim = coeff_stack.ndim - 1
    arr = _embed(np.asarray(coeff_stack), grid, axes_start=1)
    vals = sfft.ifftn(arr, axes=tuple(range(1, dim + 1)), norm="forward", workers=_core.threads())
    return vals.real if real else vals


def sample(f, grid):
    """Values on the uniform grid of side ``grid`` (array of shape (grid,)*dim)."""
    if grid < 2 * f.cutoff + 1:
        warnings.warn(f"grid {grid} cannot resolve cutoff {f.cutoff}", AliasRisk, stacklevel=2)
    return sample_stack(f.coeffs[None], grid, real=f.real_valued)[0]


def fit_stack(values, cutoff, real=True):
    """Coefficient cubes of cutoff N from stacked grid samples (leading axis kept)."""
    values = np.asarray(values)
    dim = values.ndim - 1
    grid = values.shape[1]
    spec = sfft.fftn(values, axes=tuple(range(1, dim + 1)), norm="forward", workers=_core.threads())
    keep = min(cutoff, (grid - 1) // 2)
    idx = np.arange(-keep, keep + 1) % grid
    out = np.zeros((values.shape[0],) + (2 * cutoff + 1,) * dim, dtype=np.complex128)
    inner = tuple(slice(cutoff - keep, cutoff + keep + 1) for _ in range(dim))
    out[(slice(None),) + inner] = spec[(slice(None),) + np.ix_(*([idx] * dim))]
    if real:
        out = 0.5 * (out + np.conj(out[(slice(None),) + (slice(None, None, -1),) * dim]))
    return out


def fit_from_samples(values, cutoff=None, real_valued=None):
    """Forward DFT of samples on the uniform grid, truncated to ``cutoff``.

    The natural grid for cutoff N has side 2N+2; coarser grids cannot resolve
    every mode and raise an ``AliasRisk`` warning.
    """
    values = np.asarray(values)
    grid = values.shape[0]
    if cutoff is None:
        cutoff = (grid - 2) // 2
    if grid < 2 * cutoff + 2:
        warnings.warn(f"grid {grid} is marginal for cutoff {cutoff}", AliasRisk, stacklevel=2)
    if real_valued is None:
        real_valued = not np.iscomplexobj(values)
    return TorusField(fit_stack(values[None], cutoff, real_valued)[0], real_valued, check=False)


def product(f, g, cutoff=None):
    """Pointwise product; exact when ``cutoff`` >= f.cutoff + g.cutoff (the default)."""
    full = f.cutoff + g.cutoff
    cutoff = full if cutoff is None else cutoff
    grid = 2 * full + 2
    vals = sample_stack(np.stack([f.resize(full).coeffs, g.resize(full).coeffs]), grid, real=False)
    rv = f.real_valued and g.real_valued
    c = fit_stack((vals[0] * vals[1])[None], full, real=rv)[0]
    return TorusField(c, rv, check=False).resize(cutoff)


# -- derivative tables for Taylor composition -------------------------------------

@lru_cache(maxsize=32)
def multi_indices(dim, order):
    """All multi-indices of total degree <= order, graded, with 1/alpha!."""
    alphas = [a for a in iproduct(range(order + 1), repeat=dim) if sum(a) <= order]
    alphas.sort(key=lambda a: (sum(a), tuple(-x for x in a)))
    alpha = np.array(alphas, dtype=np.int64).reshape(-1, dim)
    inv_fact = np.array([1.0 / np.prod([factorial(int(x)) for x in a]) for a in alpha])
    alpha.setflags(write=False)
    inv_fact.setflags(write=False)
    return alpha, inv_fact


def derivative_samples(coeff_stack, order, grid):
    """Grid samples of every partial derivative up to ``order``.

    Returns an array (components, terms, grid**dim) ordered like ``multi_indices``.
    """
    coeff_stack = np.asarray(coeff_stack)
    comps = coeff_stack.shape[0]
    dim = coeff_stack.ndim - 1
    cutoff = (coeff_stack.shape[1] - 1) // 2
    alpha, _ = multi_indices(dim, order)
    m = mode_grid(dim, cutoff)
    pows = [[(2j * np.pi * m[k]) ** e for e in range(order + 1)] for k in range(dim)]
    out = np.empty((comps, alpha.shape[0], grid**dim))
    for a, al in enumerate(alpha):
        mult = pows[0][int(al[0])]
        for k in range(1, dim):
            mult = mult * pows[k][int(al[k])]
        out[:, a, :] = sample_stack(coeff_stack * mult, grid, real=True).reshape(comps, -1)
    return out


def taylor_order(coeff_stack, disp_bound, tol=1e-17):
    """Smallest order K whose Taylor remainder bound is below ``tol`` times the data size.

    The remainder for mode m is bounded by the exponential tail of x_m = 2 pi |m|_1 d.
    """
    coeff_stack = np.asarray(coeff_stack)
    dim = coeff_stack.ndim - 1
    cutoff = (coeff_stack.shape[1] - 1) // 2
    mag = np.sum(np.abs(coeff_stack), axis=0)
    total = float(np.sum(mag))
    if total == 0.0 or disp_bound == 0.0:
        return 0
    l1 = np.sum(np.abs(mode_grid(dim, cutoff)), axis=0).astype(np.float64)
    x = 2.0 * np.pi * l1 * disp_bound
    growth = np.exp(x)
    term = np.ones_like(x)
    for k in range(0, 40):
        term = term * x / (k + 1)  # x^(k+1) / (k+1)!
        # sum_{j > k} x^j / j! <= e^x x^(k+1) / (k+1)!
        if float(np.sum(mag * term * growth)) <= tol * total:
            return k
    return 40
