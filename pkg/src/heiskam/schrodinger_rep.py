"""Cohomological equations in the Schrodinger representations (parameter h = 1).

Functions live on a uniform periodic grid over the box [-L, L)^n in rotated
coordinates z, where the first generator acts by translation along z_1 by tau
and the second by the multiplier exp(i nu_2 z_2).  Fields are assumed to
decay to negligible size at the box boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from . import _core
from .errors import (CompatibilityViolation, DegeneratePair, DegenerateProjection,
                     NotACochain, NotInAnnihilator, ResolutionExceeded)

ANN_TOL = 1e-9
SERIES_TOL = 1e-14


# -- grid fields -------------------------------------------------------------------

@lru_cache(maxsize=16)
def grid_axis(L, P):
    z = -L + (2.0 * L / P) * np.arange(P)
    z.setflags(write=False)
    return z


@lru_cache(maxsize=16)
def freq_axis(L, P):
    """Frequencies (cycles per unit) matching numpy FFT ordering."""
    w = sfft.fftfreq(P, d=2.0 * L / P)
    w.setflags(write=False)
    return w


@dataclass(frozen=True)
class GridField:
    samples: np.ndarray
    L: float = 20.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if len(set(s.shape)) != 1:
            raise ValueError("grid must have the same number of points on every axis")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n(self):
        return self.samples.ndim

    @property
    def P(self):
        return self.samples.shape[0]

    @property
    def dz(self):
        return 2.0 * self.L / self.P

    def axis(self):
        return grid_axis(self.L, self.P)

    def mesh(self):
        return np.meshgrid(*([self.axis()] * self.n), indexing="ij")

    @classmethod
    def from_function(cls, fn, n=2, L=20.0, P=512):
        return cls(fn(*np.meshgrid(*([grid_axis(L, P)] * n), indexing="ij")), L)

    def like(self, samples):
        return GridField(samples, self.L)

    def __add__(self, other):
        return self.like(self.samples + other.samples)

    def __sub__(self, other):
        return self.like(self.samples - other.samples)

    def __mul__(self, s):
        return self.like(self.samples * s)

    __rmul__ = __mul__

    def l2(self):
        return float(np.sqrt(np.sum(np.abs(self.samples) ** 2) * self.dz**self.n))

    def boundary_ratio(self):
        """max |f| on the outermost shell of grid cells over max |f|."""
        a = np.abs(self.samples)
        top = a.max()
        if top == 0:
            return 0.0
        shell = 0.0
        for k in range(self.n):
            idx = [slice(None)] * self.n
            for j in (0, -1):
                idx[k] = j
                shell = max(shell, float(a[tuple(idx)].max()))
        return shell / top

    def to_bytes(self):
        """Little-endian float64, real and imaginary parts interleaved, C order."""
        return np.ascontiguousarray(self.samples).view(np.float64).astype("<f8").tobytes()

    def header(self):
        return {"n": self.n, "L": self.L, "P": self.P}

    @classmethod
    def from_bytes(cls, raw, header):
        n, P, L = int(header["n"]), int(header["P"]), float(header["L"])
        data = np.frombuffer(raw, dtype="<f8")
        if data.size != 2 * P**n:
            raise ValueError(f"expected {2 * P**n} doubles, found {data.size}")
        return cls(data.view(np.complex128).reshape((P,) * n), L)


def _fft(a, axis):
    return sfft.fft(a, axis=axis, workers=_core.threads())


def _ifft(a, axis):
    return sfft.ifft(a, axis=axis, workers=_core.threads())


def _bcast(v, n, axis):
    shape = [1] * n
    shape[axis] = -1
    return np.reshape(v, shape)


# -- frame -----------------------------------------------------------------------------

@dataclass(frozen=True)
class RotatedFrame:
    A: np.ndarray
    tau: float
    nu2: float
    rep_parameter: int = 1

    @property
    def n(self):
        return self.A.shape[0]


def build_frame(pair):
    """Rotation with first row tau/|tau| and second row +-eta/|eta|, det = 1."""
    t = np.asarray(pair.tau_vec, dtype=np.float64)
    e = np.asarray(pair.eta_vec, dtype=np.float64)
    n = t.size
    if n < 2:
        raise DegeneratePair("need n >= 2")
    rows = [t / np.linalg.norm(t), e / np.linalg.norm(e)]
    if abs(np.dot(rows[0], rows[1])) > 1e-12:
        raise DegeneratePair("tau and eta are not orthogonal")
    for k in range(n):
        if len(rows) == n:
            break
        v = np.eye(n)[k]
        for r in rows:
            v = v - np.dot(v, r) * r
        if np.linalg.norm(v) > 1e-8:
            rows.append(v / np.linalg.norm(v))
    if len(rows) != n:
        raise DegeneratePair("tau and eta do not span a 2-plane")
    A = np.array(rows)
    if np.linalg.det(A) < 0:
        A[-1] = -A[-1]  # for n = 2 this flips the eta row, which fixes the sign of nu_2
    tau = float(A[0] @ t)
    nu2 = float(A[1] @ e)
    return RotatedFrame(A, tau, nu2)


# -- the two coboundary operators ------------------------------------------------------

def translate(f, shift, axis=0):
    """f(z + shift e_axis) by Fourier phase shift (periodic on the box)."""
    w = _bcast(freq_axis(f.L, f.P), f.n, axis)
    return f.like(_ifft(_fft(f.samples, axis) * np.exp(2j * np.pi * w * shift), axis))


def translate_open(f, shift, axis=0):
    """f(z + shift e_axis) with zero outside the box (no wrap-around).

    The shift is split into whole cells (moved with zero fill) and a
    sub-cell remainder applied as a Fourier phase.
    """
    k = int(np.round(shift / f.dz))
    frac = shift - k * f.dz
    g = translate(f, frac, axis).samples if frac != 0.0 else f.samples
    out = np.zeros_like(g)
    P = f.P
    if abs(k) < P:
        src = [slice(None)] * f.n
        dst = [slice(None)] * f.n
        if k >= 0:
            src[axis], dst[axis] = slice(k, P), slice(0, P - k)
        else:
            src[axis], dst[axis] = slice(0, P + k), slice(-k, P)
        out[tuple(dst)] = g[tuple(src)]
    return f.like(out)


def L_tau_apply(f, frame):
    """f(z - tau e_1) - f(z)."""
    return translate(f, -frame.tau, 0) - f


def eta_multiplier(f, frame):
    z2 = _bcast(f.axis(), f.n, 1)
    return np.exp(1j * frame.nu2 * z2) - 1.0


def L_eta_apply(f, frame):
    """(exp(i nu_2 z_2) - 1) f(z)."""
    return f.like(eta_multiplier(f, frame) * f.samples)


# -- invariant distributions ---------------------------------------------------------

def nyquist_m(f, frame):
    """Largest |m| whose frequency m/tau is resolved by the grid."""
    return int(np.floor(frame.tau / (2.0 * f.dz) - 1e-9))


def _phase_matrix(z, freqs, dz):
    return np.exp(-2j * np.pi * np.outer(freqs, z)) * dz


def pi_all(f, ms, frame):
    """pi_{m,tau} f for every m in ``ms``: quadrature of F_1 f at m/tau, shape (len(ms), P, ...)."""
    ms = np.asarray(ms)
    E = _phase_matrix(f.axis(), ms / frame.tau, f.dz)
    return np.tensordot(E, f.samples, axes=(1, 0))


def pi_m_tau(f, m, frame):
    return pi_all(f, [m], frame)[0]


def pi_norms(f, ms, frame):
    """L^2 norms over the remaining variables of each pi_{m,tau} f."""
    vals = pi_all(f, ms, frame)
    axes = tuple(range(1, vals.ndim))
    return np.sqrt(np.sum(np.abs(vals) ** 2, axis=axes) * f.dz ** (f.n - 1))


# -- bump profile and the projection R ------------------------------------------------

def default_hat_psi(tau):
    def hat(w):
        w = np.asarray(w, dtype=np.float64)
        u = (2.0 * tau * w) ** 2
        out = np.zeros_like(w)
        inside = u < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside]))
        return out
    return hat


@dataclass(frozen=True)
class BumpProfile:
    tau: float
    hat_psi: object                # callable on frequencies
    psi_samples: np.ndarray        # inverse transform on the z_1 grid
    L: float
    P: int
    label: str = "default"

    @property
    def support(self):
        return 0.5 / self.tau


def inverse_transform_of(hat, tau, z, nodes=4001):
    """psi(z) = int hat(w) exp(2 pi i w z) dw over the support, trapezoid rule.

    hat and all its derivatives vanish at the ends, so the rule converges
    faster than any power of the node spacing.
    """
    a = 0.5 / tau
    w = np.linspace(-a, a, nodes)
    dw = w[1] - w[0]
    weights = hat(w) * dw
    out = np.empty(z.size, dtype=np.complex128)
    step = 256
    for lo in range(0, z.size, step):
        out[lo:lo + step] = np.exp(2j * np.pi * np.outer(z[lo:lo + step], w)) @ weights
    return out


def gauss_sinc2_samples(tau, z, width):
    """sinc^2(z/tau) exp(-z^2 / 2 width^2), normalized to unit integral.

    Zero at every nonzero multiple of tau, with Gaussian tails; its spectrum
    is not compactly supported, which the dual solve in R_psi_apply absorbs.
    """
    psi = np.sinc(z / tau) ** 2 * np.exp(-0.5 * (z / width) ** 2)
    return (psi / (psi.sum() * (z[1] - z[0]))).astype(np.complex128)


def build_bump(frame, L=20.0, P=512, hat=None, label="default", shape="compact", width=None):
    """Bump profile on the z_1 grid.

    shape="compact": psi-hat compactly supported in (-1/2tau, 1/2tau), psi-hat(0) = 1.
    shape="gauss-sinc2": Gaussian-tailed profile whose Hermite expansion fits the grid.
    """
    z = np.asarray(grid_axis(L, P))
    if shape == "gauss-sinc2":
        width = 1.5 * frame.tau if width is None else width
        psi = gauss_sinc2_samples(frame.tau, z, width)
        psi.setflags(write=False)
        return BumpProfile(frame.tau, None, psi, L, P, label if label != "default" else "gauss-sinc2")
    if shape != "compact":
        raise ValueError(f"unknown bump shape {shape!r}")
    hat = default_hat_psi(frame.tau) if hat is None else hat
    norm = float(hat(np.array([0.0]))[0])
    hat_n = (lambda w, h=hat, c=norm: h(w) / c) if norm != 1.0 else hat
    psi = inverse_transform_of(hat_n, frame.tau, z)
    psi.setflags(write=False)
    return BumpProfile(frame.tau, hat_n, psi, L, P, label)


def perturb_bump(bump, frame):
    """Another admissible profile of the same kind, with a different shape."""
    if bump.hat_psi is None:
        z = np.asarray(grid_axis(bump.L, bump.P))
        width = 1.25 * 1.5 * frame.tau
        psi = gauss_sinc2_samples(frame.tau, z, width)
        psi.setflags(write=False)
        return BumpProfile(frame.tau, None, psi, bump.L, bump.P, bump.label + "+perturbed")
    base = bump.hat_psi
    tau = frame.tau

    def hat(w):
        w = np.asarray(w, dtype=np.float64)
        return base(w) * (1.0 + 0.5 * (2.0 * tau * w) ** 2)

    return build_bump(frame, bump.L, bump.P, hat, label=bump.label + "+perturbed")


def _dual_coefficients(f, bump, frame, ms):
    """Coefficients d with pi_m (f - sum_k Pi_k d_k) = 0 for every m in ms.

    On the infinite line pi_m Pi_k = delta_mk exactly; on the box the
    truncated tails of psi leave a small coupling, which is inverted here so
    that the projection annihilates the sampled distributions exactly.
    """
    z = f.axis()
    diff = (ms[:, None] - ms[None, :]) / frame.tau
    Ez = np.exp(-2j * np.pi * diff[..., None] * z[None, None, :])
    coupling = (Ez * bump.psi_samples[None, None, :]).sum(axis=-1) * f.dz
    c = pi_all(f, ms, frame)
    shp = c.shape
    d = np.linalg.solve(coupling, c.reshape(len(ms), -1))
    return d.reshape(shp)


def _apply_Pi(f, bump, frame, ms, d):
    z = f.axis()
    prof = np.exp(2j * np.pi * np.outer(ms, z) / frame.tau) * bump.psi_samples[None, :]
    return np.tensordot(prof, d, axes=(0, 0))  # (P, rest...)


def R_psi_apply(f, bump, frame, ms=None, return_bump=False, retry=True):
    """f - sum_m Pi_m pi_m f, the projection onto functions killed by every pi_{m,tau}.

    A degenerate result (R f = 0 for nonzero f) triggers one retry with a
    perturbed bump; a second failure raises DegenerateProjection.
    """
    if ms is None:
        M = nyquist_m(f, frame)
        ms = np.arange(-M, M + 1)
    ms = np.asarray(ms)
    d = _dual_coefficients(f, bump, frame, ms)
    out = f.like(f.samples - _apply_Pi(f, bump, frame, ms, d))
    norm = f.l2()
    if norm > 0 and out.l2() <= 1e-12 * norm:
        if not retry:
            raise DegenerateProjection("projection annihilates the input")
        bump = perturb_bump(bump, frame)
        return R_psi_apply(f, bump, frame, ms, return_bump, retry=False)
    return (out, bump) if return_bump else out


def obstruction_part(f, bump, frame, ms=None):
    """sum_m Pi_m pi_m f, i.e. f - R_psi f."""
    return f - R_psi_apply(f, bump, frame, ms)


# -- solving L_tau P = f -------------------------------------------------------------------

def check_ann_tau(f, frame, tol=ANN_TOL):
    M = nyquist_m(f, frame)
    ms = np.arange(-M, M + 1)
    worst = float(pi_norms(f, ms, frame).max()) if f.l2() > 0 else 0.0
    if worst > tol * f.l2():
        raise NotInAnnihilator(f"max |pi_m f| = {worst:.3e} exceeds {tol:g} * |f|")
    return worst


def _shift_series(f, frame, sign):
    """sum over m of f(z_1 + sign m tau); forward uses m >= 1, backward m >= 0."""
    total = np.zeros_like(f.samples)
    norm = max(f.l2(), 1e-300)
    m = 1 if sign > 0 else 0
    while True:
        term = translate_open(f, sign * m * frame.tau, 0)
        tn = term.l2()
        total += term.samples
        if tn <= SERIES_TOL * norm and m > 0:
            break
        m += 1
        if m * frame.tau > 4 * f.L:
            break
    return total


def solve_L_tau(f, frame, check=True):
    """P = sum_{m >= 1} f(z_1 + m tau, z_2, ...)."""
    if check:
        check_ann_tau(f, frame)
    return f.like(_shift_series(f, frame, +1))


def solve_L_tau_backward(f, frame):
    """P = -sum_{m >= 0} f(z_1 - m tau, ...), equal to the forward series on the annihilator."""
    return f.like(-_shift_series(f, frame, -1))


# -- solving L_eta P = f -----------------------------------------------------------------

def eta_zeros(f, frame):
    """Zero hyperplanes z_2 = 2 pi k / nu_2 inside the box."""
    step = 2.0 * np.pi / abs(frame.nu2)
    k = np.arange(np.ceil(-f.L / step), np.floor(f.L / step) + 1)
    return k * step


def interpolate_axis(f, points, axis=1):
    """Band-limited (trigonometric) interpolation of f at off-grid positions along one axis."""
    z = f.axis()
    w = freq_axis(f.L, f.P)
    spec = _fft(f.samples, axis) / f.P
    # trig interpolant sum_k spec_k exp(2 pi i w_k (x - z_0)), Nyquist term split evenly
    ph = np.exp(2j * np.pi * np.outer(np.asarray(points) - z[0], w))
    if f.P % 2 == 0:
        ny = f.P // 2
        ph[:, ny] = np.cos(2 * np.pi * np.abs(w[ny]) * (np.asarray(points) - z[0]))
    moved = np.moveaxis(spec, axis, 0)
    vals = np.tensordot(ph, moved, axes=(1, 0))
    return np.moveaxis(vals, 0, axis)


def check_ann_eta(f, frame, tol=ANN_TOL):
    zs = eta_zeros(f, frame)
    top = float(np.abs(f.samples).max())
    if top == 0:
        return 0.0
    worst = float(np.abs(interpolate_axis(f, zs, 1)).max()) if zs.size else 0.0
    if worst > tol * top:
        raise NotInAnnihilator(f"f is {worst:.3e} on the zero set of the eta multiplier")
    return worst


def _guard_mask(f, frame, width=1.0):
    z2 = f.axis()
    zs = eta_zeros(f, frame)
    if zs.size == 0:
        return np.zeros(f.P, dtype=bool)
    dist = np.min(np.abs(z2[:, None] - zs[None, :]), axis=1)
    return dist < width * f.dz


def solve_L_eta_division(f, frame):
    """Pointwise f / (exp(i nu_2 z_2) - 1); unreliable right at the zero hyperplanes."""
    mult = eta_multiplier(f, frame)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(np.abs(mult) > 0, f.samples / np.where(mult == 0, 1.0, mult), 0.0)
    return f.like(q)


def solve_L_eta_fourier(f, frame):
    """Fourier-side series: hat P(w) = sum_{m >= 1} hat f(w + m nu_2 / 2 pi) along z_2.

    Shifting hat f by an off-grid amount is a modulation of f, so each term is
    one FFT; terms whose shifted frequency leaves the resolved band are dropped.
    """
    sigma = frame.nu2 / (2.0 * np.pi)
    z2 = _bcast(f.axis(), f.n, 1)
    w = _bcast(freq_axis(f.L, f.P), f.n, 1)
    nyq = 0.5 / f.dz
    terms = int(np.ceil(2 * nyq / abs(sigma))) + 1
    acc = np.zeros_like(f.samples)
    for m in range(1, terms + 1):
        shifted = _fft(f.samples * np.exp(-2j * np.pi * m * sigma * z2), 1)
        keep = np.abs(w + m * sigma) < nyq
        acc += np.where(keep, shifted, 0.0)
    return f.like(_ifft(acc, 1))


def solve_L_eta(f, frame, check=True):
    """P = f / (exp(i nu_2 z_2) - 1), with the Fourier branch within one cell of each zero."""
    if check:
        check_ann_eta(f, frame)
    div = solve_L_eta_division(f, frame).samples
    guard = _bcast(_guard_mask(f, frame), f.n, 1)
    if np.any(guard):
        four = solve_L_eta_fourier(f, frame).samples
        div = np.where(guard, four, div)
    return f.like(div)


# -- composite solvers -------------------------------------------------------------------

def _rel(a, b):
    nb = b.l2()
    return a.l2() / nb if nb > 0 else a.l2()


@dataclass(frozen=True)
class TransferResult:
    P: GridField
    residual_tau: float
    residual_eta: float


def transfer_solve(f, g, frame, tol=1e-9):
    """P with L_tau P = f and L_eta P = g for a compatible pair."""
    scale = f.l2() + g.l2()
    if scale == 0:
        z = f.like(np.zeros_like(f.samples))
        return TransferResult(z, 0.0, 0.0)
    defect = (L_tau_apply(g, frame) - L_eta_apply(f, frame)).l2()
    if defect > tol * scale:
        raise CompatibilityViolation(f"L_tau g - L_eta f has norm {defect:.3e}")
    if f.l2() > 0:
        check_ann_tau(f, frame)
        P = solve_L_tau(f, frame, check=False)
    else:
        P = solve_L_eta(g, frame)
    rt = _rel(L_tau_apply(P, frame) - f, f)
    re = _rel(L_eta_apply(P, frame) - g, g)
    return TransferResult(P, rt, re)


def eta_bump(z, frame):
    """Profile equal to 1 at 0 and vanishing at every other zero of the eta multiplier."""
    period = 2.0 * np.pi / abs(frame.nu2)
    return np.exp(-0.5 * (z / period) ** 2) * np.sinc(z / period) ** 2


def R_eta_apply(g, frame):
    """Mirror projection: subtract local profiles so the result vanishes on the zero set."""
    zs = eta_zeros(g, frame)
    if zs.size == 0:
        return g
    vals = interpolate_axis(g, zs, 1)  # shape with axis 1 replaced by the zeros
    z2 = g.axis()
    prof = eta_bump(z2[None, :] - zs[:, None], frame)  # (zeros, P)
    moved = np.moveaxis(vals, 1, 0)  # (zeros, P, rest...)
    corr = np.tensordot(prof, moved, axes=(0, 0))  # (P_z2, P_z1, rest...)
    corr = np.moveaxis(corr, 0, 1)
    return g.like(g.samples - corr)


@dataclass(frozen=True)
class InfiniteSplit:
    P: GridField
    f_res: GridField
    g_res: GridField
    branch: str
    bump_label: str
    ratios: dict = field(default_factory=dict)


def loss_exponent(n, eps=0.01):
    return 2.5 * n + 1.0 + eps


def split_infinite(f, g, phi, frame, bump, s_values=(0, 1), tol=1e-9):
    """(f, g) = (L_tau P, L_eta P) + (f_res, g_res) with residuals driven by phi."""
    scale = f.l2() + g.l2() + phi.l2()
    defect = (L_eta_apply(f, frame) - L_tau_apply(g, frame) - phi).l2()
    if scale > 0 and defect > tol * scale:
        raise NotACochain(f"L_eta f - L_tau g - phi has norm {defect:.3e}")
    if f.l2() > 0:
        Rf, used = R_psi_apply(f, bump, frame, return_bump=True)
        P = solve_L_tau(Rf, frame, check=False)
        branch, label = "tau", used.label
    elif g.l2() > 0:
        P = solve_L_eta(R_eta_apply(g, frame), frame, check=False)
        branch, label = "eta", "eta-profile"
    else:
        P = f.like(np.zeros_like(f.samples))
        branch, label = "zero", bump.label
    f_res = f - L_tau_apply(P, frame)
    g_res = g - L_eta_apply(P, frame)
    sigma = loss_exponent(f.n)
    noise = 1e-12 * scale
    ratios = {}
    for s in s_values:
        den = box_norm(phi, s + sigma, noise) if phi.l2() > noise else 0.0
        ratios[s] = (box_norm(f_res, s, noise) / den if den else 0.0,
                     box_norm(g_res, s, noise) / den if den else 0.0)
    return InfiniteSplit(P, f_res, g_res, branch, label, ratios)


# -- harmonic-oscillator norms --------------------------------------------------------------

def hermite_functions(z, K):
    """Normalized Hermite functions h_0..h_{K-1} on the points z, shape (K, len(z))."""
    z = np.asarray(z, dtype=np.float64)
    H = np.empty((K, z.size))
    H[0] = np.pi**-0.25 * np.exp(-0.5 * z**2)
    if K > 1:
        H[1] = np.sqrt(2.0) * z * H[0]
    for k in range(1, K - 1):
        H[k + 1] = np.sqrt(2.0 / (k + 1)) * z * H[k] - np.sqrt(k / (k + 1)) * H[k - 1]
    return H


def resolvable_levels(L, P, margin=4.0):
    """Number of Hermite levels per axis whose turning point and frequency fit the grid."""
    dz = 2.0 * L / P
    reach = min(L, np.pi / dz) - margin
    return max(1, int(np.floor((reach**2 - 1.0) / 2.0)) + 1)


@lru_cache(maxsize=8)
def _hermite_table(L, P):
    K = resolvable_levels(L, P)
    H = hermite_functions(grid_axis(L, P), K)
    H.setflags(write=False)
    return H


def hermite_coefficients(f):
    H = _hermite_table(f.L, f.P) * f.dz
    c = f.samples
    for _ in range(f.n):
        # contract the leading axis and rotate it to the back
        c = np.tensordot(c, H, axes=(0, 1))
    return c  # axes k_1..k_n


def box_norm(f, s, atol=0.0):
    """<(I + sum z_i^2 - d^2/dz_i^2)^s f, f>^(1/2) from the Hermite expansion.

    Energy outside the resolvable levels raises ResolutionExceeded unless it is
    below atol (L^2); a field entirely below atol is treated as rounding noise
    and its resolved part is reported.
    """
    c = hermite_coefficients(f)
    K = c.shape[0]
    levels = np.zeros(c.shape)
    for k in range(f.n):
        levels = levels + _bcast(np.arange(K), f.n, k)
    eig = 1.0 + f.n + 2.0 * levels
    energy = np.abs(c) ** 2
    total = f.l2() ** 2
    if total == 0:
        return 0.0
    weighted = eig**s * energy
    if total <= atol**2:
        return float(np.sqrt(weighted.sum()))
    if total - energy.sum() > max(1e-8 * total, atol**2):
        raise ResolutionExceeded("field has energy beyond the resolvable Hermite levels")
    top = np.max(np.stack([_bcast(np.arange(K), f.n, k) * np.ones(c.shape) for k in range(f.n)]), axis=0)
    tail = weighted[top >= int(0.9 * K)].sum()
    if tail > 1e-6 * weighted.sum():
        raise ResolutionExceeded(f"order-{s} weight sits in the top Hermite levels")
    return float(np.sqrt(weighted.sum()))


def box_apply(f):
    """(I + sum z_i^2 - d^2/dz_i^2) f with spectral second derivatives."""
    out = f.samples.copy()
    z = f.axis()
    w = freq_axis(f.L, f.P)
    for k in range(f.n):
        out += _bcast(z**2, f.n, k) * f.samples
        lap = _ifft(_fft(f.samples, k) * _bcast((2 * np.pi * w) ** 2, f.n, k), k)
        out += lap
    return f.like(out)
