"""Frequency data for the commuting translations: orthogonality, Diophantine
constants certified by exhaustive lattice search, and small-divisor tables."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import _core
from .errors import DegeneratePair, DiophantineFailure, InputError, NotOrthogonal
from .lattice_fourier import mode_grid, mode_norm_sq, zeta

ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class FrequencyPair:
    """tau_vec, eta_vec in R^n with tau_vec . eta_vec = 0 and certified constants.

    ``c`` is the smaller of the two per-vector constants; each is the minimum
    of |kappa . m - p| |m_block . m_block|^gamma over 0 < |m_block|_inf <= search_bound.
    Because the other block of m does not move kappa . m, the same search also
    certifies the variant weighted by |m . m|^gamma with the same constant.
    """

    tau_vec: np.ndarray
    eta_vec: np.ndarray
    gamma: float
    c: float
    search_bound: int
    gamma_eta: float | None = None
    c_tau: float = 0.0
    c_eta: float = 0.0
    worst: dict = field(default_factory=dict)

    @property
    def n(self):
        return int(self.tau_vec.size)

    @property
    def tau(self):
        return float(np.linalg.norm(self.tau_vec))

    @property
    def eta_norm(self):
        return float(np.linalg.norm(self.eta_vec))

    def exponent(self, which):
        if which == "eta" and self.gamma_eta is not None:
            return self.gamma_eta
        return self.gamma

    def embedding(self, which):
        """Translation vector on T^{2n}: (tau_vec, 0) or (0, eta_vec)."""
        z = np.zeros(self.n)
        if which == "tau":
            return np.concatenate([self.tau_vec, z])
        if which == "eta":
            return np.concatenate([z, self.eta_vec])
        raise ValueError(f"unknown generator {which!r}")

    def to_dict(self):
        return {
            "tau": [float(v) for v in self.tau_vec],
            "eta": [float(v) for v in self.eta_vec],
            "gamma": self.gamma,
            "gamma_eta": self.gamma_eta,
            "c": self.c,
            "c_tau": self.c_tau,
            "c_eta": self.c_eta,
            "search_bound": self.search_bound,
            "worst": self.worst,
        }


def parse_real(token):
    """Parse a number or a symbolic token like 'sqrt2', '-sqrt(3)', '2*sqrt5', '1/3'."""
    if isinstance(token, (int, float)):
        return float(token)
    t = str(token).strip().replace(" ", "")
    m = re.fullmatch(r"([+-]?)(?:(\d+(?:\.\d*)?)\*?)?sqrt\(?(\d+(?:\.\d*)?)\)?", t)
    if m:
        sign = -1.0 if m.group(1) == "-" else 1.0
        coef = float(m.group(2)) if m.group(2) else 1.0
        return sign * coef * float(np.sqrt(float(m.group(3))))
    m = re.fullmatch(r"([+-]?\d+)/(\d+)", t)
    if m:
        return int(m.group(1)) / int(m.group(2))
    try:
        return float(t)
    except ValueError:
        raise InputError(f"cannot parse real number {token!r}") from None


def parse_vector(text):
    if isinstance(text, (list, tuple, np.ndarray)):
        return np.array([parse_real(v) for v in text], dtype=np.float64)
    return np.array([parse_real(v) for v in str(text).split(",") if v.strip()], dtype=np.float64)


def certify(kappa, gamma, bound):
    """(c, worst_m, worst_p, min_distance) for one frequency vector.

    Raises DiophantineFailure on an exact resonance |kappa . m - p| ~ 0.
    """
    kappa = np.ascontiguousarray(kappa, dtype=np.float64)
    val, m, p = _core.lattice_min(kappa, float(gamma), int(bound))
    m = np.asarray(m, dtype=np.int64)
    dist = abs(float(np.dot(kappa, m)) - p)
    # rounding in kappa . m is about eps * |kappa|_1 * bound
    noise = 64 * np.finfo(float).eps * float(np.sum(np.abs(kappa))) * bound
    if dist <= noise or val <= 0:
        raise DiophantineFailure(
            f"exact resonance: kappa.m - p = {dist:.3e} at m = {m.tolist()}, p = {p}")
    return float(val), m.tolist(), int(p), dist


def make_pair(tau_vec, eta_vec, gamma=1.5, search_bound=200, gamma_eta=None):
    tau_vec = np.asarray(tau_vec, dtype=np.float64).copy()
    eta_vec = np.asarray(eta_vec, dtype=np.float64).copy()
    if tau_vec.shape != eta_vec.shape or tau_vec.ndim != 1:
        raise DegeneratePair("tau and eta must be vectors of the same length")
    nt, ne = np.linalg.norm(tau_vec), np.linalg.norm(eta_vec)
    if nt == 0 or ne == 0:
        raise DegeneratePair("frequency vectors must be nonzero")
    dot = float(np.dot(tau_vec, eta_vec))
    if abs(dot) > ORTHO_TOL * nt * ne:
        raise NotOrthogonal(f"tau.eta = {dot:.3e}")
    if dot != 0.0:
        eta_vec = eta_vec - (dot / nt**2) * tau_vec
    if not gamma > 0 or (gamma_eta is not None and not gamma_eta > 0):
        raise InputError("Diophantine exponent must be positive")
    c_tau, m_tau, p_tau, _ = certify(tau_vec, gamma, search_bound)
    ge = gamma if gamma_eta is None else gamma_eta
    c_eta, m_eta, p_eta, _ = certify(eta_vec, ge, search_bound)
    worst = {"tau": {"m": m_tau, "p": p_tau, "c": c_tau}, "eta": {"m": m_eta, "p": p_eta, "c": c_eta}}
    return FrequencyPair(tau_vec, eta_vec, float(gamma), min(c_tau, c_eta), int(search_bound),
                         None if gamma_eta is None else float(gamma_eta), c_tau, c_eta, worst)


def default_pair(search_bound=200):
    """tau = (sqrt2, sqrt3), eta = (sqrt3, -sqrt2), gamma = 1.5."""
    s2, s3 = np.sqrt(2.0), np.sqrt(3.0)
    return make_pair([s2, s3], [s3, -s2], 1.5, search_bound)


@dataclass(frozen=True)
class DivisorTable:
    kappa: str
    cutoff: int
    zeta: np.ndarray          # exp(2 pi i m.kappa) - 1 on the mode box
    inv_mag: np.ndarray       # 1/|zeta|, inf where zeta vanishes
    vanishing: np.ndarray     # boolean mask of the vanishing stratum
    bound_constant: float     # C with 1/|zeta| <= C (1 + 4 pi^2 m.m)^gamma off the stratum

    def stats(self):
        finite = self.inv_mag[~self.vanishing]
        return {
            "kappa": self.kappa,
            "cutoff": self.cutoff,
            "vanishing_count": int(self.vanishing.sum()),
            "max_inverse": float(finite.max()) if finite.size else 0.0,
            "bound_constant": self.bound_constant,
        }


def block_nonzero(n, cutoff, which):
    """Mask of modes whose tau block (first n coordinates) or eta block is nonzero."""
    m = mode_grid(2 * n, cutoff)
    blk = m[:n] if which == "tau" else m[n:]
    return np.any(blk != 0, axis=0)


def small_divisor_table(pair, kappa, cutoff):
    if cutoff > pair.search_bound:
        raise InputError(f"pair certified only up to {pair.search_bound} < cutoff {cutoff}")
    dim = 2 * pair.n
    z = zeta(dim, cutoff, pair.embedding(kappa))
    vanishing = ~block_nonzero(pair.n, cutoff, kappa)
    with np.errstate(divide="ignore"):
        inv = np.where(vanishing, np.inf, 1.0 / np.abs(z))
    g = pair.exponent(kappa)
    c_k = pair.c_tau if kappa == "tau" else pair.c_eta
    # |exp(i t) - 1| >= 2|t|/pi on |t| <= pi gives 1/|zeta| < |m_b.m_b|^g / (4 c)
    bound = 1.0 / (4.0 * c_k)
    w = (1.0 + 4.0 * np.pi**2 * mode_norm_sq(dim, cutoff)) ** g
    ratio = np.where(vanishing, 0.0, inv / w)
    if np.any(ratio > bound * (1 + 1e-12)):
        raise DiophantineFailure("divisor table violates the certified bound")
    return DivisorTable(kappa, cutoff, z, inv, vanishing, bound)


def smallest_divisors(pair, which, cutoff, count):
    """The ``count`` block vectors b (0 < |b|_inf <= cutoff) with the smallest
    |exp(2 pi i b.kappa) - 1|, kappa = tau_vec or eta_vec, smallest first."""
    kappa = pair.tau_vec if which == "tau" else pair.eta_vec
    side = 2 * cutoff + 1
    b = (np.indices((side,) * pair.n).reshape(pair.n, -1) - cutoff).T
    b = b[np.any(b != 0, axis=1)]
    mag = np.abs(np.exp(2j * np.pi * (b @ kappa)) - 1.0)
    order = np.argsort(mag, kind="stable")[:count]
    return b[order]

