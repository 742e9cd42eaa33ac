"""Successive conjugation scheme driving a perturbed family of Z^2 actions back to the model.

A family is a map lambda -> (F_1^lambda, F_2^lambda) of perturbation fields,
lambda ranging over a chart of the constraint manifold of constant
perturbations.  Every family handled here is stored as a base family (the
algebraic family, or any user-supplied one) conjugated by one accumulated
map, so evaluating it at a new lambda costs one conjugation per generator.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (NewtonDiverged, NoConvergence, OutOfBall, StencilTooCoarse,
                     StepInadmissible)
from .heis_dynamics import (ALIAS_TOL, Conjugator, PerturbedMap, TorusClassVectorField,
                            compose_fields, d1, group_mul, invert_points, split_vf)
from .lattice_fourier import SmoothingProfile, evaluate_stack, random_field, smoothing_apply
from .torus_cohomology import (FamilyParameter, chart_indices, constant_cocycle_space,
                               model_generator, reduce_conjugacy)


@dataclass(frozen=True)
class KamConfig:
    r0: int = 3
    r: int = 12
    t0: float = 8.0
    rho: float = 1.4
    eps_target: float = 1e-10
    max_iters: int = 10
    newton_tol: float = 1e-15
    newton_max: int = 12
    lambda_ball_radius: float = 1e-2
    stencil_step: float = 1e-4           # relative to the ball radius
    C_bar: float = 1e3
    cutoff: int = 4
    grid: int | None = None              # default 2N+2
    method: str = "taylor"
    smoothing_shape: str = "raised-cosine"
    alias_tol: float | None = ALIAS_TOL
    err_C: float = 1.0                   # constants in the Err formula
    err_C_r: float = 1.0
    err_C_r0: float = 1.0
    verify_points: int = 2000
    verify_seed: int = 12345

    @property
    def sobolev_margin(self):
        # Sobolev order standing in for C^0 on T^4: s -> s + n + 1 with n = 2
        return 3

    def eps_order(self, n=2):
        return n + 1

    def delta_order(self, n=2):
        return self.r0 + self.r + n + 1

    def t(self, k):
        return self.t0 * self.rho**k

    def admissibility(self, t, eps, delta):
        p = self.r + self.r0
        if eps <= 0:
            return 0.0
        return t**self.r0 * eps ** (1.0 - 1.0 / p) * max(delta, 0.0) ** (1.0 / p)

    def err_bound(self, t, eps, delta):
        """Predicted size of the next perturbation from the five-term error formula."""
        r, r0 = self.r, self.r0
        p = r0 + r
        return (self.err_C * eps**2
                + self.err_C * delta ** ((r0 + 1) / p) * eps ** (2 - (r0 + 1) / p)
                + self.err_C_r * t ** (-r) * delta
                + self.err_C_r0 * t ** (2 * r0) * eps ** (2 - 1 / p) * delta ** (1 / p)
                + self.err_C_r0 * t ** (2 * r0) * eps ** (3 - 1 / p) * delta ** (2 / p))

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        bad = set(d) - known
        if bad:
            raise ValueError(f"unknown KAM config keys: {sorted(bad)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


# -- families -----------------------------------------------------------------------------

def algebraic_base(lam, pair):
    """Constant perturbation fields of the algebraic family member lambda."""
    return lam.values


class PerturbationFamily:
    """lambda -> fields of h^-1 o b_i^lambda o h, with b^lambda from ``base`` and h from ``H``.

    ``base(lam, pair)`` returns either a (2, 2n+1) array of constants or a pair
    of TorusClassVectorFields.  ``H`` = None means no conjugation.
    """

    def __init__(self, pair, base=algebraic_base, H=None, cutoff=4, grid=None,
                 method="taylor", alias_tol=ALIAS_TOL, label="family"):
        self.pair = pair
        self.base = base
        self.cutoff = cutoff
        self.grid = grid
        self.method = method
        self.alias_tol = alias_tol
        self.label = label
        self.H = None if H is None else H.resize(cutoff)
        self._conj = None if self.H is None else Conjugator(self.H, cutoff, grid, method, alias_tol)
        self._cache = {}

    def conjugated(self, Hn):
        """Family conjugated further by h_n: exponent of h o h_n."""
        if self.H is None:
            newH = Hn.resize(self.cutoff)
        else:
            newH = compose_fields(self.H, Hn, self.method, self.grid, self.alias_tol)
        return PerturbationFamily(self.pair, self.base, newH, self.cutoff, self.grid,
                                  self.method, self.alias_tol, self.label)

    def base_fields(self, lam):
        b = self.base(lam, self.pair)
        if isinstance(b, tuple):
            return tuple(f.resize(self.cutoff) for f in b)
        b = np.asarray(b, dtype=np.float64).reshape(2, -1)
        return tuple(TorusClassVectorField.constant(b[i], self.cutoff) for i in range(2))

    def fields(self, lam):
        key = lam.values.tobytes()
        if key in self._cache:
            return self._cache[key]
        out = []
        for i, F in zip((1, 2), self.base_fields(lam)):
            fmap = PerturbedMap(i, model_generator(self.pair, i), F)
            out.append(fmap.F if self._conj is None else self._conj.apply(fmap).F)
        out = tuple(out)
        if len(self._cache) > 256:
            self._cache.clear()
        self._cache[key] = out
        return out


def manufactured_seed(pair, eps0=1e-3, cutoff=4, seed=0, shift=None, order=3, method="taylor",
                      grid=None, alias_tol=ALIAS_TOL):
    """Algebraic family conjugated by a random h*, scaled so the fields at lambda = 0
    have Sobolev-``order`` size eps0.

    h* has zero-mean components built from the modes 0 < |m|_inf <= 1.  With
    ``shift`` (chart coordinates) the base family is translated, so its
    parameter zero moves away from the origin.  Returns (family, H*).
    """
    rng = np.random.default_rng(seed)
    n = pair.n
    comps = [random_field(rng, n, 1, decay=0.0, zero_mean=True).resize(cutoff) for _ in range(2 * n + 1)]
    Hs = TorusClassVectorField.from_components(comps)
    a, b = d1(Hs, pair)
    lin = max(a.norm(order), b.norm(order))
    Hs = Hs * (eps0 / lin)
    if shift is None:
        base = algebraic_base
    else:
        shift = np.asarray(shift, dtype=np.float64)

        def base(lam, pair, _s=shift):
            return FamilyParameter.from_chart(lam.chart_coords() + _s, pair).values

    fam = PerturbationFamily(pair, base, Hs, cutoff, grid, method, alias_tol, "manufactured")
    return fam, Hs


def obstructed_family(pair, value=1e-3, cutoff=4):
    """Negative control: the X_1 coefficient of F_1 is frozen at ``value`` whatever lambda is.

    Every member still satisfies the commutation relation, but the average map
    can never vanish, so no member is conjugate to the model.
    """
    n = pair.n

    def base(lam, pair, _v=value):
        c = lam.chart_coords().copy()
        c[0] = _v
        return FamilyParameter.from_chart(c, pair).values

    return PerturbationFamily(pair, base, None, cutoff, label="obstructed")


# -- norms and the average map ------------------------------------------------------------------

def _field_norm(pair_of_fields, s):
    return max(F.norm(s) for F in pair_of_fields)


def _chart_point(c, pair):
    return FamilyParameter.from_chart(c, pair)


def family_norms(fam, r, k, center=None, h=1e-6, check=True):
    """||.||_{r,k}: sup over the stencil around ``center`` of the order-k lambda-derivative norms.

    Derivatives are central differences with spacing h in each chart
    coordinate; StencilTooCoarse is raised when halving h changes a nonzero
    estimate by more than 25%.
    """
    pair = fam.pair
    d = len(chart_indices(pair.n))
    c0 = np.zeros(d) if center is None else np.asarray(center, dtype=np.float64)

    def at(c):
        return fam.fields(_chart_point(c, pair))

    if k == 0:
        vals = [_field_norm(at(c0), r)]
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            vals += [_field_norm(at(c0 + e), r), _field_norm(at(c0 - e), r)]
        return max(vals)

    def estimate(step):
        out = 0.0
        base = at(c0)
        for j in range(d):
            e = np.zeros(d)
            e[j] = step
            p, m = at(c0 + e), at(c0 - e)
            for i in range(2):
                if k == 1:
                    diff = (p[i] - m[i]) * (1.0 / (2 * step))
                elif k == 2:
                    diff = (p[i] - 2.0 * base[i] + m[i]) * (1.0 / step**2)
                else:
                    raise ValueError("k must be 0, 1 or 2")
                out = max(out, diff.norm(r))
        return out

    coarse = estimate(h)
    if not check:
        return coarse
    fine = estimate(h / 2)
    scale = max(coarse, fine)
    # second differences bottom out at rounding level eps * |F| / h^2
    noise = 1e-15 * max(_field_norm(at(c0), r), 1e-300) / h**k
    if scale > 10 * noise and abs(coarse - fine) > 0.25 * scale:
        raise StencilTooCoarse(f"lambda-derivative estimates {coarse:.3e} and {fine:.3e} disagree")
    return fine


def average_vector(fields):
    return np.concatenate([fields[0].average().to_array(), fields[1].average().to_array()])


@dataclass
class NewtonResult:
    lam: FamilyParameter
    residual: float
    iterations: int
    jacobian_cond: float
    K: float


def solve_parameter(fam, start=None, config=KamConfig()):
    """Zero of lambda -> (cocycle coordinates of the averages) by chord Newton.

    The Jacobian comes from central differences on 2d+1 stencil nodes around
    ``start``; the same nodes give the second-derivative bound K.
    """
    pair = fam.pair
    n = pair.n
    B = constant_cocycle_space(pair).matrix      # (2(2n+1), 9)
    d = B.shape[1]
    c = np.zeros(d) if start is None else start.chart_coords().astype(np.float64)
    R = config.lambda_ball_radius
    h = config.stencil_step * R

    def phi_and_fields(cc):
        f = fam.fields(_chart_point(cc, pair))
        return B.T @ average_vector(f), f

    r0, f0 = phi_and_fields(c)
    if np.linalg.norm(r0) <= config.newton_tol:
        return NewtonResult(_chart_point(c, pair), float(np.linalg.norm(r0)), 0, 1.0, 0.0)
    J = np.empty((d, d))
    K = 0.0
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        rp, fp = phi_and_fields(c + e)
        rm, fm = phi_and_fields(c - e)
        J[:, j] = (rp - rm) / (2 * h)
        for i in range(2):
            K = max(K, ((fp[i] - 2.0 * f0[i] + fm[i]) * (1.0 / h**2)).norm(config.eps_order(n)))
    cond = float(np.linalg.cond(J))
    if not np.isfinite(cond) or cond > 1e12:
        raise NewtonDiverged(f"average map is singular (condition {cond:.3e})")
    res = float(np.linalg.norm(r0))
    r = r0
    for it in range(1, config.newton_max + 1):
        step = np.linalg.solve(J, -r)
        damp = 1.0
        while True:
            trial = c + damp * step
            if np.linalg.norm(trial) > R:
                if damp < 1e-3:
                    raise OutOfBall(f"parameter left the ball of radius {R}")
                damp *= 0.5
                continue
            rt, _ = phi_and_fields(trial)
            if np.linalg.norm(rt) < res or np.linalg.norm(rt) <= config.newton_tol:
                break
            damp *= 0.5
            if damp < 1e-3:
                raise NewtonDiverged(f"no decrease of the average map from {res:.3e}")
        c, r, res = trial, rt, float(np.linalg.norm(rt))
        if res <= config.newton_tol:
            return NewtonResult(_chart_point(c, pair), res, it, cond, K)
    raise NewtonDiverged(f"residual {res:.3e} after {config.newton_max} iterations")


# -- the iteration ----------------------------------------------------------------------------------

@dataclass
class StepRecord:
    n: int
    t: float
    eps: float
    delta_r: float
    K: float
    lam: list
    err_pred: float
    err_obs: float
    residual: float
    admissibility: float
    H_norm: float = 0.0
    C_a: float = 0.0        # ||H_n||_r / (t^{2 r0} ||F||_r)
    C_c: float = 0.0        # delta_{n+1} / (t^{2 r0} delta_n), filled on the next record
    newton_iters: int = 0
    alias: float = 0.0


@dataclass
class KamTrace:
    records: list = field(default_factory=list)
    converged: bool = False
    final_residual: float = float("nan")

    def eps(self):
        return [r.eps for r in self.records]

    CSV_VERSION = "heiskam-kam-trace/1"

    def csv_rows(self, d=9):
        head = (["n", "t", "eps", "delta_r", "K"] + [f"lambda{j}" for j in range(d)]
                + ["err_pred", "err_obs", "residual", "admissibility", "C_a", "C_c"])
        rows = [head]
        for r in self.records:
            rows.append([r.n, r.t, r.eps, r.delta_r, r.K] + list(r.lam)
                        + [r.err_pred, r.err_obs, r.residual, r.admissibility, r.C_a, r.C_c])
        return rows


@dataclass
class KamState:
    family: PerturbationFamily
    lam: FamilyParameter
    H_acc: TorusClassVectorField | None
    n: int = 0
    K: float = 0.0


def _measure(fields, config, n):
    eps = _field_norm(fields, config.eps_order(n))
    delta = _field_norm(fields, config.delta_order(n))
    return eps, delta


def iterative_step(state, config=KamConfig(), trace=None):
    """One conjugation step followed by the parameter re-solve; returns the new state."""
    fam, pair = state.family, state.family.pair
    n = pair.n
    k = state.n
    t = config.t(k)
    fields = fam.fields(state.lam)
    eps, delta = _measure(fields, config, n)
    adm = config.admissibility(t, eps, delta)
    if not adm < config.C_bar:
        raise StepInadmissible(f"step {k}: admissibility {adm:.3e} >= {config.C_bar:g}", trace)
    prof = SmoothingProfile(t, config.smoothing_shape)
    sm = []
    for F in fields:
        comps = [smoothing_apply(c, prof) for c in F.components()]
        Fs = TorusClassVectorField.from_components(comps)
        avg = Fs.average().to_array()
        avg[:2 * n] = 0.0
        sm.append(Fs.with_average(avg))
    sp = split_vf(sm[0], sm[1], pair, s_values=())
    Hn = sp.H
    new_fam = fam.conjugated(Hn)
    H_acc = Hn if state.H_acc is None else compose_fields(state.H_acc, Hn, config.method,
                                                         config.grid, config.alias_tol)
    sol = solve_parameter(new_fam, state.lam, config)
    rs = config.r + config.sobolev_margin
    f_r = max(F.norm(rs) for F in fields)
    info = {"H_norm": Hn.norm(config.eps_order(n)),
            "C_a": Hn.norm(rs) / (t ** (2 * config.r0) * f_r) if f_r > 0 else 0.0,
            "newton_iters": sol.iterations, "K": sol.K, "adm": adm, "eps": eps, "delta": delta, "t": t}
    return KamState(new_fam, sol.lam, H_acc, k + 1, sol.K), info


def verify_conjugacy(H, fam0, lam, config=KamConfig(), points=None):
    """max over i and sample points of |log((h o y_i)(p)^-1 . (y~_i^lam o h)(p))|.

    y~ is the original family, applied pointwise in group coordinates: when
    it is stored as a conjugate of its base family the inverse of that
    conjugacy is computed by a fixed point at each point.
    """
    pair = fam0.pair
    n = pair.n
    if points is None:
        rng = np.random.default_rng(config.verify_seed)
        x = rng.random((2 * n, config.verify_points))
        points = np.vstack([x, rng.uniform(-1, 1, (1, x.shape[1]))])
    p = np.asarray(points, dtype=np.float64)
    zero = TorusClassVectorField.zeros(n, fam0.cutoff)
    hmap = PerturbedMap(0, model_generator(pair, 1) * 0.0, zero if H is None else H)
    base = fam0.base_fields(lam)
    worst = 0.0
    for i in (1, 2):
        Y = model_generator(pair, i)
        ymap = PerturbedMap(i, Y, zero)
        lhs = hmap.apply(ymap.apply(p))
        q = hmap.apply(p)
        bmap = PerturbedMap(i, Y, base[i - 1])
        if fam0.H is None:
            rhs = bmap.apply(q)
        else:
            s = PerturbedMap(0, Y * 0.0, fam0.H)
            rhs = invert_points(fam0.H, bmap.apply(s.apply(q)))
        diff = group_mul(-lhs, rhs)
        worst = max(worst, float(np.abs(diff).max()))
    return worst


def run(fam, config=KamConfig(), start=None, log=None):
    """Iterate until eps_n <= eps_target; returns (H_total, lambda_bar, trace).

    H_total is the exponent of the accumulated conjugacy h = h_0 o h_1 o ...,
    with h^-1 o y~_i^lambda_bar o h close to the model generators.
    """
    pair = fam.pair
    n = pair.n
    trace = KamTrace()
    try:
        sol = solve_parameter(fam, start, config)
    except NoConvergence as exc:
        exc.trace = trace
        raise
    state = KamState(fam, sol.lam, None, 0, sol.K)
    prev = None
    for k in range(config.max_iters + 1):
        fields = state.family.fields(state.lam)
        eps, delta = _measure(fields, config, n)
        resid = verify_conjugacy(state.H_acc, fam, state.lam, config)
        t = config.t(k)
        rec = StepRecord(k, t, eps, delta, state.K, [float(v) for v in state.lam.chart_coords()],
                         float("nan"), eps, resid, config.admissibility(t, eps, delta))
        if prev is not None:
            rec.err_pred = config.err_bound(prev.t, prev.eps, prev.delta_r)
            rec.C_c = delta / (prev.t ** (2 * config.r0) * prev.delta_r) if prev.delta_r > 0 else 0.0
        trace.records.append(rec)
        if log is not None:
            log(rec)
        if eps <= config.eps_target:
            trace.converged = True
            trace.final_residual = resid
            return state.H_acc, state.lam, trace
        if k == config.max_iters:
            break
        try:
            state, info = iterative_step(state, config, trace)
        except (StepInadmissible, NoConvergence) as exc:
            exc.trace = trace
            raise
        rec.H_norm = info["H_norm"]
        rec.C_a = info["C_a"]
        rec.newton_iters = info["newton_iters"]
        prev = rec
    raise NoConvergence(f"eps = {trace.records[-1].eps:.3e} after {config.max_iters} steps", trace)


def lambda_bar_class(lam, pair):
    """Canonical representative of lambda-bar modulo constant conjugacies."""
    return reduce_conjugacy(lam, pair)[0]
