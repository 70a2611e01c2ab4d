"""Trust-funnel local search on interpolation surrogates.

The search works on the slack form ``z(x) - s = 0`` of a grey-box problem.
Each iteration computes a normal step reducing the linearized violation and a
tangent step reducing a quadratic model of the objective in the null space of
the model Jacobian. A funnel bound ``vmax`` on ``v = 0.5||z(x) - s||^2``
decides whether a step is judged by optimality or by feasibility. Variables
that come close to their bounds are fixed and the search recurses into the
corresponding subspace.

Inside the search, variables with a finite box are mapped affinely onto
``[0, 1]`` so that a single trust-region radius suits every coordinate.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (BudgetExhausted, ConfigError, DegenerateBox, IllConditioned,
                     InfeasibleStationary, ProjectionFailure)
from .interp import (LagrangeBasis, ModelVariant, build_initial_sample_set,
                     p_max_for, quadratic_parts, repair_sample_set, update_interpolation_set)
from .problem import WHITE_BOX, EvaluationLedger, SlackProblem, cv_of, violation
from .subsolvers import (Multipliers, NullspaceBoxProjector, blls_solve, estimate_multipliers,
                         lp_solve, spg_solve)

_log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-4


@dataclass
class FunnelParams:
    """Constants of the local search.

    Attributes mirror the usual trust-funnel notation: ``eta1 < eta2`` are the
    acceptance thresholds, ``gamma1 < 1 < gamma2`` the radius factors,
    ``kappa_*`` the step-quality constants and ``eps`` the stopping tolerance.
    ``nu_max`` defaults to ``20 n``. ``delta0`` is measured in the internal
    coordinates, where every finite box has unit width. With
    ``scale_constraints`` each black-box constraint row is divided by
    ``max(1, |J_i|_inf)`` of the first model Jacobian; feasibility tests still
    use the unscaled violation.
    """

    eps: float = 1e-4
    eps0: float = 1e-2
    eta1: float = 1e-4
    eta2: float = 0.9
    eta3: float = 0.6
    gamma1: float = 0.5
    gamma2: float = 2.0
    nu_max: Optional[int] = None
    kappa_n: float = 100.0
    kappa_r: float = 0.9
    kappa_delta: float = 0.01
    kappa_zs: float = 2.0
    kappa_zn: float = 0.1
    kappa_tx1: float = 0.9
    kappa_tx2: float = 0.5
    kappa_za: float = 100.0
    kappa_zr: float = 2.0
    alpha: float = 0.1
    beta: float = 1.0
    eps_b: float = 1e-4
    delta0: float = 1.0
    delta_max: float = 1e5
    lam: float = 100.0
    xi: float = 0.5
    eps_mu: float = 1e-3
    scale_constraints: bool = True
    zeta: float = 1.0
    whichmodel: int = 2
    sample_mode: str = "simplex"
    degree: str = "plin"
    soc: bool = True
    scale_variables: bool = True
    projection: str = "auto"
    lp_threshold: float = 1e-10
    max_iter: Optional[int] = None

    def validate(self):
        if self.whichmodel not in (1, 2, 3, 4):
            raise ConfigError(f"whichmodel must be 1, 2, 3 or 4, got {self.whichmodel}")
        if not 0 < self.eta1 < self.eta2 < 1:
            raise ConfigError("need 0 < eta1 < eta2 < 1")
        if not 0 < self.gamma1 < 1 < self.gamma2:
            raise ConfigError("need 0 < gamma1 < 1 < gamma2")
        if self.delta0 <= 0 or self.delta0 > self.delta_max:
            raise ConfigError("need 0 < delta0 <= delta_max")
        if not 0 <= self.kappa_r <= 1:
            raise ConfigError("kappa_r must lie in [0, 1]")
        if self.kappa_zs <= 1 or not 0 < self.kappa_delta < 1:
            raise ConfigError("need kappa_zs > 1 and 0 < kappa_delta < 1")
        if not (0 < self.kappa_tx1 < 1 and 0 < self.kappa_tx2 < 1):
            raise ConfigError("kappa_tx1 and kappa_tx2 must lie in (0, 1)")
        if self.kappa_zr <= 1 or self.kappa_za <= 0:
            raise ConfigError("need kappa_za > 0 and kappa_zr > 1")
        if self.lam <= 1:
            raise ConfigError("lam must exceed 1")
        if self.sample_mode not in ("simplex", "random"):
            raise ConfigError(f"unknown sample mode {self.sample_mode!r}")
        if self.degree not in ("plin", "pdiag", "pquad"):
            raise ConfigError(f"unknown degree {self.degree!r}")
        if self.projection not in ("auto", "ldp", "newton", "dykstra"):
            raise ConfigError(f"unknown projection {self.projection!r}")
        return self

    @classmethod
    def feasibility_first(cls, **kw):
        """Parameters favouring feasibility (no tangent step while infeasible)."""
        kw.setdefault("kappa_r", 0.0)
        return cls(**kw)


@dataclass
class LocalMinimumRecord:
    """Outcome of one local search.

    Attributes
    ----------
    x : ndarray
        Best point found (least violation first, then objective).
    f, cv : float
    multipliers : Multipliers or None
        Last multiplier estimate, in the coordinates of the search.
    evaluations : int
        Black-box calls charged by the search.
    converged : bool
        True when a criticality test ended the search.
    status : str
        ``"converged"``, ``"budget"``, ``"infeasible-stationary"`` or
        ``"iteration-cap"``.
    pi_f : float
        Last optimality measure.
    start : ndarray or None
    trace : list of dict or None
    """

    x: np.ndarray
    f: float
    cv: float
    multipliers: Optional[Multipliers] = None
    evaluations: int = 0
    converged: bool = False
    status: str = "converged"
    pi_f: float = math.nan
    start: Optional[np.ndarray] = None
    trace: Optional[list] = field(default=None, repr=False)

    @property
    def feasible(self):
        return self.cv <= FEASIBILITY_TOL

    def to_dict(self):
        out = {"x": np.asarray(self.x).tolist(), "f": self.f, "cv": self.cv,
               "evaluations": self.evaluations, "converged": self.converged,
               "status": self.status, "pi_f": self.pi_f}
        if self.multipliers is not None:
            out["multipliers"] = {k: np.asarray(v).tolist() for k, v in self.multipliers._asdict().items()}
        return out


@dataclass
class FunnelState:
    """Mutable state of one level of the search.

    ``x`` is in the reduced coordinates of the level, ``s`` is the full slack.
    """

    x: np.ndarray
    s: np.ndarray
    delta_f: float
    delta_z: float
    vmax: float
    mu: np.ndarray
    eps_i: float
    theta: Optional[np.ndarray] = None
    pi_f_prev: float = math.inf
    d_prev: float = math.inf
    nu_f: int = 0
    nu_z: int = 0
    multipliers: Optional[Multipliers] = None

    @property
    def delta(self):
        return min(self.delta_f, self.delta_z)


class _Space:
    """Affine view of a coordinate subspace.

    Free variables with a finite box are mapped onto ``[0, 1]``; the others
    keep their units. Fixed variables take their values from ``base``. Exact
    full-space coordinates of points entering from outside are memoized so
    that round trips never change a cached point.
    """

    def __init__(self, prob, free, base, scaled=True):
        self.prob = prob
        self.free = np.asarray(free, dtype=int)
        self.base = np.array(base, dtype=float)
        lx, ux = prob.lx[self.free], prob.ux[self.free]
        fin = np.isfinite(lx) & np.isfinite(ux) & bool(scaled)
        self.lx, self.ux = lx, ux
        self.off = np.where(fin, lx, 0.0)
        self.w = np.where(fin, ux - lx, 1.0)
        self.lo = np.where(fin, 0.0, lx)
        self.hi = np.where(fin, 1.0, ux)
        self.scaled = scaled
        self.fixed_lo = frozenset()
        self.fixed_hi = frozenset()
        self._memo = {}

    @property
    def dim(self):
        return self.free.size

    def to_full(self, u):
        u = np.asarray(u, dtype=float)
        hit = self._memo.get(u.tobytes())
        if hit is not None:
            return hit
        x = self.base.copy()
        x[self.free] = np.clip(self.off + self.w * u, self.lx, self.ux)
        return x

    def reduce(self, x):
        x = np.asarray(x, dtype=float)
        u = np.clip((x[self.free] - self.off) / self.w, self.lo, self.hi)
        self._memo[u.tobytes()] = x.copy()
        return u

    def restrict(self, keep, lower, upper, x_full):
        """Child space keeping the free variables flagged in ``keep``.

        ``lower`` and ``upper`` flag the variables newly fixed near each bound.
        """
        child = _Space(self.prob, self.free[keep], x_full, self.scaled)
        child.fixed_lo = self.fixed_lo | frozenset(self.free[lower].tolist())
        child.fixed_hi = self.fixed_hi | frozenset(self.free[upper].tolist())
        return child


@dataclass
class _Models:
    basis: LagrangeBasis
    f: float
    z: np.ndarray
    g: np.ndarray
    Hf: np.ndarray
    J: np.ndarray
    Hz: np.ndarray


class _Converged(Exception):
    pass


def _inf_norm(v):
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


def omega_t(t):
    """Bounding function used to decide whether a tangent step is worthwhile."""
    return 0.01 * min(1.0, t)


class _Search:
    """One local search: shared bookkeeping across subspace levels."""

    def __init__(self, prob, ledger, params, rng, trace, callback):
        self.prob = prob
        self.sp = SlackProblem(prob)
        self.m = self.sp.m
        self.cs = np.ones(self.m)
        self.ls, self.us = self.sp.ls, self.sp.us
        self.ledger = ledger
        self.p = params
        self.rng = rng
        self.variant = ModelVariant(params.whichmodel)
        self.trace = [] if trace else None
        self.callback = callback
        self.explored = set()
        self.best = None
        self.best_key = None
        self.iterations = 0
        self.max_iter = params.max_iter or 200 * (prob.n + 1) + 2000
        self.nu_max = params.nu_max if params.nu_max is not None else 20 * prob.n
        self.multipliers = None
        self.pi_f = math.nan
        self.converged = False
        self.tangent_note = "skipped"

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, space, u):
        ev = self.ledger.evaluate(self.prob, space.to_full(u))
        cv = cv_of(ev.z, self.sp.ls, self.sp.us)
        key = (cv > FEASIBILITY_TOL, cv if cv > FEASIBILITY_TOL else 0.0, ev.f)
        if self.best is None or key < self.best_key:
            self.best, self.best_key = ev, key
        return ev

    def set_constraint_scale(self, cs):
        """Work with ``cs * z`` internally; ``cs`` stays fixed for the whole search."""
        self.cs = np.asarray(cs, dtype=float)
        self.ls, self.us = self.sp.ls * self.cs, self.sp.us * self.cs

    def zs(self, ev):
        return ev.z * self.cs

    def raw_norm(self, zk):
        """Norm of a scaled constraint residual in the problem's own units."""
        return float(np.linalg.norm(zk / self.cs)) if self.m else 0.0

    def row(self, space, u):
        ev = self.evaluate(space, u)
        return np.concatenate([[ev.f], self.zs(ev)])

    def _evaluator(self, space):
        return lambda u: self.row(space, u)

    def emit(self, rec):
        if self.trace is not None:
            self.trace.append(rec)
        if self.callback is not None:
            self.callback(rec)

    # -- sample sets and models ---------------------------------------------

    def fill(self, space, Y):
        rows = np.array([self.row(space, y) for y in Y.points])
        return Y.with_values(rows)

    def initial_set(self, space, x, radius, degree=None):
        p_max = p_max_for(space.dim, self.variant)
        try:
            Y = build_initial_sample_set(x, radius, self.p.sample_mode, degree or self.p.degree,
                                         space.lo, space.hi, self.rng, self.variant,
                                         self.p.lam, p_max)
        except DegenerateBox:
            Y = build_initial_sample_set(x, max(radius, 1e-3), "simplex", "plin",
                                         space.lo, space.hi, self.rng, self.variant,
                                         self.p.lam, p_max)
        return self.fill(space, Y)

    def repair(self, space, Y, center, radius):
        before = Y
        try:
            Y, nrep = repair_sample_set(Y, center, radius, self.p.lam, self._evaluator(space),
                                        space.lo, space.hi, self.variant)
        except IllConditioned:
            Y = self.initial_set(space, center, radius, "plin")
            nrep = Y.size
        return Y, nrep > 0 or not Y.same_as(before)

    def models(self, space, Y):
        try:
            basis = LagrangeBasis(Y.points, Y.x_k, self.variant)
        except IllConditioned:
            radius = max(Y.radius(), 1e-6)
            Y, _ = self.repair(space, Y, Y.x_k, radius)
            basis = LagrangeBasis(Y.points, Y.x_k, self.variant)
        A = basis.coefficients(Y.values)
        G, H = quadratic_parts(A, space.dim, basis.scale)
        ev = self.evaluate(space, Y.x_k)
        x = ev.x
        g = G[0].copy()
        if self.prob.f_kind == WHITE_BOX:
            g = np.asarray(self.prob.f_grad(x), dtype=float)[space.free] * space.w
        J = G[1:].copy()
        if self.prob.nh:
            Jh = np.atleast_2d(np.asarray(self.prob.h_jac(x), dtype=float))
            J[self.prob.q:] = Jh[:, space.free] * space.w * self.cs[self.prob.q:, None]
        return Y, _Models(basis, ev.f, self.zs(ev), g, H[0], J, H[1:])

    # -- measures -----------------------------------------------------------

    def _boxes(self, space, x, s):
        lo = np.concatenate([space.lo - x, self.ls - s])
        hi = np.concatenate([space.hi - x, self.us - s])
        return np.minimum(lo, 0.0), np.maximum(hi, 0.0)

    def _jfull(self, M):
        return np.hstack([M.J, -np.eye(self.m)])

    def pi_f_measure(self, space, x, s, M, gN):
        lo, hi = self._boxes(space, x, s)
        r = lp_solve(gN, self._jfull(M) if self.m else None, np.maximum(lo, -1.0), np.minimum(hi, 1.0))
        return max(-float(gN @ r.x), 0.0)

    def pi_v_measure(self, space, x, s, M):
        zk = M.z - s
        c = self._jfull(M).T @ zk
        lo, hi = self._boxes(space, x, s)
        r = lp_solve(c, None, np.maximum(lo, -1.0), np.minimum(hi, 1.0))
        return max(-float(c @ r.x), 0.0), float(np.linalg.norm(c))

    def hessian(self, M, mu):
        B = M.Hf.copy()
        if self.m:
            B += np.tensordot(mu, M.Hz, axes=1)
        return B

    def initial_pi_f(self, space, st, M):
        g = np.concatenate([M.g, np.zeros(self.m)])
        return self.pi_f_measure(space, st.x, st.s, M, g)

    # -- the level loop -----------------------------------------------------

    def run_level(self, space, Y, st, depth):
        """Iterate on ``space`` until convergence; returns the final state and set."""
        full = depth == 0
        Y, M = self.models(space, Y)
        st.pi_f_prev = self.initial_pi_f(space, st, M)
        null_streak = 0
        while True:
            self.iterations += 1
            if self.iterations > self.max_iter:
                raise StopIteration
            # subspace minimization
            out = self.subspace_step(space, Y, st, M, depth)
            if out == "return":
                return st, Y
            if out is not None:
                Y, M = out
            # criticality
            try:
                Y, M = self.criticality_step(space, Y, st, M, full)
            except _Converged:
                self.converged = True
                return st, Y
            # normal and tangent steps
            zk = M.z - st.s
            znorm = float(np.linalg.norm(zk))
            nvec = self.normal_step(space, st, M, zk, znorm)
            tvec, pi_f, dft, dfn = self.tangent_step(space, st, M, nvec, znorm)
            if pi_f is not None:
                st.pi_f_prev = pi_f
                self.pi_f = pi_f
            d = nvec + tvec
            Y, M, changed, kind = self.conclude(space, Y, st, M, nvec, tvec, d, dft, dfn, zk, depth)
            if np.any(d):
                # a null step carries no information about stationarity
                st.d_prev = _inf_norm(d)
            if kind == "mu" and not changed:
                null_streak += 1
                if not full and null_streak >= 2:
                    self.converged = True
                    return st, Y
                if full and null_streak >= 2:
                    # nothing moves: shrink until the radius test stops the search
                    st.delta_f *= self.p.gamma1
                    st.delta_z *= self.p.gamma1
            else:
                null_streak = 0

    def subspace_step(self, space, Y, st, M, depth):
        p = self.p
        x_full = self.evaluate(space, st.x).x
        f = space.free
        lx, ux = self.prob.lx[f], self.prob.ux[f]
        xf = x_full[f]
        # an infinite bound is never active (inf <= inf would say otherwise)
        near_lo = np.isfinite(lx) & (xf - lx <= p.eps_b * (1.0 + np.abs(lx)))
        near_hi = np.isfinite(ux) & (ux - xf <= p.eps_b * (1.0 + np.abs(ux)))
        if not (np.any(near_lo) or np.any(near_hi)):
            return None
        near_hi &= ~near_lo
        key = (space.fixed_lo | frozenset(f[near_lo].tolist()),
               space.fixed_hi | frozenset(f[near_hi].tolist()))
        if key in self.explored:
            st.delta_f *= p.gamma1
            st.delta_z *= p.gamma1
            Y, changed = self.repair(space, Y, st.x, st.delta)
            if changed:
                Y, M = self.models(space, Y)
            self.emit({"level": depth, "type": "subspace-revisit", "delta_f": st.delta_f,
                       "delta_z": st.delta_z, "bb_calls": self.ledger.bb_calls})
            return Y, M
        self.explored.add(key)
        keep = ~(near_lo | near_hi)
        if np.any(keep):
            child = space.restrict(keep, near_lo, near_hi, x_full)
            u0 = child.reduce(x_full)
            cst = FunnelState(x=u0, s=st.s.copy(), delta_f=st.delta_f, delta_z=st.delta_z,
                              vmax=st.vmax, mu=st.mu.copy(), eps_i=p.eps0)
            radius = min(st.delta, 1.0) if child.scaled else st.delta
            Z = self.initial_set(child, u0, radius, "plin")
            self.emit({"level": depth + 1, "type": "subspace-enter", "dim": child.dim,
                       "bb_calls": self.ledger.bb_calls})
            try:
                self.run_level(child, Z, cst, depth + 1)
            except InfeasibleStationary:
                # the face may hold no feasible point; the parent moves on
                self.emit({"level": depth + 1, "type": "subspace-infeasible",
                           "bb_calls": self.ledger.bb_calls})
            x_star = self.evaluate(child, cst.x).x
            s_star = cst.s
            st.vmax = min(st.vmax, cst.vmax)
            st.mu = cst.mu if cst.mu.size == st.mu.size else st.mu
        else:
            x_star, s_star = x_full, st.s
        if depth > 0:
            st.x = space.reduce(x_star)
            st.s = s_star
            return "return"
        st.x = space.reduce(x_star)
        st.s = s_star
        radius = p.eps * max(1.0, _inf_norm(st.x))
        Y = self.initial_set(space, st.x, radius, "plin")
        Y, M = self.models(space, Y)
        st.pi_f_prev = self.initial_pi_f(space, st, M)
        # keep the funnel invariant for the lifted iterate
        st.vmax = max(st.vmax, violation(M.z, st.s))
        return Y, M

    def criticality_step(self, space, Y, st, M, full):
        p = self.p
        # slacks keep raw units while x is scaled, so only x sets the scale
        nx = max(1.0, float(np.linalg.norm(st.x)))
        znorm = float(np.linalg.norm(M.z - st.s))
        zraw = self.raw_norm(M.z - st.s)
        if not full:
            if st.delta <= p.eps * nx:
                raise _Converged
            if zraw <= p.eps and st.pi_f_prev <= p.eps:
                raise _Converged
            return Y, M
        if st.delta <= p.eps * nx or st.d_prev <= p.eps * nx:
            raise _Converged
        pi_hat = st.pi_f_prev
        new_model = False
        while zraw <= st.eps_i and pi_hat <= st.eps_i:
            st.eps_i = max(p.alpha * zraw, p.alpha * pi_hat, p.eps)
            Y, changed = self.repair(space, Y, st.x, st.eps_i)
            if changed:
                Y, M = self.models(space, Y)
                pi_hat = self.initial_pi_f(space, st, M)
                new_model = True
                znorm = float(np.linalg.norm(M.z - st.s))
                zraw = self.raw_norm(M.z - st.s)
            if zraw <= p.eps and pi_hat <= p.eps:
                st.pi_f_prev = pi_hat
                raise _Converged
            if not changed and st.eps_i <= p.eps:
                break
        if new_model:
            st.pi_f_prev = pi_hat
            radius = min(p.beta * max(znorm, pi_hat), p.delta_max)
            if radius > 0:
                st.delta_f = st.delta_z = radius
            st.theta = st.x.copy()
        return Y, M

    def normal_step(self, space, st, M, zk, znorm):
        p = self.p
        N = space.dim + self.m
        if self.m == 0 or self.raw_norm(zk) <= p.eps:
            return np.zeros(N)
        pi_v, cnorm = self.pi_v_measure(space, st.x, st.s, M)
        if pi_v <= 1e-14 * (1.0 + cnorm):
            raise InfeasibleStationary(f"infeasible stationary point, ||z - s|| = {znorm:.3e}")
        r = min(st.delta, p.kappa_n * znorm)
        lo, hi = self._boxes(space, st.x, st.s)
        res = blls_solve(self._jfull(M), -zk, np.maximum(lo, -r), np.minimum(hi, r))
        return np.clip(res.x, np.maximum(lo, -r), np.minimum(hi, r))

    def tangent_step(self, space, st, M, nvec, znorm):
        """Returns ``(t, pi_f, dft, dfn)``; ``pi_f`` is None when not computed."""
        p = self.p
        n = space.dim
        N = n + self.m
        zero = np.zeros(N)
        self.tangent_note = "skipped"
        if _inf_norm(nvec) > p.kappa_r * st.delta:
            self.tangent_note = "normal-too-long"
            return zero, None, 0.0, 0.0
        Bx = self.hessian(M, st.mu)
        g = np.concatenate([M.g, np.zeros(self.m)])
        Bn = np.concatenate([Bx @ nvec[:n], np.zeros(self.m)])
        gN = g + Bn
        xs = np.concatenate([st.x, st.s]) + nvec
        xs_x, xs_s = xs[:n], xs[n:]
        tol_x = 1e-12 * (1.0 + np.abs(space.hi - space.lo))
        mults = estimate_multipliers(gN, M.J, xs_x - space.lo <= tol_x, space.hi - xs_x <= tol_x,
                                     xs_s - self.ls <= 1e-12 * (1 + np.abs(self.ls)),
                                     self.us - xs_s <= 1e-12 * (1 + np.abs(self.us)))
        st.mu = mults.mu
        st.multipliers = mults
        self.multipliers = mults
        pi_f = self.pi_f_measure(space, xs_x, xs_s, M, gN)
        dfn = -float(g @ nvec + 0.5 * nvec[:n] @ Bx @ nvec[:n])
        if pi_f <= omega_t(znorm):
            self.tangent_note = "critical"
            return zero, pi_f, 0.0, dfn
        lo, hi = self._boxes(space, xs_x, xs_s)
        lo = np.minimum(np.maximum(lo, -st.delta - nvec), 0.0)
        hi = np.maximum(np.minimum(hi, st.delta - nvec), 0.0)
        Jf = self._jfull(M)
        if np.max(np.abs(Bx), initial=0.0) <= p.lp_threshold:
            t = lp_solve(gN, Jf if self.m else None, lo, hi).x
        else:
            proj = NullspaceBoxProjector(Jf if self.m else np.zeros((0, N)), lo, hi, p.projection)

            def q(t):
                Bt = np.concatenate([Bx @ t[:n], np.zeros(self.m)])
                return float(gN @ t + 0.5 * t @ Bt), gN + Bt

            try:
                t = spg_solve(q, proj, zero).x
            except ProjectionFailure:
                self.tangent_note = "projection-failed"
                return zero, pi_f, 0.0, dfn
        t = np.clip(t, lo, hi)
        if self.m and np.linalg.norm(Jf @ t) > 1e-8 * (1.0 + np.linalg.norm(Jf, 2) * np.linalg.norm(t)):
            self.tangent_note = "off-nullspace"
            return zero, pi_f, 0.0, dfn
        dft = -float(gN @ t + 0.5 * t[:n] @ Bx @ t[:n])
        if dft <= 0:
            self.tangent_note = "no-decrease"
            return zero, pi_f, 0.0, dfn
        if np.linalg.norm(t) > p.kappa_zs * np.linalg.norm(nvec) and dft + dfn < p.kappa_delta * dft:
            self.tangent_note = "normal-dominates"
            return zero, pi_f, 0.0, dfn
        self.tangent_note = "taken"
        return t, pi_f, dft, dfn

    # -- concluding an iteration ---------------------------------------------

    def _trial(self, space, st, d):
        n = space.dim
        x = np.clip(st.x + d[:n], space.lo, space.hi)
        s = np.clip(st.s + d[n:], self.ls, self.us)
        return x, s

    def _insert(self, space, Y, M, st, x_new, criterion):
        row = self.row(space, x_new)
        Y2, changed, idx = update_interpolation_set(
            Y, x_new, row, st.delta, st.eps_i, st.theta, criterion, M.basis, self.variant,
            self.p.lam, self.p.zeta)
        return Y2, changed, idx

    def _make_current(self, space, Y, M, x_new):
        hit = np.flatnonzero(np.all(Y.points == x_new, axis=1))
        if hit.size:
            return Y.with_current(int(hit[0]))
        row = self.row(space, x_new)
        ell = M.basis.values_at(x_new)
        score = np.sum((Y.points - x_new) ** 2, axis=1) * np.abs(ell)
        score[Y.current] = -np.inf
        for r in np.argsort(-score, kind="stable"):
            if r == Y.current:
                continue
            cand = Y.replace(int(r), x_new, row).with_current(int(r))
            try:
                LagrangeBasis(cand.points, cand.x_k, self.variant)
                return cand
            except IllConditioned:
                continue
        return self.initial_set(space, x_new, max(Y.radius(), 1e-6), "plin")

    def conclude(self, space, Y, st, M, nvec, tvec, d, dft, dfn, zk, depth):
        p = self.p
        Jf = self._jfull(M)
        v = violation(M.z, st.s)
        vmax_before = st.vmax
        delta_before = st.delta
        rec = {"level": depth, "k": self.iterations, "delta_f": st.delta_f, "delta_z": st.delta_z,
               "delta": delta_before, "d_inf": _inf_norm(d), "n_inf": _inf_norm(nvec),
               "kappa_n_bound": p.kappa_n * float(np.linalg.norm(zk)), "v": v,
               "vmax_before": vmax_before, "pi_f": st.pi_f_prev, "ysize": Y.size,
               "tangent": self.tangent_note}
        if self.m and np.any(tvec):
            rec["Jt"] = float(np.linalg.norm(Jf @ tvec))
            rec["J_norm"] = float(np.linalg.norm(Jf, 2))
            rec["t_norm"] = float(np.linalg.norm(tvec))
        if not np.any(d):
            kind = "mu"
            changed = False
            radius = Y.radius()
            if p.lam * radius > p.eps_mu:
                Y2, changed = self.repair(space, Y, st.x, p.xi * radius)
                if changed:
                    Y = Y2
            accepted = False
            v_new = v
        else:
            x_plus, s_plus = self._trial(space, st, d)
            ev = self.evaluate(space, x_plus)
            v_plus = violation(self.zs(ev), s_plus)
            df = dft + dfn
            is_f = np.any(tvec) and df >= p.kappa_delta * dft and v_plus <= st.vmax and df > 0
            if is_f:
                kind = "f"
                rho = (M.f - ev.f) / df
                accepted = rho >= p.eta1
                soc_used = False
                if not accepted and p.soc and self.m:
                    out = self.second_order_correction(space, st, M, x_plus, s_plus, ev, d)
                    if out is not None:
                        x_c, s_c, ev_c, d_c = out
                        v_c = violation(self.zs(ev_c), s_c)
                        rho_c = (M.f - ev_c.f) / df
                        if v_c <= st.vmax and rho_c >= p.eta1:
                            x_plus, s_plus, ev, v_plus, d, rho = x_c, s_c, ev_c, v_c, d_c, rho_c
                            accepted = True
                            soc_used = True
                rec["soc"] = soc_used
                Y2, changed, _ = self._insert(space, Y, M, st, x_plus, accepted)
                dn = _inf_norm(d)
                if accepted:
                    st.nu_f = 0
                    if rho >= p.eta2:
                        st.delta_f = min(max(p.gamma2 * dn, st.delta_f), p.delta_max)
                    if v_plus < p.eta3 * st.vmax:
                        st.delta_z = min(max(p.gamma2 * _inf_norm(nvec), st.delta_z), p.delta_max)
                else:
                    if not changed or st.nu_f <= self.nu_max:
                        st.delta_f = p.gamma1 * dn
                    if changed and st.nu_f <= self.nu_max:
                        st.nu_f += 1
                rec["rho"] = rho
            else:
                kind = "z"
                r = zk + Jf @ d
                rn = zk + Jf @ nvec
                dz = 0.5 * float(zk @ zk) - 0.5 * float(r @ r)
                dzn = 0.5 * float(zk @ zk) - 0.5 * float(rn @ rn)
                rho = (v - v_plus) / dz if dz > 0 else -math.inf
                accepted = bool(np.any(nvec)) and dz > 0 and dz >= p.kappa_zn * dzn and rho >= p.eta1
                Y2, changed, _ = self._insert(space, Y, M, st, x_plus, accepted)
                nn = _inf_norm(nvec)
                if accepted:
                    st.nu_z = 0
                    if rho >= p.eta2:
                        st.delta_z = min(max(p.gamma2 * nn, st.delta_z), p.delta_max)
                    st.vmax = max(p.kappa_tx1 * st.vmax, v_plus + p.kappa_tx2 * (v - v_plus))
                else:
                    if nn == 0:
                        st.delta_z = p.gamma1 * st.delta_z
                    elif not changed or st.nu_z <= self.nu_max:
                        st.delta_z = p.gamma1 * nn
                    if changed and st.nu_z <= self.nu_max:
                        st.nu_z += 1
                rec["rho"] = rho
            Y = Y2
            if accepted:
                Y = self._make_current(space, Y, M, x_plus)
                changed = True
                # slacks move at most Delta per step in raw units; snapping them
                # to the closest admissible value can only lower v
                s_plus = np.clip(self.zs(ev), self.ls, self.us)
                v_plus = violation(self.zs(ev), s_plus)
                st.x, st.s = x_plus, s_plus
            v_new = v_plus
            rec["v_trial"] = v_plus
            rec["x_in_box"] = bool(np.all(x_plus >= space.lo) and np.all(x_plus <= space.hi))
            rec["s_in_box"] = bool(np.all(s_plus >= self.ls) and np.all(s_plus <= self.us))
            rec["d_inf"] = _inf_norm(d)
        if changed:
            Y, M = self.models(space, Y)
        floor = 1e-300
        st.delta_f = max(st.delta_f, floor)
        st.delta_z = max(st.delta_z, floor)
        rec.update({"type": kind, "accepted": bool(accepted), "vmax": st.vmax,
                    "v_new": v_new if accepted else v, "delta_max": p.delta_max,
                    "delta_f_new": st.delta_f, "delta_z_new": st.delta_z,
                    "bb_calls": self.ledger.bb_calls})
        self.emit(rec)
        return Y, M, changed, kind

    def second_order_correction(self, space, st, M, x_plus, s_plus, ev, d):
        p = self.p
        n = space.dim
        zp = self.zs(ev) - s_plus
        zn = float(np.linalg.norm(zp))
        if zn == 0:
            return None
        r = min(st.delta_z, p.kappa_n * zn)
        lo, hi = self._boxes(space, x_plus, s_plus)
        lo = np.minimum(np.maximum(lo, np.maximum(-r, -st.delta - d)), 0.0)
        hi = np.maximum(np.minimum(hi, np.minimum(r, st.delta - d)), 0.0)
        nh = blls_solve(self._jfull(M), -zp, lo, hi).x
        nh = np.clip(nh, lo, hi)
        if not np.any(nh):
            return None
        x_c = np.clip(x_plus + nh[:n], space.lo, space.hi)
        s_c = np.clip(s_plus + nh[n:], self.ls, self.us)
        ev_c = self.evaluate(space, x_c)
        return x_c, s_c, ev_c, d + nh


def local_search(prob, x0, ledger=None, params=None, max_evals=None, rng=None, trace=False,
                 callback: Optional[Callable] = None):
    """Run the trust-funnel local search from ``x0``.

    Parameters
    ----------
    prob : GreyBoxProblem
    x0 : array_like
        Starting point inside the variable box.
    ledger : EvaluationLedger, optional
        Shared evaluation cache and counter; a fresh unlimited one by default.
    params : FunnelParams, optional
    max_evals : int, optional
        Black-box calls available to this search (default ``500 n``).
    rng : numpy.random.Generator or int, optional
        Used for random sample sets.
    trace : bool
        Keep per-iteration diagnostics in the returned record.
    callback : callable, optional
        Called with each per-iteration diagnostic dict.

    Returns
    -------
    LocalMinimumRecord
        Best point met during the search. Budget exhaustion and infeasible
        stationarity are reported through ``status``, not raised.

    Examples
    --------
    >>> import numpy as np
    >>> from funnelopt.problem import GreyBoxProblem
    >>> p = GreyBoxProblem(n=2, f=lambda x: (x[0] - 1) ** 2 + (x[1] - 2) ** 2,
    ...                    lx=[-5, -5], ux=[5, 5])
    >>> rec = local_search(p, np.zeros(2), max_evals=60)
    >>> bool(np.allclose(rec.x, [1, 2], atol=1e-2))
    True
    """
    params = (params or FunnelParams()).validate()
    ledger = EvaluationLedger() if ledger is None else ledger
    rng = np.random.default_rng(rng)
    x0 = np.array(x0, dtype=float).reshape(-1)
    if x0.size != prob.n:
        raise ValueError(f"x0 must have {prob.n} components")
    if max_evals is None:
        max_evals = 500 * prob.n
    search = _Search(prob, ledger, params, rng, trace, callback)
    start_calls = ledger.bb_calls
    status = "converged"
    with ledger.limited(max_evals):
        try:
            _run(search, x0)
            status = "converged" if search.converged else "iteration-cap"
        except BudgetExhausted:
            status = "budget"
        except StopIteration:
            status = "iteration-cap"
        except InfeasibleStationary:
            status = "infeasible-stationary"
    best = search.best
    if best is None:
        raise BudgetExhausted("no evaluation was possible within the budget")
    cv = cv_of(best.z, search.sp.ls, search.sp.us)
    return LocalMinimumRecord(x=np.array(best.x), f=best.f, cv=cv, multipliers=search.multipliers,
                              evaluations=ledger.bb_calls - start_calls,
                              converged=status == "converged", status=status,
                              pi_f=search.pi_f, start=x0, trace=search.trace)


def _run(search, x0):
    prob, p = search.prob, search.p
    free = np.flatnonzero(prob.lx < prob.ux)
    base = np.clip(x0, prob.lx, prob.ux)
    space = _Space(prob, free, base, p.scale_variables)
    u0 = space.reduce(base)
    ev0 = search.evaluate(space, u0)
    if free.size == 0:
        search.converged = True
        return
    delta0 = p.delta0
    Y = search.initial_set(space, u0, delta0)
    if search.m and p.scale_constraints:
        # rows with steep slopes would pin x through the slack trust region
        _, M = search.models(space, Y)
        search.set_constraint_scale(1.0 / np.maximum(1.0, np.max(np.abs(M.J), axis=1)))
        Y = search.fill(space, Y)
    s0 = np.clip(search.zs(ev0), search.ls, search.us)
    v0 = violation(search.zs(ev0), s0)
    st = FunnelState(x=u0, s=s0, delta_f=delta0, delta_z=delta0,
                     vmax=max(p.kappa_za, p.kappa_zr * v0), mu=np.zeros(search.m), eps_i=p.eps0)
    search.run_level(space, Y, st, 0)


def trace_to_jsonl(trace):
    """Serialize a trace (list of dicts) as JSON lines."""
    return "\n".join(json.dumps(r, default=float) for r in trace)


__all__ = ["FunnelParams", "FunnelState", "LocalMinimumRecord", "local_search", "omega_t",
           "trace_to_jsonl"]
