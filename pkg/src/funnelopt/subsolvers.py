"""Small dense solvers used inside the local search.

* :func:`blls_solve` -- bound-constrained linear least squares (bounded
  variable active-set method).
* :func:`lp_solve` -- two-phase dense simplex with Bland's rule.
* :func:`spg_solve` -- nonmonotone spectral projected gradient.
* :func:`estimate_multipliers` -- least-squares Lagrange multipliers with
  nonnegative bound multipliers.
* :class:`NullspaceBoxProjector` -- Euclidean projection onto
  ``{t : A t = 0, lo <= t <= hi}``.
"""

from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import linprog, lsq_linear

from .errors import FunnelOptError, ProjectionFailure


class BoxedLSQ(NamedTuple):
    """``min 0.5 ||A x - b||^2`` subject to ``lb <= x <= ub``."""

    A: np.ndarray
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray


class LPProblem(NamedTuple):
    """``min g^T r`` subject to ``J r = 0`` and ``lb <= r <= ub``."""

    g: np.ndarray
    J: Optional[np.ndarray]
    lb: np.ndarray
    ub: np.ndarray


class BLLSResult(NamedTuple):
    x: np.ndarray
    active: np.ndarray
    converged: bool
    niter: int


class LPResult(NamedTuple):
    x: np.ndarray
    value: float


class SPGResult(NamedTuple):
    x: np.ndarray
    f: float
    converged: bool
    niter: int


class Multipliers(NamedTuple):
    mu: np.ndarray
    xi_s: np.ndarray
    tau_s: np.ndarray
    xi_x: np.ndarray
    tau_x: np.ndarray


class Infeasible(FunnelOptError):
    """The linear program has no feasible point."""


class Unbounded(FunnelOptError):
    """The linear program is unbounded below."""


# ----------------------------------------------------------------------------
# bound-constrained linear least squares


def _active_flags(x, lb, ub):
    act = np.zeros(x.size, dtype=int)
    act[x <= lb] = -1
    act[x >= ub] = 1
    return act


def _blls_optimal(A, b, x, lb, ub):
    """KKT test with a per-component scale, so badly scaled columns cannot hide."""
    g = A.T @ (A @ x - b)
    kkt = np.where((x <= lb) & (g > 0), 0.0, np.where((x >= ub) & (g < 0), 0.0, g))
    scale = np.linalg.norm(A, axis=0) * (np.linalg.norm(A @ x - b) + np.linalg.norm(b)) + 1e-300
    return bool(np.all(np.abs(kkt) <= 1e-8 * scale))


def blls_solve(A, b=None, lb=None, ub=None, x0=None, max_iter=None):
    """Solve ``min 0.5||A x - b||^2`` over the box ``lb <= x <= ub``.

    Parameters
    ----------
    A : ndarray, shape (m, n) or BoxedLSQ
    b : ndarray, shape (m,)
    lb, ub : ndarray, shape (n,)
        Bounds, infinities allowed; ``lb == ub`` fixes a variable.
    x0 : ndarray, optional
        Ignored by the active-set solver; accepted for interface stability.
    max_iter : int, optional
        Iteration cap for the active-set solver.

    Returns
    -------
    BLLSResult
        Solution, active flags (-1 lower, 1 upper, 0 free), KKT flag and
        iteration count.

    Notes
    -----
    Delegates to the bounded-variable least-squares method of
    :func:`scipy.optimize.lsq_linear`, after eliminating fixed variables.
    """
    if isinstance(A, BoxedLSQ):
        A, b, lb, ub = A
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    n = A.shape[1]
    lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
    if np.any(lb > ub):
        raise ValueError("lower bounds exceed upper bounds")
    x = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    free = lb < ub
    niter = 0
    if np.any(free) and A.shape[0] > 0:
        rhs = b - A[:, ~free] @ x[~free]
        Af = A[:, free]
        if np.any(Af):
            xf, niter = _bvls(Af, rhs, lb[free], ub[free], max_iter)
            x[free] = xf
        else:
            x[free] = np.clip(0.0, lb[free], ub[free])
    elif np.any(free):
        x[free] = np.clip(0.0, lb[free], ub[free])
    return BLLSResult(x, _active_flags(x, lb, ub), _blls_optimal(A, b, x, lb, ub), niter)


def _bvls(A, b, lb, ub, max_iter):
    """BVLS with a trust-region-reflective fallback for degenerate columns."""
    with np.errstate(all="ignore"):
        res = lsq_linear(A, b, (lb, ub), method="bvls", tol=1e-12, max_iter=max_iter)
    x = np.clip(res.x, lb, ub)
    # rounding can leave an active variable a few ulps inside its bound
    x = np.where(res.active_mask < 0, lb, np.where(res.active_mask > 0, ub, x))
    if np.all(np.isfinite(x)) and _blls_optimal(A, b, x, lb, ub):
        return x, int(res.nit)
    with np.errstate(all="ignore"):
        alt = lsq_linear(A, b, (lb, ub), method="trf", tol=1e-14, lsq_solver="exact")
    xa = np.clip(alt.x, lb, ub)
    if not np.all(np.isfinite(x)):
        return xa, int(alt.nit)
    ra, rx = np.linalg.norm(A @ xa - b), np.linalg.norm(A @ x - b)
    return (xa, int(alt.nit)) if ra < rx else (x, int(res.nit))


# ----------------------------------------------------------------------------
# linear programming


def _pivot(T, row, col):
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])


def _simplex_phase(T, basis, ncols, max_iter, tol):
    """Bland's-rule simplex on tableau ``T`` whose last row is the cost row."""
    m = T.shape[0] - 1
    for _ in range(max_iter):
        red = T[-1, :ncols]
        entering = np.flatnonzero(red < -tol)
        if entering.size == 0:
            return True
        col = int(entering[0])
        column = T[:m, col]
        pos = column > tol
        if not np.any(pos):
            raise Unbounded("linear program is unbounded")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        row = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, row, col)
        basis[row] = col
    return False


def lp_solve(g, J=None, lb=None, ub=None, max_iter=None):
    """Minimize ``g^T r`` subject to ``J r = 0`` and ``lb <= r <= ub``.

    The box must be finite. Variables are shifted to ``w = r - lb >= 0`` and
    the upper bounds become explicit slack rows; a two-phase dense simplex
    with Bland's anti-cycling rule then returns an optimal vertex. Instances
    the tableau cannot settle numerically are handed to HiGHS.

    Returns
    -------
    LPResult
        Minimizer and optimal value.
    """
    if isinstance(g, LPProblem):
        g, J, lb, ub = g
    g = np.asarray(g, dtype=float).reshape(-1)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
        raise ValueError("lp_solve needs a finite box")
    if np.any(lb > ub):
        raise Infeasible("empty box")
    if J is None or np.size(J) == 0:
        r = np.where(g > 0, lb, np.where(g < 0, ub, np.clip(0.0, lb, ub)))
        return LPResult(r, float(g @ r))
    J = np.atleast_2d(np.asarray(J, dtype=float))
    # J r = 0 is invariant under row scaling; unit rows tame the tolerances
    rn = np.linalg.norm(J, axis=1)
    J = J[rn > 0] / rn[rn > 0, None]
    if J.shape[0] == 0:
        return lp_solve(g, None, lb, ub)
    try:
        return _simplex_lp(g, J, lb, ub, max_iter)
    except (Infeasible, FunnelOptError):
        return _highs_lp(g, J, lb, ub)


def _highs_lp(g, J, lb, ub):
    """Fallback through the HiGHS solver for instances the tableau mishandles."""
    res = linprog(g, A_eq=J, b_eq=np.zeros(J.shape[0]), bounds=np.column_stack([lb, ub]),
                  method="highs")
    if res.status == 2:
        raise Infeasible("linear program is infeasible")
    if res.status == 3:
        raise Unbounded("linear program is unbounded")
    if res.status != 0:
        raise FunnelOptError(f"linear program failed: {res.message}")
    r = np.clip(res.x, lb, ub)
    return LPResult(r, float(g @ r))


def _simplex_lp(g, J, lb, ub, max_iter):
    n = g.size
    me = J.shape[0]
    width = ub - lb
    scale = max(1.0, float(np.abs(J).max()), float(np.abs(g).max()), float(width.max()))
    tol = 1e-11 * scale

    # columns: w (n), v (n), artificials (me), rhs
    nv = 2 * n + me
    rows = me + n
    T = np.zeros((rows + 1, nv + 1))
    rhs_eq = -J @ lb
    sign = np.where(rhs_eq < 0, -1.0, 1.0)
    T[:me, :n] = J * sign[:, None]
    T[:me, 2 * n:2 * n + me] = np.eye(me)
    T[:me, -1] = rhs_eq * sign
    T[me:rows, :n] = np.eye(n)
    T[me:rows, n:2 * n] = np.eye(n)
    T[me:rows, -1] = width
    basis = [2 * n + i for i in range(me)] + [n + i for i in range(n)]
    if max_iter is None:
        max_iter = 100 * (nv + rows)

    # phase one: minimize the sum of artificials
    T[-1, :] = 0.0
    T[-1, 2 * n:2 * n + me] = 1.0
    for i in range(me):
        T[-1] -= T[i]
    if not _simplex_phase(T, basis, nv, max_iter, tol):
        raise FunnelOptError("simplex iteration cap reached in phase one")
    if -T[-1, -1] > 1e-9 * scale * max(1, me):
        raise Infeasible("linear program is infeasible")
    # drive remaining artificials out of the basis
    keep = np.ones(rows, dtype=bool)
    for i in range(rows):
        if basis[i] >= 2 * n:
            cand = np.flatnonzero(np.abs(T[i, :2 * n]) > tol)
            if cand.size:
                _pivot(T, i, int(cand[0]))
                basis[i] = int(cand[0])
            else:
                keep[i] = False
    T = np.vstack([T[:rows][keep], T[-1:]])
    basis = [bi for bi, k in zip(basis, keep) if k]
    T = np.delete(T, np.s_[2 * n:2 * n + me], axis=1)
    nv = 2 * n

    # phase two
    cost = np.concatenate([g, np.zeros(n)])
    T[-1, :] = 0.0
    T[-1, :nv] = cost
    for i, bi in enumerate(basis):
        T[-1] -= cost[bi] * T[i]
    if not _simplex_phase(T, basis, nv, max_iter, tol):
        raise FunnelOptError("simplex iteration cap reached in phase two")
    w = np.zeros(nv)
    for i, bi in enumerate(basis):
        w[bi] = T[i, -1]
    r = np.clip(lb + w[:n], lb, ub)
    return LPResult(r, float(g @ r))


# ----------------------------------------------------------------------------
# spectral projected gradient


def spg_solve(fun, project, x0, max_iter=200, memory=10, gamma=1e-4,
              lam_min=1e-10, lam_max=1e10, tol=None):
    """Nonmonotone spectral projected gradient method.

    Parameters
    ----------
    fun : callable
        ``fun(x) -> (value, gradient)``.
    project : callable
        Euclidean projection onto the closed convex feasible set.
    x0 : ndarray
        Starting point; projected before use.
    tol : float, optional
        Stop when ``||P(x - g) - x|| <= tol``; defaults to ``1e-8`` times
        the initial projected-gradient step, which is invariant to the scale
        of both the gradient and the feasible set.

    Returns
    -------
    SPGResult
    """
    x = project(np.asarray(x0, dtype=float))
    f, g = fun(x)
    hist = [f]
    pg = project(x - g) - x
    pgn = np.linalg.norm(pg)
    if tol is None:
        tol = 1e-8 * pgn
    lam = 1.0 / max(np.abs(pg).max(), 1e-300) if pgn > 0 else 1.0
    lam = min(max(lam, lam_min), lam_max)
    best_x, best_f = x, f
    it = 0
    converged = pgn <= tol
    while not converged and it < max_iter:
        it += 1
        d = project(x - lam * g) - x
        gtd = float(g @ d)
        if gtd >= 0:
            break
        fref = max(hist[-memory:])
        alpha = 1.0
        while True:
            xn = x + alpha * d
            fn, gn = fun(xn)
            if fn <= fref + gamma * alpha * gtd:
                break
            denom = fn - f - alpha * gtd
            atmp = -0.5 * alpha * alpha * gtd / denom if denom > 0 else 0.5 * alpha
            alpha = atmp if 0.1 * alpha <= atmp <= 0.9 * alpha else 0.5 * alpha
            if alpha < 1e-16:
                break
        if alpha < 1e-16:
            break
        s = xn - x
        y = gn - g
        x, f, g = xn, fn, gn
        hist.append(f)
        if f < best_f:
            best_x, best_f = x, f
        sy = float(s @ y)
        lam = lam_max if sy <= 0 else min(max(float(s @ s) / sy, lam_min), lam_max)
        converged = np.linalg.norm(project(x - g) - x) <= tol
    return SPGResult(best_x, best_f, bool(converged), it)


# ----------------------------------------------------------------------------
# projection onto {A t = 0} intersected with a box


class NullspaceBoxProjector:
    """Euclidean projection onto ``{t : A t = 0, lo <= t <= hi}``.

    Parameters
    ----------
    A : ndarray, shape (m, N)
    lo, hi : ndarray, shape (N,)
        Finite box containing the origin.
    method : {"auto", "ldp", "newton", "dykstra"}
        ``"auto"`` runs ``"ldp"`` and, when rounding left the point slightly
        off the null space, projects that point again with ``"newton"``
        (then ``"ldp"``); ``"ldp"`` writes the projection in an orthonormal null-space basis as
        a least-distance problem and solves it exactly through nonnegative
        least squares; ``"newton"`` maximizes the concave dual in the
        multipliers of ``A t = 0`` by a semismooth Newton method;
        ``"dykstra"`` alternates projections onto the box and the null space.
    tol : float
        Feasibility tolerance on ``||A t||`` relative to ``1 + ||A|| ||t||``.
    max_iter : int
        Alternation (Dykstra) or Newton iteration cap.
    """

    def __init__(self, A, lo, hi, method="auto", tol=1e-10, max_iter=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.method = method
        self.tol = tol
        self.max_iter = max_iter if max_iter is not None else (200 if method == "dykstra" else 100)
        self.normA = np.linalg.norm(self.A, 2) if self.A.size else 0.0
        if method == "dykstra":
            pinv = np.linalg.pinv(self.A)
            self.P = np.eye(self.A.shape[1]) - pinv @ self.A
        elif method in ("ldp", "auto"):
            self.Z = _null_space(self.A)
        elif method != "newton":
            raise ValueError(f"unknown projection method {method!r}")

    def _ok(self, t):
        return np.linalg.norm(self.A @ t) <= self.tol * (1.0 + self.normA * np.linalg.norm(t))

    def __call__(self, y):
        if self.A.shape[0] == 0:
            return np.clip(y, self.lo, self.hi)
        if self.method == "dykstra":
            return self._dykstra(y)
        if self.method == "ldp":
            return self._ldp(y)
        if self.method == "auto":
            t = self._ldp(y, check=False)
            if self._ok(t):
                return t
            # far-away inputs lose digits to cancellation; projecting the
            # rounded result again starts close to the set and restores them
            try:
                return self._newton(t)
            except ProjectionFailure:
                return self._ldp(t)
        return self._newton(y)

    def _ldp(self, y, check=True):
        Z, lo, hi = self.Z, self.lo, self.hi
        if Z.shape[1] == 0:
            return np.zeros_like(y)
        c = Z.T @ y
        zc = Z @ c
        # w = c + x with min ||x|| subject to G x >= h
        up, dn = np.isfinite(hi), np.isfinite(lo)
        G = np.vstack([Z[dn], -Z[up]])
        h = np.concatenate([lo[dn] - zc[dn], zc[up] - hi[up]])
        if G.shape[0] == 0 or np.all(h <= 0):
            x = np.zeros(Z.shape[1])
        else:
            # scale rows so that nnls sees a balanced system
            rs = np.maximum(np.linalg.norm(G, axis=1), 1e-300)
            G, h = G / rs[:, None], h / rs
            # unit-size right-hand side keeps the last residual away from zero
            hs = float(np.max(np.abs(h)))
            E = np.vstack([G.T, h / hs])
            f = np.zeros(E.shape[0])
            f[-1] = 1.0
            u = lsq_linear(E, f, (0.0, np.inf), method="bvls", tol=1e-14).x
            r = E @ u - f
            if abs(r[-1]) <= 1e-14:
                raise ProjectionFailure("empty feasible set in the null space")
            x = -hs * r[:-1] / r[-1]
        t = np.clip(Z @ (c + x), lo, hi)
        if check and not self._ok(t):
            raise ProjectionFailure("least-distance projection lost feasibility")
        return t

    def _dykstra(self, y):
        x = self.P @ y
        p = np.zeros_like(y)
        for _ in range(self.max_iter):
            b = np.clip(x + p, self.lo, self.hi)
            p = x + p - b
            xn = self.P @ b
            scale = self.tol * (1.0 + np.linalg.norm(xn))
            # small steps alone are not enough: the null-space iterate must also sit in the box
            done = (np.linalg.norm(xn - x) <= scale
                    and np.linalg.norm(xn - np.clip(xn, self.lo, self.hi)) <= 1e-3 * scale)
            x = xn
            if done:
                break
        t = np.clip(x, self.lo, self.hi)
        if not self._ok(t):
            raise ProjectionFailure("Dykstra alternations did not converge")
        return t

    def _newton(self, y):
        A, lo, hi = self.A, self.lo, self.hi
        lam = np.zeros(A.shape[0])
        t = np.clip(y, lo, hi)
        reg = 1e-10 * (1.0 + self.normA ** 2)
        for _ in range(self.max_iter):
            r = A @ t
            if self._ok(t):
                return t
            free = (t > lo) & (t < hi)
            Af = A[:, free]
            H = Af @ Af.T + reg * np.eye(A.shape[0])
            try:
                step = np.linalg.solve(H, r)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H, r, rcond=None)[0]
            alpha = _dual_line_search(y - A.T @ lam, -(A.T @ step), lo, hi)
            if not np.isfinite(alpha) or alpha <= 0:
                break
            lam = lam + alpha * step
            t = np.clip(y - A.T @ lam, lo, hi)
        if self._ok(t):
            return t
        raise ProjectionFailure("semismooth Newton projection did not converge")


def _null_space(A):
    """Orthonormal basis of the null space of ``A`` (columns)."""
    N = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(N)
    _, sv, Vt = np.linalg.svd(A)
    tol = max(A.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    return Vt[rank:].T.copy()


def _dual_line_search(u, v, lo, hi):
    """Root of ``h(a) = sum_i v_i clip(u_i + a v_i, lo_i, hi_i)`` for ``a >= 0``.

    ``h`` is nondecreasing and piecewise linear; it is the negated slope of the
    projection dual along the search direction.
    """
    def h(a):
        return float(v @ np.clip(u + a * v, lo, hi))

    h0 = h(0.0)
    if h0 >= 0:
        return 0.0
    nz = v != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = np.concatenate([(lo[nz] - u[nz]) / v[nz], (hi[nz] - u[nz]) / v[nz]])
    cand = np.unique(cand[np.isfinite(cand) & (cand > 0)])
    a_prev, h_prev = 0.0, h0
    for a in cand:
        ha = h(a)
        if ha >= 0:
            if ha == h_prev:
                return a
            return a_prev + (a - a_prev) * (-h_prev) / (ha - h_prev)
        a_prev, h_prev = a, ha
    # beyond the last breakpoint h is constant
    return np.inf


# ----------------------------------------------------------------------------
# Lagrange multipliers


def estimate_multipliers(gN, Jx, x_lower=None, x_upper=None, s_lower=None, s_upper=None):
    """Least-squares multipliers for the slack-reformulated problem.

    Minimizes ``0.5||M||^2`` with

        M = (gN_x, gN_s) + (Jx^T, -I) mu + (0, I_tau_s) tau_s - (0, I_xi_s) xi_s
            + (I_tau_x, 0) tau_x - (I_xi_x, 0) xi_x

    over free ``mu`` and nonnegative bound multipliers attached to the active
    bounds only. Multipliers of inactive bounds are zero.

    Parameters
    ----------
    gN : ndarray, shape (n + m,)
        Gradient of the step model at the normal step, in ``(x, s)`` space.
    Jx : ndarray, shape (m, n)
    x_lower, x_upper, s_lower, s_upper : ndarray of bool, optional
        Active-bound masks.

    Returns
    -------
    Multipliers
    """
    Jx = np.asarray(Jx, dtype=float)
    m, n = Jx.shape
    gN = np.asarray(gN, dtype=float).reshape(-1)
    if gN.size == n:
        gN = np.concatenate([gN, np.zeros(m)])

    def mask(a, k):
        return np.zeros(k, dtype=bool) if a is None else np.asarray(a, dtype=bool)

    xl, xu, sl, su = mask(x_lower, n), mask(x_upper, n), mask(s_lower, m), mask(s_upper, m)
    Ix, Is = np.eye(n), np.eye(m)
    blocks = [np.vstack([Jx.T, -Is]),
              np.vstack([np.zeros((n, su.sum())), Is[:, su]]),
              np.vstack([np.zeros((n, sl.sum())), -Is[:, sl]]),
              np.vstack([Ix[:, xu], np.zeros((m, xu.sum()))]),
              np.vstack([-Ix[:, xl], np.zeros((m, xl.sum()))])]
    A = np.hstack(blocks)
    lb = np.concatenate([np.full(m, -np.inf), np.zeros(A.shape[1] - m)])
    ub = np.full(A.shape[1], np.inf)
    sol = blls_solve(A, -gN, lb, ub).x
    sizes = np.cumsum([m, su.sum(), sl.sum(), xu.sum()])
    mu, ts, xs, tx, xx = np.split(sol, sizes)

    def expand(vals, msk):
        out = np.zeros(msk.size)
        out[msk] = vals
        return out

    return Multipliers(mu, expand(xs, sl), expand(ts, su), expand(xx, xl), expand(tx, xu))
