"""Polynomial interpolation models and sample-set geometry.

Models live in the space of quadratics spanned by the natural basis

    1, u_1, ..., u_n, u_1^2/2, ..., u_n^2/2, u_1 u_2, u_1 u_3, ..., u_{n-1} u_n

in shifted and scaled coordinates ``u = (x - center) / scale``. Four ways of
resolving underdetermined systems are offered (see :class:`ModelVariant`).
The Lagrange polynomials of a sample set are the columns of the solution
operator mapping data values to coefficients.
"""

import logging
from enum import IntEnum

import numpy as np
from scipy.linalg import qr, solve_triangular

from .errors import DegenerateBox, IllConditioned

_log = logging.getLogger(__name__)

RANK_TOL = 1e-12


class ModelVariant(IntEnum):
    SUBBASIS = 1
    MIN_L2 = 2
    MIN_FROBENIUS = 3
    REGRESSION = 4


def n_quadratic(n):
    """Dimension of the space of quadratics in ``n`` variables."""
    return (n + 1) * (n + 2) // 2


def p_max_for(n, variant):
    """Largest sample-set size allowed for ``variant``."""
    q = n_quadratic(n)
    return 2 * q if ModelVariant(variant) == ModelVariant.REGRESSION else q


def monomials(U, nterms=None):
    """Rows of the natural quadratic basis evaluated at the rows of ``U``."""
    U = np.atleast_2d(U)
    p, n = U.shape
    iu, ju = np.triu_indices(n, 1)
    M = np.hstack([np.ones((p, 1)), U, 0.5 * U * U, U[:, iu] * U[:, ju]])
    return M if nterms is None else M[:, :nterms]


def _check_rank(R):
    d = np.abs(np.diag(R))
    if d.size == 0 or d.min() <= RANK_TOL * max(d.max(), 1e-300):
        raise IllConditioned("interpolation matrix is numerically rank deficient")


def _inverse_operator(M):
    """Inverse of a square matrix through QR, with a rank test."""
    Q, R = qr(M)
    _check_rank(R)
    return solve_triangular(R, Q.T)


class SurrogateModel:
    """Quadratic ``m(x) = c0 + g.(x - center) + 0.5 (x - center)' H (x - center)``.

    Parameters
    ----------
    center : ndarray
    alpha : ndarray
        Coefficients on the natural basis in scaled coordinates.
    scale : float
    """

    __slots__ = ("center", "scale", "alpha", "c0", "g", "H")

    def __init__(self, center, alpha, scale=1.0):
        n = center.size
        self.center = center
        self.scale = scale
        q = n_quadratic(n)
        a = np.zeros(q)
        a[:alpha.size] = alpha
        self.alpha = a
        self.c0 = a[0]
        self.g = a[1:n + 1] / scale
        H = np.diag(a[n + 1:2 * n + 1])
        iu, ju = np.triu_indices(n, 1)
        H[iu, ju] = a[2 * n + 1:]
        H[ju, iu] = a[2 * n + 1:]
        self.H = H / scale ** 2

    @classmethod
    def from_taylor(cls, center, c0, g, H):
        m = cls.__new__(cls)
        m.center = np.asarray(center, dtype=float)
        m.scale = 1.0
        m.c0 = float(c0)
        m.g = np.asarray(g, dtype=float)
        m.H = np.asarray(H, dtype=float)
        n = m.center.size
        iu, ju = np.triu_indices(n, 1)
        m.alpha = np.concatenate([[m.c0], m.g, np.diag(m.H), m.H[iu, ju]])
        return m

    def value(self, x):
        d = np.asarray(x, dtype=float) - self.center
        if d.ndim == 1:
            return self.c0 + self.g @ d + 0.5 * d @ self.H @ d
        return self.c0 + d @ self.g + 0.5 * np.einsum("ij,jk,ik->i", d, self.H, d)

    __call__ = value

    def gradient(self, x=None):
        if x is None:
            return self.g.copy()
        return self.g + self.H @ (np.asarray(x, dtype=float) - self.center)

    def hessian(self, x=None):
        return self.H

    def coefficients(self, about=None):
        """Coefficients on the natural basis in unscaled coordinates about ``about``.

        Order: constant, gradient, Hessian diagonal, upper off-diagonal entries
        row by row. The default expansion point is the origin.
        """
        n = self.center.size
        about = np.zeros(n) if about is None else np.asarray(about, dtype=float)
        g = self.gradient(about)
        iu, ju = np.triu_indices(n, 1)
        return np.concatenate([[self.value(about)], g, np.diag(self.H), self.H[iu, ju]])

    def to_dict(self):
        return {"center": self.center.tolist(), "c0": float(self.c0),
                "gradient": self.g.tolist(), "hessian": self.H.tolist()}


class SampleSet:
    """Interpolation points, their function values and the current-iterate index.

    Parameters
    ----------
    points : array_like, shape (p, n)
    values : array_like, shape (p, k), optional
        Function values attached to each point (one column per function).
    current : int
        Row of ``points`` holding the current iterate ``x_k``.
    p_max : int, optional
        Maximum cardinality; defaults to the full quadratic count.
    """

    def __init__(self, points, values=None, current=0, p_max=None):
        self.points = np.array(points, dtype=float, ndmin=2)
        self.points.setflags(write=False)
        if values is not None:
            values = np.array(values, dtype=float)
            if values.ndim == 1:
                values = values[:, None]
            values.setflags(write=False)
        self.values = values
        self.current = int(current)
        self.p_max = n_quadratic(self.n) if p_max is None else int(p_max)

    @property
    def n(self):
        return self.points.shape[1]

    @property
    def size(self):
        return self.points.shape[0]

    def __len__(self):
        return self.size

    @property
    def x_k(self):
        return self.points[self.current]

    def radius(self, center=None):
        """``max_j ||y_j - center||`` with the current iterate as default center."""
        c = self.x_k if center is None else center
        return float(np.max(np.linalg.norm(self.points - c, axis=1)))

    def _new(self, points, values, current):
        return SampleSet(points, values, current, self.p_max)

    def replace(self, i, y, row=None):
        pts = self.points.copy()
        pts[i] = y
        vals = None
        if self.values is not None:
            vals = self.values.copy()
            vals[i] = np.nan if row is None else row
        return self._new(pts, vals, self.current)

    def append(self, y, row=None):
        pts = np.vstack([self.points, y])
        vals = None
        if self.values is not None:
            extra = np.full((1, self.values.shape[1]), np.nan) if row is None else np.reshape(row, (1, -1))
            vals = np.vstack([self.values, extra])
        return self._new(pts, vals, self.current)

    def with_current(self, i):
        return self._new(self.points, self.values, i)

    def with_values(self, values):
        return self._new(self.points, values, self.current)

    def same_as(self, other):
        return (other is not None and self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points) and self.current == other.current)

    def to_dict(self):
        return {"points": self.points.tolist(), "current": self.current, "p_max": self.p_max}


class LagrangeBasis:
    """Solution operator of the interpolation system for a sample set.

    ``coefficients(values)`` returns model coefficients; the i-th Lagrange
    polynomial is the model of the i-th unit data vector.

    Parameters
    ----------
    points : ndarray, shape (p, n)
    center : ndarray, shape (n,)
    variant : ModelVariant or int
    scale : float, optional
        Coordinate scaling; defaults to the largest distance from ``center``.

    Raises
    ------
    IllConditioned
        If the factorization detects numerical rank deficiency.
    """

    def __init__(self, points, center, variant=ModelVariant.MIN_L2, scale=None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        p, n = points.shape
        self.n, self.p = n, p
        self.center = np.asarray(center, dtype=float)
        self.variant = ModelVariant(variant)
        if scale is None:
            scale = float(np.max(np.linalg.norm(points - self.center, axis=1)))
        self.scale = scale if scale > 0 else 1.0
        if p < n + 1:
            raise IllConditioned(f"{p} points cannot determine a model in {n} variables")
        U = (points - self.center) / self.scale
        self.S = self._operator(U)
        self._models = None

    def _operator(self, U):
        p, n = U.shape
        q = n_quadratic(n)
        v = self.variant
        if p == n + 1:
            S = _inverse_operator(monomials(U, n + 1))
        elif v == ModelVariant.SUBBASIS:
            if p > q:
                raise IllConditioned("too many points for subbasis interpolation")
            S = _inverse_operator(monomials(U, p))
        elif v == ModelVariant.MIN_FROBENIUS and p < q:
            S = _min_frobenius(U)
        elif v == ModelVariant.REGRESSION and p >= q:
            M = monomials(U)
            Q, R = qr(M, mode="economic")
            _check_rank(R)
            S = solve_triangular(R, Q.T)
        else:
            if p > q:
                raise IllConditioned("too many points for interpolation")
            M = monomials(U)
            Q, R = qr(M.T, mode="economic")
            _check_rank(R)
            S = Q @ solve_triangular(R, np.eye(p), trans="T")
        out = np.zeros((q, p))
        out[:S.shape[0]] = S
        return out

    def u(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.scale

    def values_at(self, x):
        """Values of all Lagrange polynomials at ``x`` (shape (p,) or (k, p))."""
        x = np.asarray(x, dtype=float)
        M = monomials(np.atleast_2d(self.u(x)))
        out = M @ self.S
        return out[0] if x.ndim == 1 else out

    def coefficients(self, values):
        return self.S @ np.asarray(values, dtype=float)

    def model(self, values):
        """Surrogate model interpolating ``values`` (shape (p,))."""
        return SurrogateModel(self.center, self.S @ np.asarray(values, dtype=float), self.scale)

    def models(self, values):
        """One model per column of ``values`` (shape (p, k))."""
        A = self.S @ np.asarray(values, dtype=float)
        return [SurrogateModel(self.center, A[:, j], self.scale) for j in range(A.shape[1])]

    def polynomial(self, i):
        return SurrogateModel(self.center, self.S[:, i], self.scale)

    @property
    def polynomials(self):
        if self._models is None:
            self._models = [self.polynomial(i) for i in range(self.p)]
        return self._models


def _min_frobenius(U):
    """Operator for minimum Frobenius norm Hessian models.

    The weighted quadratic coefficients ``b`` solve ``min |b|`` subject to
    ``ML a + Mt b = v``. Projecting onto the complement of ``range(ML)``
    removes ``a`` and leaves a minimum-norm problem solved by QR, which avoids
    the squared conditioning of the usual KKT matrix.
    """
    p, n = U.shape
    M = monomials(U)
    ML, MQ = M[:, :n + 1], M[:, n + 1:]
    w = np.concatenate([np.ones(n), np.full(MQ.shape[1] - n, np.sqrt(2.0))])
    Mt = MQ / w
    Q, R = qr(ML)
    R1 = R[:n + 1]
    _check_rank(R1)
    Q1, Q2 = Q[:, :n + 1], Q[:, n + 1:]
    Qa, Ra = qr((Q2.T @ Mt).T, mode="economic")
    _check_rank(Ra)
    B = Qa @ solve_triangular(Ra, Q2.T, trans="T")
    S_lin = solve_triangular(R1, Q1.T @ (np.eye(p) - Mt @ B))
    return np.vstack([S_lin, B / w[:, None]])


def quadratic_parts(A, n, scale=1.0):
    """Gradients and Hessians at the center for coefficient columns ``A`` (q, k).

    Returns
    -------
    (ndarray, ndarray)
        ``G`` of shape (k, n) and ``H`` of shape (k, n, n).
    """
    A = np.atleast_2d(A)
    k = A.shape[1]
    G = A[1:n + 1].T / scale
    H = np.zeros((k, n, n))
    idx = np.arange(n)
    H[:, idx, idx] = A[n + 1:2 * n + 1].T
    iu, ju = np.triu_indices(n, 1)
    H[:, iu, ju] = A[2 * n + 1:].T
    H[:, ju, iu] = A[2 * n + 1:].T
    return G, H / scale ** 2


def lagrange_basis(Y, variant=ModelVariant.MIN_L2, center=None):
    """Lagrange basis of sample set ``Y`` (models centered at ``Y.x_k``)."""
    pts = Y.points if isinstance(Y, SampleSet) else np.atleast_2d(Y)
    if center is None:
        center = Y.x_k if isinstance(Y, SampleSet) else pts[0]
    return LagrangeBasis(pts, center, variant)


def build_models(Y, variant=ModelVariant.MIN_L2, values=None):
    """Interpolation models for every column of the sample values.

    Parameters
    ----------
    Y : SampleSet
    variant : ModelVariant or int
    values : ndarray, optional
        Overrides ``Y.values``.

    Returns
    -------
    list of SurrogateModel
    """
    vals = Y.values if values is None else np.asarray(values, dtype=float)
    if vals is None:
        raise ValueError("sample set carries no function values")
    if vals.ndim == 1:
        vals = vals[:, None]
    return lagrange_basis(Y, variant).models(vals)


# ----------------------------------------------------------------------------
# approximate maximization of |polynomial| over a ball


def max_abs_on_ball(model, center, radius, lx=None, ux=None):
    """Approximate maximizer of ``|model|`` over ``B(center; radius)`` in a box.

    The quadratic is examined along the gradient direction, the coordinate
    axes and the Hessian eigenvectors; along each line the exact 1-D maximizer
    of ``|m|`` on ``[-radius, radius]`` is taken. Candidates are clipped into
    the box and re-evaluated.

    Returns
    -------
    (float, ndarray)
        Best value found and the corresponding point.
    """
    center = np.asarray(center, dtype=float)
    n = center.size
    a = float(model.value(center))
    if radius <= 0:
        return abs(a), center.copy()
    g = model.gradient(center)
    H = model.H
    dirs = [np.eye(n)]
    gn = np.linalg.norm(g)
    if gn > 0:
        dirs.append((g / gn)[None, :])
    if np.any(H):
        dirs.append(np.linalg.eigh(H)[1].T)
    V = np.vstack(dirs)
    gv = V @ g
    hv = np.einsum("ij,jk,ik->i", V, H, V)
    ts = [np.full(V.shape[0], radius), np.full(V.shape[0], -radius)]
    with np.errstate(divide="ignore", invalid="ignore"):
        tstar = np.where(hv != 0, -gv / hv, np.nan)
    ok = np.isfinite(tstar) & (np.abs(tstar) < radius)
    ts.append(np.where(ok, tstar, radius))
    T = np.concatenate(ts)
    D = np.tile(V, (3, 1)) * T[:, None]
    X = np.vstack([center[None, :], center + D])
    if lx is not None:
        X = np.clip(X, lx, ux)
    vals = np.abs(model.value(X))
    k = int(np.argmax(vals))
    return float(vals[k]), X[k]


def lambda_poisedness(Y, center=None, radius=None, lx=None, ux=None, basis=None,
                      variant=ModelVariant.MIN_L2):
    """Approximate ``max_i max_{x in B} |l_i(x)|`` over the ball ``B(center; radius)``.

    Parameters
    ----------
    Y : SampleSet
    center : ndarray, optional
        Defaults to ``Y.x_k``.
    radius : float, optional
        Defaults to the sample-set radius.
    basis : LagrangeBasis, optional
        Reused when supplied.
    """
    if center is None:
        center = Y.x_k
    if radius is None:
        radius = Y.radius(center)
    if basis is None:
        basis = lagrange_basis(Y, variant)
    return max(max_abs_on_ball(ell, center, radius, lx, ux)[0] for ell in basis.polynomials)


# ----------------------------------------------------------------------------
# sample-set construction and repair


def _offsets(x0, delta, lx, ux):
    """Signed coordinate offsets of length at most ``delta`` that stay in the box."""
    n = x0.size
    lx = np.full(n, -np.inf) if lx is None else lx
    ux = np.full(n, np.inf) if ux is None else ux
    up = np.minimum(ux - x0, delta)
    down = np.minimum(x0 - lx, delta)
    if np.any(np.maximum(up, down) <= 0):
        raise DegenerateBox("no room for sample points along some coordinate")
    first = np.where(up >= delta, up, np.where(down >= delta, -down, np.where(up >= down, up, -down)))
    second = np.where(first > 0, np.where(down > 0, -down, 0.5 * first), np.where(up > 0, up, 0.5 * first))
    return first, second


def build_initial_sample_set(x0, delta, mode="simplex", degree="plin", lx=None, ux=None,
                             rng=None, variant=ModelVariant.MIN_L2, lam_target=100.0, p_max=None):
    """Initial interpolation points around ``x0`` inside ``B(x0; delta)`` and the box.

    Parameters
    ----------
    x0 : ndarray
    delta : float
    mode : {"simplex", "random"}
    degree : {"plin", "pdiag", "pquad"}
        Set size ``n+1``, ``2n+1`` or ``(n+1)(n+2)/2``.
    lx, ux : ndarray, optional
    rng : numpy.random.Generator, optional
        Used in random mode.

    Returns
    -------
    SampleSet
        Points only; ``x0`` is row 0 and the current iterate.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    if delta <= 0:
        raise ValueError("delta must be positive")
    size = {"plin": n + 1, "pdiag": 2 * n + 1, "pquad": n_quadratic(n)}[degree]
    if p_max is None:
        p_max = p_max_for(n, variant)
    first, second = _offsets(x0, delta, lx, ux)
    if mode == "simplex":
        pts = [x0]
        E = np.eye(n)
        pts += [x0 + first[i] * E[i] for i in range(n)]
        if degree in ("pdiag", "pquad"):
            pts += [x0 + second[i] * E[i] for i in range(n)]
        if degree == "pquad":
            for i in range(n):
                for j in range(i + 1, n):
                    pts.append(x0 + (first[i] * E[i] + first[j] * E[j]) / np.sqrt(2.0))
        pts = np.array(pts)
        if lx is not None:
            pts = np.clip(pts, lx, ux)
        return SampleSet(pts, current=0, p_max=p_max)
    if mode != "random":
        raise ValueError(f"unknown sampling mode {mode!r}")
    rng = np.random.default_rng() if rng is None else rng
    dirs = rng.standard_normal((size - 1, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = delta * rng.uniform(size=size - 1) ** (1.0 / n)
    pts = np.vstack([x0, x0 + dirs * radii[:, None]])
    if lx is not None:
        pts = np.clip(pts, lx, ux)
    Y = SampleSet(pts, current=0, p_max=p_max)
    Y, _ = repair_sample_set(Y, x0, delta, lam_target, lx=lx, ux=ux, variant=variant)
    return Y


def _poised_subset(U, current, variant, target):
    """Greedy subset of rows of ``U`` (current row first) giving a poised set."""
    n = U.shape[1]
    order = [current] + sorted((i for i in range(len(U)) if i != current),
                               key=lambda i: np.linalg.norm(U[i] - U[current]))
    kept = [current]
    for i in order[1:]:
        if len(kept) >= target:
            break
        trial = kept + [i]
        cols = n + 1 if len(trial) <= n + 1 else _ncols(n, len(trial), variant)
        M = monomials(U[trial], cols)
        s = np.linalg.svd(M, compute_uv=False)
        if s.min() > 1e-8 * max(s.max(), 1.0):
            kept = trial
    return kept


def _ncols(n, p, variant):
    q = n_quadratic(n)
    if ModelVariant(variant) == ModelVariant.SUBBASIS:
        return min(p, q)
    return q


def _completion_point(U, kept, p_target, variant, center_u, radius_u, lo_u, hi_u):
    """Point maximizing a polynomial that vanishes on the kept rows."""
    n = U.shape[1]
    k = len(kept)
    cols = n + 1 if k < n + 1 else _ncols(n, k + 1, variant)
    if k >= cols:
        # regression beyond full quadratic: any new distinct point keeps full rank
        cols = n_quadratic(n)
    M = monomials(U[kept], cols)
    _, s, Vt = np.linalg.svd(M)
    rank = int(np.sum(s > 1e-10 * max(s.max(), 1.0)))
    v = Vt[min(rank, Vt.shape[0] - 1)]
    coef = np.zeros(n_quadratic(n))
    coef[:cols] = v
    poly = SurrogateModel(np.zeros(n), coef, 1.0)
    _, pt = max_abs_on_ball(poly, center_u, radius_u, lo_u, hi_u)
    return pt


def repair_sample_set(Y, center, radius, lam_target=100.0, evaluate=None, lx=None, ux=None,
                      variant=ModelVariant.MIN_L2, max_iter=None):
    """Improve the geometry of ``Y`` inside ``B(center; radius)``.

    Points outside the ball are replaced first, each by an approximate
    maximizer of its own Lagrange polynomial over the ball; then the point
    whose Lagrange polynomial has the largest absolute value over the ball is
    replaced while that value exceeds ``lam_target``. Non-poised sets are first
    completed through polynomials vanishing on a poised subset. The current
    iterate is never replaced.

    Parameters
    ----------
    Y : SampleSet
    center : ndarray
    radius : float
    lam_target : float
    evaluate : callable, optional
        ``evaluate(y) -> value row`` for new points; when omitted only points
        are repaired.
    lx, ux : ndarray, optional
        Box for new points.
    variant : ModelVariant

    Returns
    -------
    (SampleSet, int)
        Repaired set and number of replaced points.
    """
    center = np.asarray(center, dtype=float)
    n = Y.n
    if max_iter is None:
        max_iter = 2 * Y.size
    replaced = 0

    def put(Yc, i, y):
        row = evaluate(y) if evaluate is not None else None
        return Yc.replace(i, y, row)

    # complete non-poised sets
    try:
        basis = LagrangeBasis(Y.points, Y.x_k, variant)
    except IllConditioned:
        scale = max(radius, 1e-300)
        U = (Y.points - center) / scale
        lo_u = None if lx is None else (lx - center) / scale
        hi_u = None if ux is None else (ux - center) / scale
        kept = _poised_subset(U, Y.current, variant, Y.size)
        spare = [i for i in range(Y.size) if i not in kept]
        for i in spare:
            pt_u = _completion_point(U, kept, Y.size, variant, np.zeros(n), 1.0, lo_u, hi_u)
            y = center + scale * pt_u
            if lx is not None:
                y = np.clip(y, lx, ux)
            Y = put(Y, i, y)
            U[i] = (y - center) / scale
            kept.append(i)
            replaced += 1
        basis = LagrangeBasis(Y.points, Y.x_k, variant)

    # far points
    dist = np.linalg.norm(Y.points - center, axis=1)
    far = [i for i in np.argsort(-dist, kind="stable") if dist[i] > radius * (1 + 1e-12) and i != Y.current]
    for i in far:
        _, y = max_abs_on_ball(basis.polynomial(i), center, radius, lx, ux)
        try:
            cand = Y.replace(i, y)
            new_basis = LagrangeBasis(cand.points, cand.x_k, variant)
        except IllConditioned:
            continue
        Y = put(Y, i, y)
        basis = new_basis
        replaced += 1

    # Lambda improvement
    for _ in range(max_iter):
        best, best_i, best_y = -1.0, -1, None
        for i, ell in enumerate(basis.polynomials):
            if i == Y.current:
                continue
            val, y = max_abs_on_ball(ell, center, radius, lx, ux)
            if val > best:
                best, best_i, best_y = val, i, y
        if best <= lam_target or best_i < 0:
            break
        try:
            cand = Y.replace(best_i, best_y)
            new_basis = LagrangeBasis(cand.points, cand.x_k, variant)
        except IllConditioned:
            break
        Y = put(Y, best_i, best_y)
        basis = new_basis
        replaced += 1
    return Y, replaced


def update_interpolation_set(Y, x_plus, row_plus=None, delta=1.0, eps_i=0.0, theta=None,
                             criterion=False, basis=None, variant=ModelVariant.MIN_L2,
                             lam=100.0, zeta=1.0):
    """Self-correcting geometry update with a trial point.

    Cases, in order: augment while below ``p_max``; on success swap out the
    point maximizing ``||y_j - x+||^2 |l_j(x+)|``; otherwise, when the iterate
    differs from the marker ``theta`` or ``delta <= eps_i``, replace the best
    such point among the far points (``||y_j - x_k|| > zeta delta`` with
    ``l_j(x+) != 0``), else among the close points with ``|l_j(x+)| > lam``;
    otherwise leave ``Y`` unchanged. Ties go to the lowest index and the
    current iterate is never removed.

    Returns
    -------
    (SampleSet, bool, int)
        Updated set, whether it changed, and the row of ``x_plus`` (-1 if not
        inserted).
    """
    x_plus = np.asarray(x_plus, dtype=float)
    if np.any(np.all(Y.points == x_plus, axis=1)):
        return Y, False, -1
    if Y.size < Y.p_max:
        cand = Y.append(x_plus, row_plus)
        try:
            LagrangeBasis(cand.points, cand.x_k, variant)
            return cand, True, Y.size
        except IllConditioned:
            pass
    if basis is None:
        basis = LagrangeBasis(Y.points, Y.x_k, variant)
    ell = basis.values_at(x_plus)
    score = np.sum((Y.points - x_plus) ** 2, axis=1) * np.abs(ell)
    eligible = np.ones(Y.size, dtype=bool)
    eligible[Y.current] = False
    if criterion:
        pool = eligible
    else:
        gate = theta is None or not np.array_equal(Y.x_k, theta) or delta <= eps_i
        if not gate:
            return Y, False, -1
        dk = np.linalg.norm(Y.points - Y.x_k, axis=1)
        far = eligible & (dk > zeta * delta) & (ell != 0)
        pool = far if np.any(far) else eligible & (dk <= zeta * delta) & (np.abs(ell) > lam)
    if not np.any(pool):
        return Y, False, -1
    r = int(np.argmax(np.where(pool, score, -np.inf)))
    cand = Y.replace(r, x_plus, row_plus)
    try:
        LagrangeBasis(cand.points, cand.x_k, variant)
    except IllConditioned:
        return Y, False, -1
    return cand, True, r
