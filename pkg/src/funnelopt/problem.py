"""Grey-box problem definitions, slack reformulation and evaluation accounting.

A problem has the form

    min f(x)  s.t.  lc <= c(x) <= uc,  lh <= h(x) <= uh,  lx <= x <= ux,

where ``c`` is a black box and ``h`` is a white box with a known Jacobian.
The objective may be of either kind. Internally the constraints are stacked
into ``z(x) = (c(x), h(x))`` and rewritten as ``z(x) - s = 0`` with the slack
``s`` confined to ``[ls, us] = [(lc, lh), (uc, uh)]``.
"""

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BudgetExhausted, DomainViolation

BLACK_BOX = "black-box"
WHITE_BOX = "white-box"


def _as_bounds(lower, upper, size, what):
    lower = np.full(size, -np.inf) if lower is None else np.asarray(lower, dtype=float).reshape(-1)
    upper = np.full(size, np.inf) if upper is None else np.asarray(upper, dtype=float).reshape(-1)
    if lower.shape != (size,) or upper.shape != (size,):
        raise ValueError(f"{what} bounds must have {size} components")
    if np.any(lower > upper):
        raise ValueError(f"{what} lower bounds exceed upper bounds")
    lower.setflags(write=False)
    upper.setflags(write=False)
    return lower, upper


@dataclass(frozen=True, eq=False)
class GreyBoxProblem:
    """Immutable description of a grey-box optimization problem.

    Parameters
    ----------
    n : int
        Number of variables.
    f : callable
        Objective ``f(x) -> float``.
    lx, ux : array_like
        Variable bounds, ``±inf`` allowed. These are never relaxed.
    c : callable, optional
        Black-box constraints ``c(x) -> ndarray`` of length ``len(lc)``.
    lc, uc : array_like, optional
        Bounds on ``c``.
    h : callable, optional
        White-box constraints ``h(x) -> ndarray`` of length ``len(lh)``.
    lh, uh : array_like, optional
        Bounds on ``h``.
    h_jac : callable, optional
        Jacobian of ``h``, required whenever ``h`` is given.
    f_kind : {"black-box", "white-box"}
        Whether ``f`` is charged as a black-box call.
    f_grad : callable, optional
        Gradient of ``f``, required when ``f_kind`` is white-box.
    name : str
        Label used in reports.
    """

    n: int
    f: Callable
    lx: np.ndarray = None
    ux: np.ndarray = None
    c: Optional[Callable] = None
    lc: np.ndarray = None
    uc: np.ndarray = None
    h: Optional[Callable] = None
    lh: np.ndarray = None
    uh: np.ndarray = None
    h_jac: Optional[Callable] = None
    f_kind: str = BLACK_BOX
    f_grad: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValueError("n must be at least 1")
        object.__setattr__(self, "n", n)
        if self.f_kind not in (BLACK_BOX, WHITE_BOX):
            raise ValueError(f"f_kind must be {BLACK_BOX!r} or {WHITE_BOX!r}")
        if self.f_kind == WHITE_BOX and self.f_grad is None:
            raise ValueError("a white-box objective needs f_grad")
        lx, ux = _as_bounds(self.lx, self.ux, n, "variable")
        object.__setattr__(self, "lx", lx)
        object.__setattr__(self, "ux", ux)

        q = 0 if self.c is None else len(np.reshape(self.lc if self.lc is not None else self.uc, -1))
        lc, uc = _as_bounds(self.lc, self.uc, q, "black-box constraint")
        object.__setattr__(self, "lc", lc)
        object.__setattr__(self, "uc", uc)

        nh = 0 if self.h is None else len(np.reshape(self.lh if self.lh is not None else self.uh, -1))
        if nh > 0 and self.h_jac is None:
            raise ValueError("white-box constraints need h_jac")
        lh, uh = _as_bounds(self.lh, self.uh, nh, "white-box constraint")
        object.__setattr__(self, "lh", lh)
        object.__setattr__(self, "uh", uh)

    @property
    def q(self):
        """Number of black-box constraints."""
        return self.lc.size

    @property
    def nh(self):
        """Number of white-box constraints."""
        return self.lh.size

    @property
    def has_black_box(self):
        """True when evaluating a new point costs one black-box call."""
        return self.q > 0 or self.f_kind == BLACK_BOX

    def in_box(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.isfinite(x)) and np.all(x >= self.lx) and np.all(x <= self.ux))


class Evaluation:
    """Function values at one point: objective, black-box and white-box constraints."""

    __slots__ = ("x", "f", "c", "h", "z")

    def __init__(self, x, f, c, h):
        self.x = x
        self.f = f
        self.c = c
        self.h = h
        self.z = np.concatenate([c, h])
        for a in (x, c, h, self.z):
            a.setflags(write=False)

    def __repr__(self):
        return f"Evaluation(f={self.f!r}, z={self.z!r})"


@dataclass(eq=False)
class EvaluationLedger:
    """Counts black-box calls, caches evaluations and enforces budgets.

    Parameters
    ----------
    budget : float
        Maximum number of black-box calls. ``inf`` means unlimited.

    Notes
    -----
    The cache is keyed by the exact bytes of the point, so repeated requests
    for a point cost nothing. Nested limits created with :meth:`limited`
    cap the number of calls available to a sub-task (e.g. one local search).
    """

    budget: float = np.inf
    bb_calls: int = 0
    wb_calls: int = 0
    _cache: dict = field(default_factory=dict, repr=False)
    _caps: list = field(default_factory=list, repr=False)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    @property
    def remaining(self):
        """Black-box calls still available under the tightest active cap."""
        cap = min([self.budget] + self._caps)
        return max(cap - self.bb_calls, 0)

    def limited(self, calls):
        """Context manager restricting further black-box calls to ``calls``."""
        ledger = self

        class _Limit:
            def __enter__(self_inner):
                with ledger._lock:
                    ledger._caps.append(ledger.bb_calls + calls)
                return ledger

            def __exit__(self_inner, *exc):
                with ledger._lock:
                    ledger._caps.pop()
                return False

        return _Limit()

    def lookup(self, x):
        """Cached evaluation at ``x`` or None."""
        return self._cache.get(np.ascontiguousarray(x, dtype=float).tobytes())

    def evaluate(self, prob, x):
        """Evaluate every function of ``prob`` at ``x``, charging when needed.

        Parameters
        ----------
        prob : GreyBoxProblem or SlackProblem
        x : array_like

        Returns
        -------
        Evaluation

        Raises
        ------
        DomainViolation
            If ``x`` lies outside the variable box.
        BudgetExhausted
            If ``x`` is new and no black-box call is left.
        """
        prob = getattr(prob, "parent", prob)
        x = np.array(x, dtype=float).reshape(-1)
        key = x.tobytes()
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                return hit
            if x.size != prob.n or not prob.in_box(x):
                raise DomainViolation(f"point outside the variable box: {x}")
            charged = prob.has_black_box
            if charged and self.bb_calls + 1 > min([self.budget] + self._caps):
                raise BudgetExhausted(f"black-box budget of {self.budget} calls exhausted")
            ev = _raw_evaluation(prob, x)
            if charged:
                self.bb_calls += 1
            self.wb_calls += int(prob.f_kind == WHITE_BOX) + int(prob.nh > 0)
            self._cache[key] = ev
            return ev


def _raw_evaluation(prob, x):
    f = float(prob.f(x))
    c = np.asarray(prob.c(x), dtype=float).reshape(-1) if prob.q else np.zeros(0)
    h = np.asarray(prob.h(x), dtype=float).reshape(-1) if prob.nh else np.zeros(0)
    return Evaluation(x, f, c, h)


class SlackProblem:
    """Slack reformulation ``z(x) - s = 0, ls <= s <= us`` of a grey-box problem.

    Parameters
    ----------
    parent : GreyBoxProblem
    """

    def __init__(self, parent):
        self.parent = parent
        self.m = parent.q + parent.nh
        self.ls = np.concatenate([parent.lc, parent.lh])
        self.us = np.concatenate([parent.uc, parent.uh])

    @property
    def n(self):
        return self.parent.n

    def evaluate(self, x, ledger=None):
        if ledger is None:
            x = np.array(x, dtype=float).reshape(-1)
            if not self.parent.in_box(x):
                raise DomainViolation(f"point outside the variable box: {x}")
            return _raw_evaluation(self.parent, x)
        return ledger.evaluate(self.parent, x)


def _as_slack(prob):
    return prob if isinstance(prob, SlackProblem) else SlackProblem(prob)


def evaluate_z(prob, x, ledger=None):
    """Stacked constraint values ``z(x) = (c(x), h(x))``."""
    return _as_slack(prob).evaluate(x, ledger).z


def violation_terms(z, ls, us):
    """Componentwise violations ``[z - us]^+ + [ls - z]^+``."""
    z = np.asarray(z, dtype=float)
    with np.errstate(invalid="ignore"):
        up = np.where(np.isfinite(us), np.maximum(z - us, 0.0), 0.0)
        lo = np.where(np.isfinite(ls), np.maximum(ls - z, 0.0), 0.0)
    return up + lo


def cv_of(z, ls, us):
    """Largest componentwise bound violation of ``z``; zero when empty."""
    terms = violation_terms(z, ls, us)
    return float(terms.max()) if terms.size else 0.0


def constraint_violation(prob, x, ledger=None):
    """Maximum constraint violation ``cv(x)``.

    Examples
    --------
    >>> import numpy as np
    >>> p = GreyBoxProblem(n=1, f=lambda x: 0.0, c=lambda x: x, lc=[0.0], uc=[1.0])
    >>> constraint_violation(p, np.array([2.0]))
    1.0
    """
    sp = _as_slack(prob)
    return cv_of(sp.evaluate(x, ledger).z, sp.ls, sp.us)


def merit_phi(prob, x, pi=100.0, ledger=None):
    """Exact l1 penalty ``f(x) + pi * sum of constraint violations``."""
    if pi <= 0:
        raise ValueError("penalty must be positive")
    sp = _as_slack(prob)
    ev = sp.evaluate(x, ledger)
    return ev.f + pi * float(violation_terms(ev.z, sp.ls, sp.us).sum())


def initial_slack(prob, x=None, ledger=None, z=None):
    """Slack minimizing ``||z(x) - s||`` over the slack box.

    Either ``x`` or a precomputed ``z`` must be supplied.
    """
    sp = _as_slack(prob)
    if z is None:
        z = sp.evaluate(x, ledger).z
    return np.clip(np.asarray(z, dtype=float), sp.ls, sp.us)


def violation(z, s):
    """Squared-norm violation ``0.5 * ||z - s||^2``."""
    r = np.asarray(z) - np.asarray(s)
    return 0.5 * float(r @ r)
