"""Multi-level single linkage (MLSL) multistart around the trust-funnel local search.

Each outer iteration draws ``N`` uniform points in the variable box, ranks all
points sampled so far by the penalty merit and starts a local search from every
point that has no better point within the critical radius ``r_k``. The radius
shrinks with ``k``, so the number of searches grows slowly while the sample
covers the box ever more densely.
"""

from dataclasses import dataclass, field
from math import gamma, log, pi, sqrt
from typing import Optional

import numpy as np

from .errors import BudgetExhausted, ConfigError, NoFeasibleMinimum
from .funnel import FEASIBILITY_TOL, FunnelParams, LocalMinimumRecord, local_search
from .problem import EvaluationLedger, SlackProblem, violation_terms


def critical_radius(k, N, n, lower, upper, sigma=4.0):
    """Critical distance ``r_k`` below which a better neighbour excludes a start.

    Parameters
    ----------
    k : int
        Outer iteration, ``k >= 1``.
    N : int
        Points drawn per iteration.
    n : int
        Dimension.
    lower, upper : array_like
        Finite sampling box.
    sigma : float

    Returns
    -------
    float

    Examples
    --------
    >>> round(critical_radius(1, 50, 2, [0, 0], [1, 1]), 4)
    0.3156
    """
    if k < 1 or N < 2:
        raise ValueError("critical_radius needs k >= 1 and N >= 2")
    widths = np.asarray(upper, dtype=float) - np.asarray(lower, dtype=float)
    if not np.all(np.isfinite(widths)):
        raise ConfigError("the sampling box must be finite")
    measure = float(np.prod(widths))
    kN = k * N
    return (gamma(1.0 + n / 2.0) * measure * sigma * log(kN) / kN) ** (1.0 / n) / sqrt(pi)


def _same_minimum(a, b):
    close = np.linalg.norm(a.x - b.x) <= 1e-4 * (1.0 + np.linalg.norm(a.x))
    return bool(close and abs(a.f - b.f) <= 1e-6 * (1.0 + abs(a.f)))


def _better(a, b):
    """True when record ``a`` should replace its duplicate ``b``."""
    return (a.cv, a.f) < (b.cv, b.f)


def register_minimum(minima, candidate):
    """Merge ``candidate`` into the list of known minima.

    Two records are duplicates when their points agree to ``1e-4 (1 + |x_a|)``
    and their objectives to ``1e-6 (1 + |f_a|)``; the one with lower violation,
    then lower objective, is kept.

    Parameters
    ----------
    minima : list of LocalMinimumRecord
        Modified in place.
    candidate : LocalMinimumRecord

    Returns
    -------
    list of LocalMinimumRecord
    """
    for i, rec in enumerate(minima):
        if _same_minimum(rec, candidate):
            if _better(candidate, rec):
                minima[i] = candidate
            return minima
    minima.append(candidate)
    return minima


def best_feasible(minima, tol=FEASIBILITY_TOL):
    """Lowest-objective record with ``cv <= tol``, or None."""
    ok = [r for r in minima if r.cv <= tol]
    return min(ok, key=lambda r: r.f) if ok else None


@dataclass
class MultistartConfig:
    """Settings of the global search.

    Attributes
    ----------
    maxeval : int, optional
        Total black-box budget (default ``5000 n``).
    maxeval_ls : int, optional
        Budget of one local search (default ``0.7 maxeval``).
    n_samples : int, optional
        Points drawn per iteration (default ``min(50, 10 n)``).
    sigma : float
        Critical-radius constant.
    penalty : float
        Weight of the violation in the ranking merit.
    max_iterations : int
        Cap on outer iterations.
    f_global_optimum : float, optional
        Stop once a feasible point with ``f <= f_global_optimum + f_tol (1 + |f_global_optimum|)``
        has been found.
    f_tol : float
    seed : int or None
        Master seed; iteration ``k`` draws from its own substream.
    funnel : FunnelParams
    """

    maxeval: Optional[int] = None
    maxeval_ls: Optional[int] = None
    n_samples: Optional[int] = None
    sigma: float = 4.0
    penalty: float = 100.0
    max_iterations: int = 10_000
    f_global_optimum: Optional[float] = None
    f_tol: float = 1e-4
    seed: Optional[int] = 0
    funnel: FunnelParams = field(default_factory=FunnelParams)

    def resolved(self, n):
        """Copy with every default filled in for dimension ``n``."""
        maxeval = 5000 * n if self.maxeval is None else int(self.maxeval)
        maxeval_ls = int(0.7 * maxeval) if self.maxeval_ls is None else int(self.maxeval_ls)
        N = min(50, 10 * n) if self.n_samples is None else int(self.n_samples)
        if maxeval < 0:
            raise ConfigError("maxeval must be nonnegative")
        if maxeval_ls < 1 or maxeval_ls > max(maxeval, 1):
            raise ConfigError("maxeval_ls must lie in [1, maxeval]")
        if N < 2:
            raise ConfigError("at least two samples per iteration are needed")
        if self.sigma <= 0 or self.penalty <= 0:
            raise ConfigError("sigma and penalty must be positive")
        self.funnel.validate()
        out = MultistartConfig(**{**self.__dict__})
        out.maxeval, out.maxeval_ls, out.n_samples = maxeval, maxeval_ls, N
        return out


@dataclass
class MultistartState:
    """Bookkeeping of the global search.

    Attributes
    ----------
    k : int
        Last completed outer iteration.
    samples : ndarray, shape (kN, n)
    phi : ndarray, shape (kN,)
        Merit of each sample.
    started : set of int
        Indices of samples that seeded a local search.
    minima : list of LocalMinimumRecord
    lower, upper : ndarray
        Sampling box.
    N : int
    sigma : float
    """

    lower: np.ndarray
    upper: np.ndarray
    N: int
    sigma: float
    k: int = 0
    samples: np.ndarray = None
    phi: np.ndarray = None
    started: set = field(default_factory=set)
    minima: list = field(default_factory=list)

    def __post_init__(self):
        n = self.lower.size
        if self.samples is None:
            self.samples = np.zeros((0, n))
        if self.phi is None:
            self.phi = np.zeros(0)

    def radius(self, k):
        return critical_radius(k, self.N, self.lower.size, self.lower, self.upper, self.sigma)


@dataclass
class MultistartSummary:
    """Outputs of a global search, named after the usual solver outputs.

    Attributes
    ----------
    best_sol : ndarray or None
    best_fval : float
    best_cv : float
    total_eval : int
    nb_local_searches : int
    fL : list of float
        Objective value of every distinct minimum found.
    iterations : int
    status : str
        ``"budget"``, ``"f_global_optimum"`` or ``"max_iterations"``.
    minima : list of LocalMinimumRecord
    dispatches : list of dict
        One entry per local search: iteration, sample index, start point,
        merit and critical radius at dispatch time, plus the point and merit
        of the minimum it returned.
    samples : ndarray, shape (kN, n)
        Every sampled point, in draw order.
    phi : ndarray, shape (kN,)
        Merit of each sample.
    """

    best_sol: Optional[np.ndarray]
    best_fval: float
    best_cv: float
    total_eval: int
    nb_local_searches: int
    fL: list
    iterations: int
    status: str
    minima: list = field(repr=False, default_factory=list)
    dispatches: list = field(repr=False, default_factory=list)
    samples: Optional[np.ndarray] = field(repr=False, default=None)
    phi: Optional[np.ndarray] = field(repr=False, default=None)

    def to_dict(self):
        return {"best_sol": None if self.best_sol is None else np.asarray(self.best_sol).tolist(),
                "best_fval": self.best_fval, "best_cv": self.best_cv,
                "total_eval": self.total_eval, "nb_local_searches": self.nb_local_searches,
                "fL": list(self.fL), "iterations": self.iterations, "status": self.status}


def _substream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _merit(sp, ev, penalty):
    return ev.f + penalty * float(violation_terms(ev.z, sp.ls, sp.us).sum())


def _tagged(callback, j):
    if callback is None:
        return None
    return lambda r: callback({**r, "search": j})


def _excluded(i, x, phi_i, pool_x, pool_phi, radius):
    d = np.linalg.norm(pool_x - x, axis=1)
    mask = (d <= radius) & (pool_phi < phi_i)
    mask[i] = False
    return bool(np.any(mask))


def global_search(prob, config=None, ledger=None, callback=None):
    """Run MLSL with trust-funnel local searches.

    Parameters
    ----------
    prob : GreyBoxProblem
        Every variable must have finite bounds.
    config : MultistartConfig, optional
    ledger : EvaluationLedger, optional
        Fresh one with the configured budget by default.
    callback : callable, optional
        Receives every local-search diagnostic dict, with the index of the
        search added under ``"search"``.

    Returns
    -------
    record : LocalMinimumRecord
        Best feasible minimum.
    summary : MultistartSummary

    Raises
    ------
    ConfigError
        If the box is unbounded or the configuration is invalid.
    NoFeasibleMinimum
        If no minimum with ``cv <= 1e-4`` was found; the exception carries the
        least infeasible record (if any) and the summary.

    Examples
    --------
    >>> import numpy as np
    >>> from funnelopt.problem import GreyBoxProblem
    >>> p = GreyBoxProblem(n=1, f=lambda x: (x[0] ** 2 - 1) ** 2 + 0.3 * x[0],
    ...                    lx=[-2], ux=[2])
    >>> rec, summary = global_search(p, MultistartConfig(maxeval=300, seed=1))
    >>> round(float(rec.x[0]), 2)
    -1.04
    """
    config = (config or MultistartConfig()).resolved(prob.n)
    lower, upper = np.asarray(prob.lx, dtype=float), np.asarray(prob.ux, dtype=float)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ConfigError("multistart needs finite bounds on every variable")
    ledger = EvaluationLedger(budget=config.maxeval) if ledger is None else ledger
    sp = SlackProblem(prob)
    state = MultistartState(lower=lower, upper=upper, N=config.n_samples, sigma=config.sigma)
    start_calls = ledger.bb_calls
    dispatches = []
    status = "max_iterations"

    def used():
        return ledger.bb_calls - start_calls

    def attained():
        if config.f_global_optimum is None:
            return False
        best = best_feasible(state.minima)
        fopt = config.f_global_optimum
        return best is not None and best.f <= fopt + config.f_tol * (1.0 + abs(fopt))

    try:
        for k in range(1, config.max_iterations + 1):
            rng = _substream(config.seed, k)
            fresh = lower + (upper - lower) * rng.uniform(size=(state.N, prob.n))
            phis = []
            for x in fresh:
                with ledger.limited(config.maxeval - used()):
                    ev = ledger.evaluate(prob, x)
                state.samples = np.vstack([state.samples, x])
                phis.append(_merit(sp, ev, config.penalty))
                state.phi = np.append(state.phi, phis[-1])
            state.k = k
            r_k = state.radius(k)
            # the exclusion test only sees what was known when the iteration began
            pool_x = np.vstack([state.samples] + [m.x[None, :] for m in state.minima])
            pool_phi = np.concatenate(
                [state.phi, [_merit(sp, ledger.evaluate(prob, m.x), config.penalty)
                             for m in state.minima]])
            order = np.argsort(state.phi, kind="stable")
            for i in order:
                i = int(i)
                if i in state.started:
                    continue
                x_i = state.samples[i]
                if _excluded(i, x_i, state.phi[i], pool_x, pool_phi, r_k):
                    continue
                remaining = config.maxeval - used()
                if remaining <= 0:
                    raise BudgetExhausted("global budget spent")
                state.started.add(i)
                dispatches.append({"k": k, "index": i, "x": x_i.tolist(),
                                   "phi": float(state.phi[i]), "r_k": r_k})
                tagged = _tagged(callback, len(dispatches) - 1)
                rec = local_search(prob, x_i, ledger, config.funnel,
                                   max_evals=min(config.maxeval_ls, remaining),
                                   rng=_substream(config.seed, k, i), callback=tagged)
                dispatches[-1].update(x_min=rec.x.tolist(), phi_min=_merit(
                    sp, ledger.evaluate(prob, rec.x), config.penalty))
                register_minimum(state.minima, rec)
                if attained():
                    status = "f_global_optimum"
                    raise StopIteration
                if used() >= config.maxeval:
                    raise BudgetExhausted("global budget spent")
    except BudgetExhausted:
        status = "budget"
    except StopIteration:
        pass

    best = best_feasible(state.minima)
    shown = best or (min(state.minima, key=lambda r: (r.cv, r.f)) if state.minima else None)
    summary = MultistartSummary(
        best_sol=None if shown is None else shown.x.copy(),
        best_fval=np.nan if shown is None else shown.f,
        best_cv=np.nan if shown is None else shown.cv,
        total_eval=used(), nb_local_searches=len(dispatches),
        fL=[m.f for m in state.minima], iterations=state.k, status=status,
        minima=list(state.minima), dispatches=dispatches,
        samples=state.samples.copy(), phi=state.phi.copy())
    if best is None:
        raise NoFeasibleMinimum("no local minimum with cv <= 1e-4 was found", shown, summary)
    return best, summary


__all__ = ["MultistartConfig", "MultistartState", "MultistartSummary", "LocalMinimumRecord",
           "best_feasible", "critical_radius", "global_search", "register_minimum"]
