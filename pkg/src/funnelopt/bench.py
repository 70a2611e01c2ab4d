"""Benchmark registry: constrained global optimization test problems.

Each entry stores closed-form functions, bounds, the best known feasible
objective value and a reference point attaining it. Problems can be exposed
fully as black boxes or, for the grey-box entries, with some functions given
as white boxes together with their exact derivatives.

Sources of the formulations:

* G3, G4, G6, G7, G8, G9, G11: Michalewicz and Schoenauer (1996) test suite.
* WB4: welded beam design, four-variable form of Coello (2002) with the
  simple bound on ``x1`` kept as a bound.
* GTCD4: gas transmission compressor design, Beightler and Phillips (1976).
* PVD4: pressure vessel design, continuous form used by Regis (2014).
* SR7: speed reducer design, Floudas and Pardalos (1990).
* Harley: Haverly's pooling problem with an enlarged demand limit on the
  first product, written with nine variables and six constraints, turned
  into a minimization.
* Hesse: Hesse (1973).
* Gomez #3: Gomez and Levy (1982), third problem.
* HS21, HS23: Hock and Schittkowski (1980).
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import UnknownProblem, UnsupportedMode, ValidationFailure
from .problem import BLACK_BOX, WHITE_BOX, GreyBoxProblem, cv_of

INF = np.inf
FEASIBILITY_TOL = 1e-4


@dataclass(frozen=True)
class GreySplit:
    """Which functions of an entry are white boxes in grey-box mode.

    Attributes
    ----------
    f_white : bool
    f_grad : callable or None
    white : tuple of int
        Indices (into the entry's constraint vector) of white-box constraints.
    jac : callable or None
        ``jac(x)`` returning the Jacobian rows of the white-box constraints.
    """

    f_white: bool
    f_grad: Optional[Callable]
    white: tuple
    jac: Optional[Callable]


@dataclass(frozen=True)
class BenchmarkEntry:
    """A registered test problem.

    Constraints are stacked in one vector ``cons(x)`` with bounds ``lc`` and
    ``uc``; equality constraints have ``lc == uc``.
    """

    name: str
    n: int
    f: Callable
    cons: Callable
    lc: tuple
    uc: tuple
    lx: tuple
    ux: tuple
    best_known: float
    reference: tuple
    source: str
    grey: Optional[GreySplit] = None
    table: str = "table2"

    @property
    def n_constraints(self):
        return len(self.lc)

    @property
    def modes(self):
        return (BLACK_BOX, "grey-box") if self.grey is not None else (BLACK_BOX,)

    def problem(self, mode=BLACK_BOX):
        """Build the :class:`GreyBoxProblem` for ``mode``."""
        lc, uc = np.array(self.lc, dtype=float), np.array(self.uc, dtype=float)
        if mode == BLACK_BOX:
            return GreyBoxProblem(n=self.n, f=self.f, lx=self.lx, ux=self.ux, c=self.cons,
                                  lc=lc, uc=uc, name=self.name)
        if mode != "grey-box":
            raise UnsupportedMode(f"unknown mode {mode!r}")
        if self.grey is None:
            raise UnsupportedMode(f"{self.name} has no grey-box configuration")
        g = self.grey
        white = np.array(g.white, dtype=int)
        black = np.setdiff1d(np.arange(self.n_constraints), white)
        cons = self.cons
        c = (lambda x: cons(x)[black]) if black.size else None
        h = (lambda x: cons(x)[white]) if white.size else None
        return GreyBoxProblem(
            n=self.n, f=self.f, lx=self.lx, ux=self.ux,
            c=c, lc=lc[black] if black.size else None, uc=uc[black] if black.size else None,
            h=h, lh=lc[white] if white.size else None, uh=uc[white] if white.size else None,
            h_jac=g.jac if white.size else None,
            f_kind=WHITE_BOX if g.f_white else BLACK_BOX,
            f_grad=g.f_grad if g.f_white else None, name=self.name)

    def describe(self):
        out = {"name": self.name, "n": self.n, "constraints": self.n_constraints,
               "best_known": self.best_known, "modes": "|".join(self.modes)}
        if self.grey is not None:
            out["wb_constraints"] = len(self.grey.white)
            out["bb_constraints"] = self.n_constraints - len(self.grey.white)
            out["objective"] = "WB" if self.grey.f_white else "BB"
        return out


def _le(k):
    """Bounds for ``k`` constraints written as ``g(x) <= 0``."""
    return (-INF,) * k, (0.0,) * k


# ----------------------------------------------------------------------------
# problem definitions


def _g3_f(x):
    return -2.0 * x[0] * x[1]


def _g3_c(x):
    return np.array([x[0] ** 2 + x[1] ** 2])


def _g4_f(x):
    return 5.3578547 * x[2] ** 2 + 0.8356891 * x[0] * x[4] + 37.293239 * x[0] - 40792.141


def _g4_c(x):
    x1, x2, x3, x4, x5 = x
    u = 85.334407 + 0.0056858 * x2 * x5 + 0.0006262 * x1 * x4 - 0.0022053 * x3 * x5
    v = 80.51249 + 0.0071317 * x2 * x5 + 0.0029955 * x1 * x2 + 0.0021813 * x3 ** 2
    w = 9.300961 + 0.0047026 * x3 * x5 + 0.0012547 * x1 * x3 + 0.0019085 * x3 * x4
    return np.array([u - 92.0, -u, v - 110.0, 90.0 - v, w - 25.0, 20.0 - w])


def _g6_f(x):
    return (x[0] - 10.0) ** 3 + (x[1] - 20.0) ** 3


def _g6_c(x):
    return np.array([-(x[0] - 5.0) ** 2 - (x[1] - 5.0) ** 2 + 100.0,
                     (x[0] - 6.0) ** 2 + (x[1] - 5.0) ** 2 - 82.81])


def _g7_f(x):
    x1, x2, x3, x4, x5, x6, x7, x8, x9, x10 = x
    return (x1 ** 2 + x2 ** 2 + x1 * x2 - 14 * x1 - 16 * x2 + (x3 - 10) ** 2 + 4 * (x4 - 5) ** 2
            + (x5 - 3) ** 2 + 2 * (x6 - 1) ** 2 + 5 * x7 ** 2 + 7 * (x8 - 11) ** 2
            + 2 * (x9 - 10) ** 2 + (x10 - 7) ** 2 + 45)


def _g7_c(x):
    x1, x2, x3, x4, x5, x6, x7, x8, x9, x10 = x
    return np.array([
        -105 + 4 * x1 + 5 * x2 - 3 * x7 + 9 * x8,
        10 * x1 - 8 * x2 - 17 * x7 + 2 * x8,
        -8 * x1 + 2 * x2 + 5 * x9 - 2 * x10 - 12,
        3 * (x1 - 2) ** 2 + 4 * (x2 - 3) ** 2 + 2 * x3 ** 2 - 7 * x4 - 120,
        5 * x1 ** 2 + 8 * x2 + (x3 - 6) ** 2 - 2 * x4 - 40,
        x1 ** 2 + 2 * (x2 - 2) ** 2 - 2 * x1 * x2 + 14 * x5 - 6 * x6,
        0.5 * (x1 - 8) ** 2 + 2 * (x2 - 4) ** 2 + 3 * x5 ** 2 - x6 - 30,
        -3 * x1 + 6 * x2 + 12 * (x9 - 8) ** 2 - 7 * x10,
    ])


def _g8_f(x):
    # sin(2 pi x1)^3 / x1^3 written through sinc, continuous at x1 = 0
    a = 2.0 * math.pi * np.sinc(2.0 * x[0])
    s = x[0] + x[1]
    b = math.sin(2.0 * math.pi * x[1]) / s if s > 0 else 2.0 * math.pi
    return -(a ** 3) * b


def _g8_c(x):
    return np.array([x[0] ** 2 - x[1] + 1.0, 1.0 - x[0] + (x[1] - 4.0) ** 2])


def _g9_f(x):
    x1, x2, x3, x4, x5, x6, x7 = x
    return ((x1 - 10) ** 2 + 5 * (x2 - 12) ** 2 + x3 ** 4 + 3 * (x4 - 11) ** 2 + 10 * x5 ** 6
            + 7 * x6 ** 2 + x7 ** 4 - 4 * x6 * x7 - 10 * x6 - 8 * x7)


def _g9_c(x):
    x1, x2, x3, x4, x5, x6, x7 = x
    return np.array([
        -127 + 2 * x1 ** 2 + 3 * x2 ** 4 + x3 + 4 * x4 ** 2 + 5 * x5,
        -282 + 7 * x1 + 3 * x2 + 10 * x3 ** 2 + x4 - x5,
        -196 + 23 * x1 + x2 ** 2 + 6 * x6 ** 2 - 8 * x7,
        4 * x1 ** 2 + x2 ** 2 - 3 * x1 * x2 + 2 * x3 ** 2 + 5 * x6 - 11 * x7,
    ])


def _g11_f(x):
    return x[0] ** 2 + (x[1] - 1.0) ** 2


def _g11_c(x):
    return np.array([x[1] - x[0] ** 2])


def _gomez_f(x):
    x1, x2 = x
    return (4 - 2.1 * x1 ** 2 + x1 ** 4 / 3) * x1 ** 2 + x1 * x2 + (-4 + 4 * x2 ** 2) * x2 ** 2


def _gomez_c(x):
    return np.array([-math.sin(4 * math.pi * x[0]) + 2 * math.sin(2 * math.pi * x[1]) ** 2])


def _hesse_f(x):
    x1, x2, x3, x4, x5, x6 = x
    return (-25 * (x1 - 2) ** 2 - (x2 - 2) ** 2 - (x3 - 1) ** 2 - (x4 - 4) ** 2
            - (x5 - 1) ** 2 - (x6 - 4) ** 2)


def _hesse_grad(x):
    x1, x2, x3, x4, x5, x6 = x
    return np.array([-50 * (x1 - 2), -2 * (x2 - 2), -2 * (x3 - 1), -2 * (x4 - 4),
                     -2 * (x5 - 1), -2 * (x6 - 4)])


def _hesse_c(x):
    x1, x2, x3, x4, x5, x6 = x
    return np.array([
        4 - (x3 - 3) ** 2 - x4,
        4 - (x5 - 3) ** 2 - x6,
        x1 - 3 * x2 - 2,
        -x1 + x2 - 2,
        x1 + x2 - 6,
        2 - x1 - x2,
    ])


_HESSE_LINEAR = np.array([[-1.0, 1, 0, 0, 0, 0], [1, 1, 0, 0, 0, 0], [-1, -1, 0, 0, 0, 0]])


def _hesse_jac(x):
    return _HESSE_LINEAR.copy()


def _wb4_f(x):
    return 1.10471 * x[0] ** 2 * x[1] + 0.04811 * x[2] * x[3] * (14.0 + x[1])


def _wb4_c(x):
    x1, x2, x3, x4 = x
    P, L, E, G = 6000.0, 14.0, 30e6, 12e6
    tau1 = P / (math.sqrt(2.0) * x1 * x2)
    M = P * (L + x2 / 2.0)
    R = math.sqrt(x2 ** 2 / 4.0 + ((x1 + x3) / 2.0) ** 2)
    J = 2.0 * (math.sqrt(2.0) * x1 * x2 * (x2 ** 2 / 12.0 + ((x1 + x3) / 2.0) ** 2))
    tau2 = M * R / J
    tau = math.sqrt(tau1 ** 2 + 2.0 * tau1 * tau2 * x2 / (2.0 * R) + tau2 ** 2)
    sigma = 6.0 * P * L / (x4 * x3 ** 2)
    delta = 4.0 * P * L ** 3 / (E * x3 ** 3 * x4)
    pc = (4.013 * E * math.sqrt(x3 ** 2 * x4 ** 6 / 36.0) / L ** 2
          * (1.0 - x3 / (2.0 * L) * math.sqrt(E / (4.0 * G))))
    return np.array([
        tau - 13600.0,
        sigma - 30000.0,
        x1 - x4,
        0.10471 * x1 ** 2 + 0.04811 * x3 * x4 * (14.0 + x2) - 5.0,
        delta - 0.25,
        P - pc,
    ])


def _gtcd4_f(x):
    x1, x2, x3, x4 = x
    return (8.61e5 * x1 ** 0.5 * x2 * x3 ** (-2.0 / 3.0) * x4 ** -0.5 + 3.69e4 * x3
            + 7.72e8 / x1 * x2 ** 0.219 - 765.43e6 / x1)


def _gtcd4_c(x):
    return np.array([x[3] / x[1] ** 2 + 1.0 / x[1] ** 2 - 1.0])


def _gtcd4_jac(x):
    x2, x4 = x[1], x[3]
    return np.array([[0.0, -2.0 * (x4 + 1.0) / x2 ** 3, 0.0, 1.0 / x2 ** 2]])


def _pvd4_f(x):
    x1, x2, x3, x4 = x
    return 0.6224 * x1 * x3 * x4 + 1.7781 * x2 * x3 ** 2 + 3.1661 * x1 ** 2 * x4 + 19.84 * x1 ** 2 * x3


def _pvd4_c(x):
    x1, x2, x3, x4 = x
    return np.array([
        -x1 + 0.0193 * x3,
        -x2 + 0.00954 * x3,
        -math.pi * x3 ** 2 * x4 - 4.0 / 3.0 * math.pi * x3 ** 3 + 1296000.0,
    ])


def _sr7_f(x):
    x1, x2, x3, x4, x5, x6, x7 = x
    return (0.7854 * x1 * x2 ** 2 * (3.3333 * x3 ** 2 + 14.9334 * x3 - 43.0934)
            - 1.508 * x1 * (x6 ** 2 + x7 ** 2) + 7.477 * (x6 ** 3 + x7 ** 3)
            + 0.7854 * (x4 * x6 ** 2 + x5 * x7 ** 2))


def _sr7_grad(x):
    x1, x2, x3, x4, x5, x6, x7 = x
    q = 3.3333 * x3 ** 2 + 14.9334 * x3 - 43.0934
    return np.array([
        0.7854 * x2 ** 2 * q - 1.508 * (x6 ** 2 + x7 ** 2),
        2 * 0.7854 * x1 * x2 * q,
        0.7854 * x1 * x2 ** 2 * (2 * 3.3333 * x3 + 14.9334),
        0.7854 * x6 ** 2,
        0.7854 * x7 ** 2,
        -2 * 1.508 * x1 * x6 + 3 * 7.477 * x6 ** 2 + 2 * 0.7854 * x4 * x6,
        -2 * 1.508 * x1 * x7 + 3 * 7.477 * x7 ** 2 + 2 * 0.7854 * x5 * x7,
    ])


def _sr7_c(x):
    x1, x2, x3, x4, x5, x6, x7 = x
    return np.array([
        27.0 / (x1 * x2 ** 2 * x3) - 1,
        397.5 / (x1 * x2 ** 2 * x3 ** 2) - 1,
        1.93 * x4 ** 3 / (x2 * x3 * x6 ** 4) - 1,
        1.93 * x5 ** 3 / (x2 * x3 * x7 ** 4) - 1,
        math.sqrt((745.0 * x4 / (x2 * x3)) ** 2 + 16.9e6) / (110.0 * x6 ** 3) - 1,
        math.sqrt((745.0 * x5 / (x2 * x3)) ** 2 + 157.5e6) / (85.0 * x7 ** 3) - 1,
        x2 * x3 / 40.0 - 1,
        5.0 * x2 / x1 - 1,
        x1 / (12.0 * x2) - 1,
        (1.5 * x6 + 1.9) / x4 - 1,
        (1.1 * x7 + 1.9) / x5 - 1,
    ])


def _sr7_jac(x):
    x4, x5, x6, x7 = x[3], x[4], x[5], x[6]
    return np.array([
        [0, 0, 0, -(1.5 * x6 + 1.9) / x4 ** 2, 0, 1.5 / x4, 0],
        [0, 0, 0, 0, -(1.1 * x7 + 1.9) / x5 ** 2, 0, 1.1 / x5],
    ], dtype=float)


def _harley_f(x):
    return 6 * x[0] + 16 * x[1] + 10 * (x[4] + x[5]) - 9 * x[7] - 15 * x[8]


def _harley_c(x):
    a, b, px, py, cx, cy, q, X, Yp = x
    return np.array([
        a + b - px - py,
        q * (px + py) - 3 * a - b,
        X - px - cx,
        Yp - py - cy,
        q * px + 2 * cx - 2.5 * X,
        q * py + 2 * cy - 1.5 * Yp,
    ])


def _hs21_f(x):
    return 0.01 * x[0] ** 2 + x[1] ** 2 - 100.0


def _hs21_grad(x):
    return np.array([0.02 * x[0], 2.0 * x[1]])


def _hs21_c(x):
    return np.array([10.0 * x[0] - x[1]])


def _hs23_f(x):
    return x[0] ** 2 + x[1] ** 2


def _hs23_grad(x):
    return np.array([2.0 * x[0], 2.0 * x[1]])


def _hs23_c(x):
    x1, x2 = x
    return np.array([x1 + x2, x1 ** 2 + x2 ** 2, 9 * x1 ** 2 + x2 ** 2, x1 ** 2 - x2, x2 ** 2 - x1])


def _hs23_jac(x):
    return np.array([[1.0, 1.0], [2 * x[0], 2 * x[1]]])


def _entries():
    le = _le
    E = []
    E.append(BenchmarkEntry(
        "Harley", 9, _harley_f, _harley_c,
        (0.0, 0.0, 0.0, 0.0, -INF, -INF), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        (0,) * 6 + (1, 0, 0), (600, 600, 600, 200, 600, 200, 3, 600, 200),
        -600.0, (300.0, 0.0, 300.0, 0.0, 300.0, 0.0, 3.0, 600.0, 0.0),
        "Haverly pooling problem, enlarged demand case"))
    E.append(BenchmarkEntry(
        "WB4", 4, _wb4_f, _wb4_c, *le(6), (0.125, 0.1, 0.1, 0.1), (10.0, 10.0, 10.0, 10.0),
        1.7250, _REF["WB4"], "welded beam design"))
    E.append(BenchmarkEntry(
        "GTCD4", 4, _gtcd4_f, _gtcd4_c, *le(1), (20.0, 1.0, 20.0, 0.1), (50.0, 10.0, 50.0, 60.0),
        2964893.85, _REF["GTCD4"], "gas transmission compressor design",
        grey=GreySplit(False, None, (0,), _gtcd4_jac)))
    E.append(BenchmarkEntry(
        "PVD4", 4, _pvd4_f, _pvd4_c, *le(3), (0.0, 0.0, 0.0, 0.0), (1.0, 1.0, 50.0, 240.0),
        5804.45, _REF["PVD4"], "pressure vessel design"))
    E.append(BenchmarkEntry(
        "SR7", 7, _sr7_f, _sr7_c, *le(11), (2.6, 0.7, 17.0, 7.3, 7.3, 2.9, 5.0),
        (3.6, 0.8, 28.0, 8.3, 8.3, 3.9, 5.5), 2994.42, _REF["SR7"], "speed reducer design",
        grey=GreySplit(True, _sr7_grad, (9, 10), _sr7_jac)))
    E.append(BenchmarkEntry(
        "Hesse", 6, _hesse_f, _hesse_c, *le(6), (0.0, 0.0, 1.0, 0.0, 1.0, 0.0),
        (5.0, 4.0, 5.0, 6.0, 5.0, 10.0), -310.0, (5.0, 1.0, 5.0, 0.0, 5.0, 10.0),
        "Hesse (1973)", grey=GreySplit(True, _hesse_grad, (3, 4, 5), _hesse_jac)))
    E.append(BenchmarkEntry(
        "Gomez3", 2, _gomez_f, _gomez_c, *le(1), (-1.0, -1.0), (1.0, 1.0), -0.9711,
        _REF["Gomez3"], "Gomez and Levy (1982), problem 3"))
    E.append(BenchmarkEntry(
        "G3", 2, _g3_f, _g3_c, (1.0,), (1.0,), (0.0, 0.0), (1.0, 1.0), -1.0,
        (math.sqrt(0.5), math.sqrt(0.5)), "G3 with n = 2"))
    E.append(BenchmarkEntry(
        "G4", 5, _g4_f, _g4_c, *le(6), (78.0, 33.0, 27.0, 27.0, 27.0),
        (102.0, 45.0, 45.0, 45.0, 45.0), -30665.539, _REF["G4"], "G4"))
    E.append(BenchmarkEntry(
        "G6", 2, _g6_f, _g6_c, *le(2), (13.0, 0.0), (100.0, 100.0), -6961.8139,
        _REF["G6"], "G6"))
    E.append(BenchmarkEntry(
        "G7", 10, _g7_f, _g7_c, *le(8), (-10.0,) * 10, (10.0,) * 10, 24.3062, _REF["G7"], "G7"))
    E.append(BenchmarkEntry(
        "G8", 2, _g8_f, _g8_c, *le(2), (0.0, 0.0), (10.0, 10.0), -0.0958, _REF["G8"], "G8"))
    E.append(BenchmarkEntry(
        "G9", 7, _g9_f, _g9_c, *le(4), (-10.0,) * 7, (10.0,) * 7, 680.6301, _REF["G9"], "G9"))
    E.append(BenchmarkEntry(
        "G11", 2, _g11_f, _g11_c, (0.0,), (0.0,), (-1.0, -1.0), (1.0, 1.0), 0.75000455,
        (math.sqrt(0.5), 0.5), "G11"))
    E.append(BenchmarkEntry(
        "HS21", 2, _hs21_f, _hs21_c, (10.0,), (INF,), (2.0, -50.0), (50.0, 50.0), -99.96,
        (2.0, 0.0), "Hock-Schittkowski 21", grey=GreySplit(True, _hs21_grad, (), None),
        table="table4"))
    E.append(BenchmarkEntry(
        "HS23", 2, _hs23_f, _hs23_c, (1.0, 1.0, 9.0, 0.0, 0.0), (INF,) * 5, (-50.0, -50.0),
        (50.0, 50.0), 2.0, (1.0, 1.0), "Hock-Schittkowski 23",
        grey=GreySplit(True, _hs23_grad, (0, 1), _hs23_jac), table="table4"))
    return {e.name: e for e in E}


# reference optima computed once with a tight local solver and frozen here
_REF = {
    "WB4": (0.2057296398, 3.4704886656, 9.0366239104, 0.2057296398),
    "GTCD4": (50.0, 1.1785113, 24.6063553, 0.3888889),
    "PVD4": (0.72759093, 0.35964858, 37.69901189, 240.0),
    "SR7": (3.5, 0.7, 17.0, 7.3, 7.71531991, 3.35021467, 5.28665446),
    "Gomez3": (0.1092601317, -0.6234483519),
    "G4": (78.0, 33.0, 29.99525603, 45.0, 36.77581291),
    "G6": (14.095, 0.84296079),
    "G7": (2.1719963800, 2.3636829432, 8.7739257159, 5.0959843983, 0.9906547994,
           1.4305740734, 1.3216442300, 9.8287258282, 8.2800916290, 8.3759264958),
    "G8": (1.22797135, 4.24537337),
    "G9": (2.33049935, 1.95137236, -0.47754142, 4.36572624, -0.62448697, 1.03813099,
           1.59422680),
}

_REGISTRY = _entries()

ALIASES = {"gomez#3": "Gomez3", "gómez #3": "Gomez3", "gomez #3": "Gomez3", "gómez#3": "Gomez3",
           "gomez3": "Gomez3", "harley": "Harley", "haverly": "Harley"}

SUITES = {
    "table3": ("Harley", "WB4", "GTCD4", "PVD4", "SR7", "Hesse", "Gomez3", "G3", "G4", "G6",
               "G7", "G8", "G9", "G11"),
    "greybox": ("GTCD4", "SR7", "Hesse", "HS21", "HS23"),
}


def names():
    return tuple(_REGISTRY)


def get_entry(name):
    key = ALIASES.get(str(name).lower(), None)
    if key is None:
        key = next((k for k in _REGISTRY if k.lower() == str(name).lower()), str(name))
    try:
        return _REGISTRY[key]
    except KeyError:
        raise UnknownProblem(f"unknown problem {name!r}; known: {', '.join(_REGISTRY)}") from None


def get_problem(name, mode=BLACK_BOX):
    """Problem ``name`` with every function a black box or with its grey-box split.

    Examples
    --------
    >>> p = get_problem("G11")
    >>> p.n, p.q
    (2, 1)
    """
    return get_entry(name).problem(mode)


def suite(name):
    try:
        return SUITES[name]
    except KeyError:
        raise UnknownProblem(f"unknown suite {name!r}; known: {', '.join(SUITES)}") from None


def validate_reference(entry, x=None):
    """Check that the reference point attains the best known value feasibly.

    Parameters
    ----------
    entry : BenchmarkEntry or str
    x : array_like, optional
        Point to check instead of the stored reference.

    Returns
    -------
    dict
        ``name``, ``f``, ``cv`` and ``best_known``.

    Raises
    ------
    ValidationFailure
    """
    if isinstance(entry, str):
        entry = get_entry(entry)
    x = np.array(entry.reference if x is None else x, dtype=float)
    f = float(entry.f(x))
    z = np.asarray(entry.cons(x), dtype=float)
    cv = cv_of(z, np.array(entry.lc), np.array(entry.uc))
    inside = np.all(x >= np.array(entry.lx)) and np.all(x <= np.array(entry.ux))
    ok = (inside and cv <= FEASIBILITY_TOL
          and abs(f - entry.best_known) <= 1e-3 * (1.0 + abs(entry.best_known)))
    report = {"name": entry.name, "f": f, "cv": cv, "best_known": entry.best_known}
    if not ok:
        raise ValidationFailure(f"{entry.name}: reference gives f={f:.6g}, cv={cv:.3g}, "
                                f"expected {entry.best_known:.6g}")
    return report


def validate_all():
    return [validate_reference(e) for e in _REGISTRY.values()]


def finite_difference_check(entry, points=20, rng=None, rtol=1e-5):
    """Compare white-box derivatives with central differences.

    Returns the worst relative error found over ``points`` random interior
    points; raises :class:`ValidationFailure` when it exceeds ``rtol``.
    """
    if isinstance(entry, str):
        entry = get_entry(entry)
    if entry.grey is None:
        raise UnsupportedMode(f"{entry.name} has no grey-box configuration")
    prob = entry.problem("grey-box")
    rng = np.random.default_rng(rng)
    lx, ux = np.array(entry.lx), np.array(entry.ux)
    worst = 0.0
    for _ in range(points):
        x = lx + (ux - lx) * rng.uniform(0.05, 0.95, entry.n)
        funcs = []
        if prob.f_kind == WHITE_BOX:
            funcs.append((lambda y: np.atleast_1d(prob.f(y)), np.atleast_2d(prob.f_grad(x))))
        if prob.nh:
            funcs.append((lambda y: np.asarray(prob.h(y), dtype=float),
                          np.atleast_2d(prob.h_jac(x))))
        for fun, jac in funcs:
            fd = np.empty_like(jac)
            for j in range(entry.n):
                step = 1e-6 * max(1.0, abs(x[j]))
                e = np.zeros(entry.n)
                e[j] = step
                fd[:, j] = (fun(x + e) - fun(x - e)) / (2 * step)
            scale = np.maximum(np.abs(jac), np.abs(fd)).max(axis=1, keepdims=True) + 1e-12
            worst = max(worst, float(np.max(np.abs(jac - fd) / (1.0 + scale))))
    if worst > rtol:
        raise ValidationFailure(f"{entry.name}: derivative mismatch {worst:.2e}")
    return worst
