"""Small optimization kit: tableau simplex LP, minimization over products of
simplices, and gradient ascent on the complex unit sphere."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy import optimize as sciopt

log = logging.getLogger(__name__)

CAP = 1e6  # stand-in for +inf inside LPs, in log2 units

DEFAULT_RESTARTS = 32
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10000


class LPError(RuntimeError):
    pass


class LPInfeasible(LPError):
    pass


class LPUnbounded(LPError):
    pass


@dataclass(frozen=True)
class LinearProgram:
    """``sense`` c.x subject to A_ub x <= b_ub, A_eq x = b_eq, x >= 0."""

    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    sense: str = "max"

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.size
        object.__setattr__(self, "c", c)
        for a_name, b_name in (("A_ub", "b_ub"), ("A_eq", "b_eq")):
            a, b = getattr(self, a_name), getattr(self, b_name)
            if a is None:
                a, b = np.zeros((0, n)), np.zeros(0)
            a = np.atleast_2d(np.asarray(a, dtype=float))
            b = np.asarray(b, dtype=float).ravel()
            if a.size == 0:
                a = a.reshape(0, n)
            if a.shape[1] != n or a.shape[0] != b.size:
                raise ValueError(f"{a_name}/{b_name} have inconsistent dimensions")
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise ValueError("LP coefficients must be finite; cap infinities first")
            object.__setattr__(self, a_name, a)
            object.__setattr__(self, b_name, b)
        if not np.all(np.isfinite(c)):
            raise ValueError("LP objective must be finite")
        if self.sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def num_constraints(self) -> int:
        return self.A_ub.shape[0] + self.A_eq.shape[0]


@dataclass
class OptimizerReport:
    value: float
    argument: np.ndarray
    iterations: int
    converged: bool
    gap: float = 0.0
    certificate: dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Linear programming
# ---------------------------------------------------------------------------

_PIVOT_TOL = 1e-11


def _pivot(t: np.ndarray, r: int, c: int) -> None:
    t[r] /= t[r, c]
    col = t[:, c].copy()
    col[r] = 0.0
    t -= np.outer(col, t[r])


def _run_simplex(t: np.ndarray, basis: list[int], allowed: int, max_iter: int) -> int:
    """Minimize the objective in the last row of tableau ``t`` with Bland's rule.

    Columns ``>= allowed`` never enter. Returns iteration count.
    """
    m = t.shape[0] - 1
    for it in range(max_iter):
        cost = t[-1, :allowed]
        scale = max(1.0, np.abs(cost).max(initial=0.0))
        entering = np.flatnonzero(cost < -1e-10 * scale)
        if entering.size == 0:
            return it
        j = int(entering[0])
        col = t[:m, j]
        pos = col > _PIVOT_TOL
        if not pos.any():
            raise LPUnbounded("LP is unbounded")
        ratios = np.full(m, np.inf)
        ratios[pos] = t[:m, -1][pos] / col[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(t, r, j)
        basis[r] = j
    raise LPError(f"simplex did not terminate in {max_iter} pivots")


def _solve_tableau(lp: LinearProgram, max_iter: int) -> OptimizerReport:
    n = lp.num_vars
    a = np.vstack([lp.A_ub, lp.A_eq])
    b = np.concatenate([lp.b_ub, lp.b_eq])
    m_ub, m = lp.A_ub.shape[0], a.shape[0]
    # columns: structural | slack (one per inequality) | artificial (as needed)
    sign = np.where(b < 0, -1.0, 1.0)
    a = a * sign[:, None]
    b = b * sign
    slack = np.zeros((m, m_ub))
    slack[np.arange(m_ub), np.arange(m_ub)] = sign[:m_ub]
    needs_art = [i for i in range(m) if i >= m_ub or sign[i] < 0]
    art = np.zeros((m, len(needs_art)))
    for k, i in enumerate(needs_art):
        art[i, k] = 1.0
    n_struct = n + m_ub
    t = np.zeros((m + 1, n_struct + len(needs_art) + 1))
    t[:m, :n] = a
    t[:m, n:n_struct] = slack
    t[:m, n_struct:-1] = art
    t[:m, -1] = b
    basis = [-1] * m
    for i in range(m_ub):
        if sign[i] > 0:
            basis[i] = n + i
    for k, i in enumerate(needs_art):
        basis[i] = n_struct + k

    iters = 0
    if needs_art:
        t[-1, :] = 0.0
        t[-1, n_struct:-1] = 1.0
        for i in needs_art:
            t[-1] -= t[i]
        iters += _run_simplex(t, basis, t.shape[1] - 1, max_iter)
        if -t[-1, -1] > 1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
            raise LPInfeasible("LP is infeasible")
        # drive remaining artificials out of the basis, dropping redundant rows
        keep = []
        for r in range(m):
            if basis[r] >= n_struct:
                cand = np.flatnonzero(np.abs(t[r, :n_struct]) > 1e-9)
                if cand.size:
                    _pivot(t, r, int(cand[0]))
                    basis[r] = int(cand[0])
                    keep.append(r)
            else:
                keep.append(r)
        t = np.vstack([t[keep], t[-1:]])
        basis = [basis[r] for r in keep]
        t = np.hstack([t[:, :n_struct], t[:, -1:]])
        m = len(keep)

    cost = -lp.c if lp.sense == "max" else lp.c.copy()
    t[-1, :] = 0.0
    t[-1, :n] = cost
    for r, j in enumerate(basis):
        if t[-1, j] != 0.0:
            t[-1] -= t[-1, j] * t[r]
    iters += _run_simplex(t, basis, n_struct, max_iter)

    x = np.zeros(n_struct)
    for r, j in enumerate(basis):
        x[j] = t[r, -1]
    x = np.clip(x[:n], 0.0, None)
    value = float(lp.c @ x)
    return OptimizerReport(value=value, argument=x, iterations=iters, converged=True,
                           certificate={"basis": sorted(j for j in basis if j < n),
                                        "method": "tableau"})


def _solve_highs(lp: LinearProgram) -> OptimizerReport:
    c = -lp.c if lp.sense == "max" else lp.c
    res = sciopt.linprog(
        c,
        A_ub=lp.A_ub if lp.A_ub.size else None, b_ub=lp.b_ub if lp.A_ub.size else None,
        A_eq=lp.A_eq if lp.A_eq.size else None, b_eq=lp.b_eq if lp.A_eq.size else None,
        bounds=(0, None), method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status == 2:
        raise LPInfeasible("LP is infeasible")
    if res.status == 3:
        raise LPUnbounded("LP is unbounded")
    if res.status != 0:
        raise LPError(res.message)
    x = np.clip(res.x, 0.0, None)
    return OptimizerReport(value=float(lp.c @ x), argument=x, iterations=int(res.nit),
                           converged=True, certificate={"method": "highs"})


def solve_lp(lp: LinearProgram, method: str = "auto", max_iter: int = 50000) -> OptimizerReport:
    """Solve ``lp`` exactly.

    ``method='tableau'`` is the dense two-phase simplex with Bland's rule;
    ``'highs'`` delegates to scipy's HiGHS; ``'auto'`` uses the tableau for
    problems up to a few hundred variables and constraints.
    """
    if method == "auto":
        method = "tableau" if lp.num_vars <= 300 and lp.num_constraints <= 400 else "highs"
    if method == "tableau":
        return _solve_tableau(lp, max_iter)
    if method == "highs":
        return _solve_highs(lp)
    raise ValueError(f"unknown LP method {method!r}")


# ---------------------------------------------------------------------------
# Minimization over products of simplices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimplexProductDomain:
    sizes: tuple[int, ...]
    point: Optional[np.ndarray] = None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or min(sizes) < 1:
            raise ValueError("every simplex needs at least one vertex")
        object.__setattr__(self, "sizes", sizes)
        if self.point is not None:
            p = np.asarray(self.point, dtype=float)
            if p.size != sum(sizes):
                raise ValueError("point does not match the domain")
            for blk in self.split(p):
                if blk.min() < -1e-12 or abs(blk.sum() - 1) > 1e-9:
                    raise ValueError("point is not in the product of simplices")
            object.__setattr__(self, "point", p)

    @property
    def dim(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        o = self.offsets
        return [x[o[i]:o[i + 1]] for i in range(len(self.sizes))]

    def barycenter(self) -> np.ndarray:
        return np.concatenate([np.full(s, 1.0 / s) for s in self.sizes])

    def start(self) -> np.ndarray:
        return self.barycenter() if self.point is None else self.point.copy()

    def vertex(self, idx: Sequence[int]) -> np.ndarray:
        x = np.zeros(self.dim)
        for o, i in zip(self.offsets[:-1], idx):
            x[o + i] = 1.0
        return x

    def vertices(self):
        for idx in np.ndindex(*self.sizes):
            yield self.vertex(idx)

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.concatenate([_project_simplex(b) for b in self.split(x)])


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    return np.clip(v - css[rho] / (rho + 1), 0.0, None)


class MaxOfSmooth:
    """Pointwise maximum of smooth convex pieces.

    ``parts(x)`` returns ``(values, grads)`` with shapes (m,) and (m, dim).
    """

    def __init__(self, parts: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]):
        self.parts = parts

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        vals, grads = self.parts(x)
        i = int(np.argmax(vals))
        return float(vals[i]), grads[i]


def _linear_min(domain: SimplexProductDomain, g: np.ndarray) -> np.ndarray:
    return domain.vertex([int(np.argmin(b)) for b in domain.split(g)])


def _line_min(phi: Callable[[float], float], hi: float) -> float:
    res = sciopt.minimize_scalar(phi, bounds=(0.0, hi), method="bounded",
                                 options={"xatol": 1e-12 * max(hi, 1e-12)})
    return float(res.x) if phi(res.x) <= phi(0.0) else 0.0


def _frank_wolfe(f, domain, x, tol, max_iter, step):
    val, g = f(x)
    gap = np.inf
    k = 0
    stalled = 0
    for k in range(max_iter):
        s = _linear_min(domain, g)
        gap = float(g @ (x - s))
        if gap <= tol or stalled >= 5:
            break
        if step == "open-loop":
            d, gamma = s - x, 2.0 / (k + 2)
        else:
            # away-step variant with exact line search; linear convergence
            # for strongly convex objectives on polytopes
            blocks = domain.split(x)
            gblocks = domain.split(g)
            away_idx = []
            for b, gb in zip(blocks, gblocks):
                support = np.flatnonzero(b > 1e-15)
                away_idx.append(int(support[np.argmax(gb[support])]))
            v = domain.vertex(away_idx)
            d_fw, d_aw = s - x, x - v
            if g @ d_fw <= g @ d_aw:
                d, hi = d_fw, 1.0
            else:
                alphas = np.array([b[i] for b, i in zip(blocks, away_idx)])
                with np.errstate(divide="ignore"):
                    lim = np.where(alphas < 1.0, alphas / (1.0 - alphas), np.inf)
                d, hi = d_aw, float(min(lim.min(), 1e6))
            gamma = _line_min(lambda t: f(x + t * d)[0], hi)
            if gamma == 0.0 and d is d_aw:
                d, gamma = d_fw, _line_min(lambda t: f(x + t * d_fw)[0], 1.0)
        x = domain.project(x + gamma * d) if step != "open-loop" else x + gamma * d
        prev = val
        val, g = f(x)
        # the gap can sit below what the line search resolves in floating point
        stalled = stalled + 1 if step != "open-loop" and val >= prev else 0
    s = _linear_min(domain, g)
    gap = float(g @ (x - s))
    return x, val, k + 1, max(gap, 0.0)


def _linearization_bound(f: MaxOfSmooth, domain: SimplexProductDomain, x: np.ndarray) -> float:
    """Certified lower bound on min f: minimize the max of the pieces' tangent planes."""
    vals, grads = f.parts(x)
    dim = domain.dim
    # variables: w (dim), s = s_plus - s_minus ; minimize s
    c = np.zeros(dim + 2)
    c[dim], c[dim + 1] = 1.0, -1.0
    # vals_i + g_i.(w - x) <= s  ->  g_i.w - s <= g_i.x - vals_i
    a_ub = np.hstack([grads, -np.ones((len(vals), 1)), np.ones((len(vals), 1))])
    b_ub = grads @ x - vals
    a_eq = np.zeros((len(domain.sizes), dim + 2))
    for i, (o, sz) in enumerate(zip(domain.offsets[:-1], domain.sizes)):
        a_eq[i, o:o + sz] = 1.0
    if not (np.all(np.isfinite(a_ub)) and np.all(np.isfinite(b_ub))):
        return -np.inf
    lp = LinearProgram(c, a_ub, b_ub, a_eq, np.ones(len(domain.sizes)), sense="min")
    for method in ("auto", "highs"):
        try:
            return solve_lp(lp, method=method).value
        except LPError:
            continue
    # badly scaled tangent planes: no certificate
    return -np.inf


def _epigraph_polish(f: MaxOfSmooth, domain: SimplexProductDomain, x0: np.ndarray,
                     tol: float, max_iter: int) -> np.ndarray:
    dim = domain.dim
    s0 = float(np.max(f.parts(x0)[0]))
    cons = [
        {"type": "ineq",
         "fun": lambda z: z[-1] - f.parts(z[:-1])[0],
         "jac": lambda z: np.hstack([-f.parts(z[:-1])[1], np.ones((len(f.parts(z[:-1])[0]), 1))])},
    ]
    for o, sz in zip(domain.offsets[:-1], domain.sizes):
        row = np.zeros(dim + 1)
        row[o:o + sz] = 1.0
        cons.append({"type": "eq", "fun": lambda z, r=row: r @ z - 1.0, "jac": lambda z, r=row: r})
    obj_grad = np.zeros(dim + 1)
    obj_grad[-1] = 1.0
    res = sciopt.minimize(lambda z: z[-1], np.append(x0, s0), jac=lambda z: obj_grad,
                          constraints=cons, bounds=[(0.0, 1.0)] * dim + [(None, None)],
                          method="SLSQP", options={"ftol": min(tol, 1e-12), "maxiter": max_iter})
    return domain.project(res.x[:dim])


def _smooth_polish(f, domain: SimplexProductDomain, x0: np.ndarray, tol: float) -> np.ndarray:
    """SLSQP warm start for Frank-Wolfe; FW still supplies the certified gap."""
    cons = []
    for o, sz in zip(domain.offsets[:-1], domain.sizes):
        row = np.zeros(domain.dim)
        row[o:o + sz] = 1.0
        cons.append({"type": "eq", "fun": lambda z, r=row: r @ z - 1.0, "jac": lambda z, r=row: r})
    try:
        res = sciopt.minimize(lambda z: f(z)[0], x0, jac=lambda z: f(z)[1], constraints=cons,
                              bounds=[(0.0, 1.0)] * domain.dim, method="SLSQP",
                              options={"ftol": min(tol, 1e-12), "maxiter": 500})
    except (ValueError, FloatingPointError):
        return x0
    x = domain.project(res.x)
    return x if np.isfinite(f(x)[0]) and f(x)[0] <= f(x0)[0] else x0


def minimize_convex_on_simplices(
    f: Callable[[np.ndarray], tuple[float, np.ndarray]],
    domain: SimplexProductDomain,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    smooth: Optional[bool] = None,
    step: str = "line",
) -> OptimizerReport:
    """Minimize a convex function over a product of simplices.

    ``f(x)`` returns ``(value, subgradient)``. Smooth objectives use
    Frank-Wolfe (``step='open-loop'`` gives the classic 2/(k+2) rule,
    ``'line'`` away steps with exact line search) and report the
    Frank-Wolfe gap. Nonsmooth objectives use projected subgradient steps
    c/sqrt(k) with averaging; when ``f`` is a :class:`MaxOfSmooth` the
    result is polished on the epigraph and the gap is certified by the
    tangent-plane LP. Non-convergence is reported, never raised.
    """
    if smooth is None:
        smooth = not isinstance(f, MaxOfSmooth)
    x = domain.start()
    if smooth:
        if step == "line":
            x = _smooth_polish(f, domain, x, tol)
        x, val, iters, gap = _frank_wolfe(f, domain, x, tol, max_iter, step)
        return OptimizerReport(value=float(val), argument=x, iterations=iters,
                               converged=gap <= tol, gap=gap,
                               certificate={"frank_wolfe_gap": gap})

    best_x, best_val = x.copy(), f(x)[0]
    avg, weight = np.zeros_like(x), 0.0
    n_sub = max_iter if not isinstance(f, MaxOfSmooth) else min(max_iter, 2000)
    diam = np.sqrt(2.0 * len(domain.sizes))
    for k in range(1, n_sub + 1):
        val, g = f(x)
        if val < best_val:
            best_x, best_val = x.copy(), val
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        eta = diam / (gn * np.sqrt(k))
        x = domain.project(x - eta * g)
        avg += eta * x
        weight += eta
    xa = avg / weight if weight else x
    va = f(xa)[0]
    if va < best_val:
        best_x, best_val = xa, va
    iters = k
    gap = np.nan
    if isinstance(f, MaxOfSmooth):
        xp = _epigraph_polish(f, domain, best_x, tol, max_iter)
        vp = f(xp)[0]
        if vp < best_val:
            best_x, best_val = xp, vp
        lower = _linearization_bound(f, domain, best_x)
        gap = max(best_val - lower, 0.0)
    return OptimizerReport(value=float(best_val), argument=best_x, iterations=iters,
                           converged=bool(gap <= max(tol, 1e-7)) if np.isfinite(gap) else False,
                           gap=gap, certificate={"lower_bound": best_val - gap})


# ---------------------------------------------------------------------------
# Ascent on the unit sphere
# ---------------------------------------------------------------------------

def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _ascend(f, grad, psi, tol, max_iter):
    val = f(psi)
    eta = 1.0
    it = 0
    for it in range(max_iter):
        if not np.isfinite(val):
            break
        g = grad(psi)
        g = g - np.real(np.vdot(psi, g)) * psi
        gn2 = float(np.real(np.vdot(g, g)))
        if gn2 < tol ** 2:
            break
        eta *= 2.0
        while True:
            cand = _normalize(psi + eta * g)
            cval = f(cand)
            if cval >= val + 1e-4 * eta * gn2 or eta < 1e-14:
                break
            eta /= 2.0
        if cval <= val:
            break
        improvement = cval - val
        psi, val = cand, cval
        if improvement < tol * max(1.0, abs(val)) * 1e-3:
            break
    return psi, val, it + 1


def maximize_on_sphere(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    dim: int,
    restarts: int = DEFAULT_RESTARTS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    max_iter: int = 500,
    starts: Sequence[np.ndarray] = (),
) -> OptimizerReport:
    """Best local maximum of ``f`` over unit vectors in C^dim.

    ``grad(psi)`` must return g with df = Re<g, dpsi>. Each random restart
    draws from its own (seed, index) stream; ``starts`` adds deterministic
    starting points evaluated before the random ones.
    """
    candidates = [_normalize(np.asarray(s, dtype=complex)) for s in starts]
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        candidates.append(_normalize(rng.standard_normal(dim) + 1j * rng.standard_normal(dim)))
    best = None
    total = 0
    start_values = []
    for psi0 in candidates:
        start_values.append(f(psi0))
        psi, val, it = _ascend(f, grad, psi0, tol, max_iter)
        total += it
        if best is None or val > best[1]:
            best = (psi, val)
        if val == np.inf:
            break
    psi, val = best
    return OptimizerReport(value=float(val), argument=psi, iterations=total,
                           converged=total < max_iter * len(candidates),
                           certificate={"start_values": start_values})
