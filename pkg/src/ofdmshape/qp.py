"""Box-constrained convex quadratic programs over real variables.

Minimize f(x) = x^T Q x + q^T x + c subject to |x_i| <= bound_i.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

__all__ = ["BoxQP", "SolverError", "solve_box_qp", "complex_energy_qp"]

# largest program handed to the dense active-set stage
_EXACT_LIMIT = 3000


class SolverError(RuntimeError):
    """The solver ran out of iterations; carries the best iterate found."""

    def __init__(self, message, x=None, residual=None):
        super().__init__(message)
        self.x = x
        self.residual = residual


@dataclass(frozen=True, eq=False)
class BoxQP:
    quadratic: np.ndarray
    linear: np.ndarray
    constant: float = 0.0
    bound: object = np.sqrt(2.0)

    def __post_init__(self):
        Q = np.asarray(self.quadratic, dtype=float)
        q = np.asarray(self.linear, dtype=float).reshape(-1)
        if Q.ndim != 2 or Q.shape != (q.size, q.size):
            raise ValueError(f"quadratic of shape {Q.shape} does not match linear of size {q.size}")
        # symmetrize; assembly by Re(A^H Phi A) is symmetric only up to rounding
        Q = 0.5 * (Q + Q.T)
        b = np.broadcast_to(np.asarray(self.bound, dtype=float), q.shape).copy()
        if np.any(b <= 0):
            raise ValueError("box bounds must be positive")
        object.__setattr__(self, "quadratic", Q)
        object.__setattr__(self, "linear", q)
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "bound", b)

    @property
    def size(self) -> int:
        return self.linear.size

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ (self.quadratic @ x) + self.linear @ x + self.constant)

    def gradient(self, x) -> np.ndarray:
        return 2.0 * (self.quadratic @ x) + self.linear

    def project(self, x) -> np.ndarray:
        return np.clip(x, -self.bound, self.bound)

    def projected_gradient(self, x) -> np.ndarray:
        return x - self.project(x - self.gradient(x))

    def __add__(self, other: "BoxQP") -> "BoxQP":
        if not np.array_equal(self.bound, other.bound):
            raise ValueError("cannot add programs with different boxes")
        return BoxQP(self.quadratic + other.quadratic, self.linear + other.linear,
                     self.constant + other.constant, self.bound)


def complex_energy_qp(gram: np.ndarray, cross: np.ndarray, base: float, bound) -> BoxQP:
    """Real QP of the energy (p + A x)^H Phi (p + A x) for real x.

    ``gram`` is A^H Phi A, ``cross`` is A^H Phi p and ``base`` is p^H Phi p.
    """
    return BoxQP(np.real(gram), 2.0 * np.real(cross), float(np.real(base)), bound)


def _newton_direction(Q, g, free, ridge):
    d = np.zeros_like(g)
    if not free.any():
        return d
    H = Q[np.ix_(free, free)]
    rhs = -0.5 * g[free]
    n = H.shape[0]
    H = H + ridge * np.eye(n)
    try:
        cf = scipy.linalg.cho_factor(H, check_finite=False)
        d[free] = scipy.linalg.cho_solve(cf, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        d[free] = scipy.linalg.lstsq(H, rhs, check_finite=False)[0]
    return d


def _bounded_least_squares(qp: BoxQP) -> np.ndarray:
    """Exact active-set solve after writing f as ||R x + r||^2 + const.

    The factor comes from an eigendecomposition with the numerically null
    directions dropped; q has no component there for an energy
    (b + B x)^H G (b + B x), so nothing is lost.
    """
    lam, V = np.linalg.eigh(qp.quadratic)
    keep = lam > max(lam[-1], 0.0) * 1e-15
    if not keep.any():
        return qp.project(-np.sign(qp.linear) * qp.bound)
    root = np.sqrt(lam[keep])
    R = root[:, None] * V[:, keep].T
    r = (V[:, keep].T @ qp.linear) / (2.0 * root)
    res = scipy.optimize.lsq_linear(R, -r, bounds=(-qp.bound, qp.bound), method="bvls", tol=1e-15,
                                    max_iter=20 * qp.size)
    return qp.project(res.x)


def _change(qp: BoxQP, x, xt) -> float:
    """f(xt) - f(x), free of the cancellation in differencing two objective values."""
    s = xt - x
    return float(qp.gradient(x) @ s + s @ (qp.quadratic @ s))


def _accelerated_gradient(qp: BoxQP, x0, tol, scale, max_iter):
    """Nesterov-accelerated projected gradient (FISTA with restarts)."""
    Q = qp.quadratic
    lip = 2.0 * max(np.linalg.eigvalsh(Q)[-1], np.finfo(float).tiny)
    x = qp.project(x0)
    y, t = x.copy(), 1.0
    res = np.inf
    for _ in range(max_iter):
        x_new = qp.project(y - qp.gradient(y) / lip)
        df = _change(qp, x, x_new)
        if df > 0:
            # adaptive restart keeps the sequence monotone
            y, t = x.copy(), 1.0
            continue
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        res = np.abs(qp.projected_gradient(x)).max()
        if res <= tol * scale:
            return x, res, True
    return x, np.abs(qp.projected_gradient(x)).max(), False


def solve_box_qp(qp: BoxQP, tol: float = 1e-9, *, x0=None, max_newton: int = 200,
                 max_iter: int = 50_000) -> np.ndarray:
    """Minimize a convex box-constrained QP.

    Projected Newton with an Armijo search along the projection arc; the
    Newton system uses a ridge of 1e-12 trace(Q)/n so rank-deficient
    programs pick the small-norm solution.  If the active set does not
    settle, a bounded-variable least-squares solve (scipy's BVLS) takes
    over, and an accelerated projected-gradient run after that.

    Convergence means ``max |x - P(x - grad f(x))| <= tol (1 + |q|_inf)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = qp.size
    if n == 0:
        return np.zeros(0)
    Q, lo, hi = qp.quadratic, -qp.bound, qp.bound
    scale = 1.0 + np.abs(qp.linear).max()
    ridge = 1e-12 * max(np.trace(Q), 0.0) / n
    x = np.zeros(n) if x0 is None else qp.project(np.asarray(x0, dtype=float))
    for _ in range(max_newton):
        g = qp.gradient(x)
        pg = x - np.clip(x - g, lo, hi)
        res = np.abs(pg).max()
        if res <= tol * scale:
            return x
        eps = min(1e-3, res)
        binding = ((x <= lo + eps) & (g > 0)) | ((x >= hi - eps) & (g < 0))
        d = _newton_direction(Q, g, ~binding, ridge)
        # binding variables follow the scaled gradient and get clipped
        d[binding] = -g[binding]
        step = 1.0
        accepted = False
        while step > 1e-20:
            xt = np.clip(x + step * d, lo, hi)
            s = xt - x
            if g @ s + s @ (Q @ s) <= 1e-4 * (g @ s):
                accepted = True
                break
            step *= 0.5
        if not accepted or np.array_equal(xt, x):
            break
        x = xt
    if n <= _EXACT_LIMIT:
        # near-singular programs defeat the Newton steps; solve the active set exactly
        xe = _bounded_least_squares(qp)
        if np.abs(qp.projected_gradient(xe)).max() <= tol * scale:
            return xe
        if qp.objective(xe) < qp.objective(x):
            x = xe
    x, res, ok = _accelerated_gradient(qp, x, tol, scale, max_iter)
    if not ok:
        raise SolverError(f"box QP not converged: projected-gradient residual {res:.3e}", x, res)
    return x
