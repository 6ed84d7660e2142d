"""Dense linear algebra and small-scale numerics.

Everything in this module operates on plain ``numpy`` arrays a few dozen
entries across. The heavy lifting (eigenvalues, singular values, least
squares) is delegated to LAPACK through numpy; this module pins down the
conventions the rest of the package relies on: eigenvalue ordering,
rank/null-space tolerances, finite-difference step policies, and a
fixed-step integrator whose output is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BlowUpError,
    ConfigurationError,
    ConvergenceError,
    DimensionError,
)

MAX_DIM = 64
DEFAULT_RANK_TOL = 1e-9
_CONJUGATE_TOL = 1e-9


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a real matrix, descending by real part then imaginary part."""

    values: tuple[complex, ...]

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @property
    def real_parts(self):
        return tuple(v.real for v in self.values)

    @property
    def leading_real(self):
        """Largest real part; the decisive quantity for linear stability."""
        return max(v.real for v in self.values)

    @property
    def spectral_radius(self):
        return max(abs(v) for v in self.values)

    def is_stable(self, tol=0.0):
        return all(v.real < -tol for v in self.values)

    @classmethod
    def from_values(cls, values):
        vals = [complex(v) for v in values]
        vals.sort(key=lambda c: (-c.real, -c.imag))
        spec = cls(tuple(vals))
        spec._check_conjugate_pairing()
        return spec

    def _check_conjugate_pairing(self):
        scale = max(1.0, max((abs(v) for v in self.values), default=0.0))
        tol = _CONJUGATE_TOL * scale
        unmatched = [v for v in self.values if abs(v.imag) > tol]
        while unmatched:
            v = unmatched.pop()
            best = None
            for i, w in enumerate(unmatched):
                if abs(w - v.conjugate()) <= tol:
                    best = i
                    break
            if best is None:
                raise ConvergenceError(
                    f"complex eigenvalue {v} lacks a conjugate partner within {tol:g}"
                )
            unmatched.pop(best)


def _as_matrix(m):
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise DimensionError("matrix entries must be finite")
    return a


def eigenvalues(m):
    """All eigenvalues of a square matrix, as a :class:`Spectrum`."""
    a = _as_matrix(m)
    rows, cols = a.shape
    if rows != cols:
        raise DimensionError(f"eigenvalues requires a square matrix, got {rows}x{cols}")
    if rows > MAX_DIM:
        raise DimensionError(f"matrix dimension {rows} exceeds the supported {MAX_DIM}")
    if rows == 0:
        return Spectrum(())
    return Spectrum.from_values(np.linalg.eigvals(a))


def rank_tol(m, tol=DEFAULT_RANK_TOL):
    """Numerical rank: singular values above ``tol`` times the largest one."""
    if tol <= 0:
        raise ConfigurationError("rank tolerance must be positive")
    a = _as_matrix(m)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def left_nullspace(m, tol=DEFAULT_RANK_TOL):
    """Orthonormal basis of the left null space, returned as matrix columns.

    The basis ``B`` satisfies ``||B.T @ m|| <= tol * ||m||`` and has
    ``rows - rank`` columns.
    """
    if tol <= 0:
        raise ConfigurationError("null-space tolerance must be positive")
    a = _as_matrix(m)
    u, s, _ = np.linalg.svd(a)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return u[:, rank:].copy()


def kron_I2(m):
    """Kronecker product with the 2x2 identity, doubling both dimensions."""
    a = _as_matrix(m)
    return np.kron(a, np.eye(2))


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual: float


def newton_root(f, x0, max_iter=50, tol=1e-12, jac=None):
    """Newton iteration for ``f(x) = 0`` with a least-squares step.

    The least-squares solve makes the iteration usable on systems with a
    continuous symmetry (rank-deficient Jacobians), where it converges to
    the nearest point of the solution set. The Jacobian comes from central
    finite differences unless an analytic ``jac`` is supplied.

    Returns a :class:`NewtonResult`; raises :class:`ConvergenceError`
    carrying the last iterate if the residual fails to reach ``tol``
    within ``max_iter`` steps or the iteration leaves the finite range.
    """
    scalar_input = np.isscalar(x0) or np.asarray(x0).ndim == 0
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()

    def fun(v):
        return np.atleast_1d(np.asarray(f(v[0] if scalar_input else v), dtype=float))

    res = float(np.max(np.abs(fun(x))))
    scale0 = max(1.0, float(np.max(np.abs(x))))
    for it in range(1, max_iter + 1):
        if res <= tol:
            out = x[0] if scalar_input else x
            return NewtonResult(x=out, iterations=it - 1, residual=res)
        J = jac(x[0] if scalar_input else x) if jac is not None else fd_jacobian(fun, x)
        J = np.atleast_2d(np.asarray(J, dtype=float))
        step, *_ = np.linalg.lstsq(J, -fun(x), rcond=None)
        x = x + step
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > 1e8 * scale0:
            raise ConvergenceError(
                "newton iteration diverged",
                last_iterate=x[0] if scalar_input else x,
                iterations=it,
            )
        res = float(np.max(np.abs(fun(x))))
    if res <= tol:
        out = x[0] if scalar_input else x
        return NewtonResult(x=out, iterations=max_iter, residual=res)
    raise ConvergenceError(
        f"newton iteration did not reach tol={tol:g} in {max_iter} steps "
        f"(residual {res:.3e})",
        last_iterate=x[0] if scalar_input else x,
        iterations=max_iter,
    )


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    final_residual: float

    @property
    def final_state(self):
        return self.states[-1]


def integrate_ode(f, x0, t_end, step=1e-3, method="rk4"):
    """Fixed-step integration of ``xdot = f(x)`` from 0 to ``t_end``.

    Only the classical 4th-order scheme is provided; the fixed step keeps
    trajectories deterministic so they can serve as golden fixtures. The
    final state's vector-field norm is reported on the result. A
    non-finite state aborts with :class:`BlowUpError` carrying the time.
    """
    if method != "rk4":
        raise ConfigurationError(f"unknown integration method {method!r}")
    if step <= 0:
        raise ConfigurationError("integration step must be positive")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()

    def fun(v):
        return np.atleast_1d(np.asarray(f(v), dtype=float))

    n_full, rem = divmod(float(t_end), step)
    steps = [step] * int(n_full)
    if rem > 1e-12 * max(1.0, abs(float(t_end))):
        steps.append(rem)
    times = [0.0]
    states = [x.copy()]
    t = 0.0
    for h in steps:
        k1 = fun(x)
        k2 = fun(x + 0.5 * h * k1)
        k3 = fun(x + 0.5 * h * k2)
        k4 = fun(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
        if not np.all(np.isfinite(x)):
            raise BlowUpError(f"trajectory left the finite range at t={t:.6g}", time=t)
        times.append(t)
        states.append(x.copy())
    final_residual = float(np.max(np.abs(fun(x))))
    return Trajectory(
        times=np.asarray(times), states=np.asarray(states), final_residual=final_residual
    )


def fd_steps(x, h):
    """Per-coordinate central-difference steps, scaled by coordinate size."""
    return h * np.maximum(1.0, np.abs(x))


def fd_jacobian(f, x, h=1e-6):
    """Central-difference Jacobian with coordinate-scaled steps."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    steps = fd_steps(x, h)
    cols = []
    for j in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[j] += steps[j]
        xm[j] -= steps[j]
        fp = np.atleast_1d(np.asarray(f(xp), dtype=float))
        fm = np.atleast_1d(np.asarray(f(xm), dtype=float))
        cols.append((fp - fm) / (2.0 * steps[j]))
    return np.column_stack(cols)


def fd_second_directional(f, x, v, h=1e-4):
    """Second directional derivative ``d^2/dt^2 f(x + t v)`` at ``t = 0``.

    ``v`` should be unit length; the step is scaled by the largest
    coordinate of ``x`` so the stencil stays well conditioned on states
    that are not order one.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    hh = h * max(1.0, float(np.max(np.abs(x))))
    f0 = np.atleast_1d(np.asarray(f(x), dtype=float))
    fp = np.atleast_1d(np.asarray(f(x + hh * v), dtype=float))
    fm = np.atleast_1d(np.asarray(f(x - hh * v), dtype=float))
    return (fp - 2.0 * f0 + fm) / (hh * hh)
