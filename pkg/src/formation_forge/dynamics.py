"""Decentralized control laws and the formation vector field.

The dynamics move every agent along its outgoing edge vectors, weighted
by a scalar feedback ``u`` of the edge's length error. The same flow can
be written in agent coordinates (``F_x``, dimension 2n) or edge
coordinates (``F_z``, dimension 2m); the edge form is the one whose
Jacobian factors in closed form at design equilibria, which is what the
singularity and bifurcation analyses lean on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    ConfigurationError,
    FormulaDomainError,
    InconsistentStateError,
    UnknownLawError,
)
from .graph import FormationGraph, edge_adjacency, mixed_adjacency
from .numkernel import kron_I2, left_nullspace
from .rigidity import TargetLengths, edge_block_rows

BUILTIN_LAW_NAMES = ("gradient_squared", "gradient_plain", "eq1_plain")

_EQUILIBRIUM_ERROR_TOL = 1e-8
_CYCLE_TOL = 1e-6


class ControlLaw:
    """Scalar edge feedback ``u(d; length)`` with derivative hooks.

    ``weight`` and its derivatives receive the stored squared target ``d``
    and the squared current length ``s2``; working in squared quantities
    keeps the chain rule through ``s2 = z.z`` uniform across conventions.
    Compatibility requires the weight to vanish exactly when the edge
    error does.

    Two-coleader agents evaluate their pair of weights through
    ``pair_weights``, which also receives the inner product of the two
    edge vectors so laws may couple the pair. The built-in laws are
    separable (each weight depends on its own edge only), which is also
    the regime where the analytic Jacobian factorizations are exact.
    """

    name = "abstract"
    convention = "squared"
    separable = True

    def __init__(self, gain=1.0):
        if gain <= 0:
            raise ConfigurationError("law gain must be positive")
        self.gain = float(gain)

    def weight(self, d, s2):
        raise NotImplementedError

    def weight_dlen(self, d, s2):
        """Derivative of the weight in the squared current length."""
        raise NotImplementedError

    def weight_dtarget(self, d, s2):
        """Derivative of the weight in the stored squared target."""
        raise NotImplementedError

    def weight_dlen2(self, d, s2):
        """Second derivative of the weight in the squared current length."""
        raise NotImplementedError

    def pair_weights(self, d_pair, s2_pair, s):
        return (
            self.weight(d_pair[0], s2_pair[0]),
            self.weight(d_pair[1], s2_pair[1]),
        )

    def pair_cross(self, d_pair, s2_pair, s):
        """Cross derivatives (du_a/ds2_b, du_b/ds2_a) for a coupled pair."""
        return (0.0, 0.0)

    def __repr__(self):
        return f"{type(self).__name__}(gain={self.gain})"


class GradientSquaredLaw(ControlLaw):
    """Weight equal to the squared-length error: ``u = gain * (|z|^2 - d)``."""

    name = "gradient_squared"
    convention = "squared"

    def weight(self, d, s2):
        return self.gain * (np.asarray(s2, dtype=float) - d)

    def weight_dlen(self, d, s2):
        return self.gain * np.ones_like(np.asarray(s2, dtype=float))

    def weight_dtarget(self, d, s2):
        return -self.gain * np.ones_like(np.asarray(s2, dtype=float))

    def weight_dlen2(self, d, s2):
        return np.zeros_like(np.asarray(s2, dtype=float))


class GradientPlainLaw(ControlLaw):
    """Weight equal to the plain-length error: ``u = gain * (|z| - sqrt(d))``."""

    name = "gradient_plain"
    convention = "plain"

    def __init__(self, gain=1.0, sign=1.0):
        super().__init__(gain)
        self._sign = float(sign)

    def weight(self, d, s2):
        return self._sign * self.gain * (np.sqrt(np.asarray(s2, dtype=float)) - np.sqrt(d))

    def weight_dlen(self, d, s2):
        s2 = np.asarray(s2, dtype=float)
        return self._sign * self.gain / (2.0 * np.sqrt(s2))

    def weight_dtarget(self, d, s2):
        d = np.asarray(d, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        return -self._sign * self.gain / (2.0 * np.sqrt(d)) * np.ones_like(s2)

    def weight_dlen2(self, d, s2):
        s2 = np.asarray(s2, dtype=float)
        return -self._sign * self.gain / (4.0 * s2**1.5)


class Eq1PlainLaw(GradientPlainLaw):
    """Literal transcription of the plain-error law with its printed sign.

    As printed the coefficient pushes agents away from their targets, so
    every design equilibrium repels; the ``sign_corrected`` toggle flips
    the orientation, after which the law coincides with
    :class:`GradientPlainLaw`. Both variants are kept so the published
    form stays reproducible exactly as stated.
    """

    name = "eq1_plain"
    convention = "plain"

    def __init__(self, gain=1.0, sign_corrected=False):
        super().__init__(gain, sign=1.0 if sign_corrected else -1.0)
        self.sign_corrected = bool(sign_corrected)


class CustomLaw(ControlLaw):
    """User-supplied weight function with finite-difference derivatives.

    ``func(d, s2)`` must return the scalar weight. Derivative hooks fall
    back to central differences with the shared step policy, which is
    accurate enough for the second-derivative quantities the bifurcation
    tests need. An optional ``pair_func(d_pair, s2_pair, s)`` makes the
    law non-separable; its cross derivatives are also finite differences.
    """

    def __init__(self, func, name="custom", gain=1.0, convention="squared", pair_func=None):
        super().__init__(gain)
        if convention not in ("squared", "plain"):
            raise ConfigurationError(f"unknown law convention {convention!r}")
        self.name = name
        self.convention = convention
        self._func = func
        self._pair = pair_func
        self.separable = pair_func is None

    def weight(self, d, s2):
        f = np.vectorize(lambda a, b: float(self._func(a, b)))
        return f(d, s2)

    def _step(self, v):
        return 1e-6 * max(1.0, abs(float(v)))

    def weight_dlen(self, d, s2):
        def one(a, b):
            h = self._step(b)
            return (self._func(a, b + h) - self._func(a, b - h)) / (2.0 * h)

        return np.vectorize(one)(d, s2)

    def weight_dtarget(self, d, s2):
        def one(a, b):
            h = self._step(a)
            return (self._func(a + h, b) - self._func(a - h, b)) / (2.0 * h)

        return np.vectorize(one)(d, s2)

    def weight_dlen2(self, d, s2):
        def one(a, b):
            h = 1e-4 * max(1.0, abs(float(b)))
            return (self._func(a, b + h) - 2.0 * self._func(a, b) + self._func(a, b - h)) / (
                h * h
            )

        return np.vectorize(one)(d, s2)

    def pair_weights(self, d_pair, s2_pair, s):
        if self._pair is None:
            return super().pair_weights(d_pair, s2_pair, s)
        ua, ub = self._pair(d_pair, s2_pair, s)
        return float(ua), float(ub)

    def pair_cross(self, d_pair, s2_pair, s):
        if self._pair is None:
            return (0.0, 0.0)
        ha = self._step(s2_pair[1])
        hb = self._step(s2_pair[0])
        up = self._pair(d_pair, (s2_pair[0], s2_pair[1] + ha), s)[0]
        um = self._pair(d_pair, (s2_pair[0], s2_pair[1] - ha), s)[0]
        vp = self._pair(d_pair, (s2_pair[0] + hb, s2_pair[1]), s)[1]
        vm = self._pair(d_pair, (s2_pair[0] - hb, s2_pair[1]), s)[1]
        return ((up - um) / (2.0 * ha), (vp - vm) / (2.0 * hb))


def builtin_law(name, gain=1.0, sign_corrected=False):
    """Construct one of the built-in laws by name."""
    if name == "gradient_squared":
        return GradientSquaredLaw(gain)
    if name == "gradient_plain":
        return GradientPlainLaw(gain)
    if name == "eq1_plain":
        return Eq1PlainLaw(gain, sign_corrected=sign_corrected)
    raise UnknownLawError(
        f"unknown control law {name!r}; built-ins are {', '.join(BUILTIN_LAW_NAMES)}"
    )


@lru_cache(maxsize=32)
def _graph_matrices(g: FormationGraph):
    mixed = mixed_adjacency(g)
    return {
        "mixed": mixed,
        "mixed2": kron_I2(mixed),
        "edge_adj": edge_adjacency(g),
        "edge_adj2": kron_I2(edge_adjacency(g)),
        "cycles": left_nullspace(mixed, 1e-12),
        "origins": g.origins(),
        "targets": g.targets(),
    }


@dataclass(frozen=True, eq=False)
class VectorFieldBundle:
    """A graph, a law, and target lengths, ready to evaluate the flow."""

    graph: FormationGraph
    law: ControlLaw
    lengths: TargetLengths

    def __post_init__(self):
        if len(self.lengths.d) != self.graph.m:
            raise ConfigurationError(
                f"{len(self.lengths.d)} target lengths for {self.graph.m} edges"
            )
        if self.law.convention != self.lengths.convention:
            raise ConfigurationError(
                f"law convention {self.law.convention!r} does not match "
                f"lengths convention {self.lengths.convention!r}"
            )

    def with_lengths(self, lengths: TargetLengths):
        return VectorFieldBundle(graph=self.graph, law=self.law, lengths=lengths)

    def F_x(self, x):
        return eval_F_x(self, x)

    def F_z(self, z, check=True):
        return eval_F_z(self, z, check=check)


def _positions(b, x):
    arr = np.asarray(x, dtype=float)
    flat = arr.ndim == 1
    pts = arr.reshape(b.graph.n, 2)
    return pts, flat


def _edge_state(b, z):
    arr = np.asarray(z, dtype=float)
    flat = arr.ndim == 1
    zz = arr.reshape(b.graph.m, 2)
    return zz, flat


def edge_weights(b: VectorFieldBundle, z):
    """Per-edge feedback weights, evaluating coupled pairs where present."""
    zz = np.asarray(z, dtype=float).reshape(b.graph.m, 2)
    s2 = np.sum(zz * zz, axis=1)
    d = b.lengths.as_array()
    if b.law.separable:
        return np.asarray(b.law.weight(d, s2), dtype=float)
    u = np.zeros(b.graph.m)
    by_origin = {}
    for k, (o, _) in enumerate(b.graph.edges):
        by_origin.setdefault(o, []).append(k)
    for ks in by_origin.values():
        if len(ks) == 1:
            k = ks[0]
            u[k] = float(b.law.weight(d[k], s2[k]))
        else:
            i, j = ks
            s = float(zz[i] @ zz[j])
            u[i], u[j] = b.law.pair_weights((d[i], d[j]), (s2[i], s2[j]), s)
    return u


def eval_F_x(b: VectorFieldBundle, x):
    """Agent velocities: each agent moves along its outgoing edge vectors.

    Decentralization is structural here, an agent's velocity only reads
    the relative positions of the agents it observes.
    """
    pts, flat = _positions(b, x)
    mats = _graph_matrices(b.graph)
    z = pts[mats["targets"]] - pts[mats["origins"]]
    u = edge_weights(b, z)
    xdot = np.zeros_like(pts)
    np.add.at(xdot, mats["origins"], u[:, None] * z)
    return xdot.ravel() if flat else xdot


def eval_F_z(b: VectorFieldBundle, z, check=True):
    """Edge-vector velocities via the edge adjacency coupling.

    The state must satisfy the graph's cycle constraints (edge vectors
    around each independent cycle sum to zero) to describe an actual
    framework; ``check=False`` skips that validation, which finite
    difference probes need because their perturbations leave the
    constraint surface.
    """
    zz, flat = _edge_state(b, z)
    mats = _graph_matrices(b.graph)
    if check and mats["cycles"].shape[1]:
        sums = mats["cycles"].T @ zz
        scale = max(1.0, float(np.max(np.abs(zz))))
        if np.max(np.abs(sums)) > _CYCLE_TOL * scale:
            raise InconsistentStateError(
                "edge-vector state violates the cycle constraints "
                f"(max violation {np.max(np.abs(sums)):.3e})"
            )
    u = edge_weights(b, zz)
    zdot = mats["edge_adj"] @ (u[:, None] * zz)
    return zdot.ravel() if flat else zdot


def _squared_errors(b, zz):
    s2 = np.sum(zz * zz, axis=1)
    d = b.lengths.as_array()
    if b.lengths.convention == "plain":
        return np.sqrt(s2) - np.sqrt(d)
    return s2 - d


def _require_design_point(b, zz, what):
    err = np.max(np.abs(_squared_errors(b, zz)))
    if err > _EQUILIBRIUM_ERROR_TOL:
        raise FormulaDomainError(
            f"{what} is only valid at design equilibria where every edge error "
            f"vanishes; max |e| = {err:.3e}"
        )


def zprime_vectors(b: VectorFieldBundle, z):
    """First-order response vectors: ``z'_i = 2 u_x z_i`` plus pair coupling.

    ``u_x`` is the weight's derivative in the squared edge length. For a
    coupled two-coleader pair the partner edge contributes through the
    cross derivative, which is zero for all built-in laws.
    """
    zz, _ = _edge_state(b, z)
    s2 = np.sum(zz * zz, axis=1)
    d = b.lengths.as_array()
    zp = 2.0 * np.asarray(b.law.weight_dlen(d, s2), dtype=float)[:, None] * zz
    if not b.law.separable:
        by_origin = {}
        for k, (o, _) in enumerate(b.graph.edges):
            by_origin.setdefault(o, []).append(k)
        for ks in by_origin.values():
            if len(ks) == 2:
                i, j = ks
                s = float(zz[i] @ zz[j])
                cij, cji = b.law.pair_cross((d[i], d[j]), (s2[i], s2[j]), s)
                zp[i] = zp[i] + 2.0 * cij * zz[j]
                zp[j] = zp[j] + 2.0 * cji * zz[i]
    return zp


def zdprime_vectors(b: VectorFieldBundle, z):
    """Target-sensitivity vectors: ``z''_i = (du_i/dd_i) z_i``.

    These are the columns of the derivative of the flow in the stored
    squared targets, up to the edge adjacency factor.
    """
    zz, _ = _edge_state(b, z)
    s2 = np.sum(zz * zz, axis=1)
    d = b.lengths.as_array()
    return np.asarray(b.law.weight_dtarget(d, s2), dtype=float)[:, None] * zz


def jacobian_z(b: VectorFieldBundle, z):
    """Closed-form edge-coordinate Jacobian at a design equilibrium.

    Away from design equilibria the derivation's dropped terms (the
    weight itself and its inner-product derivative) do not vanish, so the
    product is refused there rather than silently returned.
    """
    zz, _ = _edge_state(b, z)
    _require_design_point(b, zz, "the analytic Jacobian in z")
    mats = _graph_matrices(b.graph)
    dz = edge_block_rows(zz)
    dzp = edge_block_rows(zprime_vectors(b, zz))
    return mats["edge_adj2"] @ dzp.T @ dz


def jacobian_d(b: VectorFieldBundle, z):
    """Closed-form derivative in the stored squared targets, at a design point."""
    zz, _ = _edge_state(b, z)
    _require_design_point(b, zz, "the analytic Jacobian in d")
    mats = _graph_matrices(b.graph)
    dzpp = edge_block_rows(zdprime_vectors(b, zz))
    return mats["edge_adj2"] @ dzpp.T


def reduced_J(b: VectorFieldBundle, z):
    """The m-by-m reduced Jacobian ``D(z) A_e D(z')^T``.

    Its entry ``(i, j)`` is ``A_e[i, j] * (z_i . z'_j)``. At design
    equilibria its spectrum is exactly the nonzero part of the full
    edge-coordinate Jacobian's spectrum, which collapses the stability
    question to an m-dimensional computation.
    """
    zz, _ = _edge_state(b, z)
    mats = _graph_matrices(b.graph)
    zp = zprime_vectors(b, zz)
    return (zz @ zp.T) * mats["edge_adj"]


def verify_compatibility(law: ControlLaw, d_samples, s_samples=(0.0, 1.0, -2.5)):
    """Check the defining property of admissible laws on sample targets.

    The weight must vanish exactly at zero edge error, and a coupled pair
    must vanish at zero errors for every value of the inner product.
    Returns the largest violation found.
    """
    worst = 0.0
    for d in d_samples:
        d = float(d)
        worst = max(worst, abs(float(law.weight(d, d))))
        for d2 in d_samples:
            for s in s_samples:
                ua, ub = law.pair_weights((d, float(d2)), (d, float(d2)), float(s))
                worst = max(worst, abs(float(ua)), abs(float(ub)))
    return worst
