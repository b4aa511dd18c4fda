"""The solvable extension G = N x| R: group law, metric, measure, fields.

A point of G is a pair (z, u) with z in N (exponential coordinates) and u
the Lie-algebra coordinate of the R-factor, which acts on N through the
automorphic dilations by e^u.  The right Haar measure is dz du and the
modular function is exp(-Q u).

Scalar fields on G are wrapped as KernelField objects carrying their own
truncation hints, so that L1-type integrals pick sensible domains without
the caller micromanaging grids.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .quadrature import (
    DEFAULT_SPEC,
    QuadratureMethod,
    QuadratureSpec,
    deterministic_rng,
    graded_symmetric_edges,
    linear_edges,
    panel_rule,
    symmetric_edges,
)
from .stratified import GroupDescriptor, GroupKind, abelian, n_inverse, n_multiply, n_norm

__all__ = [
    "PointG", "KernelField", "NormResult", "identity", "g_multiply", "g_inverse",
    "modular", "g_distance", "g_distance_between", "distance_from_zu",
    "involution", "field_scale", "field_sum", "convolve_at",
    "horizontal_gradient_norm", "radial_integral", "estimate_CN",
    "ball_volume_direct", "integrate_weighted",
]


@dataclass(frozen=True)
class PointG:
    """A point (z, u) of G; z is a coordinate vector of N."""

    z: np.ndarray
    u: float

    def __post_init__(self):
        object.__setattr__(self, "z", np.atleast_1d(np.asarray(self.z, dtype=float)))
        if not np.all(np.isfinite(self.z)) or not np.isfinite(self.u):
            raise ValueError("point coordinates must be finite")


def identity(g: GroupDescriptor) -> PointG:
    return PointG(np.zeros(g.dim), 0.0)


def _act(u: float, z: np.ndarray, g: GroupDescriptor) -> np.ndarray:
    """The dilation action e^{uD} z of the R-factor on N."""
    weights = np.array(g.dilation_weights, dtype=float)
    return z * np.exp(u * weights)


def g_multiply(x: PointG, y: PointG, g: GroupDescriptor) -> PointG:
    return PointG(n_multiply(x.z, _act(x.u, y.z, g), g), x.u + y.u)


def g_inverse(x: PointG, g: GroupDescriptor) -> PointG:
    return PointG(n_inverse(_act(-x.u, x.z, g), g), -x.u)


def modular(x: PointG, g: GroupDescriptor) -> float:
    """Density of left against right Haar measure at x."""
    return float(np.exp(-g.Q * x.u))


def distance_from_zu(z_norm, u):
    """|.|-distance from the identity given |z|_N and u, vectorized.

    The arccosh argument is >= 1 analytically; tiny negative excursions from
    rounding are clamped, anything worse is an input error.
    """
    z_norm = np.asarray(z_norm, dtype=float)
    u = np.asarray(u, dtype=float)
    arg = np.cosh(u) + 0.5 * np.exp(-u) * z_norm * z_norm
    bad = arg < 1.0 - 1e-12
    if np.any(bad):
        raise ValueError("arccosh argument below 1 beyond rounding tolerance")
    return np.arccosh(np.maximum(arg, 1.0))


def g_distance(x: PointG, g: GroupDescriptor) -> float:
    return float(distance_from_zu(n_norm(x.z, g), x.u))


def g_distance_between(x: PointG, y: PointG, g: GroupDescriptor) -> float:
    """Left-invariant distance d(x, y) = |x^{-1} y|."""
    return g_distance(g_multiply(g_inverse(x, g), y, g), g)


# -- kernel fields ------------------------------------------------------------

@dataclass(frozen=True)
class KernelField:
    """An evaluable scalar field on G with quadrature hints.

    evaluate(Z, U) is deterministic and vectorized: U has any shape, Z has
    U's shape plus a trailing coordinate axis of length descriptor.dim.
    z_halfwidth maps |u| (array) to a truncation radius for the z-integrals;
    u_halfwidth truncates the u-axis.
    """

    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    descriptor: GroupDescriptor
    quadrature_spec: QuadratureSpec
    u_halfwidth: float
    z_halfwidth: Callable[[np.ndarray], np.ndarray]

    def at(self, x: PointG) -> float:
        val = self.evaluate(x.z[None, :], np.array([x.u]))
        return float(np.asarray(val).ravel()[0])


def field_scale(f: KernelField, a: float) -> KernelField:
    return replace(f, evaluate=lambda Z, U, _e=f.evaluate: a * _e(Z, U))


def field_sum(fields: list[KernelField], coeffs=None) -> KernelField:
    coeffs = [1.0] * len(fields) if coeffs is None else list(coeffs)

    def ev(Z, U):
        total = coeffs[0] * fields[0].evaluate(Z, U)
        for c, f in zip(coeffs[1:], fields[1:]):
            total = total + c * f.evaluate(Z, U)
        return total

    base = fields[0]
    return replace(
        base,
        evaluate=ev,
        u_halfwidth=max(f.u_halfwidth for f in fields),
        z_halfwidth=lambda absu: np.max(
            np.stack([f.z_halfwidth(absu) for f in fields]), axis=0),
    )


def involution(f: KernelField) -> KernelField:
    """f*(z, u) = m(z, u) f((z, u)^{-1}); real fields, so no conjugation."""
    g = f.descriptor
    weights = np.array(g.dilation_weights, dtype=float)

    def ev(Z, U):
        tau = np.exp(-U[..., None] * weights)
        Zi = n_inverse(tau * Z, g)
        return np.exp(-g.Q * U) * f.evaluate(Zi, -U)

    def z_half(absu):
        # (z,u) matters iff e^{-u} z lies in the support of f at -u
        return np.exp(absu) * f.z_halfwidth(absu)

    return replace(f, evaluate=ev, z_halfwidth=z_half)


# -- integration over G -------------------------------------------------------

@dataclass(frozen=True)
class NormResult:
    value: float
    est_abs_error: float
    trusted: bool
    diagnostics: dict


def _u_edges(u_half: float, spec: QuadratureSpec) -> np.ndarray:
    scale = 8.0 / max(spec.nodes_per_dim, 4)
    return graded_symmetric_edges(u_half, min(30.0, u_half), 2.0 * scale, 4.0 * scale)


def _z_rule(z_half: float, spec: QuadratureSpec, order: int):
    n_panels = 12
    edges = symmetric_edges(z_half, z_half / n_panels)
    return panel_rule(edges, order)


def _integrate_tensor_q1(f: KernelField, weight_of_distance, spec: QuadratureSpec,
                         order: int):
    g = f.descriptor
    u_half = spec.u_halfwidth if spec.u_halfwidth is not None else f.u_halfwidth
    u_nodes, u_weights = panel_rule(_u_edges(u_half, spec), order)
    n_u = u_nodes.size
    z_half = f.z_halfwidth(np.abs(u_nodes)) * (spec.n_radius / 8.0)
    base_nodes, base_weights = _z_rule(1.0, spec, order)
    n_z = base_nodes.size
    Z = z_half[:, None] * base_nodes[None, :]
    ZW = z_half[:, None] * base_weights[None, :]
    U = np.broadcast_to(u_nodes[:, None], (n_u, n_z))
    vals = np.abs(f.evaluate(Z[..., None], U))
    if weight_of_distance is not None:
        rho = distance_from_zu(np.abs(Z), U)
        vals = vals * weight_of_distance(rho)
    contrib = ZW * vals
    row = np.sum(contrib, axis=1)
    total = float(np.sum(u_weights * row))
    # truncation diagnostics: mass on the outermost u panels and z panels
    k = order
    u_edge = float(np.sum(np.abs(u_weights[:k] * row[:k]))
                   + np.sum(np.abs(u_weights[-k:] * row[-k:])))
    z_ring = float(np.sum(np.abs(u_weights) * (np.abs(contrib[:, :k]).sum(axis=1)
                                               + np.abs(contrib[:, -k:]).sum(axis=1))))
    boundary = u_edge + z_ring
    trusted = boundary <= max(spec.rel_tol * abs(total), 1e-300)
    return total, boundary, trusted, {"u_halfwidth": u_half, "boundary_mass": boundary}


def _integrate_monte_carlo(f: KernelField, weight_of_distance, spec: QuadratureSpec):
    g = f.descriptor
    u_half = spec.u_halfwidth if spec.u_halfwidth is not None else f.u_halfwidth
    rng = deterministic_rng(spec.seed)
    n = spec.n_samples
    u = rng.uniform(-u_half, u_half, size=n)
    z_half = np.asarray(f.z_halfwidth(np.abs(u)), dtype=float)
    z_half = np.broadcast_to(z_half, (n,))
    weights_dim = np.array(g.dilation_weights, dtype=float)
    zs = []
    per_sample_vol = np.full(n, 2.0 * u_half)
    for w in weights_dim:
        half = z_half ** w  # heavier layers scale with the w-th power of the radius
        zs.append(rng.uniform(-1.0, 1.0, size=n) * half)
        per_sample_vol = per_sample_vol * 2.0 * half
    Z = np.stack(zs, axis=-1)
    vals = np.abs(f.evaluate(Z, u))
    if weight_of_distance is not None:
        rho = distance_from_zu(n_norm(Z, g), u)
        vals = vals * weight_of_distance(rho)
    samples = vals * per_sample_vol
    value = float(np.mean(samples))
    err = float(np.std(samples) / np.sqrt(n))
    trusted = err <= 10 * spec.rel_tol * max(abs(value), 1e-300)
    return value, err, trusted, {"u_halfwidth": u_half, "n_samples": n}


def integrate_weighted(f: KernelField, weight_of_distance=None,
                       spec: QuadratureSpec | None = None,
                       with_error: bool = False) -> NormResult:
    """integral of |f(x)| w(|x|) d mu(x) over the truncated domain.

    weight_of_distance maps the distance from the identity to the weight
    value; None means weight 1.  The result is flagged untrusted when the
    boundary panels carry more than rel_tol of the total, i.e. when weight
    growth is beating integrand decay at the truncation.
    """
    spec = spec or f.quadrature_spec
    if f.descriptor.kind is GroupKind.HEISENBERG1 or spec.method is QuadratureMethod.MONTE_CARLO:
        value, err, trusted, diag = _integrate_monte_carlo(f, weight_of_distance, spec)
        return NormResult(value, err, trusted, diag)
    if f.descriptor.dim != 1:
        raise NotImplementedError("tensor quadrature implemented for one-dimensional N")
    order = spec.nodes_per_dim
    value, boundary, trusted, diag = _integrate_tensor_q1(f, weight_of_distance, spec, order)
    err = boundary
    if with_error:
        value2, b2, _, _ = _integrate_tensor_q1(f, weight_of_distance, spec, order + 3)
        err = abs(value2 - value) + b2
        value = value2
    return NormResult(value, err, trusted, diag)


# -- convolution and gradient -------------------------------------------------

def convolve_at(f: KernelField, h: KernelField, x: PointG,
                spec: QuadratureSpec | None = None) -> float:
    """(f * h)(x) = integral of f(x y^{-1}) h(y) d mu(y) by tensor quadrature."""
    g = f.descriptor
    if g.dim != 1:
        raise NotImplementedError("convolution quadrature implemented for one-dimensional N")
    spec = spec or f.quadrature_spec
    order = spec.nodes_per_dim
    u_half = h.u_halfwidth + abs(x.u) + 5.0
    if spec.u_halfwidth is not None:
        u_half = min(u_half, spec.u_halfwidth)
    v_nodes, v_weights = panel_rule(_u_edges(u_half, spec), order)
    z0 = float(x.z[0])
    z_half = np.asarray(h.z_halfwidth(np.abs(v_nodes)), dtype=float) * 1.25
    base_nodes, base_weights = _z_rule(1.0, spec, order)
    W = z_half[:, None] * base_nodes[None, :]
    WW = z_half[:, None] * base_weights[None, :]
    V = np.broadcast_to(v_nodes[:, None], W.shape)
    inner = h.evaluate(W[..., None], V)
    Zf = z0 - np.exp(x.u - V) * W
    outer = f.evaluate(Zf[..., None], x.u - V)
    return float(np.sum(v_weights * np.sum(WW * inner * outer, axis=1)))


def horizontal_gradient_norm(f: KernelField, x: PointG,
                             derivatives: list[KernelField] | None = None,
                             fd_step: float = 1e-5) -> float:
    """|grad_H f|(x): root sum of squares of the horizontal frame derivatives.

    With analytic derivative fields supplied they are evaluated directly;
    otherwise centered differences along each frame flow are used.
    """
    g = f.descriptor
    if derivatives is not None:
        if len(derivatives) != g.q + 1:
            raise ValueError(f"expected {g.q + 1} derivative fields")
        return float(np.sqrt(sum(d.at(x) ** 2 for d in derivatives)))
    comps = []
    comps.append((f.at(PointG(x.z, x.u + fd_step)) - f.at(PointG(x.z, x.u - fd_step)))
                 / (2 * fd_step))
    for j in range(1, g.q + 1):
        step = np.zeros(g.dim)
        step[j - 1] = fd_step
        xp = g_multiply(x, PointG(step, 0.0), g)
        xm = g_multiply(x, PointG(-step, 0.0), g)
        comps.append((f.at(xp) - f.at(xm)) / (2 * fd_step))
    return float(np.sqrt(sum(c * c for c in comps)))


# -- radial integration -------------------------------------------------------

def radial_profile_integral(profile, r_max: float, g: GroupDescriptor,
                            order: int = 12) -> float:
    """integral of profile(r) sinh(r)^Q dr over [0, r_max] (no C_N factor)."""
    nodes, w = panel_rule(linear_edges(0.0, r_max, 0.25), order)
    return float(np.sum(w * profile(nodes) * np.sinh(nodes) ** g.Q))


def radial_integral(profile, r_max: float, g: GroupDescriptor,
                    c_n: float | None = None) -> float:
    """C_N * integral of profile(r) sinh(r)^Q dr on [0, r_max]."""
    if c_n is None:
        c_n = estimate_CN(g)
    return c_n * radial_profile_integral(profile, r_max, g)


def _direct_radial_function_integral_q1(fn, order: int = 12) -> float:
    """integral over G of fn(|x|) d mu for abelian Q = 1, by 2D quadrature."""
    u_nodes, u_weights = panel_rule(symmetric_edges(8.0, 0.25), order)
    total = 0.0
    for ui, uw in zip(u_nodes, u_weights):
        z_half = np.sqrt(2.0 * np.exp(ui) * (np.cosh(9.0) - np.cosh(ui)))
        z_nodes, z_weights = panel_rule(symmetric_edges(float(z_half), float(z_half) / 24.0), order)
        rho = distance_from_zu(np.abs(z_nodes), ui)
        total += uw * float(np.sum(z_weights * fn(rho)))
    return total


def estimate_CN(g: GroupDescriptor, order: int = 12) -> float:
    """The radial-density constant, measured by matching a Gaussian profile
    integrated directly over G against its radial form."""
    profile = lambda r: np.exp(-r * r)
    if g.kind is GroupKind.ABELIAN and g.Q == 1:
        direct = _direct_radial_function_integral_q1(profile, order)
    else:
        direct = _direct_radial_function_integral_mc(profile, g)
    return direct / radial_profile_integral(profile, 12.0, g)


def _direct_radial_function_integral_mc(fn, g: GroupDescriptor, seed: int = 1234,
                                        n: int = 400000) -> float:
    rng = deterministic_rng(seed)
    u_half = 8.0
    halves = np.array([10.0 ** w for w in g.dilation_weights])
    u = rng.uniform(-u_half, u_half, size=n)
    Z = rng.uniform(-1.0, 1.0, size=(n, g.dim)) * halves
    vol = 2.0 * u_half * np.prod(2.0 * halves)
    rho = distance_from_zu(n_norm(Z, g), u)
    return float(np.mean(fn(rho)) * vol)


def ball_volume_direct(R: float, g: GroupDescriptor, order: int = 16) -> float:
    """mu(B_R) for abelian Q = 1 by direct quadrature of the sublevel set."""
    if not (g.kind is GroupKind.ABELIAN and g.Q == 1):
        raise NotImplementedError("direct ball volume implemented for Q = 1")
    # z-section has length 2 sqrt(2 e^u (cosh R - cosh u)); substitute
    # u = R sin(pi v / 2) to absorb the square-root endpoints
    v_nodes, v_weights = panel_rule(symmetric_edges(1.0, 0.05), order)
    u = R * np.sin(0.5 * np.pi * v_nodes)
    du = R * 0.5 * np.pi * np.cos(0.5 * np.pi * v_nodes)
    section = 2.0 * np.sqrt(np.maximum(2.0 * np.exp(u) * (np.cosh(R) - np.cosh(u)), 0.0))
    return float(np.sum(v_weights * section * du))
