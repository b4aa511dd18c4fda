"""The stratified group N: group law, dilations, CC norm, heat kernel.

Exact closed forms for abelian N = R^Q; for the first Heisenberg group the
group law is the degree-2 Baker-Campbell-Hausdorff formula, the CC norm is
the exact parametric geodesic formula, the heat kernel is an oscillatory
one-dimensional integral evaluated by panel quadrature, and derivatives are
centered finite differences along left-invariant flows.

Points of N are plain numpy arrays of exponential coordinates of the first
kind; Haar measure is Lebesgue measure in these coordinates.  All functions
broadcast over leading axes, with the last axis indexing coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .quadrature import linear_edges, panel_rule, symmetric_edges


class GroupKind(Enum):
    ABELIAN = "abelian"
    HEISENBERG1 = "heisenberg1"


@dataclass(frozen=True)
class GroupDescriptor:
    """Structure data of N: homogeneous dimension, horizontal rank, layers."""

    kind: GroupKind
    Q: int                      # homogeneous dimension, trace of the dilation matrix
    q: int                      # horizontal rank (dimension of the first layer)
    step: int
    dilation_weights: tuple[int, ...]

    def __post_init__(self):
        if self.Q != sum(self.dilation_weights):
            raise ValueError("Q must equal the sum of the dilation weights")
        if self.kind is GroupKind.ABELIAN:
            if not (self.q == self.Q and self.step == 1
                    and all(w == 1 for w in self.dilation_weights)):
                raise ValueError("abelian descriptor must have q = Q, step 1, unit weights")
        elif self.kind is GroupKind.HEISENBERG1:
            if (self.Q, self.q, self.step, self.dilation_weights) != (4, 2, 2, (1, 1, 2)):
                raise ValueError("Heisenberg descriptor must be (Q, q, step, weights) = (4, 2, 2, (1,1,2))")

    @property
    def dim(self) -> int:
        return len(self.dilation_weights)


def abelian(Q: int) -> GroupDescriptor:
    if Q < 1:
        raise ValueError("Q must be a positive integer")
    return GroupDescriptor(GroupKind.ABELIAN, Q, Q, 1, (1,) * Q)


def heisenberg1() -> GroupDescriptor:
    return GroupDescriptor(GroupKind.HEISENBERG1, 4, 2, 2, (1, 1, 2))


def validate_word(word, g: GroupDescriptor, allow_zero: bool = False,
                  max_len: int = 3) -> tuple[int, ...]:
    """Check a derivative multi-index against the descriptor.

    Entries index the horizontal frame of N (1..q); entry 0 only appears in
    words formed on the extension and is rejected here unless allowed.
    """
    word = tuple(int(j) for j in word)
    if len(word) > max_len:
        raise ValueError(f"multi-index length {len(word)} out of scope (max {max_len})")
    lo = 0 if allow_zero else 1
    for j in word:
        if not (lo <= j <= g.q):
            raise ValueError(f"multi-index entry {j} outside {{{lo},...,{g.q}}}")
    return word


def _check_point(z, g: GroupDescriptor) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1:] != (g.dim,):
        raise ValueError(f"point has last-axis size {z.shape[-1:]}, expected {g.dim}")
    return z


# -- group law and dilations --------------------------------------------------

def n_multiply(a, b, g: GroupDescriptor) -> np.ndarray:
    """Product a.b in exponential coordinates."""
    a = _check_point(a, g)
    b = _check_point(b, g)
    if g.kind is GroupKind.ABELIAN:
        return a + b
    x, y, c = a[..., 0], a[..., 1], a[..., 2]
    x2, y2, c2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([x + x2, y + y2, c + c2 + 0.5 * (x * y2 - y * x2)], axis=-1)


def n_inverse(a, g: GroupDescriptor) -> np.ndarray:
    """Inverse; negation of coordinates in exponential coordinates."""
    return -_check_point(a, g)


def dilate(t: float, z, g: GroupDescriptor) -> np.ndarray:
    """Automorphic dilation scaling coordinate i by t**weight_i."""
    if t <= 0:
        raise ValueError("dilation parameter must be positive")
    z = _check_point(z, g)
    factors = np.array([float(t) ** w for w in g.dilation_weights])
    return z * factors


# -- Carnot-Caratheodory norm -------------------------------------------------

def _heisenberg_arc_ratio(phi: float) -> float:
    """(phi - sin phi) / (8 sin^2(phi/2)), the vertical/horizontal shape ratio."""
    s = np.sin(0.5 * phi)
    return (phi - np.sin(phi)) / (8.0 * s * s)


def _heisenberg_norm_scalar(x: float, y: float, c: float) -> float:
    r = float(np.hypot(x, y))
    c = abs(float(c))
    if c < 1e-300:
        return r
    if r < 1e-300:
        return float(np.sqrt(4.0 * np.pi * c))
    target = c / (r * r)
    # arc angle solving the shape equation; ratio is increasing on (0, 2*pi)
    lo, hi = 1e-9, 2.0 * np.pi - 1e-9
    if target <= _heisenberg_arc_ratio(lo):
        # nearly horizontal point: length correction is O(target^2), below ulp here
        return r
    if target >= _heisenberg_arc_ratio(hi):
        return float(np.sqrt(4.0 * np.pi * c))
    phi = brentq(lambda p: _heisenberg_arc_ratio(p) - target, lo, hi,
                 xtol=1e-14, rtol=1e-14)
    return float(r * (0.5 * phi) / np.sin(0.5 * phi))


def n_norm(z, g: GroupDescriptor) -> np.ndarray:
    """CC distance from the identity: Euclidean for abelian N, exact
    geodesic formula for the Heisenberg group."""
    z = _check_point(z, g)
    if g.kind is GroupKind.ABELIAN:
        return np.sqrt(np.sum(z * z, axis=-1))
    flat = z.reshape(-1, 3)
    out = np.array([_heisenberg_norm_scalar(*p) for p in flat])
    return out.reshape(z.shape[:-1])


# -- heat kernel on N ---------------------------------------------------------

def _gaussian_factor(k: int, s, z):
    """k-th z-derivative of the 1D heat kernel at scale s, divided by G_0."""
    if k == 0:
        return 1.0
    a = 1.0 / (4.0 * s)
    if k == 1:
        return -2.0 * a * z
    if k == 2:
        return 4.0 * a * a * z * z - 2.0 * a
    if k == 3:
        return 12.0 * a * a * z - 8.0 * a ** 3 * z ** 3
    raise ValueError("derivative order out of scope (max 3)")


def _heisenberg_lambda_rule(s: float, c_over_s_max: float, r2_over_s_min: float):
    """Panel rule for the oscillatory integral behind the Heisenberg kernel."""
    lam_max = 55.0 / (1.0 + 0.25 * r2_over_s_min)
    lam_max = min(55.0, max(8.0, lam_max))
    width = 1.0
    if c_over_s_max > 0:
        width = min(width, 0.5 * np.pi / c_over_s_max)
    return panel_rule(linear_edges(0.0, lam_max, width), 10)


def n_heat(s, z, g: GroupDescriptor) -> np.ndarray:
    """Heat kernel of the sub-Laplacian on N at time s, unit total mass."""
    z = _check_point(z, g)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise ValueError("heat kernel time must be positive")
    if g.kind is GroupKind.ABELIAN:
        z2 = np.sum(z * z, axis=-1)
        return np.exp(-z2 / (4.0 * s_arr)) * (4.0 * np.pi * s_arr) ** (-g.Q / 2.0)
    return _heisenberg_heat(s_arr, z)


def _heisenberg_heat(s, z) -> np.ndarray:
    x, y, c = z[..., 0], z[..., 1], z[..., 2]
    s, x, y, c = np.broadcast_arrays(np.asarray(s, dtype=float), x, y, c)
    r2s = (x * x + y * y) / s
    cs = c / s
    lam, w = _heisenberg_lambda_rule(float(np.max(s)), float(np.max(np.abs(cs))),
                                     float(np.min(r2s)))
    amp = lam / np.sinh(lam) * np.exp(-0.25 * r2s[..., None] * lam / np.tanh(lam))
    vals = np.sum(w * amp * np.cos(cs[..., None] * lam), axis=-1)
    return vals / (4.0 * np.pi ** 2 * s * s)


_HEISENBERG_FD_STEPS = {1: 1e-4, 2: 1e-3, 3: 6e-3}


def _frame_flow(z, j: int, eps: float, g: GroupDescriptor) -> np.ndarray:
    """Right translation by exp(eps * horizontal frame field j)."""
    step = np.zeros(g.dim)
    step[j - 1] = eps
    return n_multiply(z, step, g)


def n_heat_derivative(alpha, beta, s, z, g: GroupDescriptor) -> np.ndarray:
    """Left-invariant derivative X^alpha (X^beta h_s)^* at z.

    The involution on N is f*(z) = conj(f(-z)) (N is unimodular); for the
    abelian case with its even Gaussian kernel this collapses to a sign.
    """
    alpha = validate_word(alpha, g)
    beta = validate_word(beta, g)
    if len(alpha) + len(beta) > 3:
        raise ValueError("total derivative order out of scope (max 3)")
    z = _check_point(z, g)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise ValueError("heat kernel time must be positive")
    if g.kind is GroupKind.ABELIAN:
        orders = np.zeros(g.dim, dtype=int)
        for j in alpha + beta:
            orders[j - 1] += 1
        base = n_heat(s_arr, z, g)
        fac = np.ones_like(base)
        for i, k in enumerate(orders):
            if k:
                fac = fac * _gaussian_factor(int(k), s_arr, z[..., i])
        return (-1.0) ** len(beta) * fac * base
    return _heisenberg_heat_derivative(alpha, beta, s_arr, z, g)


def _heisenberg_heat_derivative(alpha, beta, s, z, g) -> np.ndarray:
    # inner field: (X^beta h_s)^* (z) = (X^beta h_s)(-z)
    def inner(pts):
        if not beta:
            return _heisenberg_heat(s, -pts)
        return _fd_word(lambda q: _heisenberg_heat(s, -q), beta, pts, s, g)

    if not alpha:
        return inner(z)
    return _fd_word(inner, alpha, z, s, g)


def _fd_word(f, word, z, s, g) -> np.ndarray:
    """Centered finite differences along nested frame flows."""
    order = len(word)
    h = _HEISENBERG_FD_STEPS[order] * np.sqrt(float(np.min(s)))
    signs_offsets = [(1.0, None)]
    for j in word:
        new = []
        for sign, off in signs_offsets:
            for sgn, eps in ((1.0, h), (-1.0, -h)):
                new.append((sign * sgn, (off, (j, eps))))
        signs_offsets = new

    def apply_offsets(pts, off):
        if off is None:
            return pts
        prev, (j, eps) = off
        return _frame_flow(apply_offsets(pts, prev), j, eps, g)

    total = 0.0
    for sign, off in signs_offsets:
        total = total + sign * f(apply_offsets(z, off))
    return total / (2.0 * h) ** order


# -- weighted L1 norms on N ---------------------------------------------------

def _abelian_weighted_l1_at_one(alpha, beta, gamma, g, order) -> float:
    edges = symmetric_edges(14.0, 0.5)
    nodes, w = panel_rule(edges, order)
    grids = np.meshgrid(*([nodes] * g.dim), indexing="ij")
    z = np.stack(grids, axis=-1)
    weights = w
    for _ in range(g.dim - 1):
        weights = np.multiply.outer(weights, w)
    vals = np.abs(n_heat_derivative(alpha, beta, 1.0, z, g))
    if gamma > 0:
        vals = vals * np.sum(z * z, axis=-1) ** gamma
    return float(np.sum(weights * vals))


def _heisenberg_weighted_l1_at_one(alpha, beta, gamma, g, order) -> float:
    xy_nodes, xy_w = panel_rule(symmetric_edges(9.0, 0.75), order)
    c_nodes, c_w = panel_rule(symmetric_edges(10.0, 0.75), order)
    X, Y, C = np.meshgrid(xy_nodes, xy_nodes, c_nodes, indexing="ij")
    z = np.stack([X, Y, C], axis=-1)
    W = np.multiply.outer(np.multiply.outer(xy_w, xy_w), c_w)
    vals = np.abs(n_heat_derivative(alpha, beta, 1.0, z, g))
    if gamma > 0:
        vals = vals * n_norm(z, g) ** (2.0 * gamma)
    return float(np.sum(W * vals))


def n_weighted_l1(alpha, beta, gamma: float, s: float, g: GroupDescriptor,
                  order: int = 10) -> float:
    """|| |.|_N^{2 gamma} X^alpha (X^beta h_s)^* ||_{L1(N)}.

    Computed once at s = 1 and rescaled by the exact homogeneity factor
    s^(gamma - (|alpha|+|beta|)/2).
    """
    if s <= 0:
        raise ValueError("heat kernel time must be positive")
    if not (0.0 <= gamma <= 0.5):
        raise ValueError("weight exponent gamma must lie in [0, 1/2]")
    base = n_weighted_l1_direct(alpha, beta, gamma, 1.0, g, order)
    expo = gamma - 0.5 * (len(tuple(alpha)) + len(tuple(beta)))
    return base * float(s) ** expo


def n_weighted_l1_direct(alpha, beta, gamma: float, s: float, g: GroupDescriptor,
                         order: int = 10) -> float:
    """Same norm by direct quadrature at the given s (scaling-law oracle)."""
    if s <= 0:
        raise ValueError("heat kernel time must be positive")
    alpha = validate_word(alpha, g)
    beta = validate_word(beta, g)
    if s == 1.0:
        if g.kind is GroupKind.ABELIAN:
            return _abelian_weighted_l1_at_one(alpha, beta, gamma, g, order)
        return _heisenberg_weighted_l1_at_one(alpha, beta, gamma, g, order)
    # direct evaluation at s: rescale the s = 1 grid through the dilations
    lam = np.sqrt(s)
    if g.kind is GroupKind.ABELIAN:
        edges = symmetric_edges(14.0 * lam, 0.5 * lam)
        nodes, w = panel_rule(edges, order)
        grids = np.meshgrid(*([nodes] * g.dim), indexing="ij")
        z = np.stack(grids, axis=-1)
        weights = w
        for _ in range(g.dim - 1):
            weights = np.multiply.outer(weights, w)
        vals = np.abs(n_heat_derivative(alpha, beta, s, z, g))
        if gamma > 0:
            vals = vals * np.sum(z * z, axis=-1) ** gamma
        return float(np.sum(weights * vals))
    xy_nodes, xy_w = panel_rule(symmetric_edges(9.0 * lam, 0.75 * lam), order)
    c_nodes, c_w = panel_rule(symmetric_edges(10.0 * s, 0.75 * s), order)
    X, Y, C = np.meshgrid(xy_nodes, xy_nodes, c_nodes, indexing="ij")
    z = np.stack([X, Y, C], axis=-1)
    W = np.multiply.outer(np.multiply.outer(xy_w, xy_w), c_w)
    vals = np.abs(n_heat_derivative(alpha, beta, s, z, g))
    if gamma > 0:
        vals = vals * n_norm(z, g) ** (2.0 * gamma)
    return float(np.sum(W * vals))
