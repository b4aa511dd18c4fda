"""Quadrature building blocks shared across the package.

Everything here is deterministic: Gauss-Legendre panels with fixed node
counts, refinement-based error estimates, and a seeded Monte Carlo sampler
for the one place (4D integrals over the Heisenberg extension) where tensor
grids are too expensive.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np


class QuadratureMethod(Enum):
    TENSOR_GAUSS = "tensor_gauss"
    ADAPTIVE = "adaptive"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class QuadratureSpec:
    """Budget and truncation knobs for integrals over the group.

    u_halfwidth of None means "choose from the time scale of the kernel";
    an explicit value caps the u-domain regardless.
    """

    u_halfwidth: float | None = None
    n_radius: float = 8.0          # z-halfwidth in units of the local Gaussian scale
    nodes_per_dim: int = 8         # Gauss-Legendre order per panel
    rel_tol: float = 1e-6
    method: QuadratureMethod = QuadratureMethod.TENSOR_GAUSS
    seed: int = 0
    n_samples: int = 20000         # Monte Carlo only

    def __post_init__(self):
        if self.u_halfwidth is not None and self.u_halfwidth <= 0:
            raise ValueError("u_halfwidth must be positive")
        if self.n_radius <= 0:
            raise ValueError("n_radius must be positive")
        if not (0.0 < self.rel_tol < 1.0):
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.nodes_per_dim < 2:
            raise ValueError("nodes_per_dim must be at least 2")

    def refined(self, factor: float = 1.5) -> "QuadratureSpec":
        """A denser copy of this spec, used for self-convergence estimates."""
        return replace(self, nodes_per_dim=max(self.nodes_per_dim + 2,
                                               int(round(self.nodes_per_dim * factor))))


DEFAULT_SPEC = QuadratureSpec()


class QuadratureBudgetError(RuntimeError):
    """Raised when an adaptive rule cannot reach the requested tolerance."""


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def panel_rule(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule over consecutive panels.

    edges is an increasing 1D array of panel boundaries; returns flattened
    nodes and weights covering [edges[0], edges[-1]].
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("need at least two panel edges")
    x, w = gauss_legendre(order)
    lo = edges[:-1][:, None]
    hi = edges[1:][:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + half * (x[None, :] + 1.0)).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def integrate_panels(f, edges, order: int, with_error: bool = False):
    """Integrate a vectorized callable over GL panels.

    The error estimate compares the rule against the same panels at a
    higher order; the finer value is returned.
    """
    nodes, weights = panel_rule(np.asarray(edges, dtype=float), order)
    value = float(np.dot(weights, f(nodes)))
    if not with_error:
        return value
    nodes2, weights2 = panel_rule(np.asarray(edges, dtype=float), order + 6)
    value2 = float(np.dot(weights2, f(nodes2)))
    return value2, abs(value2 - value)


def geometric_edges(lo: float, hi: float, panels_per_decade: float) -> np.ndarray:
    """Log-spaced panel edges between two positive endpoints."""
    if not (0.0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    n = max(2, int(np.ceil(np.log10(hi / lo) * panels_per_decade)))
    return np.exp(np.linspace(np.log(lo), np.log(hi), n + 1))


def linear_edges(lo: float, hi: float, width: float) -> np.ndarray:
    """Uniform panel edges of at most the given width."""
    n = max(1, int(np.ceil((hi - lo) / width)))
    return np.linspace(lo, hi, n + 1)


def symmetric_edges(halfwidth: float, width: float) -> np.ndarray:
    """Uniform panels on [-halfwidth, halfwidth] with an edge at 0."""
    right = linear_edges(0.0, halfwidth, width)
    return np.concatenate([-right[::-1], right[1:]])


def graded_symmetric_edges(halfwidth: float, inner: float, inner_width: float,
                           outer_width: float) -> np.ndarray:
    """Symmetric panels, finer inside |x| <= inner than outside."""
    if halfwidth <= inner:
        return symmetric_edges(halfwidth, inner_width)
    right = np.concatenate([
        linear_edges(0.0, inner, inner_width),
        linear_edges(inner, halfwidth, outer_width)[1:],
    ])
    return np.concatenate([-right[::-1], right[1:]])


def deterministic_rng(seed: int) -> np.random.Generator:
    """Seeded generator; identical streams for identical seeds."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def thread_count() -> int:
    """Parallelism cap for suite fan-out (NA_HEAT_THREADS, default 1)."""
    raw = os.environ.get("NA_HEAT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
