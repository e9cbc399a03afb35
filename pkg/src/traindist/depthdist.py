"""Nonparametric mixture over the unit interval used to drive depth draws.

Values are generated by a Dirichlet-process mixture of Beta distributions:
a Chinese-restaurant-style partition with concentration ``alpha`` groups the
draws into components, each component gets its own Beta(A, B) with A and B
themselves drawn from Beta priors, and every member of the component draws
its value from that shared Beta.  Because A and B live in (0, 1), component
distributions are bathtub shaped: mass piles up near 0 (shallow, coarse
regions) and near 1 (deep, fine regions), and the optimizer decides on the
mix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_rng, check_positive

#: Depth values are kept strictly inside the open unit interval.
VALUE_EPS = 1e-12


@dataclass(frozen=True)
class DepthDistParams:
    """Concentration plus the two Beta priors over component shapes."""

    alpha: float
    a: float
    b: float
    a_prime: float
    b_prime: float

    def __post_init__(self):
        check_positive(self.alpha, "alpha")
        if not 0.1 <= self.alpha <= 14.0:
            raise ValueError(f"alpha must lie in [0.1, 14], got {self.alpha}")
        for name in ("a", "b", "a_prime", "b_prime"):
            v = getattr(self, name)
            check_positive(v, name)
            if not 0.1 <= v <= 10.0:
                raise ValueError(f"{name} must lie in [0.1, 10], got {v}")


def gamma_variate(
    rng: np.random.Generator | int | None,
    shape: float,
    size: int | None = None,
) -> float | np.ndarray:
    """Gamma(shape, 1) draws via the Marsaglia-Tsang squeeze.

    Shapes below 1 use the boost trick: draw Gamma(shape + 1) and multiply
    by U^(1/shape), which stays correct down to the tiny shapes produced by
    Beta-distributed shape parameters.
    """
    rng = as_rng(rng)
    shape = check_positive(shape, "shape")
    n = 1 if size is None else int(size)
    if shape < 1.0:
        boosted = gamma_variate(rng, shape + 1.0, n)
        out = boosted * rng.random(n) ** (1.0 / shape)
    else:
        d = shape - 1.0 / 3.0
        c = 1.0 / np.sqrt(9.0 * d)
        out = np.empty(n, dtype=np.float64)
        need = np.arange(n)
        while need.size:
            x = rng.standard_normal(need.size)
            v = (1.0 + c * x) ** 3
            u = rng.random(need.size)
            ok = v > 0
            safe_v = np.where(ok, v, 1.0)
            with np.errstate(divide="ignore"):
                accept = ok & (np.log(u) < 0.5 * x * x + d - d * v + d * np.log(safe_v))
            out[need[accept]] = d * v[accept]
            need = need[~accept]
    if size is None:
        return float(out[0])
    return out


def beta_variate(
    rng: np.random.Generator | int | None,
    a: float,
    b: float,
    size: int | None = None,
) -> float | np.ndarray:
    """Beta(a, b) draws built from two Gamma variates."""
    rng = as_rng(rng)
    a = check_positive(a, "a")
    b = check_positive(b, "b")
    n = 1 if size is None else int(size)
    ga = np.atleast_1d(gamma_variate(rng, a, n))
    gb = np.atleast_1d(gamma_variate(rng, b, n))
    total = ga + gb
    out = np.where(total > 0, ga / np.where(total > 0, total, 1.0), 0.5)
    out = np.clip(out, VALUE_EPS, 1.0 - VALUE_EPS)
    if size is None:
        return float(out[0])
    return out


def crp_assignments(
    n: int, alpha: float, rng: np.random.Generator | int | None = None
) -> np.ndarray:
    """Component assignment for each of n draws under a CRP(alpha) partition.

    Draw i starts a new component with probability alpha / (alpha + i) and
    otherwise copies the assignment of a uniformly chosen earlier draw, which
    joins an existing component with probability proportional to its size.
    Component ids are contiguous from 0 in order of first appearance.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    alpha = check_positive(alpha, "alpha")
    rng = as_rng(rng)
    u = rng.random(n)
    assign = np.empty(n, dtype=np.int64)
    assign[0] = 0
    next_id = 1
    for i in range(1, n):
        t = u[i] * (i + alpha)
        if t < alpha:
            assign[i] = next_id
            next_id += 1
        else:
            assign[i] = assign[int(t - alpha)]
    return assign


def partition_counts(
    n: int, alpha: float, rng: np.random.Generator | int | None = None
) -> list[tuple[int, int]]:
    """Component sizes of a CRP(alpha) partition of n items.

    Returns (component id, count) pairs with ids contiguous from 1 in order
    of first appearance.  The expected number of components is
    sum_{i=1..n} alpha / (alpha + i - 1).
    """
    assign = crp_assignments(n, alpha, rng)
    counts = np.bincount(assign)
    return [(i + 1, int(c)) for i, c in enumerate(counts)]


def sample_depth_values(
    n: int,
    params: DepthDistParams,
    rng: np.random.Generator | int | None = None,
    shape_scale: float = 1.0,
) -> np.ndarray:
    """Draw n depth values in (0, 1) from the mixture defined by ``params``.

    All values of one component are drawn in a single batch from the
    component's Beta; outputs stay in the original draw order so the vector
    is exchangeable.  ``shape_scale`` optionally rescales the component
    shapes away from their (0, 1) prior support; 1.0 leaves them untouched.
    """
    check_positive(shape_scale, "shape_scale")
    rng = as_rng(rng)
    assign = crp_assignments(n, params.alpha, rng)
    values = np.empty(n, dtype=np.float64)
    for comp in range(int(assign.max()) + 1):
        shape_a = shape_scale * beta_variate(rng, params.a, params.b)
        shape_b = shape_scale * beta_variate(rng, params.a_prime, params.b_prime)
        mask = assign == comp
        values[mask] = beta_variate(rng, shape_a, shape_b, size=int(mask.sum()))
    return values


def harmonic_number(n: int) -> float:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return float(np.sum(1.0 / np.arange(1, n + 1)))


def alpha_upper_bound(k_max: int, n: int) -> float:
    """Concentration at which the expected component count reaches ``k_max``.

    Uses the asymptotic count alpha * H_n, so the bound is the target count
    divided by the n-th harmonic number.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    return k_max / harmonic_number(n)


def expected_components(n: int, alpha: float) -> float:
    """Exact expected component count of a CRP(alpha) partition of n items."""
    alpha = check_positive(alpha, "alpha")
    i = np.arange(1, n + 1, dtype=np.float64)
    return float(np.sum(alpha / (alpha + i - 1.0)))
