"""
Polya-Aeppli distribution: exact pmf, moments, generating function, sampling.

The Polya-Aeppli law is the compound Poisson distribution with geometric
cluster sizes.  For a rate t > 0 and a cluster parameter p in [0, 1) the
probability of observing r events is

    P(r) = e^{-t} * sum_{j=1..r} p^{r-j} (1-p)^j (t^j / j!) C(r-1, j-1)

with P(0) = e^{-t}.  The probability generating function is

    g(z) = exp(t (z - 1) / (1 - p z)),

which has mean t/(1-p), variance t(1+p)/(1-p)^2 and, for p > 0, an
essential singularity at z = 1/p.  At p = 0 the law reduces to Poisson(t).

Moments are exposed in *binomial* normalisation: ``pa_binomial_moment(k)``
returns E[C(X, k)], the k-th Taylor coefficient of the pgf at z = 1.  This
is the classical factorial moment E[X(X-1)...(X-k+1)] divided by k!.  The
binomial normalisation is the one under which the moment sums over
increasing return-time tuples (see ``reclab.returns``) hold without an
extra k! factor; keep this in mind when comparing against references that
call the same quantity a "factorial moment".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PolyaAeppliParams",
    "Pmf",
    "pa_pmf",
    "pa_pmf_table",
    "pa_binomial_moment",
    "pa_mean_variance",
    "pa_pgf",
    "pa_sample",
    "pa_sample_many",
]

# Below this order the pmf/moment sums are accumulated directly; above it
# the terms over/underflow and we switch to log-space accumulation.
_DIRECT_SUM_MAX_ORDER = 50

# Hard cap for the adaptive table length; the laws we target (t <= 10,
# p <= 0.95) are far below it.
_ADAPTIVE_HARD_CAP = 200_000


@dataclass(frozen=True)
class PolyaAeppliParams:
    """Parameter pair (t, p): event rate t > 0, cluster geometry p in [0, 1).

    p = 1 is rejected: the pmf polynomial is undefined there and the law
    degenerates.
    """

    t: float
    p: float

    def __post_init__(self) -> None:
        if not (self.t > 0.0) or not math.isfinite(self.t):
            raise ValueError(f"t must be a finite positive real, got {self.t}")
        if not (0.0 <= self.p < 1.0):
            raise ValueError(f"p must lie in [0, 1), got {self.p}")


@dataclass(frozen=True)
class Pmf:
    """A truncated pmf: masses for r = 0..r_max plus the remaining tail mass."""

    masses: tuple[float, ...]
    tail_mass: float

    @property
    def r_max(self) -> int:
        return len(self.masses) - 1

    def total(self) -> float:
        return math.fsum(self.masses) + self.tail_mass


def _sum_terms(t: float, p: float, order: int) -> float:
    """sum_{j=1..order} p^(order-j) (1-p)^j (t^j/j!) C(order-1, j-1).

    Shared kernel of the pmf polynomial and the binomial moments (they
    differ only by outer factors).  Direct summation for small orders,
    log-space otherwise; all terms are nonnegative so log-sum-exp is safe.
    """
    r = order
    if r == 0:
        return 1.0
    if p == 0.0:
        # Only the j = r term survives.
        if r <= _DIRECT_SUM_MAX_ORDER:
            return t**r / math.factorial(r)
        return math.exp(r * math.log(t) - math.lgamma(r + 1))
    if r <= _DIRECT_SUM_MAX_ORDER:
        acc = 0.0
        for j in range(1, r + 1):
            acc += (
                p ** (r - j)
                * (1.0 - p) ** j
                * t**j
                / math.factorial(j)
                * math.comb(r - 1, j - 1)
            )
        return acc
    log_p = math.log(p)
    log_qt = math.log((1.0 - p) * t)
    j = np.arange(1, r + 1, dtype=np.float64)
    log_terms = (
        (r - j) * log_p
        + j * log_qt
        - _lgamma(j + 1.0)
        + _lgamma(float(r))
        - _lgamma(j)
        - _lgamma(r - j + 1.0)
    )
    peak = float(np.max(log_terms))
    return float(np.exp(peak) * np.sum(np.exp(log_terms - peak)))


_lgamma = np.vectorize(math.lgamma, otypes=[np.float64])


def pa_pmf(params: PolyaAeppliParams, r: int) -> float:
    """Probability of exactly r events under the Polya-Aeppli law."""
    if r < 0:
        raise ValueError(f"r must be nonnegative, got {r}")
    return math.exp(-params.t) * _sum_terms(params.t, params.p, r)


def pa_binomial_moment(params: PolyaAeppliParams, k: int) -> float:
    """k-th binomial moment E[C(X, k)] (the k! -normalised factorial moment).

    The moment polynomial is the pmf kernel without its (1-p)^j factor,
    which is the same kernel evaluated at the rescaled rate t/(1-p).
    """
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    if k == 0:
        return 1.0
    q = 1.0 - params.p
    return _sum_terms(params.t / q, params.p, k) / q**k


def pa_mean_variance(params: PolyaAeppliParams) -> tuple[float, float]:
    """Closed-form (mean, variance) = (t/(1-p), t(1+p)/(1-p)^2)."""
    q = 1.0 - params.p
    return params.t / q, params.t * (1.0 + params.p) / (q * q)


def pa_pgf(params: PolyaAeppliParams, z: float) -> float:
    """Probability generating function exp(t (z-1)/(1 - p z)).

    Defined for |z| < 1/p: the series has an essential singularity at
    z = 1/p and diverges outside that radius.
    """
    if params.p > 0.0 and abs(z) * params.p >= 1.0:
        raise ValueError(
            f"pgf series diverges for |z| >= 1/p (p={params.p}, z={z})"
        )
    if z == 1.0:
        return 1.0
    return math.exp(params.t * (z - 1.0) / (1.0 - params.p * z))


def pa_pmf_table(
    params: PolyaAeppliParams,
    r_max: int | None = None,
    tail_tol: float = 1e-12,
) -> Pmf:
    """Tabulate the pmf up to r_max, recording the remaining mass as tail.

    With ``r_max=None`` the truncation point is chosen adaptively: the table
    grows until the residual first moment (against the closed form t/(1-p))
    certifies, via Markov's inequality, that the neglected mass is below
    ``tail_tol``, and until the residual second moment is small enough that
    mean/variance computed from the table are good to ~1e-9.  The first
    criterion alone stops too early for variance work when p is close to 1.
    """
    if r_max is not None:
        if r_max < 0:
            raise ValueError(f"r_max must be nonnegative, got {r_max}")
        masses = [pa_pmf(params, r) for r in range(r_max + 1)]
        return _finish_table(masses)

    mean = params.t / (1.0 - params.p)
    second = 2.0 * pa_binomial_moment(params, 2) + mean  # E[X^2]
    masses: list[float] = []
    partial_first = 0.0
    partial_second = 0.0
    r = 0
    stagnant = 0
    while True:
        m = pa_pmf(params, r)
        masses.append(m)
        partial_first += r * m
        partial_second += r * r * m
        if r > mean:
            resid1 = max(mean - partial_first, 0.0)
            resid2 = max(second - partial_second, 0.0)
            if resid1 / (r + 1.0) < tail_tol and resid2 < 1e-9:
                break
            # A correct pmf whose masses have died off satisfies the bounds
            # shortly after; a long dead stretch without them means the
            # residuals are stuck and the values cannot be a pmf.
            stagnant = stagnant + 1 if m < 1e-16 else 0
            if stagnant > 2000:
                raise RuntimeError(
                    "pmf masses vanished but the moment residuals did not; "
                    f"the values do not normalise (params {params})"
                )
        r += 1
        if r > _ADAPTIVE_HARD_CAP:
            raise RuntimeError(
                f"adaptive pmf table exceeded {_ADAPTIVE_HARD_CAP} entries "
                f"for params {params}"
            )
    return _finish_table(masses)


def _finish_table(masses: list[float]) -> Pmf:
    tail = 1.0 - math.fsum(masses)
    if tail < 0.0:
        if tail < -1e-12:
            raise AssertionError(f"pmf table overshoots 1 by {-tail}")
        tail = 0.0
    return Pmf(masses=tuple(masses), tail_mass=tail)


def pa_sample(params: PolyaAeppliParams, rng: np.random.Generator) -> int:
    """Draw one variate via the compound representation.

    A Poisson(t) number of clusters, each contributing an independent
    geometric size on {1, 2, ...} with success probability 1-p.  The pgf of
    this compound, exp(t (h(z)-1)) with h(z) = (1-p)z/(1-pz), is identical
    to the Polya-Aeppli generating function.
    """
    clusters = int(rng.poisson(params.t))
    if clusters == 0:
        return 0
    if params.p == 0.0:
        return clusters
    return int(rng.geometric(1.0 - params.p, size=clusters).sum())


def pa_sample_many(
    params: PolyaAeppliParams, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorised sampler; same law as ``pa_sample`` but a different stream layout."""
    counts = rng.poisson(params.t, size=size)
    if params.p == 0.0:
        return counts.astype(np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(size, dtype=np.int64)
    sizes = rng.geometric(1.0 - params.p, size=total)
    owner = np.repeat(np.arange(size), counts)
    return np.bincount(owner, weights=sizes, minlength=size).astype(np.int64)
