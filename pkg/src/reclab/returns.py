"""
Return counting and exact distributions of the return count.

Given a target cylinder word of length n and a horizon N, the return count
of a sequence z is the number of positions j in [1, N] at which the window
z_j..z_{j+n-1} equals the target (position 0 is deliberately excluded:
counts are returns, not an initial hit).  Three engines produce the
distribution of this count when z is drawn from a fiber measure:

* ``exact_count_distribution`` -- exact forward dynamic programming over
  (pattern-automaton state, clamped count); the automaton is the border
  (failure-function) automaton of the target.  For Markov (Gibbs) measures
  the chain state is carried alongside the automaton state.
* ``enumerate_count_distribution`` -- brute force over every word of the
  full length; only feasible at desk scale, kept as an independent oracle.
* ``monte_carlo_count_distribution`` -- empirical law over sampled words.

The module also implements the return-pattern taxonomy used by the moment
method: increasing return-time tuples, their decomposition into blocks of
immediate returns (consecutive gaps at most M) separated by long returns
(gaps above M), per-block overlaps in units of the minimal period m, the
minimal inter-block distance, and the "rare" patterns whose inter-block
distance (minus n) falls below a cutoff.  ``binomial_moment_enumeration``
sums fiber masses over all return-time tuples, which equals the binomial
moment E[C(count, r)], and ``rare_vs_main_split`` partitions that sum into
its rare and main parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gibbs import GibbsSystem
from .models import Environment
from .symbolic import as_word, self_overlaps

__all__ = [
    "BudgetError",
    "ReturnPattern",
    "PatternClass",
    "CountDistribution",
    "count_returns",
    "observation_time",
    "classify_pattern",
    "is_rare",
    "exact_count_distribution",
    "enumerate_count_distribution",
    "monte_carlo_count_distribution",
    "expected_return_count",
    "binomial_moment_enumeration",
    "rare_vs_main_split",
]

DEFAULT_BUDGET_CELLS = 1_000_000_000
DEFAULT_BUDGET_WORDS = 1 << 22
DEFAULT_BUDGET_TUPLES = 50_000_000
DEFAULT_R_MAX = 64


class BudgetError(RuntimeError):
    """An engine refused to run past its configured compute budget."""


@dataclass(frozen=True)
class ReturnPattern:
    """A strictly increasing tuple of return times within [1, horizon]."""

    times: tuple[int, ...]
    horizon: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", tuple(int(v) for v in self.times))
        v = self.times
        if len(v) == 0:
            raise ValueError("return pattern must contain at least one time")
        if v[0] < 1 or v[-1] > self.horizon or any(a >= b for a, b in zip(v, v[1:])):
            raise ValueError(
                f"times must satisfy 1 <= v_1 < ... < v_r <= {self.horizon}, got {v}"
            )

    @property
    def r(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class PatternClass:
    """Block decomposition of a return pattern.

    ``heads`` are 1-based indices into the pattern marking block starts
    (the first is always 1); gaps at most the block threshold are
    within-block, larger gaps separate blocks.  Overlaps are within-block
    gaps in units of the minimal period m; within-block gaps that are not
    multiples of m are reported in ``non_multiple_gaps`` rather than
    rejected (they cannot arise from a periodic-point cylinder, but the
    classifier accepts general patterns).  ``delta`` is the minimal
    head-to-previous-tail distance between consecutive blocks, None for a
    single block.
    """

    j: int
    heads: tuple[int, ...]
    individual_overlaps: tuple[float, ...]
    total_overlap: float
    delta: int | None
    non_multiple_gaps: tuple[int, ...]


def count_returns(z, target, horizon: int) -> int:
    """Number of positions j in [1, horizon] where the target occurs in z."""
    zw = as_word(z).symbols
    tw = as_word(target).symbols
    n = len(tw)
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if len(zw) < horizon + n:
        raise ValueError(
            f"word of length {len(zw)} too short for horizon {horizon} and "
            f"target length {n}"
        )
    return sum(1 for j in range(1, horizon + 1) if zw[j : j + n] == tw)


def observation_time(t: float, cylinder_mass: float) -> int:
    """floor(t / mass); errors when the window would be empty."""
    if not (t > 0.0):
        raise ValueError(f"t must be positive, got {t}")
    if not (cylinder_mass > 0.0):
        raise ValueError(f"cylinder mass must be positive, got {cylinder_mass}")
    horizon = int(t / cylinder_mass)
    if horizon == 0:
        raise ValueError(
            f"observation window is empty: t={t}, mass={cylinder_mass}"
        )
    return horizon


def classify_pattern(pattern, block_gap: int, period: int) -> PatternClass:
    """Decompose a return pattern into blocks of immediate returns.

    ``block_gap`` is the threshold M: consecutive gaps <= M stay within a
    block, gaps > M start a new one.  ``period`` is the unit m for the
    overlap counts.
    """
    if isinstance(pattern, ReturnPattern):
        times = pattern.times
    else:
        times = tuple(int(v) for v in pattern)
        times = ReturnPattern(times, horizon=times[-1]).times
    if period < 1:
        raise ValueError("period must be >= 1")
    if block_gap < period:
        raise ValueError(f"block threshold {block_gap} must be >= period {period}")
    heads = [1]
    overlaps: list[float] = []
    non_multiple: list[int] = []
    inter_gaps: list[int] = []
    for k in range(1, len(times)):
        gap = times[k] - times[k - 1]
        if gap > block_gap:
            heads.append(k + 1)
            inter_gaps.append(gap)
        else:
            overlaps.append(gap / period)
            if gap % period != 0:
                non_multiple.append(gap)
    return PatternClass(
        j=len(heads),
        heads=tuple(heads),
        individual_overlaps=tuple(overlaps),
        total_overlap=float(sum(overlaps)),
        delta=min(inter_gaps) if inter_gaps else None,
        non_multiple_gaps=tuple(non_multiple),
    )


def is_rare(pattern_class: PatternClass, delta: int, n: int) -> bool:
    """True when the minimal inter-block distance minus n is below delta."""
    if pattern_class.j == 1:
        return False
    return pattern_class.delta - n < delta


# ---------------------------------------------------------------------------
# pattern automaton
# ---------------------------------------------------------------------------


def _border_array(symbols: tuple[int, ...]) -> list[int]:
    border = [0] * len(symbols)
    k = 0
    for i in range(1, len(symbols)):
        while k > 0 and symbols[i] != symbols[k]:
            k = border[k - 1]
        if symbols[i] == symbols[k]:
            k += 1
        border[i] = k
    return border


def _advance(symbols: tuple[int, ...], border: list[int], q: int, a) -> int:
    while q > 0 and symbols[q] != a:
        q = border[q - 1]
    return q + 1 if symbols[q] == a else 0


def _automaton(target: tuple[int, ...], alphabet: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """Transition and emission tables of the border automaton.

    Returns (next_state, emit), both shaped (len(alphabet), n).  A
    completed match redirects to the border state of the full target, so
    the state space stays 0..n-1.
    """
    n = len(target)
    border = _border_array(target)
    restart = border[-1] if n > 1 else 0
    next_state = np.zeros((len(alphabet), n), dtype=np.int64)
    emit = np.zeros((len(alphabet), n), dtype=bool)
    for e, a in enumerate(alphabet):
        for q in range(n):
            r = _advance(target, border, q, a)
            if r == n:
                next_state[e, q] = restart
                emit[e, q] = True
            else:
                next_state[e, q] = r
    return next_state, emit


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountDistribution:
    """A finite law r -> mass with explicit tail and provenance.

    ``bias_bound`` records the only systematic bias any engine can carry:
    sentinel draws from a truncated countable alphabet can suppress at most
    horizon * tail_mass_bound of matching mass in sampled words.
    """

    masses: tuple[float, ...]
    tail_mass: float
    provenance: str
    bias_bound: float = 0.0

    @property
    def r_max(self) -> int:
        return len(self.masses) - 1

    def total(self) -> float:
        return math.fsum(self.masses) + self.tail_mass

    def mean(self) -> float:
        return math.fsum(r * m for r, m in enumerate(self.masses))

    def binomial_moment(self, k: int) -> float:
        return math.fsum(math.comb(r, k) * m for r, m in enumerate(self.masses))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("r,mass,engine,tail_mass,bias_bound\n")
            for r, m in enumerate(self.masses):
                fh.write(
                    f"{r},{format(m, '.17g')},{self.provenance},"
                    f"{format(self.tail_mass, '.17g')},{format(self.bias_bound, '.17g')}\n"
                )


def _validate_target(model, target) -> tuple[int, ...]:
    tw = as_word(target).symbols
    if hasattr(model, "validate_target_symbol"):
        for s in tw:
            model.validate_target_symbol(s)
    elif isinstance(model, GibbsSystem):
        if not model.transitions.word_is_admissible(tw):
            raise ValueError(f"target {tw} is not admissible for this system")
    return tw


def exact_count_distribution(
    model,
    env: Environment,
    target,
    horizon: int,
    r_max: int = DEFAULT_R_MAX,
    budget_cells: int = DEFAULT_BUDGET_CELLS,
) -> CountDistribution:
    """Exact law of the return count via automaton dynamic programming.

    Complexity O(L * n * |effective alphabet| * r_max) with L = horizon + n;
    for Markov measures the chain state multiplies in.  Exceeding
    ``budget_cells`` raises; nothing is ever silently truncated.
    """
    tw = _validate_target(model, target)
    n = len(tw)
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if r_max < 0:
        raise ValueError("r_max must be nonnegative")
    if horizon == 0:
        return CountDistribution(
            masses=(1.0,) + (0.0,) * r_max, tail_mass=0.0, provenance="exact-dp"
        )
    length = horizon + n
    if isinstance(model, GibbsSystem):
        vec = _exact_dp_markov(model, tw, length, n, r_max, budget_cells)
    else:
        vec = _exact_dp_product(model, env, tw, length, n, r_max, budget_cells)
    masses = tuple(float(v) for v in vec[: r_max + 1])
    tail = float(vec[r_max + 1])
    return CountDistribution(masses=masses, tail_mass=max(tail, 0.0), provenance="exact-dp")


def _exact_dp_product(model, env, tw, length, n, r_max, budget_cells):
    distinct = tuple(dict.fromkeys(tw))
    n_eff = len(distinct) + 1  # plus the lumped "everything else" symbol
    bins = r_max + 2
    cells = length * n * n_eff * bins
    if cells > budget_cells:
        raise BudgetError(
            f"exact DP needs {cells} cells, budget is {budget_cells}"
        )
    weights = model.symbol_weight_matrix(env, 0, length, distinct)
    other = np.clip(1.0 - weights.sum(axis=1), 0.0, 1.0)
    weight_rows = np.column_stack([weights, other])
    # the lumped symbol matches nothing in the target
    next_state, emit = _automaton(tw, list(distinct) + [object()])
    return _dp_loop(weight_rows, next_state, emit, n, bins)


def _routing_stacks(next_state, emit, n_states):
    """Per-symbol routing matrices (target, source), split by emission."""
    n_eff = next_state.shape[0]
    keep = np.zeros((n_eff, n_states, n_states))
    emitting = np.zeros((n_eff, n_states, n_states))
    for e in range(n_eff):
        for q in range(n_states):
            (emitting if emit[e, q] else keep)[e, next_state[e, q], q] = 1.0
    return keep, emitting


def _dp_loop(weight_rows, next_state, emit, n, bins):
    """Forward DP over (automaton state, clamped count).

    Each step applies a linear operator to the (state, count) table: a
    count-preserving part and an emitting part that shifts the count axis
    (the last bin is absorbing).  Operators are cached per distinct weight
    row, so driving laws with few coordinate values pay the assembly once.
    """
    length, _ = weight_rows.shape
    n_states = next_state.shape[1]
    keep_stack, emit_stack = _routing_stacks(next_state, emit, n_states)
    cache: dict[bytes, tuple] = {}
    dist = np.zeros((n_states, bins))
    dist[0, 0] = 1.0
    shifted = np.empty_like(dist)
    for i in range(length):
        row = weight_rows[i]
        key = row.tobytes()
        ops = cache.get(key)
        if ops is None:
            keep_op = np.ascontiguousarray(np.tensordot(row, keep_stack, axes=1))
            emit_op = np.ascontiguousarray(np.tensordot(row, emit_stack, axes=1))
            ops = (keep_op, emit_op, keep_op + emit_op, bool(emit_op.any()))
            cache[key] = ops
        keep_op, emit_op, both, has_emit = ops
        if has_emit and i >= n:
            shifted[:, 0] = 0.0
            shifted[:, 1:] = dist[:, :-1]
            shifted[:, -1] += dist[:, -1]
            dist = keep_op @ dist + emit_op @ shifted
        else:
            # completions before step n route normally but never count
            dist = both @ dist
    return dist.sum(axis=0)


def _exact_dp_markov(system: GibbsSystem, tw, length, n, r_max, budget_cells):
    k = system.depth
    if length < k - 1:
        raise ValueError(
            f"word length {length} shorter than the chain memory {k - 1}; "
            "use enumerate_count_distribution instead"
        )
    init, nxt, prob = system.chain_tables()
    n_chain = len(system.states)
    size = system.transitions.size
    bins = r_max + 2
    cells = length * n * n_chain * size * bins
    if cells > budget_cells:
        raise BudgetError(f"exact DP needs {cells} cells, budget is {budget_cells}")
    border = _border_array(tw)
    next_state, emit = _automaton(tw, range(size))

    # joint state: chain * automaton, flattened
    joint = n_chain * n
    dist = np.zeros((joint, bins))
    for c, s in enumerate(system.states):
        q = 0
        count = 0
        for i, a in enumerate(s):
            q2 = _advance(tw, border, q, a)
            if q2 == n:
                if i >= n:
                    count += 1
                q = border[-1] if n > 1 else 0
            else:
                q = q2
        dist[c * n + q, min(count, bins - 1)] += init[c]

    # the chain is stationary, so one operator pair covers every step
    keep_op = np.zeros((joint, joint))
    emit_op = np.zeros((joint, joint))
    for c in range(n_chain):
        for a in range(size):
            p = prob[c, a]
            if p == 0.0:
                continue
            for q in range(n):
                src = c * n + q
                tgt = nxt[c, a] * n + next_state[a, q]
                (emit_op if emit[a, q] else keep_op)[tgt, src] += p
    both = keep_op + emit_op
    has_emit = bool(emit_op.any())
    shifted = np.empty_like(dist)
    for i in range(k - 1, length):
        if has_emit and i >= n:
            shifted[:, 0] = 0.0
            shifted[:, 1:] = dist[:, :-1]
            shifted[:, -1] += dist[:, -1]
            dist = keep_op @ dist + emit_op @ shifted
        else:
            dist = both @ dist
    return dist.sum(axis=0)


def enumerate_count_distribution(
    model,
    env: Environment,
    target,
    horizon: int,
    budget_words: int = DEFAULT_BUDGET_WORDS,
) -> CountDistribution:
    """Brute-force oracle: sum word masses over every word of full length.

    Kept deliberately independent of the DP engine; only usable when the
    model's full alphabet is finite and alphabet^(horizon+n) fits the
    budget.
    """
    tw = _validate_target(model, target)
    n = len(tw)
    length = horizon + n
    alphabet = _full_alphabet(model)
    total_words = len(alphabet) ** length
    if total_words > budget_words:
        raise BudgetError(
            f"enumeration needs {total_words} words, budget is {budget_words}"
        )
    digits = _all_words(len(alphabet), length)  # (length, total_words)
    if isinstance(model, GibbsSystem):
        if model.depth == 1 and model.transitions.is_full():
            base = np.array([model.cylinder_mass((s,)) for s in alphabet])
            probs = np.prod(base[digits], axis=0)
        else:
            probs = np.array(
                [model.cylinder_mass(tuple(digits[:, w])) for w in range(total_words)]
            )
    else:
        wmat = model.symbol_weight_matrix(env, 0, length, alphabet)
        probs = np.prod(wmat[np.arange(length)[:, None], digits], axis=0)
    counts = np.zeros(total_words, dtype=np.int64)
    tsyms = np.array([alphabet.index(s) for s in tw])
    for j in range(1, horizon + 1):
        match = np.ones(total_words, dtype=bool)
        for d in range(n):
            match &= digits[j + d] == tsyms[d]
        counts += match
    hist = np.bincount(counts, weights=probs, minlength=horizon + 1)
    return CountDistribution(
        masses=tuple(float(v) for v in hist),
        tail_mass=0.0,
        provenance="enumeration",
    )


def _full_alphabet(model) -> list[int]:
    if isinstance(model, GibbsSystem):
        return list(range(model.transitions.size))
    from .models import TwoElementModel

    if isinstance(model, TwoElementModel):
        return [0, 1]
    raise ValueError(
        f"{type(model).__name__} has no finite full alphabet; exhaustive "
        "enumeration is not available"
    )


def _all_words(alphabet_size: int, length: int) -> np.ndarray:
    total = alphabet_size**length
    idx = np.arange(total)
    digits = np.empty((length, total), dtype=np.int64)
    for pos in range(length):
        digits[pos] = (idx // alphabet_size ** (length - 1 - pos)) % alphabet_size
    return digits


def monte_carlo_count_distribution(
    model,
    env: Environment,
    target,
    horizon: int,
    trials: int,
    seed,
    r_max: int = DEFAULT_R_MAX,
    chunk: int = 4096,
) -> CountDistribution:
    """Empirical law of the return count over sampled fiber words.

    Sampling is chunked with one child stream per chunk, so results are
    reproducible for a given seed regardless of scheduling.
    """
    tw = _validate_target(model, target)
    n = len(tw)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    length = horizon + n
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n_chunks = (trials + chunk - 1) // chunk
    children = seq.spawn(n_chunks)
    hist = np.zeros(r_max + 2, dtype=np.int64)
    tarr = np.array(tw)
    done = 0
    for c in range(n_chunks):
        take = min(chunk, trials - done)
        rng = np.random.default_rng(children[c])
        words = model.sample_words(env, 0, length, take, rng)
        counts = np.zeros(take, dtype=np.int64)
        for j in range(1, horizon + 1):
            match = np.ones(take, dtype=bool)
            for d in range(n):
                match &= words[:, j + d] == tarr[d]
            counts += match
        np.add.at(hist, np.minimum(counts, r_max + 1), 1)
        done += take
    masses = tuple(float(h) / trials for h in hist[: r_max + 1])
    tail = float(hist[r_max + 1]) / trials
    bias = horizon * getattr(model, "tail_mass_bound", 0.0)
    return CountDistribution(
        masses=masses, tail_mass=tail, provenance="monte-carlo", bias_bound=bias
    )


# ---------------------------------------------------------------------------
# moment enumeration over return-time tuples
# ---------------------------------------------------------------------------


def _placement_rows(model, env, target, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-start-position weight rows of the target.

    Returns (rows, suffix) where rows[v-1, i] is the fiber weight of
    target[i] at absolute position v+i (v = 1..horizon) and suffix[v-1, i]
    is the product of rows[v-1, i:].  suffix[:, 0] is the full placement
    mass A(v).
    """
    tw = as_word(target).symbols
    n = len(tw)
    length = horizon + n
    if isinstance(model, GibbsSystem):
        if model.depth != 1 or not model.transitions.is_full():
            raise ValueError(
                "placement enumeration needs product (i.i.d.) fibers; this "
                "Gibbs system is Markov"
            )
        base = np.array([model.cylinder_mass((s,)) for s in tw])
        rows = np.tile(base, (horizon, 1))
    else:
        distinct = tuple(dict.fromkeys(tw))
        col_of = {s: i for i, s in enumerate(distinct)}
        wmat = model.symbol_weight_matrix(env, 0, length, distinct)
        rows = np.empty((horizon, n))
        for i, s in enumerate(tw):
            rows[:, i] = wmat[1 + i : 1 + i + horizon, col_of[s]]
    suffix = np.ones((horizon, n + 1))
    for i in range(n - 1, -1, -1):
        suffix[:, i] = suffix[:, i + 1] * rows[:, i]
    return rows, suffix[:, :n]


def expected_return_count(model, env: Environment, target, horizon: int) -> float:
    """Exact E[count]: the sum of fiber masses of the target at offsets 1..horizon."""
    if isinstance(model, GibbsSystem):
        return horizon * model.cylinder_mass(target)
    _validate_target(model, target)
    _, suffix = _placement_rows(model, env, target, horizon)
    return float(suffix[:, 0].sum())


def binomial_moment_enumeration(
    model,
    env: Environment,
    target,
    horizon: int,
    r: int,
    budget_terms: int = DEFAULT_BUDGET_TUPLES,
) -> float:
    """Sum of fiber masses of all r-fold return-time tuples in [1, horizon].

    The sum runs over strictly increasing tuples (v_1 < ... < v_r); the
    mass of a tuple is the fiber mass of the intersection of the shifted
    target cylinders, zero when overlapping placements conflict, and the
    whole sum equals the binomial moment E[C(count, r)] of the return
    count.  Tuples are aggregated by the gap structure (prefix sums over
    long gaps, explicit extension factors for the self-overlap gaps), which
    leaves the result identical to the naive tuple-by-tuple sum.
    """
    tw = _validate_target(model, target)
    n = len(tw)
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r == 0:
        return 1.0
    if r > horizon:
        return 0.0
    overlaps = sorted(g for g in self_overlaps(tw) if g < n) if n >= 2 else []
    terms = horizon * r * (len(overlaps) + 2)
    if terms > budget_terms:
        raise BudgetError(f"enumeration needs {terms} terms, budget is {budget_terms}")
    _, suffix = _placement_rows(model, env, target, horizon)
    a_mass = suffix[:, 0]
    level = a_mass.copy()  # level[v-1] = sum over tuples ending at v
    for _ in range(2, r + 1):
        pref = np.concatenate(([0.0], np.cumsum(level)))  # pref[j] = sum_{u<=j}
        new = np.zeros(horizon)
        if horizon > n:
            # long gaps: previous placement at any u <= v - n
            new[n:] = a_mass[n:] * pref[1 : horizon - n + 1]
        for g in overlaps:
            # overlapped placement g back, times the extension factor
            new[g:] += level[: horizon - g] * suffix[g:, n - g]
        level = new
    return float(level.sum())


def rare_vs_main_split(
    model,
    env: Environment,
    target,
    horizon: int,
    r: int,
    delta: int,
    block_gap: int,
    period: int,
    budget_tuples: int = DEFAULT_BUDGET_TUPLES,
) -> tuple[float, float]:
    """Split the r-th moment sum into its rare and main parts.

    A return-time tuple is rare when some inter-block distance (a
    consecutive gap above ``block_gap``) minus the target length falls
    below ``delta``; the two partial sums reproduce
    ``binomial_moment_enumeration`` exactly.  Tuples are walked
    explicitly, with the final placement aggregated in segments of equal
    classification.
    """
    tw = _validate_target(model, target)
    n = len(tw)
    if r < 1:
        raise ValueError("r must be >= 1")
    if block_gap < period:
        raise ValueError(f"block threshold {block_gap} must be >= period {period}")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if r > horizon:
        return 0.0, 0.0
    overlaps = sorted(g for g in self_overlaps(tw) if g < n) if n >= 2 else []
    nodes = horizon * (len(overlaps) + max(horizon - n, 0)) ** max(r - 2, 0)
    if nodes > budget_tuples:
        raise BudgetError(
            f"rare/main split visits ~{nodes} tuples, budget is {budget_tuples}"
        )
    _, suffix = _placement_rows(model, env, target, horizon)
    a_mass = suffix[:, 0]
    pref_a = np.concatenate(([0.0], np.cumsum(a_mass)))  # pref_a[j] = sum_{v<=j} A(v)

    rare = 0.0
    main = 0.0
    rare_gap_max = n + delta - 1  # inter-block gaps <= this make a tuple rare

    def seg_sum(lo: int, hi: int) -> float:
        # sum of A(v) for v in [lo, hi] (1-based), empty when lo > hi
        if lo > hi:
            return 0.0
        return float(pref_a[hi] - pref_a[lo - 1])

    def walk(u: int, remaining: int, mass: float, rare_flag: bool) -> None:
        nonlocal rare, main
        if remaining == 0:
            if rare_flag:
                rare += mass
            else:
                main += mass
            return
        if remaining == 1:
            # overlapped placements one by one
            for g in overlaps:
                v = u + g
                if v > horizon:
                    continue
                m2 = mass * suffix[v - 1, n - g]
                flag = rare_flag or (g > block_gap and g <= rare_gap_max)
                if flag:
                    rare += m2
                else:
                    main += m2
            # long placements in bulk, segmented by classification
            lo = u + n
            if lo > horizon:
                return
            in_block_hi = min(horizon, u + block_gap)
            if in_block_hi >= lo:  # gap <= block_gap: stays within the block
                s = mass * seg_sum(lo, in_block_hi)
                if rare_flag:
                    rare += s
                else:
                    main += s
            inter_lo = max(lo, u + block_gap + 1)
            rare_hi = min(horizon, u + rare_gap_max)
            if rare_hi >= inter_lo:
                rare += mass * seg_sum(inter_lo, rare_hi)
            far_lo = max(inter_lo, u + rare_gap_max + 1)
            if horizon >= far_lo:
                s = mass * seg_sum(far_lo, horizon)
                if rare_flag:
                    rare += s
                else:
                    main += s
            return
        for g in overlaps:
            v = u + g
            if v > horizon:
                continue
            flag = rare_flag or (g > block_gap and g <= rare_gap_max)
            walk(v, remaining - 1, mass * suffix[v - 1, n - g], flag)
        for v in range(u + n, horizon + 1):
            g = v - u
            flag = rare_flag or (g > block_gap and g <= rare_gap_max)
            walk(v, remaining - 1, mass * a_mass[v - 1], flag)

    for v1 in range(1, horizon + 1):
        walk(v1, r - 1, float(a_mass[v1 - 1]), False)
    return rare, main
