"""Grid experiment: per-state regret of no-data rules and the
empirical success rule under the innovation design.

Per state (a treated-outcome distribution on the grid), the realized
outcome is the mixture of the benchmark untreated distribution and the
state with weight e, the rule's expected treatment probability.  For
constant rules e is the constant and every number here is exact
rational, evaluated through lookup tables over the state's cumulative
mass units so that full sweeps stay fast.  For the empirical success
rule e is estimated by Monte Carlo - the only simulated quantity; the
outcome quantile is always computed analytically from the mixture.

Per-state randomness comes from a stream keyed by (seed, state index),
so results do not depend on sweep order, worker count, or which subset
of the config grid is being run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .dists import Dist, Prob, QuantileSpec, cdf, frac, mix, quantile
from .rules import DEFAULT_XI, TreatmentRule, parse_rule
from .statespace import (
    DEFAULT_CHOICE1_EPSILON,
    GridState,
    Y0Spec,
    enumerate_states,
    state_count,
    state_rank,
    y0_distribution,
)

DEFAULT_SEED = 90210
STUDY_RULES = ("esr", "const:1", "const:0.5", "const:0")
STUDY_LEVELS = (Fraction(1, 10), Fraction(1, 2), Fraction(9, 10))

__all__ = [
    "DEFAULT_SEED",
    "ExperimentConfig",
    "RegretReport",
    "STUDY_LEVELS",
    "STUDY_RULES",
    "run_experiment",
    "run_table1",
    "run_table2",
    "rng_stream",
    "simulate_state",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of the experiment: a quantile level, a known untreated
    quantile with its benchmark choice, and the sampling/MC sizes."""

    alpha: Fraction = Fraction(1, 2)
    q0: Fraction = Fraction(1, 2)
    y0_choice: str = "I"
    n: int = 6
    w: int = 12
    sample_size: int = 30
    replications: int = 100_000
    seed: int = DEFAULT_SEED
    xi: Fraction = DEFAULT_XI
    r: Fraction = Fraction(0)
    choice1_epsilon: Fraction = DEFAULT_CHOICE1_EPSILON
    rules: tuple = STUDY_RULES

    def __post_init__(self) -> None:
        for name in ("alpha", "q0", "xi", "r", "choice1_epsilon"):
            object.__setattr__(self, name, frac(getattr(self, name)))
        if not 0 < self.alpha < 1:
            raise ValueError("the experiment needs alpha strictly inside (0,1)")
        if self.y0_choice not in ("I", "II"):
            raise ValueError("y0_choice must be 'I' or 'II'")

    def y0_spec(self) -> Y0Spec:
        return Y0Spec(self.y0_choice, q0=self.q0, alpha=self.alpha,
                      epsilon=self.choice1_epsilon)

    def quantile_spec(self) -> QuantileSpec:
        return QuantileSpec(self.alpha, self.r)


def rng_stream(seed: int, state_index: int) -> np.random.Generator:
    """Independent deterministic stream for one state."""
    return np.random.default_rng(np.random.SeedSequence((seed, state_index)))


def _empirical_quantile_indices(cum: np.ndarray, draws: int, alpha: Fraction,
                                r: Fraction):
    """Lower/upper generalized-quantile grid indices per replication.

    ``cum`` holds cumulative counts per grid point, one row per
    replication of ``draws`` values.  Exact thresholds: the CDF reaches
    alpha once the count is at least ceil(draws*alpha); the upper end
    is the last point whose strictly-below count is at most
    floor(draws*alpha).
    """
    m_lo = math.ceil(draws * alpha)
    lower = (cum >= m_lo).argmax(axis=1)
    if r == 0:
        return lower, lower
    m_hi = math.floor(draws * alpha)
    below = np.concatenate(
        [np.zeros((cum.shape[0], 1), dtype=cum.dtype), cum[:, :-1]], axis=1
    )
    upper = (below <= m_hi).sum(axis=1) - 1
    return lower, upper


def _es_counts(cum: np.ndarray, cfg: ExperimentConfig):
    """(treat, tie) replication counts of the empirical success rule."""
    lower, upper = _empirical_quantile_indices(
        cum, cfg.sample_size, cfg.alpha, cfg.r
    )
    grid = np.arange(cfg.n + 1) / cfg.n
    if cfg.r == 0:
        sq = grid[lower]
    else:
        rf = float(cfg.r)
        sq = (1 - rf) * grid[lower] + rf * grid[upper]
    hi = float(cfg.q0 + cfg.xi)
    lo = float(cfg.q0 - cfg.xi)
    treat = int(np.count_nonzero(sq > hi))
    tie = int(np.count_nonzero((sq >= lo) & (sq <= hi)))
    return treat, tie


def _state_counts_matrix(states: Sequence[GridState]) -> np.ndarray:
    return np.array([s.masses for s in states], dtype=np.int64)


@dataclass(frozen=True)
class StateRegret:
    """Per-state record: estimated/exact treatment weight, the state's
    quantile, the mixture quantile and the regret."""

    state_index: int
    rule: str
    e: Prob
    q1: Prob
    q_b: Prob
    regret: Prob


def _exact_state_regret(e: Prob, y0: Dist, y1: Dist, cfg: ExperimentConfig):
    spec = cfg.quantile_spec()
    q1 = quantile(y1, spec)
    q_b = quantile(mix(y0, y1, e), spec)
    return q1, q_b, max(cfg.q0, q1) - q_b


def simulate_state(
    rule: str,
    state: GridState,
    y0: Y0Spec,
    cfg: ExperimentConfig,
) -> StateRegret:
    """Regret of one rule (config string) at one state.

    Constant rules take no Monte Carlo path at all.  The empirical
    success rule estimates e over ``cfg.replications`` samples of
    ``cfg.sample_size`` draws from the state (as an exact rational of
    the replication counts); the mixture quantile is then computed
    analytically.
    """
    label = rule
    parsed = parse_rule(label, q0=cfg.q0, quantile_spec=cfg.quantile_spec(),
                        xi=cfg.xi)
    index = state_rank(state)
    y1 = state.distribution()
    y0_dist = y0_distribution(y0)
    if parsed.constant is not None:
        e: Prob = parsed.constant
    elif parsed.label == "esr":
        rng = rng_stream(cfg.seed, index)
        probs = np.array([float(Fraction(m, state.w)) for m in state.masses])
        counts = rng.multinomial(cfg.sample_size, probs, size=cfg.replications)
        treat, tie = _es_counts(counts.cumsum(axis=1), cfg)
        e = Fraction(2 * treat + tie, 2 * cfg.replications)
    else:
        raise ValueError(
            f"the simulator handles constant rules and 'esr', got {label!r}"
        )
    q1, q_b, reg = _exact_state_regret(e, y0_dist, y1, cfg)
    return StateRegret(index, label, e, q1, q_b, reg)


# ---------------------------------------------------------------------------
# Bulk sweeps over the whole state space.
#
# The cumulative mass units of a state take w+1 integer values, so for a
# fixed config and constant rule every comparison against alpha is a
# lookup; tables are built once with exact rationals and the per-state
# scan is vectorized.  The ESR sweep repeats the same event scan with
# per-state float weights.
# ---------------------------------------------------------------------------


class _EventGrid:
    """Event points of the mixture CDF for one config: the grid points
    plus the benchmark distribution's own breakpoints."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.y0 = y0_distribution(cfg.y0_spec())
        grid = [Fraction(j, cfg.n) for j in range(cfg.n + 1)]
        extra = {p for p, _ in self.y0.atoms} | {
            edge for lo, hi, _ in self.y0.segments for edge in (lo, hi)
        }
        self.points = sorted(set(grid) | extra)
        self.grid_at = [
            max(j for j, g in enumerate(grid) if g <= p) for p in self.points
        ]
        self.grid_below = [
            max((j for j, g in enumerate(grid) if g < p), default=-1)
            for p in self.points
        ]
        self.f0_at = [cdf(self.y0, p) for p in self.points]
        self.continuous = bool(self.y0.segments)

    def y0_inverse(self, tau: Fraction) -> Fraction:
        """Inverse CDF of the continuous benchmark (choice II)."""
        alpha, q0 = self.cfg.alpha, self.cfg.q0
        if tau <= alpha:
            return tau * q0 / alpha
        return q0 + (tau - alpha) * (1 - q0) / (1 - alpha)


def _augmented_cum(cum: np.ndarray, ev: _EventGrid) -> np.ndarray:
    """Per-state cumulative units at each event point (and one zero
    column standing in for 'no grid point below')."""
    zero = np.zeros((cum.shape[0], 1), dtype=cum.dtype)
    return np.concatenate([zero, cum], axis=1)


def _constant_sweep(cum: np.ndarray, ev: _EventGrid, e: Fraction, q1_idx: np.ndarray):
    """Exact per-state (regret, q_B) for a constant rule.

    Returns float arrays whose entries are float() of exact rationals,
    so they agree bit-for-bit with the scalar path.
    """
    cfg = ev.cfg
    w = cfg.w
    alpha = cfg.alpha
    n_events = len(ev.points)
    aug = _augmented_cum(cum, ev)
    at_cols = np.array([g + 1 for g in ev.grid_at])
    below_cols = np.array([g + 1 for g in ev.grid_below])

    crosses = np.empty((n_events, w + 1), dtype=bool)
    for k in range(n_events):
        for c in range(w + 1):
            crosses[k, c] = e * Fraction(c, w) + (1 - e) * ev.f0_at[k] >= alpha
    cross_mat = crosses[np.arange(n_events)[None, :], aug[:, at_cols]]
    cross_mat[:, -1] = True  # total mass one always crosses
    first = cross_mat.argmax(axis=1)

    grid_q = [Fraction(j, cfg.n) for j in range(cfg.n + 1)]

    if not ev.continuous:
        reg_table = np.empty((n_events, cfg.n + 1))
        qb_table = np.empty(n_events)
        for k in range(n_events):
            qb_table[k] = float(ev.points[k])
            for j in range(cfg.n + 1):
                reg_table[k, j] = float(max(cfg.q0, grid_q[j]) - ev.points[k])
        return reg_table[first, q1_idx], qb_table[first]

    # continuous benchmark: the crossing may be interior to a segment
    interior = np.empty((n_events, w + 1), dtype=bool)
    qb_inner = np.zeros((n_events, w + 1))
    reg_inner = np.zeros((n_events, w + 1, cfg.n + 1))
    for k in range(n_events):
        for c in range(w + 1):
            left_val = e * Fraction(c, w) + (1 - e) * ev.f0_at[k]
            inner = e < 1 and k > 0 and left_val >= alpha
            interior[k, c] = inner
            if inner:
                tau = (alpha - e * Fraction(c, w)) / (1 - e)
                qb = ev.y0_inverse(tau)
                qb_inner[k, c] = float(qb)
                for j in range(cfg.n + 1):
                    reg_inner[k, c, j] = float(max(cfg.q0, grid_q[j]) - qb)
    rows = np.arange(cum.shape[0])
    c_below = aug[rows, below_cols[first]]
    is_inner = interior[first, c_below]
    reg_table = np.empty((n_events, cfg.n + 1))
    qb_table = np.empty(n_events)
    for k in range(n_events):
        qb_table[k] = float(ev.points[k])
        for j in range(cfg.n + 1):
            reg_table[k, j] = float(max(cfg.q0, grid_q[j]) - ev.points[k])
    regrets = np.where(is_inner, reg_inner[first, c_below, q1_idx],
                       reg_table[first, q1_idx])
    q_b = np.where(is_inner, qb_inner[first, c_below], qb_table[first])
    return regrets, q_b


def _es_sweep(cum: np.ndarray, ev: _EventGrid, e_hat: np.ndarray, q1: np.ndarray):
    """Float per-state (regret, q_B) for the estimated-weight mixture."""
    cfg = ev.cfg
    w = cfg.w
    alpha = float(cfg.alpha)
    aug = _augmented_cum(cum, ev)
    at_cols = np.array([g + 1 for g in ev.grid_at])
    below_cols = np.array([g + 1 for g in ev.grid_below])
    f0 = np.array([float(v) for v in ev.f0_at])
    points = np.array([float(p) for p in ev.points])

    f1_at = aug[:, at_cols] / w
    fb = e_hat[:, None] * f1_at + (1 - e_hat)[:, None] * f0[None, :]
    crossed = fb >= alpha
    crossed[:, -1] = True
    first = crossed.argmax(axis=1)
    rows = np.arange(cum.shape[0])
    q_b = points[first]

    if ev.continuous:
        f1_below = aug[rows, below_cols[first]] / w
        left_val = e_hat * f1_below + (1 - e_hat) * f0[first]
        inner = (left_val >= alpha) & (e_hat < 1) & (first > 0)
        safe = np.where(e_hat < 1, 1 - e_hat, 1.0)
        tau = (alpha - e_hat * f1_below) / safe
        q0f, alphaf = float(cfg.q0), float(cfg.alpha)
        inv = np.where(
            tau <= alphaf,
            tau * q0f / alphaf,
            q0f + (tau - alphaf) * (1 - q0f) / (1 - alphaf),
        )
        q_b = np.where(inner, inv, q_b)

    regrets = np.maximum(float(cfg.q0), q1) - q_b
    return regrets, q_b


def _exact_q1(cum: np.ndarray, cfg: ExperimentConfig):
    """Lower-convention quantile of each grid state (exact indices)."""
    m_lo = math.ceil(cfg.w * cfg.alpha)
    idx = (cum >= m_lo).argmax(axis=1)
    grid = np.array([float(Fraction(j, cfg.n)) for j in range(cfg.n + 1)])
    return idx, grid[idx]


@dataclass
class RegretReport:
    """Per-state regrets for every (case, alpha, q0, rule) plus the
    aggregate views the experiment reports."""

    base: ExperimentConfig
    state_indices: np.ndarray
    entries: dict = field(default_factory=dict)
    # entries[(choice, alpha, q0)] = {
    #   "q1": array, rule: {"e": array, "q_b": array, "regret": array}
    # }

    def configs(self):
        return sorted(self.entries, key=lambda k: (k[0], k[1], k[2]))

    def aggregates(self):
        """rows of (choice, alpha, q0, rule, max, mean, min)."""
        rows = []
        for key in self.configs():
            entry = self.entries[key]
            for rule in self.base.rules:
                reg = entry[rule]["regret"]
                rows.append(
                    (*key, rule, float(reg.max()), float(reg.mean()), float(reg.min()))
                )
        return rows

    def proportions(self):
        """rows of (choice, alpha, q0, rule, strict %, lenient %) against esr."""
        if "esr" not in self.base.rules:
            raise ValueError("proportions need the esr column")
        xi = float(self.base.xi)
        rows = []
        for key in self.configs():
            entry = self.entries[key]
            es = entry["esr"]["regret"]
            total = len(es)
            for rule in self.base.rules:
                if rule == "esr":
                    continue
                other = entry[rule]["regret"]
                strict = 100.0 * np.count_nonzero(es < other - xi) / total
                lenient = 100.0 * np.count_nonzero(es < other + xi) / total
                rows.append((*key, rule, strict, lenient))
        return rows

    def state_rows(self):
        """Per-state CSV rows at full float precision."""
        for key in self.configs():
            choice, alpha, q0 = key
            entry = self.entries[key]
            for rule in self.base.rules:
                col = entry[rule]
                for i, idx in enumerate(self.state_indices):
                    yield (
                        int(idx),
                        str(alpha),
                        str(q0),
                        choice,
                        rule,
                        repr(float(col["e"][i])),
                        repr(float(entry["q1"][i])),
                        repr(float(col["q_b"][i])),
                        repr(float(col["regret"][i])),
                    )


def _es_weights_for_states(
    states: Sequence[GridState],
    cfg: ExperimentConfig,
    pairs: Sequence[tuple],
    indices: Sequence[int],
) -> dict:
    """Monte Carlo ESR weights per state for every (alpha, q0) pair.

    One multinomial draw per state feeds every pair, so any sub-grid of
    configs sees exactly the weights the full grid would.
    """
    out = {pair: np.empty(len(states)) for pair in pairs}
    pair_cfgs = [(pair, replace(cfg, alpha=pair[0], q0=pair[1])) for pair in pairs]
    denom = 2 * cfg.replications
    for pos, state in enumerate(states):
        rng = rng_stream(cfg.seed, indices[pos])
        probs = np.array([float(Fraction(m, state.w)) for m in state.masses])
        counts = rng.multinomial(cfg.sample_size, probs, size=cfg.replications)
        cum = counts.cumsum(axis=1)
        for pair, pair_cfg in pair_cfgs:
            treat, tie = _es_counts(cum, pair_cfg)
            out[pair][pos] = (2 * treat + tie) / denom
    return out


def _es_weights_worker(args):
    states, cfg, pairs, lo = args
    weights = _es_weights_for_states(
        states, cfg, pairs, list(range(lo, lo + len(states)))
    )
    return lo, weights


def run_experiment(
    base: ExperimentConfig,
    alphas: Optional[Iterable[Prob]] = None,
    q0s: Optional[Iterable[Prob]] = None,
    choices: Optional[Iterable[str]] = None,
    *,
    threads: int = 1,
) -> RegretReport:
    """Sweep every state for every config in the grid.

    ``base`` supplies the shared sizes and seed; alphas/q0s/choices
    default to the single values in ``base``.
    """
    if base.r != 0:
        raise ValueError(
            "bulk sweeps use the lower quantile (r=0); simulate_state handles other r"
        )
    alphas = [frac(a) for a in (alphas if alphas is not None else [base.alpha])]
    q0s = [frac(q) for q in (q0s if q0s is not None else [base.q0])]
    choices = list(choices) if choices is not None else [base.y0_choice]

    states = list(enumerate_states(base.n, base.w))
    indices = list(range(len(states)))
    cum = _state_counts_matrix(states).cumsum(axis=1)
    report = RegretReport(
        base=base, state_indices=np.array(indices, dtype=np.int64)
    )

    pairs = [(a, q) for a in alphas for q in q0s]
    es_weights: dict = {}
    if "esr" in base.rules:
        if threads > 1:
            es_weights = _es_weights_parallel(states, base, pairs, threads)
        else:
            es_weights = _es_weights_for_states(states, base, pairs, indices)

    for choice in choices:
        for alpha in alphas:
            for q0 in q0s:
                cfg = replace(base, alpha=alpha, q0=q0, y0_choice=choice)
                ev = _EventGrid(cfg)
                q1_idx, q1 = _exact_q1(cum, cfg)
                entry: dict = {"q1": q1}
                for rule in base.rules:
                    if rule == "esr":
                        e_hat = es_weights[(alpha, q0)]
                        regrets, q_b = _es_sweep(cum, ev, e_hat, q1)
                        entry[rule] = {"e": e_hat, "q_b": q_b, "regret": regrets}
                    else:
                        c = frac(rule[len("const:"):])
                        regrets, q_b = _constant_sweep(cum, ev, c, q1_idx)
                        entry[rule] = {
                            "e": np.full(len(states), float(c)),
                            "q_b": q_b,
                            "regret": regrets,
                        }
                report.entries[(choice, alpha, q0)] = entry
    return report


def _es_weights_parallel(states, base, pairs, threads):
    from concurrent.futures import ProcessPoolExecutor

    chunk = math.ceil(len(states) / threads)
    jobs = [
        (states[lo:lo + chunk], base, pairs, lo)
        for lo in range(0, len(states), chunk)
    ]
    out = {pair: np.empty(len(states)) for pair in pairs}
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for lo, weights in pool.map(_es_weights_worker, jobs):
            for pair, chunk_vals in weights.items():
                out[pair][lo:lo + len(chunk_vals)] = chunk_vals
    return out


def run_table1(
    base: ExperimentConfig,
    alphas: Optional[Iterable[Prob]] = None,
    q0s: Optional[Iterable[Prob]] = None,
    choices: Optional[Iterable[str]] = None,
    *,
    threads: int = 1,
) -> RegretReport:
    """Max/mean/min regret per rule over all states, per config."""
    return run_experiment(base, alphas, q0s, choices, threads=threads)


def run_table2(
    base: ExperimentConfig,
    alphas: Optional[Iterable[Prob]] = None,
    q0s: Optional[Iterable[Prob]] = None,
    choices: Optional[Iterable[str]] = None,
    *,
    threads: int = 1,
) -> RegretReport:
    """Same sweep; consumers read ``proportions()`` off the report."""
    return run_experiment(base, alphas, q0s, choices, threads=threads)
