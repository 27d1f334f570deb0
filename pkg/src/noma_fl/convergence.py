"""Convergence bound of the selection-gated federated update.

The bound tracks, per device, the probability that a transmitted frame
stays within the acceptance error budget (a binomial CDF in the device's
symbol error rate), folds those into a contraction factor, and evaluates
the resulting geometric upper bound on the optimality gap.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConvergenceParams:
    """Loss-landscape constants: strong convexity, gradient Lipschitz, norm bounds."""

    mu: float
    lipschitz: float
    zeta1: float
    zeta2: float

    def __post_init__(self):
        if not 0 < self.mu < self.lipschitz:
            raise ValueError("need 0 < mu < lipschitz")
        if self.zeta1 < 0 or self.zeta2 < 0:
            raise ValueError("zeta1 and zeta2 must be >= 0")


def acceptance_probability(ser: float, num_symbols: int, tr_ser: float) -> float:
    """Probability that at most floor(num_symbols * tr_ser) symbols err.

    Exact binomial CDF, evaluated by anchoring the largest in-range term in
    log space (exact integer binomial coefficient) and recursing outward
    with term ratios, which stays accurate for any (ser, q) combination.
    """
    q = int(num_symbols)
    if q < 1:
        raise ValueError("num_symbols must be >= 1")
    if not 0.0 <= ser <= 1.0 or not 0.0 <= tr_ser <= 1.0:
        raise ValueError("ser and tr_ser must be probabilities")
    budget = int(math.floor(q * tr_ser))
    if budget >= q:
        return 1.0
    if ser == 0.0:
        return 1.0
    if ser == 1.0:
        return 0.0

    # largest binomial term within [0, budget]
    mode = min(budget, int(math.floor((q + 1) * ser)))
    log_anchor = (
        math.log(math.comb(q, mode))
        + mode * math.log(ser)
        + (q - mode) * math.log1p(-ser)
    )
    anchor = math.exp(log_anchor)
    if anchor == 0.0:
        # whole in-range mass is below double-precision underflow
        return 0.0

    odds = ser / (1.0 - ser)
    total = anchor
    term = anchor
    for m in range(mode, 0, -1):  # downward: term(m-1) = term(m) * m / ((q-m+1) odds)
        term *= m / ((q - m + 1) * odds)
        total += term
    term = anchor
    for m in range(mode, budget):  # upward: term(m+1) = term(m) * (q-m) odds / (m+1)
        term *= (q - m) * odds / (m + 1)
        total += term
    return min(total, 1.0)


def contraction_factor(
    params: ConvergenceParams, data_sizes, schedule, acceptance_probs
) -> float:
    """Per-round contraction of the gap bound; below 1 means convergence."""
    d = np.asarray(data_sizes, dtype=float)
    a = np.asarray(schedule, dtype=float)
    xi = np.asarray(acceptance_probs, dtype=float)
    total = float(d.sum())
    if total <= 0:
        raise ValueError("total data size must be positive")
    penalty = float(np.sum(d * (1.0 - a * xi))) / total
    return 1.0 - params.mu / params.lipschitz + 4.0 * params.mu * params.zeta2 / params.lipschitz * penalty


def optimality_gap_bound(
    num_rounds: int,
    params: ConvergenceParams,
    data_sizes,
    schedule,
    acceptance_probs,
    initial_gap: float,
    factor: float | None = None,
) -> float:
    """Upper bound on the expected loss gap after `num_rounds` rounds.

    First term: accumulated transmission-error penalty through the geometric
    series of the contraction factor (replaced by its N limit when the
    factor is exactly 1); second term: geometrically shrunk initial gap.
    """
    if num_rounds < 1:
        raise ValueError("num_rounds must be >= 1")
    d = np.asarray(data_sizes, dtype=float)
    a = np.asarray(schedule, dtype=float)
    xi = np.asarray(acceptance_probs, dtype=float)
    total = float(d.sum())
    factor_a = (
        contraction_factor(params, data_sizes, schedule, acceptance_probs)
        if factor is None
        else factor
    )
    penalty = 2.0 * params.zeta1 / (params.lipschitz * total) * float(np.sum(d * (1.0 - a * xi)))
    if factor_a == 1.0:
        series = float(num_rounds)
    else:
        series = (1.0 - factor_a**num_rounds) / (1.0 - factor_a)
    return penalty * series + factor_a**num_rounds * initial_gap


@dataclass(frozen=True)
class ConditionReport:
    satisfied: bool
    error_term: float  # left-hand side, grows with transmission errors
    margin: float  # right-hand side mu / L

    def __bool__(self) -> bool:
        return self.satisfied


def convergence_condition(
    params: ConvergenceParams, data_sizes, schedule, acceptance_probs
) -> ConditionReport:
    """Strict condition for the bound to contract (equivalent to factor < 1)."""
    d = np.asarray(data_sizes, dtype=float)
    a = np.asarray(schedule, dtype=float)
    xi = np.asarray(acceptance_probs, dtype=float)
    total = float(d.sum())
    if total <= 0:
        raise ValueError("total data size must be positive")
    lhs = 4.0 * params.mu * params.zeta2 / (params.lipschitz * total) * float(
        np.sum(d * (1.0 - a * xi))
    )
    rhs = params.mu / params.lipschitz
    return ConditionReport(satisfied=bool(lhs < rhs), error_term=float(lhs), margin=float(rhs))


def estimate_lipschitz(grad_fn, points: np.ndarray) -> float:
    """Crude empirical Lipschitz constant of a gradient over sampled points.

    Max of ||g(w1) - g(w2)|| / ||w1 - w2|| over consecutive pairs; an
    estimate for configuring bounds, never a certified constant.
    """
    points = np.asarray(points, dtype=float)
    if points.shape[0] < 2:
        raise ValueError("need at least two points")
    grads = [np.asarray(grad_fn(p)) for p in points]
    best = 0.0
    for i in range(len(points) - 1):
        dw = np.linalg.norm(points[i + 1] - points[i])
        if dw == 0:
            continue
        best = max(best, float(np.linalg.norm(grads[i + 1] - grads[i]) / dw))
    return best
