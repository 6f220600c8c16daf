"""Long-term statistical beamforming protocol.

The long-term step runs a two-layer penalty method: an inner alternating
loop that updates the reference power allocation in closed form and then
improves the coefficient vectors by one convex subproblem, and an outer
loop that grows the penalty weight until the worst binary-amplitude
violation drops below the termination threshold.  The short-term step is a
pure per-block computation: effective gains, closed-form powers, SIC rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sca
from .channel import ChannelRealization, StatisticalCsi
from .coefficients import StarCoefficients, validate
from .expectations import BteExpectationParams, expected_gain_bte, expected_rate_bte
from .noma import (InfeasibleProblemError, NomaConfig, PowerAllocation, RateReport,
                   adjusted_rates, optimal_power_allocation, outage_report, sic_rates)


@dataclass(frozen=True)
class PenaltySchedule:
    """Penalty weight schedule and termination settings."""

    eta0: float = 1e-4
    omega: float = 10.0
    epsilon: float = 1e-7
    n_max: int = 20
    max_outer: int = 15
    inner_rel_tol: float = 1e-4
    n_restarts: int = 3

    def __post_init__(self):
        if self.eta0 <= 0 or self.omega <= 1 or self.epsilon <= 0:
            raise ValueError("require eta0 > 0, omega > 1, epsilon > 0")


@dataclass(frozen=True)
class OuterRecord:
    """Per-outer-loop convergence data."""

    outer: int
    eta: float
    violation: float
    approx_sum_rate: float
    inner_objectives: tuple[float, ...]


@dataclass(frozen=True)
class BteSolution:
    coeffs: StarCoefficients
    reference_powers: PowerAllocation
    expected_gains: np.ndarray
    trace: tuple[OuterRecord, ...] = ()


def _sinr(gains, p, sigma2):
    gains = np.asarray(gains, dtype=float)
    p = np.asarray(p, dtype=float)
    interf = gains * np.concatenate(([0.0], np.cumsum(p)[:-1]))
    return p * gains / (interf + sigma2)


def expected_gains(scsi: StatisticalCsi, coeffs: StarCoefficients) -> np.ndarray:
    params = BteExpectationParams.from_scsi(scsi)
    return np.array([expected_gain_bte(scsi, params, coeffs.v_t, coeffs.v_r, k, scsi.user_regions[k])
                     for k in range(scsi.n_users)])


def _reference_powers(gains, cfg: NomaConfig):
    """Closed-form powers on expected gains; uniform fallback keeps the AO
    anchored when the targets are momentarily unreachable."""
    pa = optimal_power_allocation(gains, cfg)
    if pa.feasible:
        return pa.p, True
    return np.full(cfg.n_users, cfg.p_max / cfg.n_users), False


def _initial_coefficients(scsi: StatisticalCsi, restart: int, rng: np.random.Generator,
                          mode_mask=None) -> StarCoefficients:
    """Energy-feasible interior start with phases aligned to the strongest
    user of each region (random phases on restarts).

    Amplitudes are jittered around sqrt(1/2): the exactly symmetric split is
    a fixed point of the majorized penalty iteration (both modes pull
    equally), so a seeded asymmetry is needed for the element-wise mode
    selection to take off.
    """
    m = scsi.n_elements
    regions = np.array(scsi.user_regions)
    phases = {}
    for region in ("t", "r"):
        users = np.nonzero(regions == region)[0]
        if restart > 0 or len(users) == 0:
            phases[region] = rng.uniform(0.0, 2.0 * np.pi, m) if restart > 0 else np.zeros(m)
        else:
            phases[region] = -np.angle(scsi.w_los[users[0]])
    energy_t = 0.5 + rng.uniform(-0.15, 0.15, m)
    v_t = np.sqrt(energy_t) * np.exp(1j * phases["t"])
    v_r = np.sqrt(1.0 - energy_t) * np.exp(1j * phases["r"])
    if mode_mask is not None:
        mode_mask = np.asarray(mode_mask)
        v_t = np.where(mode_mask == "r", 0.0, v_t)
        v_r = np.where(mode_mask == "t", 0.0, v_r)
    return StarCoefficients(v_t, v_r)


def _round_binary(coeffs: StarCoefficients) -> StarCoefficients:
    """Snap amplitudes to {0, 1} keeping phases; an element whose two
    amplitudes are both below 1/2 stays off (only reachable with frozen
    modes)."""
    amp_t = np.abs(coeffs.v_t)
    amp_r = np.abs(coeffs.v_r)
    on_t = (amp_t >= amp_r) & (amp_t >= 0.5)
    on_r = (amp_r > amp_t) & (amp_r >= 0.5)
    phase = lambda v: np.exp(1j * np.angle(v))
    v_t = np.where(on_t, phase(coeffs.v_t), 0.0)
    v_r = np.where(on_r, phase(coeffs.v_r), 0.0)
    return StarCoefficients(v_t, v_r)


def optimize_long_term(scsi: StatisticalCsi, cfg: NomaConfig,
                       sched: PenaltySchedule | None = None,
                       init: StarCoefficients | None = None,
                       mode_mask=None, order_margin: float | None = None) -> BteSolution:
    """Penalty-based two-layer optimization of the binary coefficients.

    Raises InfeasibleProblemError when no feasible start is found within the
    restart budget or the final rounded solution cannot meet the targets.
    """
    sched = sched or PenaltySchedule()
    rng = np.random.default_rng(0)
    last_failure = "no feasible initialization"
    for restart in range(sched.n_restarts + 1):
        coeffs = init if (init is not None and restart == 0) else \
            _initial_coefficients(scsi, restart, rng, mode_mask)
        result = _run_penalty_loops(scsi, cfg, sched, coeffs, mode_mask, order_margin)
        if isinstance(result, str):
            last_failure = result
            continue
        return result
    raise InfeasibleProblemError(f"statistical beamforming failed: {last_failure}")


def _run_penalty_loops(scsi, cfg, sched, coeffs, mode_mask, order_margin):
    """One full two-layer run from a given start; returns a failure reason
    string when the very first subproblem is infeasible."""
    eta = sched.eta0
    trace = []
    v_t, v_r = coeffs.v_t, coeffs.v_r
    first_solve = True
    for outer in range(sched.max_outer):
        inner_objs = []
        for _ in range(sched.n_max):
            gains = expected_gains(scsi, StarCoefficients(v_t, v_r))
            powers, _ = _reference_powers(gains, cfg)
            chi = _sinr(gains, powers, cfg.sigma2)
            anchor = sca.AnchorPoint(v_t, v_r, chi)
            model = sca.assemble(scsi, powers, cfg.gamma, eta, anchor, cfg.sigma2,
                                 order_margin=order_margin, mode_mask=mode_mask)
            sol = sca.solve(model)
            if sol.status == sca.STATUS_INFEASIBLE:
                if first_solve:
                    return "initial subproblem infeasible"
                break
            first_solve = False
            # monotone safeguard: the exact step never decreases the
            # penalized objective, so a drop is solver noise and the iterate
            # is rejected
            if inner_objs and sol.objective < inner_objs[-1]:
                break
            v_t, v_r = sol.v_t, sol.v_r
            inner_objs.append(sol.objective)
            if len(inner_objs) >= 2:
                prev = inner_objs[-2]
                if inner_objs[-1] - prev < sched.inner_rel_tol * (1.0 + abs(prev)):
                    break
        violation = validate(StarCoefficients(v_t, v_r)).binary_violation
        trace.append(OuterRecord(outer, eta, violation,
                                 _approx_sum_rate(scsi, cfg, StarCoefficients(v_t, v_r)),
                                 tuple(inner_objs)))
        if violation <= sched.epsilon:
            break
        eta *= sched.omega

    final = _round_binary(StarCoefficients(v_t, v_r))
    gains = expected_gains(scsi, final)
    pa = optimal_power_allocation(gains, cfg)
    if not pa.feasible:
        raise InfeasibleProblemError("rate targets unreachable at the converged coefficients")
    return BteSolution(final, pa, gains, tuple(trace))


def _approx_sum_rate(scsi, cfg, coeffs) -> float:
    gains = expected_gains(scsi, coeffs)
    pa = optimal_power_allocation(gains, cfg)
    if not pa.feasible:
        return 0.0
    rates = expected_rate_bte(gains, pa.p, cfg.sigma2, cfg.t_coherence, cfg.n_users)
    return float(rates.sum())


def approx_sum_rate(scsi: StatisticalCsi, cfg: NomaConfig, solution: BteSolution) -> float:
    """Expected adjusted sum-rate of a long-term solution (the optimizer's
    own rate model)."""
    rates = expected_rate_bte(solution.expected_gains, solution.reference_powers.p,
                              cfg.sigma2, cfg.t_coherence, cfg.n_users)
    return float(rates.sum())


def short_term_bte(realization: ChannelRealization, coeffs: StarCoefficients,
                   cfg: NomaConfig) -> tuple[PowerAllocation, RateReport]:
    """Per-block power allocation and rates from the realized effective gains
    (training overhead: one pilot per user)."""
    regions = realization.user_regions
    k_total = realization.n_users
    ch = np.array([realization.h[k] + realization.w[k] @ coeffs.for_region(regions[k])
                   for k in range(k_total)])
    gains = np.abs(ch) ** 2
    order = cfg.decoding_order
    pa = optimal_power_allocation(gains[order], cfg)
    overhead = k_total
    if not pa.feasible:
        return pa, outage_report(k_total, overhead)
    rates_sorted = sic_rates(gains[order], pa.p, cfg.sigma2)
    rates = np.empty(k_total)
    rates[order] = rates_sorted
    return pa, adjusted_rates(rates, overhead, cfg.t_coherence)
