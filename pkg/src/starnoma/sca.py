"""Convex inner subproblem of the penalty method: surrogate construction and
solve.

The subproblem maximizes sum log2(1 + chi_k) - eta * sum f0 over the two
coefficient vectors and the SINR auxiliaries chi, subject to per-element
energy conservation, rate floors, linearized SINR constraints, and
decoding-order (expected-gain ordering) constraints.  All surrogates are
first-order Taylor bounds anchored at the previous iterate: f0 over-estimates
the binary-violation penalty |v| - |v|^2, f1..f4 under-estimate their
targets and are tight at the anchor.

The numeric functions in this module are the reference definitions used by
the domination tests; ``assemble`` mirrors them symbolically for the solver.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .channel import REGION_T, StatisticalCsi
from .expectations import BteExpectationParams

LN2 = np.log(2.0)

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_MAX_ITERATIONS = "max-iterations"


@dataclass(frozen=True)
class AnchorPoint:
    """Local point (v_t, v_r, chi) all surrogates are anchored at."""

    v_t: np.ndarray
    v_r: np.ndarray
    chi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v_t", np.asarray(self.v_t, dtype=complex))
        object.__setattr__(self, "v_r", np.asarray(self.v_r, dtype=complex))
        object.__setattr__(self, "chi", np.asarray(self.chi, dtype=float))
        energy = np.abs(self.v_t) ** 2 + np.abs(self.v_r) ** 2
        if np.any(energy > 1.0 + 1e-6):
            raise ValueError("anchor violates per-element energy conservation")
        if np.any(self.chi <= 0):
            raise ValueError("anchor SINR values must be positive")

    def for_region(self, region: str) -> np.ndarray:
        return self.v_t if region == REGION_T else self.v_r


def surrogate_f0(v, v_anchor):
    """Per-element over-estimator of |v| - |v|^2, tight at the anchor:
    |v| - [2 Re(conj(anchor) v) - |anchor|^2]."""
    v = np.asarray(v)
    v_anchor = np.asarray(v_anchor)
    return np.abs(v) - (2.0 * np.real(np.conj(v_anchor) * v) - np.abs(v_anchor) ** 2)


def surrogate_f1(chi, chi_anchor):
    """Affine under-estimator of 1/chi: 2/chi~ - chi/chi~^2."""
    return 2.0 / chi_anchor - np.asarray(chi) / chi_anchor ** 2


def surrogate_f2(v, chi, v_anchor, chi_anchor, wbar_row, printed_variant=False):
    """Under-estimator of |wbar^H v|^2 / chi anchored at (v~, chi~).

    The conventional first-order bound uses the chi coefficient
    |wbar^H v~|^2 / chi~^2; the printed variant squares the whole ratio
    (|wbar^H v~|^2 / chi~)^2, which is not a global minorant in general and
    is kept only for reference.
    """
    a = np.asarray(wbar_row) @ np.asarray(v_anchor)
    lin = 2.0 * np.real(np.conj(a) * (np.asarray(wbar_row) @ np.asarray(v))) / chi_anchor
    coef = (np.abs(a) ** 2 / chi_anchor) ** 2 if printed_variant else np.abs(a) ** 2 / chi_anchor ** 2
    return lin - coef * np.asarray(chi)


def surrogate_f3(v, chi, v_anchor, chi_anchor, printed_variant=False):
    """Under-estimator of sum_m |v_m|^2 / chi anchored at (v~, chi~)."""
    v = np.asarray(v)
    v_anchor = np.asarray(v_anchor)
    lin = 2.0 * np.sum(np.real(np.conj(v_anchor) * v)) / chi_anchor
    amps2 = np.abs(v_anchor) ** 2
    coef = np.sum((amps2 / chi_anchor) ** 2) if printed_variant else np.sum(amps2) / chi_anchor ** 2
    return lin - coef * np.asarray(chi)


def surrogate_f4(v, v_anchor, delta_k, eps_k, zeta_k, wbar_row):
    """Affine under-estimator of the expected gain delta + eps |wbar^H v|^2 +
    zeta sum |v_m|^2, tight at the anchor."""
    v = np.asarray(v)
    v_anchor = np.asarray(v_anchor)
    a = np.asarray(wbar_row) @ v_anchor
    lin_w = 2.0 * np.real(np.conj(a) * (np.asarray(wbar_row) @ v)) - np.abs(a) ** 2
    lin_e = 2.0 * np.sum(np.real(np.conj(v_anchor) * v)) - np.sum(np.abs(v_anchor) ** 2)
    return delta_k + eps_k * lin_w + zeta_k * lin_e


@dataclass
class SubproblemModel:
    """Assembled convex subproblem plus the data needed to interpret it."""

    problem: cp.Problem
    v_t: cp.Variable
    v_r: cp.Variable
    chi: cp.Variable
    anchor: AnchorPoint
    eta: float
    regions: tuple[str, ...]
    anchor_objective: float


@dataclass(frozen=True)
class ScaSolution:
    v_t: np.ndarray
    v_r: np.ndarray
    chi: np.ndarray
    objective: float
    status: str
    solver: str = ""


def penalty_value(v_t, v_r) -> float:
    """Total binary-violation penalty sum_m,s (|v| - |v|^2)."""
    total = 0.0
    for v in (v_t, v_r):
        amp = np.abs(np.asarray(v))
        total += float(np.sum(amp - amp ** 2))
    return total


def penalized_objective(chi, v_t, v_r, eta: float) -> float:
    """sum log2(1 + chi) - eta * penalty, the quantity the inner loop drives."""
    return float(np.sum(np.log2(1.0 + np.asarray(chi)))) - eta * penalty_value(v_t, v_r)


def assemble(scsi: StatisticalCsi, powers, gamma, eta: float, anchor: AnchorPoint,
             sigma2: float, order_margin: float | None = None,
             printed_f2f3: bool = False, mode_mask=None) -> SubproblemModel:
    """Build the convex subproblem for the given reference powers and anchor.

    Gains are normalized by the noise power and each SINR constraint is
    rescaled so both sides are O(1) at the anchor, which the interior-point
    solvers need on physically scaled instances.  ``mode_mask`` optionally
    pins elements to one mode ('t' or 'r'): the opposite coefficient is
    constrained to zero (used by the conventional-RIS benchmark).
    """
    k_total = scsi.n_users
    m = scsi.n_elements
    powers = np.asarray(powers, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(powers <= 0):
        raise ValueError("reference powers must be positive")
    if len(anchor.v_t) != m or len(anchor.chi) != k_total:
        raise ValueError("anchor does not match the problem dimensions")
    regions = scsi.user_regions
    params = BteExpectationParams.from_scsi(scsi)
    # noise-normalized constants
    delta = scsi.delta_k / sigma2
    eps_k = params.epsilon_k / sigma2
    zeta_k = params.zeta_k / sigma2
    if order_margin is None:
        order_margin = 1e-9 * scsi.delta_k[0]
    margin = order_margin / sigma2

    v_t = cp.Variable(m, complex=True, name="v_t")
    v_r = cp.Variable(m, complex=True, name="v_r")
    chi = cp.Variable(k_total, nonneg=True, name="chi")
    variables = {REGION_T: v_t, "r": v_r}
    anchors = {REGION_T: anchor.v_t, "r": anchor.v_r}

    cons = [cp.square(cp.abs(v_t)) + cp.square(cp.abs(v_r)) <= np.ones(m)]
    cons.append(chi >= 2.0 ** gamma - 1.0)
    if mode_mask is not None:
        mode_mask = np.asarray(mode_mask)
        if np.any(mode_mask == REGION_T):
            cons.append(v_r[mode_mask == REGION_T] == 0)
        if np.any(mode_mask == "r"):
            cons.append(v_t[mode_mask == "r"] == 0)

    def egain_expr(k):
        v = variables[regions[k]]
        return (delta[k] + eps_k[k] * cp.square(cp.abs(scsi.w_los[k] @ v))
                + zeta_k[k] * cp.sum_squares(v))

    def egain_value(k):
        va = anchors[regions[k]]
        return delta[k] + eps_k[k] * np.abs(scsi.w_los[k] @ va) ** 2 + zeta_k[k] * np.sum(np.abs(va) ** 2)

    def f4_expr(k):
        v, va = variables[regions[k]], anchors[regions[k]]
        a = scsi.w_los[k] @ va
        lin_w = 2.0 * cp.real(cp.conj(a) * (scsi.w_los[k] @ v)) - np.abs(a) ** 2
        lin_e = 2.0 * cp.real(cp.conj(va) @ v) - np.sum(np.abs(va) ** 2)
        return delta[k] + eps_k[k] * lin_w + zeta_k[k] * lin_e

    gains_anchor = np.array([egain_value(k) for k in range(k_total)])
    for k in range(k_total):
        v, va = variables[regions[k]], anchors[regions[k]]
        a = scsi.w_los[k] @ va
        ct = anchor.chi[k]
        f1 = 2.0 / ct - chi[k] / ct ** 2
        coef2 = (np.abs(a) ** 2 / ct) ** 2 if printed_f2f3 else np.abs(a) ** 2 / ct ** 2
        f2 = 2.0 * cp.real(cp.conj(a) * (scsi.w_los[k] @ v)) / ct - coef2 * chi[k]
        amps2 = np.abs(va) ** 2
        coef3 = np.sum((amps2 / ct) ** 2) if printed_f2f3 else np.sum(amps2) / ct ** 2
        f3 = 2.0 * cp.real(cp.conj(va) @ v) / ct - coef3 * chi[k]
        scale = ct / (powers[k] * gains_anchor[k])
        interferers = powers[:k].sum()
        cons.append(scale * powers[k] * (delta[k] * f1 + eps_k[k] * f2 + zeta_k[k] * f3)
                    >= scale * (interferers * egain_expr(k) + 1.0))

    gscale = 1.0 / gains_anchor.max()
    for k in range(k_total):
        for j in range(k + 1, k_total):
            cons.append(gscale * f4_expr(k) >= gscale * (egain_expr(j) + margin))

    pen = 0
    for region in ("t", "r"):
        v, va = variables[region], anchors[region]
        pen = pen + (cp.sum(cp.abs(v))
                     - 2.0 * cp.sum(cp.real(cp.multiply(np.conj(va), v)))
                     + np.sum(np.abs(va) ** 2))
    objective = cp.Maximize(cp.sum(cp.log1p(chi)) / LN2 - eta * pen)
    problem = cp.Problem(objective, cons)
    anchor_obj = penalized_objective(anchor.chi, anchor.v_t, anchor.v_r, eta)
    return SubproblemModel(problem, v_t, v_r, chi, anchor, eta, tuple(regions), anchor_obj)


_REDUCED_TOLS = {"reduced_tol_gap_abs": 5e-6, "reduced_tol_gap_rel": 5e-6,
                 "reduced_tol_feas": 1e-6}

_SOLVER_ATTEMPTS = (
    ("CLARABEL", _REDUCED_TOLS),
    ("CLARABEL", {"max_iter": 400, "tol_gap_abs": 1e-7, "tol_gap_rel": 1e-7,
                  "tol_feas": 1e-7, **_REDUCED_TOLS}),
    ("SCS", {"eps": 1e-6, "max_iters": 20000}),
)


def _project_energy_ball(v_t: np.ndarray, v_r: np.ndarray):
    """Scale element pairs back onto |v_t|^2 + |v_r|^2 <= 1 (removes the
    solver's feasibility slack so solutions can seed the next anchor)."""
    energy = np.abs(v_t) ** 2 + np.abs(v_r) ** 2
    scale = np.where(energy > 1.0, 1.0 / np.sqrt(np.maximum(energy, 1.0)), 1.0)
    return v_t * scale, v_r * scale


def solve(model: SubproblemModel, tol: float = 1e-8) -> ScaSolution:
    """Solve the assembled subproblem, falling back across solvers on
    numerical failure.  Returns the anchor as best iterate when every solver
    fails."""
    prob = model.problem
    for solver_name, extra in _SOLVER_ATTEMPTS:
        kwargs = dict(extra)
        if solver_name == "CLARABEL" and "tol_gap_abs" not in kwargs:
            kwargs.update({"tol_gap_abs": tol, "tol_gap_rel": tol, "tol_feas": tol})
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                prob.solve(solver=solver_name, **kwargs)
        except (cp.error.SolverError, ValueError):
            continue
        status = prob.status
        if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) and model.v_t.value is not None:
            mapped = STATUS_OPTIMAL if status == cp.OPTIMAL else STATUS_MAX_ITERATIONS
            v_t, v_r = _project_energy_ball(np.array(model.v_t.value), np.array(model.v_r.value))
            return ScaSolution(v_t, v_r, np.array(model.chi.value),
                               float(prob.value), mapped, solver_name)
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return ScaSolution(model.anchor.v_t, model.anchor.v_r, model.anchor.chi,
                               -np.inf, STATUS_INFEASIBLE, solver_name)
    return ScaSolution(model.anchor.v_t, model.anchor.v_r, model.anchor.chi,
                       model.anchor_objective, STATUS_MAX_ITERATIONS, "none")
