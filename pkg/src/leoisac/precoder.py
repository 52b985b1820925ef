"""Two-layer precoder design: lifted semidefinite subproblems with a
rank-ratio outer loop and a convexified inner loop.

The design maximizes the worst user's total rate subject to a transmit-power
budget and a floor on the beamforming gain toward the radar target (the
trace form of the AOA accuracy constraint).  Rank-one lifts are recovered by
gradually raising the required principal-eigenvalue-to-trace ratio of every
lifted matrix; each fixed ratio level is solved by alternating convex
subproblems whose interference caps are first-order expansions around the
previous iterate.

Internally all powers are normalized by the power budget so lifted traces
stay in [0, 1]; results are scaled back on extraction.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from numpy.typing import NDArray

from .rates import CommonRateAlloc, ModeConfig, PrecoderMatrix

STATUS_CONVERGED = "converged"
STATUS_ITER_CAP = "iter-cap"
STATUS_INFEASIBLE = "infeasible"

#: Lifted matrices with a smaller trace share are treated as switched off
#: when judging rank ratios (0/0 guard; a zero matrix is at most rank one).
NEGLIGIBLE_TRACE = 1e-9

#: Step-halving floor; below this the outer loop cannot make progress.
DELTA_UNDERFLOW = 1e-12

#: Optional streams (common / radar columns) whose budget share falls below
#: this are switched off and removed from the problem.  Degenerate leftovers
#: at this scale are solver artifacts whose rank ratio cannot be certified at
#: interior-point tolerance; a subsequent re-solve without the stream
#: restores exact feasibility of every constraint.
PRUNE_TRACE = 1e-4


class InfeasibleDesign(Exception):
    """The accuracy constraint cannot be met within the power budget."""


@dataclass(frozen=True)
class DesignInputs:
    """Everything the optimizer needs to know about the scene."""

    a_users: NDArray[np.complex128]
    rhos: NDArray[np.float64]
    a_tar: NDArray[np.complex128] | None
    required_target_gain: float

    def __post_init__(self) -> None:
        if self.a_users.ndim != 2 or self.a_users.shape[0] < 1:
            raise ValueError("at least one user is required")
        if np.any(np.asarray(self.rhos) <= 0):
            raise ValueError("noise-to-channel-power ratios must be positive")

    @property
    def num_users(self) -> int:
        return self.a_users.shape[0]

    @property
    def n_tx(self) -> int:
        return self.a_users.shape[1]


@dataclass(frozen=True)
class OptConfig:
    """Algorithm knobs: budget, thresholds via DesignInputs, loop controls."""

    p_t: float
    mode: ModeConfig
    eps_rank: float = 0.9999
    eps_obj: float = 1e-4
    delta0: float = 0.1
    m_max: int = 60
    n_max: int = 30
    solver: str = "CLARABEL"

    def __post_init__(self) -> None:
        if not 0 < self.eps_rank < 1:
            raise ValueError("eps_rank must lie in (0, 1)")
        if self.delta0 <= 0 or self.p_t <= 0:
            raise ValueError("delta0 and power budget must be positive")
        if self.m_max < 1 or self.n_max < 1:
            raise ValueError("iteration caps must be at least 1")


@dataclass
class SdrLift:
    """Lifted solution: PSD matrices per stream plus auxiliary variables."""

    pbar: dict[int, NDArray[np.complex128]]
    common_shares: NDArray[np.float64]
    r_min: float
    c: NDArray[np.float64]
    d: NDArray[np.float64]
    e: NDArray[np.float64]
    f: NDArray[np.float64]


@dataclass
class OptResult:
    """Outcome of one design run."""

    precoder: PrecoderMatrix
    common_alloc: CommonRateAlloc
    r_min: float
    status: str
    w_trajectory: list[dict[int, float]] = field(default_factory=list)
    eigen_ratios: dict[int, float] = field(default_factory=dict)
    lift: SdrLift | None = None
    outer_iterations: int = 0
    subproblem_solves: int = 0
    solve_seconds: float = 0.0


def active_columns(mode: ModeConfig, num_users: int) -> list[int]:
    """Column indices (into the K+2 layout) carrying nonzero streams."""
    cols = list(range(num_users))
    if mode.has_common:
        cols.append(num_users)
    if mode.has_radar_stream:
        cols.append(num_users + 1)
    return cols


def _mode_without(mode: ModeConfig, num_users: int, dead: list[int]) -> ModeConfig:
    """Mode cell with the listed optional columns switched off."""
    return ModeConfig(
        multiple_access="sdma" if num_users in dead else mode.multiple_access,
        radar_sequence=False if num_users + 1 in dead else mode.radar_sequence,
        sic_of_radar=mode.sic_of_radar,
        comm_only=mode.comm_only,
    )


def eigen_ratio(pbar: NDArray[np.complex128]) -> float:
    """lambda_max over the positive-part trace, zero matrices count as rank one.

    Solver output can carry negative eigenvalues at tolerance level; the
    positive-part trace keeps the ratio in [0, 1] without changing it for
    genuinely PSD matrices.
    """
    evals = np.linalg.eigvalsh(pbar)
    tr = float(np.sum(np.maximum(evals, 0.0)))
    if tr <= NEGLIGIBLE_TRACE:
        return 1.0
    return float(max(evals[-1], 0.0) / tr)


def principal_component(pbar: NDArray[np.complex128]) -> tuple[float, NDArray[np.complex128]]:
    """Largest eigenpair with a pinned phase for reproducibility."""
    evals, evecs = np.linalg.eigh(pbar)
    lam = float(max(evals[-1], 0.0))
    v = evecs[:, -1]
    pivot = int(np.argmax(np.abs(v)))
    if np.abs(v[pivot]) > 0:
        v = v * np.exp(-1j * np.angle(v[pivot]))
    return lam, v


def sroc_schedule_update(
    pbar: dict[int, NDArray[np.complex128]],
    delta: float,
    delta0: float,
    solvable: bool,
) -> tuple[dict[int, float], float]:
    """Next rank-ratio requirements and stepsize.

    A solved outer iteration resets the stepsize; an unsolved one halves it
    (the caller keeps the rolled-back matrices).  Either way the requirement
    is the achieved eigenvalue ratio plus the stepsize, clamped to one.
    """
    new_delta = delta0 if solvable else delta / 2.0
    w = {j: min(1.0, eigen_ratio(p) + new_delta) for j, p in pbar.items()}
    return w, new_delta


#: Above this transmit-array size the parametrized one-compilation form is
#: not worth it: the parameter-to-data map over the dyad parameters grows
#: with n_tx^2 per stream and exhausts memory, so subproblems are rebuilt
#: with plain constants instead.
PARAMETRIC_MAX_N_TX = 24


@dataclass
class Subproblem:
    """One convex subproblem with handle access to its tagged constraints.

    In parametric form the rank-ratio level and the expansion point enter as
    solver parameters, so one instance is compiled once and re-solved across
    iterations; the constant form is for arrays too large for that.
    """

    problem: cp.Problem
    pbar: dict[int, cp.Variable]
    r_min: cp.Variable
    common_shares: cp.Variable | None
    c: cp.Variable | None
    d: cp.Variable | None
    e: cp.Variable
    f: cp.Variable
    tagged: dict[str, list[cp.Constraint]]
    w_par: dict[int, cp.Parameter] | None
    v_par: dict[int, cp.Parameter] | None
    exp_d: cp.Parameter | None
    off_d: cp.Parameter | None
    exp_f: cp.Parameter | None
    off_f: cp.Parameter | None

    def set_point(
        self,
        w: dict[int, float],
        v_max: dict[int, NDArray[np.complex128]],
        d_prev: NDArray[np.float64],
        f_prev: NDArray[np.float64],
    ) -> None:
        """Load a rank-ratio level and linearization point into the parameters."""
        if self.w_par is None:
            raise ValueError("constant-form subproblem cannot be repointed")
        for j, par in self.w_par.items():
            par.value = float(w[j])
            self.v_par[j].value = np.outer(v_max[j], v_max[j].conj()).conj()
        self.exp_f.value = np.exp(f_prev)
        self.off_f.value = np.exp(f_prev) * (f_prev - 1.0)
        if self.exp_d is not None:
            self.exp_d.value = np.exp(d_prev)
            self.off_d.value = np.exp(d_prev) * (d_prev - 1.0)


def build_subproblem(
    inputs: DesignInputs,
    cfg: OptConfig,
    w: dict[int, float],
    v_max: dict[int, NDArray[np.complex128]],
    d_prev: NDArray[np.float64],
    f_prev: NDArray[np.float64],
    parametric: bool | None = None,
) -> Subproblem:
    """Assemble the convex subproblem at a rank-ratio level and expansion point.

    Works in budget-normalized units.  Constraint groups are tagged by what
    they enforce: power_budget, psd, sensing_gain, rank_ratio,
    common_group_floor / private_group_floor (exponential-cone lower bounds
    on the decoded groups), intra_interference_cap / own_interference_cap
    (first-order expansions of the interference upper bounds),
    worst_user_rate, common_decodable, common_share_nonneg.
    """
    K = inputs.num_users
    N = inputs.n_tx
    if parametric is None:
        parametric = N <= PARAMETRIC_MAX_N_TX
    mode = cfg.mode
    cols = active_columns(mode, K)
    has_c = mode.has_common
    has_r = mode.has_radar_stream
    ln2 = float(np.log(2.0))
    rho_hat = np.asarray(inputs.rhos, dtype=float) / cfg.p_t

    pbar = {j: cp.Variable((N, N), hermitian=True) for j in cols}
    r_min = cp.Variable()
    e_var = cp.Variable(K)
    f_var = cp.Variable(K)
    c_var = cp.Variable(K) if has_c else None
    d_var = cp.Variable(K) if has_c else None
    shares = cp.Variable(K, nonneg=True) if has_c else None

    if parametric:
        w_par = {j: cp.Parameter(nonneg=True) for j in cols}
        # holds conj(v v^H) so the scalar-product trace form below stays a
        # cheap elementwise product
        v_par = {j: cp.Parameter((N, N), hermitian=True) for j in cols}
        exp_f = cp.Parameter(K, pos=True)
        off_f = cp.Parameter(K)
        exp_d = cp.Parameter(K, pos=True) if has_c else None
        off_d = cp.Parameter(K) if has_c else None
    else:
        w_par = {j: float(w[j]) for j in cols}
        v_par = {j: np.outer(v_max[j], v_max[j].conj()).conj() for j in cols}
        exp_f = np.exp(f_prev)
        off_f = np.exp(f_prev) * (f_prev - 1.0)
        exp_d = np.exp(d_prev) if has_c else None
        off_d = np.exp(d_prev) * (d_prev - 1.0) if has_c else None

    # tr(A P) for Hermitian A as an elementwise scalar product; the matrix
    # product form canonicalizes through dense Kronecker operators and is
    # prohibitive for large arrays
    def htrace(const_conj, var) -> cp.Expression:
        return cp.real(cp.sum(cp.multiply(const_conj, var)))

    a_conj = [np.outer(a, a.conj()).conj() for a in inputs.a_users]

    def gain(k: int, j: int) -> cp.Expression:
        return htrace(a_conj[k], pbar[j])

    tagged: dict[str, list[cp.Constraint]] = {}

    def tag(name: str, constraint: cp.Constraint) -> cp.Constraint:
        tagged.setdefault(name, []).append(constraint)
        return constraint

    cons: list[cp.Constraint] = []
    cons.append(tag("power_budget", cp.sum(cp.hstack([cp.real(cp.trace(pbar[j])) for j in cols])) <= 1.0))
    for j in cols:
        cons.append(tag("psd", pbar[j] >> 0))
        cons.append(
            tag(
                "rank_ratio",
                htrace(v_par[j], pbar[j]) >= w_par[j] * cp.real(cp.trace(pbar[j])),
            )
        )

    if not mode.comm_only:
        if inputs.a_tar is None:
            raise ValueError("target response required unless comm-only")
        t_conj = np.outer(inputs.a_tar, inputs.a_tar.conj()).conj()
        target_gain = cp.sum(cp.hstack([htrace(t_conj, pbar[j]) for j in cols]))
        cons.append(tag("sensing_gain", target_gain >= inputs.required_target_gain / cfg.p_t))

    delta = mode.delta_sic
    for k in range(K):
        private_sum = cp.sum(cp.hstack([gain(k, j) for j in range(K)]))
        radar_term = delta * gain(k, K + 1) if has_r else 0.0
        group_priv = private_sum + radar_term + rho_hat[k]
        others = [gain(k, j) for j in range(K) if j != k]
        group_others = (cp.sum(cp.hstack(others)) if others else 0.0) + radar_term + rho_hat[k]

        cons.append(tag("private_group_floor", cp.exp(e_var[k]) <= group_priv))
        cons.append(
            tag("own_interference_cap", group_others <= exp_f[k] * f_var[k] - off_f[k])
        )
        if has_c:
            group_all = group_priv + gain(k, K)
            cons.append(tag("common_group_floor", cp.exp(c_var[k]) <= group_all))
            cons.append(
                tag("intra_interference_cap", group_priv <= exp_d[k] * d_var[k] - off_d[k])
            )
            cons.append(tag("worst_user_rate", (e_var[k] - f_var[k]) / ln2 + shares[k] >= r_min))
            cons.append(tag("common_decodable", (c_var[k] - d_var[k]) / ln2 >= cp.sum(shares)))
        else:
            cons.append(tag("worst_user_rate", (e_var[k] - f_var[k]) / ln2 >= r_min))
    if has_c:
        tagged["common_share_nonneg"] = [shares >= 0]

    sub = Subproblem(
        problem=cp.Problem(cp.Maximize(r_min), cons),
        pbar=pbar,
        r_min=r_min,
        common_shares=shares,
        c=c_var,
        d=d_var,
        e=e_var,
        f=f_var,
        tagged=tagged,
        w_par=w_par if parametric else None,
        v_par=v_par if parametric else None,
        exp_d=exp_d if parametric else None,
        off_d=off_d if parametric else None,
        exp_f=exp_f if parametric else None,
        off_f=off_f if parametric else None,
    )
    if parametric:
        sub.set_point(w, v_max, d_prev, f_prev)
    return sub


#: Interior-point options: the full tolerances stay at their defaults
#: (relative gap ~1e-8); the reduced ones decide how a stalled run is
#: labeled.  Near-degenerate lifts (value-neutral power splits) routinely
#: stall after reaching ~1e-7, and accepting those as solved keeps the
#: step-halving branch for genuine failures.  1e-6 matches the feasibility
#: tolerance the results are checked against.
_SOLVER_OPTS: dict[str, dict] = {
    "CLARABEL": {
        "reduced_tol_gap_abs": 1e-6,
        "reduced_tol_gap_rel": 1e-6,
        "reduced_tol_feas": 1e-6,
    }
}


def _solve_subproblem(sub: Subproblem, solver: str) -> SdrLift | None:
    """Run the conic solver; None signals an unsolvable subproblem
    (reported infeasible, or a numerical failure)."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            # warm_start off: the parameter values change the coefficient
            # sparsity between iterations, which the in-place data-update
            # path cannot absorb.
            sub.problem.solve(solver=solver, warm_start=False, **_SOLVER_OPTS.get(solver, {}))
    except (cp.error.SolverError, ValueError, ArithmeticError):
        return None
    if sub.problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return None
    K = sub.e.shape[0]
    return SdrLift(
        pbar={j: np.asarray(var.value) for j, var in sub.pbar.items()},
        common_shares=(
            np.maximum(np.asarray(sub.common_shares.value), 0.0)
            if sub.common_shares is not None
            else np.zeros(K)
        ),
        r_min=float(sub.r_min.value),
        c=np.asarray(sub.c.value) if sub.c is not None else np.full(K, np.nan),
        d=np.asarray(sub.d.value) if sub.d is not None else np.full(K, np.nan),
        e=np.asarray(sub.e.value),
        f=np.asarray(sub.f.value),
    )


def init_linearization(
    inputs: DesignInputs, cfg: OptConfig
) -> tuple[dict[int, NDArray[np.complex128]], NDArray[np.float64], NDArray[np.float64]]:
    """Feasible starting lift and the exact logs of its interference groups.

    Power split (budget-normalized): enough on a matched-filter beam toward
    the target to clear the sensing-gain floor with 10% margin, the rest
    split evenly over per-user matched beams.  The beam toward the target
    rides on the common column when one exists, else on the radar column,
    else on the first private column.
    """
    K = inputs.num_users
    N = inputs.n_tx
    mode = cfg.mode
    cols = active_columns(mode, K)

    q_tar = 0.0
    if not mode.comm_only:
        q_tar = 1.1 * inputs.required_target_gain / cfg.p_t / N
        if q_tar > 1.0:
            raise InfeasibleDesign(
                "sensing-gain floor exceeds the power budget even with a dedicated beam"
            )
    if mode.has_common:
        tar_col = K
    elif mode.has_radar_stream:
        tar_col = K + 1
    else:
        tar_col = 0

    P0 = np.zeros((N, K + 2), dtype=complex)
    if q_tar > 0:
        a_t = inputs.a_tar / np.linalg.norm(inputs.a_tar)
        P0[:, tar_col] = np.sqrt(q_tar) * a_t
    user_cols = [k for k in range(K) if k != tar_col or q_tar == 0.0]
    if user_cols:
        q_u = (1.0 - q_tar) / len(user_cols)
        for k in user_cols:
            a_k = inputs.a_users[k] / np.linalg.norm(inputs.a_users[k])
            P0[:, k] = np.sqrt(q_u) * a_k

    pbar0 = {j: np.outer(P0[:, j], P0[:, j].conj()) for j in cols}
    rho_hat = np.asarray(inputs.rhos, dtype=float) / cfg.p_t
    delta = mode.delta_sic
    d0 = np.zeros(K)
    f0 = np.zeros(K)
    for k in range(K):
        gains = np.abs(np.conj(inputs.a_users[k]) @ P0) ** 2
        radar_term = delta * gains[K + 1] if mode.has_radar_stream else 0.0
        d0[k] = np.log(np.sum(gains[:K]) + radar_term + rho_hat[k])
        f0[k] = np.log(np.sum(gains[:K]) - gains[k] + radar_term + rho_hat[k])
    return pbar0, d0, f0


def _run_inner(
    inputs: DesignInputs,
    cfg: OptConfig,
    sub: Subproblem | None,
    w: dict[int, float],
    v_max: dict[int, NDArray[np.complex128]],
    d0: NDArray[np.float64],
    f0: NDArray[np.float64],
) -> tuple[SdrLift | None, int]:
    """Alternate solve / re-expand until the objective stalls.

    With a compiled parametric subproblem the expansion point is swapped in
    place; otherwise (large arrays) each iteration rebuilds from constants.
    """
    d_cur, f_cur = d0, f0
    last: SdrLift | None = None
    count = 0
    r_prev: float | None = None
    for _ in range(cfg.n_max):
        if sub is None:
            step = build_subproblem(inputs, cfg, w, v_max, d_cur, f_cur, parametric=False)
        else:
            step = sub
            step.set_point(w, v_max, d_cur, f_cur)
        sol = _solve_subproblem(step, cfg.solver)
        count += 1
        if sol is None:
            break
        last = sol
        d_cur = sol.d if not np.any(np.isnan(sol.d)) else d_cur
        f_cur = sol.f
        if r_prev is not None and abs(sol.r_min - r_prev) <= cfg.eps_obj:
            break
        r_prev = sol.r_min
    return last, count


def solve(inputs: DesignInputs, cfg: OptConfig) -> OptResult:
    """Full two-layer design loop.

    Returns status "converged" when every carrying lifted matrix is rank one
    to within the configured ratio, "infeasible" when the very first relaxed
    subproblem (no rank requirements) cannot be solved or the starting
    heuristic cannot clear the sensing-gain floor, and "iter-cap" when the
    iteration or stepsize budget runs out (best iterate is still returned).
    """
    t0 = time.perf_counter()
    K = inputs.num_users
    empty = PrecoderMatrix(np.zeros((inputs.n_tx, K + 2), dtype=complex), K)
    zero_alloc = CommonRateAlloc(np.zeros(K))
    try:
        pbar, d_prev, f_prev = init_linearization(inputs, cfg)
    except InfeasibleDesign:
        return OptResult(
            precoder=empty,
            common_alloc=zero_alloc,
            r_min=float("-inf"),
            status=STATUS_INFEASIBLE,
            solve_seconds=time.perf_counter() - t0,
        )

    cols = active_columns(cfg.mode, K)
    w = {j: 0.0 for j in cols}
    delta = cfg.delta0
    best: SdrLift | None = None
    w_traj: list[dict[int, float]] = []
    status = STATUS_ITER_CAP
    solves = 0
    m = 0
    parametric = inputs.n_tx <= PARAMETRIC_MAX_N_TX
    v0 = {j: principal_component(pbar[j])[1] for j in cols}
    sub = build_subproblem(inputs, cfg, w, v0, d_prev, f_prev) if parametric else None
    while m < cfg.m_max:
        v_max = {j: principal_component(pbar[j])[1] for j in cols}
        sol, count = _run_inner(inputs, cfg, sub, w, v_max, d_prev, f_prev)
        solves += count
        w_traj.append(dict(w))
        solvable = sol is not None
        if solvable:
            best = sol
            pbar = sol.pbar
            d_prev = sol.d if not np.any(np.isnan(sol.d)) else d_prev
            f_prev = sol.f
            dead = [
                j
                for j in cols
                if j >= K and float(np.trace(pbar[j]).real) <= PRUNE_TRACE
            ]
            if dead:
                cols = [j for j in cols if j not in dead]
                pbar = {j: pbar[j] for j in cols}
                w = {j: w[j] for j in cols}
                mode = _mode_without(cfg.mode, K, dead)
                cfg = OptConfig(
                    p_t=cfg.p_t,
                    mode=mode,
                    eps_rank=cfg.eps_rank,
                    eps_obj=cfg.eps_obj,
                    delta0=cfg.delta0,
                    m_max=cfg.m_max,
                    n_max=cfg.n_max,
                    solver=cfg.solver,
                )
                sub = (
                    build_subproblem(
                        inputs, cfg, w, {j: principal_component(pbar[j])[1] for j in cols},
                        d_prev, f_prev,
                    )
                    if parametric
                    else None
                )
                m += 1
                continue
        elif m == 0:
            status = STATUS_INFEASIBLE
            m += 1
            break
        ratios = {j: eigen_ratio(pbar[j]) for j in cols}
        if solvable and all(r >= cfg.eps_rank for r in ratios.values()):
            status = STATUS_CONVERGED
            m += 1
            break
        w, delta = sroc_schedule_update(pbar, delta, cfg.delta0, solvable)
        if delta < DELTA_UNDERFLOW:
            m += 1
            break
        m += 1

    if best is None:
        return OptResult(
            precoder=empty,
            common_alloc=zero_alloc,
            r_min=float("-inf"),
            status=STATUS_INFEASIBLE,
            outer_iterations=m,
            w_trajectory=w_traj,
            subproblem_solves=solves,
            solve_seconds=time.perf_counter() - t0,
        )

    P = np.zeros((inputs.n_tx, K + 2), dtype=complex)
    for j in cols:
        lam, vec = principal_component(pbar[j])
        P[:, j] = np.sqrt(cfg.p_t * lam) * vec
    shares = np.maximum(best.common_shares, 0.0)
    total_shares = float(np.sum(shares))
    if total_shares > 0:
        # rank-one extraction sheds a sliver of common power; shrink the
        # shares so the returned pair (P, C) is jointly feasible
        from .rates import ergodic_bounds

        r_common, _ = ergodic_bounds(
            inputs.a_users, inputs.rhos, PrecoderMatrix(P, K), cfg.mode.delta_sic
        )
        cap = float(np.min(r_common))
        if total_shares > cap:
            shares = shares * (cap / total_shares)
    lift_out = SdrLift(
        pbar={j: cfg.p_t * pbar[j] for j in cols},
        common_shares=shares,
        r_min=best.r_min,
        c=best.c,
        d=best.d,
        e=best.e,
        f=best.f,
    )
    return OptResult(
        precoder=PrecoderMatrix(P, K),
        common_alloc=CommonRateAlloc(shares),
        r_min=best.r_min,
        status=status,
        w_trajectory=w_traj,
        eigen_ratios={j: eigen_ratio(pbar[j]) for j in cols},
        lift=lift_out,
        outer_iterations=m,
        subproblem_solves=solves,
        solve_seconds=time.perf_counter() - t0,
    )
