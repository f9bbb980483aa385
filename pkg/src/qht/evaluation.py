"""Monte Carlo evaluation: RMSE studies, coverage, power-law fits, tail bounds.

Replications are seeded by counter from a master seed, so studies are
reproducible and the (n, rep) grid can be processed in any order or in
parallel without changing a single draw.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimator import (
    EstimatorConfig,
    choose_N,
    oracle_bound,
    raw_estimate,
    soft_threshold,
    thresholds,
)
from .measurement import sample_records
from .patterns import build_table
from .states import DensityMatrix, ClassParams, StateModel, class_envelope_check, density_matrix

__all__ = [
    "RmseStudy",
    "PowerLawFit",
    "relative_rmse",
    "run_study",
    "coverage_rate",
    "coverage_details",
    "fit_power_law",
    "threshold_scale_sweep",
    "tail_bound_check",
]

TRUTH_MIN_DIM = 40


@dataclass(frozen=True)
class RmseStudy:
    """Per-replication relative RMSE values over a sample-size grid."""

    state: StateModel
    config: EstimatorConfig
    n_grid: tuple
    reps: int
    rmse: np.ndarray  # shape (reps, len(n_grid))
    master_seed: int
    kappa: float
    truth_dim: int
    tail_mass: float  # squared matrix mass neglected by the truncated truth

    @property
    def mean(self) -> np.ndarray:
        return self.rmse.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.rmse.std(axis=0, ddof=1)


@dataclass(frozen=True)
class PowerLawFit:
    """Log-log slope of the mean RMSE and the implied decay parameter."""

    slope: float
    B_tilde: float
    gamma: float
    n_grid: tuple
    reps: int

    def to_json_dict(self) -> dict:
        return {
            "slope": self.slope,
            "B_tilde": self.B_tilde,
            "gamma": self.gamma,
            "n_grid": list(self.n_grid),
            "reps": self.reps,
        }


def relative_rmse(est: DensityMatrix, truth: DensityMatrix) -> float:
    """||est - truth||_2 / ||truth||_2 over the union of both index ranges."""
    nrm = truth.norm2()
    if nrm == 0.0:
        raise ValueError("truth matrix is zero; relative RMSE undefined")
    d = max(est.dim, truth.dim)
    a = np.zeros((d, d), dtype=complex)
    b = np.zeros((d, d), dtype=complex)
    a[: est.dim, : est.dim] = est.entries
    b[: truth.dim, : truth.dim] = truth.entries
    return float(np.linalg.norm(a - b) / nrm)


def _rep_seed(master_seed: int, i: int, rep: int) -> int:
    return int(np.random.SeedSequence((master_seed, i, rep)).generate_state(1, dtype=np.uint64)[0])


def _study_window(config: EstimatorConfig, n_grid) -> int:
    if config.N_override is not None:
        return config.N_override
    return max(choose_N(int(n), config.r0, config.B0) for n in n_grid)


def _ground_truth(state: StateModel, N: int) -> tuple:
    """Truth truncation and the neglected squared tail mass beyond it."""
    dim = max(N, TRUTH_MIN_DIM)
    truth = density_matrix(state, dim)
    wide = density_matrix(state, 2 * dim)
    tail = max(wide.norm2() ** 2 - truth.norm2() ** 2, 0.0)
    return truth, tail


def run_study(
    state: StateModel,
    config: EstimatorConfig,
    n_grid,
    reps: int = 50,
    master_seed: int = 0,
    n_jobs: int = 1,
) -> RmseStudy:
    """Monte Carlo study of the relative RMSE over a grid of sample sizes.

    Every (n, rep) cell draws a fresh seeded sample, runs the full
    estimation pipeline, and records ||est - truth||_2 / ||truth||_2.
    Deterministic given master_seed, at any n_jobs.
    """
    if reps < 2:
        raise ValueError("reps must be >= 2")
    n_grid = tuple(int(n) for n in n_grid)
    N_max = _study_window(config, n_grid)
    table = build_table(N_max, config.noise(), Q=config.grid_size, tol=config.cutoff_tol)
    truth, tail = _ground_truth(state, N_max)
    rmse = np.zeros((reps, len(n_grid)))

    def one(cell):
        i, rep = cell
        n = n_grid[i]
        N = config.N_override if config.N_override is not None else choose_N(
            n, config.r0, config.B0
        )
        records = sample_records(state, n, config.noise(), _rep_seed(master_seed, i, rep))
        raw = raw_estimate(records, table, N)
        t = thresholds(table, N, n, config.epsilon, config.kappa)
        est = soft_threshold(raw, t)
        rmse[rep, i] = relative_rmse(est, truth)

    cells = [(i, rep) for i in range(len(n_grid)) for rep in range(reps)]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(one, cells))
    else:
        for cell in cells:
            one(cell)
    return RmseStudy(
        state=state,
        config=config,
        n_grid=n_grid,
        reps=reps,
        rmse=rmse,
        master_seed=master_seed,
        kappa=config.kappa,
        truth_dim=truth.dim,
        tail_mass=tail,
    )


def coverage_details(
    state: StateModel,
    config: EstimatorConfig,
    n: int,
    reps: int,
    master_seed: int = 0,
    threshold_scale: float = 1.0,
) -> list:
    """Per-replication deviation event, squared error, and oracle bound.

    For each replication reports whether every raw coefficient lies
    within its threshold of the truth (the deviation event), together
    with the thresholded estimator's squared l2 error and the oracle
    bound it must satisfy whenever the event holds.
    """
    if not 0.0 < config.epsilon < 1.0:
        raise ValueError("coverage requires epsilon in (0, 1); the bound is vacuous at 1")
    if reps < 10:
        raise ValueError("reps must be >= 10")
    N = config.N_override if config.N_override is not None else choose_N(n, config.r0, config.B0)
    table = build_table(N, config.noise(), Q=config.grid_size, tol=config.cutoff_tol)
    truth, _ = _ground_truth(state, N)
    t = thresholds(table, N, n, config.epsilon, kappa=threshold_scale)
    bound = oracle_bound(truth, t, N)
    out = []
    for rep in range(reps):
        records = sample_records(state, n, config.noise(), _rep_seed(master_seed, 0, rep))
        raw = raw_estimate(records, table, N)
        dev = np.abs(raw.entries - truth.entries[:N, :N])
        covered = True
        for j in range(N):
            for k in range(N - j):
                if dev[j, k] > t[j, k]:
                    covered = False
        est = soft_threshold(raw, t)
        d = truth.dim
        padded = np.zeros((d, d), dtype=complex)
        padded[:N, :N] = est.entries
        err2 = float(np.linalg.norm(padded - truth.entries) ** 2)
        out.append({"covered": covered, "err2": err2, "oracle_bound": bound})
    return out


def coverage_rate(
    state: StateModel,
    config: EstimatorConfig,
    n: int,
    reps: int,
    master_seed: int = 0,
    threshold_scale: float = 1.0,
) -> float:
    """Fraction of replications on which the deviation event holds."""
    details = coverage_details(state, config, n, reps, master_seed, threshold_scale)
    return sum(d["covered"] for d in details) / len(details)


def fit_power_law(study: RmseStudy, gamma: float) -> PowerLawFit:
    """OLS fit of ln(mean RMSE) on ln(n), inverted to the decay parameter.

    The decay model mean RMSE ~ n^(-B/(2(4 gamma + B))) inverts to
    B = -8 gamma s / (1 + 2 s) for fitted slope s; slopes at or below
    -1/2 have no finite B and are reported as a diagnostic error.
    """
    n_grid = np.asarray(study.n_grid, dtype=float)
    if len(set(study.n_grid)) < 3:
        raise ValueError("power-law fit needs at least 3 distinct sample sizes")
    mean = study.mean
    if np.any(mean <= 0):
        raise ValueError("mean RMSE must be positive to fit in log scale")
    slope = float(np.polyfit(np.log(n_grid), np.log(mean), 1)[0])
    if 1.0 + 2.0 * slope <= 0.0:
        raise ValueError(
            f"fitted slope {slope:.4f} <= -1/2: decay faster than the model allows, "
            "no finite decay parameter"
        )
    b = -8.0 * gamma * slope / (1.0 + 2.0 * slope)
    return PowerLawFit(
        slope=slope, B_tilde=b, gamma=gamma, n_grid=study.n_grid, reps=study.reps
    )


def threshold_scale_sweep(
    state: StateModel,
    config: EstimatorConfig,
    n_grid,
    scales,
    reps: int = 50,
    master_seed: int = 0,
) -> dict:
    """One RMSE study per threshold scale, sharing samples and raw estimates.

    Common random numbers: every scale sees the identical raw estimate
    per (n, rep) cell, so differences between scales reflect the
    thresholds alone.
    """
    scales = tuple(float(s) for s in scales)
    if any(s < 0 for s in scales):
        raise ValueError("scales must be nonnegative")
    n_grid = tuple(int(n) for n in n_grid)
    N_max = _study_window(config, n_grid)
    table = build_table(N_max, config.noise(), Q=config.grid_size, tol=config.cutoff_tol)
    truth, tail = _ground_truth(state, N_max)
    rmse = {s: np.zeros((reps, len(n_grid))) for s in scales}
    for i, n in enumerate(n_grid):
        N = config.N_override if config.N_override is not None else choose_N(
            n, config.r0, config.B0
        )
        base_t = thresholds(table, N, n, config.epsilon, kappa=1.0)
        for rep in range(reps):
            records = sample_records(state, n, config.noise(), _rep_seed(master_seed, i, rep))
            raw = raw_estimate(records, table, N)
            for s in scales:
                est = soft_threshold(raw, s * base_t)
                rmse[s][rep, i] = relative_rmse(est, truth)
    return {
        s: RmseStudy(
            state=state,
            config=config,
            n_grid=n_grid,
            reps=reps,
            rmse=rmse[s],
            master_seed=master_seed,
            kappa=s,
            truth_dim=truth.dim,
            tail_mass=tail,
        )
        for s in scales
    }


def tail_bound_check(state: StateModel, params: ClassParams, M_range) -> bool:
    """Verify the squared tail-mass bound for every window size in M_range.

    The tail sum_{j+k > M} |rho_{j,k}|^2 of a state in the decay class
    must stay below (2 C^2/(B r)) M^(2 - r/2) exp(-2 B M^(r/2)).  Tails
    are computed from exact entries at twice the largest window.
    """
    M_range = [int(m) for m in M_range]
    if not M_range or min(M_range) < 1:
        raise ValueError("M_range must contain positive integers")
    dim = 2 * max(M_range)
    rho = density_matrix(state, dim)
    if not class_envelope_check(rho, params):
        raise ValueError(f"{state.label()} violates the envelope for {params}")
    sq = np.abs(rho.entries) ** 2
    jk = np.add.outer(np.arange(dim), np.arange(dim))
    const = 2.0 * params.C ** 2 / (params.B * params.r)
    for M in M_range:
        tail = float(np.sum(sq[jk > M]))
        bound = const * M ** (2.0 - params.r / 2.0) * np.exp(-2.0 * params.B * M ** (params.r / 2.0))
        if tail > bound:
            return False
    return True
