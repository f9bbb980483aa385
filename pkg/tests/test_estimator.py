import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from qht.estimator import (
    DensityMatrixEstimator,
    EstimatorConfig,
    choose_N,
    estimate,
    index_set,
    oracle_bound,
    raw_estimate,
    soft_threshold,
    thresholds,
)
from qht.measurement import NoiseConfig, sample_records
from qht.patterns import kernel_G, sup_norm
from qht.states import DensityMatrix, StateModel, density_matrix


def test_choose_N_examples():
    assert choose_N(10**4, r0=2.0, B0=0.5) == 9
    assert choose_N(2981, r0=2.0, B0=1.0) == 4
    assert choose_N(10**4, r0=1.0, B0=0.5) == 84
    with pytest.raises(ValueError):
        choose_N(1, 2.0, 0.5)


def test_index_set():
    assert index_set(1) == [(0, 0)]
    assert set(index_set(2)) == {(0, 0), (0, 1), (1, 0)}
    assert len(index_set(30)) == 465
    with pytest.raises(ValueError):
        index_set(0)


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(eta=0.5)
    with pytest.raises(ValueError):
        EstimatorConfig(eta=0.9, epsilon=0.0)
    with pytest.raises(ValueError):
        EstimatorConfig(eta=0.9, epsilon=1.2)
    with pytest.raises(ValueError):
        EstimatorConfig(eta=0.9, r0=2.5)
    with pytest.raises(ValueError):
        EstimatorConfig(eta=0.9, kappa=0.0)
    with pytest.raises(ValueError):
        EstimatorConfig(eta=0.9, N_override=0)
    # the experimental settings are admitted
    EstimatorConfig(eta=0.9, epsilon=1.0, r0=2.0)


def test_thresholds_formula(table_cache):
    table = table_cache(30, 0.9)
    t = thresholds(table, 30, 10**4, epsilon=0.1)
    level = np.sqrt(np.log(2 * 30 * 31 / 0.1) / 10**4)
    assert t[0, 0] == pytest.approx(2 * sup_norm(table, 0, 0) * level, rel=1e-12)
    assert t[3, 7] == t[7, 3]
    # worked arithmetic from the contract: a sup norm of 2.0 gives ~0.1254
    assert 2 * 2.0 * level == pytest.approx(0.1254, abs=5e-5)
    # zero outside the window
    assert t[29, 1] == 0.0
    t_half = thresholds(table, 30, 10**4, epsilon=0.1, kappa=0.5)
    assert np.allclose(t_half, 0.5 * t)


def test_soft_threshold_examples():
    raw = DensityMatrix(np.array([[0.5, 0.1j], [3 - 4j, 0.0]], dtype=complex))
    t = np.full((2, 2), 0.2)
    t[1, 0] = 1.0
    out = soft_threshold(raw, t).entries
    assert out[0, 0] == pytest.approx(0.3)
    assert out[0, 1] == 0.0  # exact zero, 0/0 convention
    assert out[1, 0] == pytest.approx(2.4 - 3.2j)
    assert out[1, 1] == 0.0


def test_soft_threshold_shrinks_and_preserves_hermiticity():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    m = m + m.conj().T
    t = np.abs(rng.normal(size=(6, 6)))
    t = (t + t.T) / 2
    out = soft_threshold(DensityMatrix(m), t)
    assert np.all(np.abs(out.entries) <= np.abs(m) + 1e-15)
    assert out.is_hermitian(atol=1e-14)


def test_soft_threshold_shape_mismatch():
    with pytest.raises(ValueError):
        soft_threshold(DensityMatrix(np.eye(3)), np.zeros((2, 2)))


@given(
    re=st.floats(-10, 10),
    im=st.floats(-10, 10),
    t=st.floats(0, 12),
)
@settings(max_examples=100, deadline=None)
def test_soft_threshold_pointwise_properties(re, im, t):
    v = complex(re, im)
    out = soft_threshold(DensityMatrix(np.array([[v]])), np.array([[t]])).entries[0, 0]
    if abs(v) <= t:
        assert out == 0.0  # exact zero, not just small
    else:
        assert abs(out) == pytest.approx(abs(v) - t, rel=1e-12, abs=1e-12)
        # phase preserved
        assert np.angle(out) == pytest.approx(np.angle(v), abs=1e-12)
    assert abs(out) <= abs(v) + 1e-15


def test_raw_estimate_single_record(table_cache):
    table = table_cache(1, 0.9)
    y, phi = 0.37, 1.2
    got = raw_estimate(np.array([[y, phi]]), table, 1)
    from qht.patterns import eval_pattern

    assert got.entries[0, 0] == pytest.approx(eval_pattern(table, 0, 0, y / np.sqrt(0.9)), rel=1e-12)


def test_raw_estimate_matches_kernel_mean(table_cache):
    # the binned moment path must agree with naive kernel averaging exactly
    table = table_cache(6, 0.9)
    records = sample_records(StateModel.coherent(1.0), 2000, NoiseConfig(0.9), seed=8)
    got = raw_estimate(records, table, 6)
    x = records[:, 0] / np.sqrt(0.9)
    for (j, k) in [(0, 0), (1, 0), (3, 2), (0, 5), (2, 2)]:
        naive = np.mean(kernel_G(table, j, k, x, records[:, 1]))
        assert got.entries[j, k] == pytest.approx(naive, abs=1e-10)
        assert got.entries[k, j] == pytest.approx(np.conj(naive), abs=1e-10)


def test_raw_estimate_hermitian_and_windowed(table_cache):
    table = table_cache(5, 0.9)
    records = sample_records(StateModel.thermal(0.25), 5000, NoiseConfig(0.9), seed=2)
    got = raw_estimate(records, table, 5)
    assert got.is_hermitian()
    jk = np.add.outer(np.arange(5), np.arange(5))
    assert np.all(got.entries[jk > 4] == 0)


def test_raw_estimate_vacuum_concentration(table_cache):
    table = table_cache(3, 0.9)
    n = 100000
    records = sample_records(StateModel.vacuum(), n, NoiseConfig(0.9), seed=12)
    got = raw_estimate(records, table, 3)
    bound = 5 * sup_norm(table, 0, 0) / np.sqrt(n)
    assert abs(got.entries[0, 0] - 1.0) <= bound


def test_raw_estimate_unbiased_offdiagonal(table_cache):
    table = table_cache(2, 0.9)
    state = StateModel.coherent(1.0)
    truth = density_matrix(state, 2).entries[1, 0]
    reps, n = 60, 4000
    vals = np.empty(reps, dtype=complex)
    for rep in range(reps):
        records = sample_records(state, n, NoiseConfig(0.9), seed=1000 + rep)
        vals[rep] = raw_estimate(records, table, 2).entries[1, 0]
    se = np.sqrt(np.mean(np.abs(vals - vals.mean()) ** 2) / reps)
    assert abs(vals.mean() - truth) <= 4 * se


def test_raw_estimate_validation(table_cache):
    table = table_cache(3, 0.9)
    with pytest.raises(ValueError):
        raw_estimate(np.empty((0, 2)), table, 3)
    with pytest.raises(ValueError):
        raw_estimate(np.zeros((5, 3)), table, 3)
    with pytest.raises(ValueError):
        raw_estimate(np.zeros((5, 2)), table, 9)  # table too small


def test_estimate_eta_mismatch(table_cache):
    table = table_cache(3, 1.0)
    records = np.array([[0.1, 0.2], [0.3, 0.4]])
    with pytest.raises(ValueError, match="eta"):
        estimate(records, EstimatorConfig(eta=0.9, N_override=2), table=table)


def test_estimate_vacuum_pipeline(table_cache):
    cfg = EstimatorConfig(eta=1.0, epsilon=0.1)
    n = 100000
    records = sample_records(StateModel.vacuum(), n, NoiseConfig(1.0), seed=6)
    table = table_cache(choose_N(n, cfg.r0, cfg.B0), 1.0)
    result = estimate(records, cfg, table=table)
    assert result.N_used == 11
    rho = result.thresholded.entries
    assert 0.9 <= rho[0, 0].real <= 1.0
    off = rho[:6, :6].copy()
    off[0, 0] = 0.0
    assert np.all(off == 0)


def test_estimate_huge_kappa_zeroes_everything(table_cache):
    records = sample_records(StateModel.coherent(2.0), 3000, NoiseConfig(0.9), seed=3)
    cfg = EstimatorConfig(eta=0.9, kappa=1e9, N_override=4)
    result = estimate(records, cfg, table=table_cache(4, 0.9))
    assert np.all(result.thresholded.entries == 0)


def test_estimate_deterministic(table_cache):
    records = sample_records(StateModel.thermal(0.25), 4000, NoiseConfig(0.9), seed=5)
    cfg = EstimatorConfig(eta=0.9, N_override=5)
    a = estimate(records, cfg, table=table_cache(5, 0.9))
    b = estimate(records, cfg, table=table_cache(5, 0.9))
    assert np.array_equal(a.thresholded.entries, b.thresholded.entries)


def _project_entry(matrix, raw, t, j, k):
    # single-coordinate projection onto the ball |m_{jk} - raw_{jk}| <= t_{jk}
    out = matrix.copy()
    diff = raw[j, k] - matrix[j, k]
    mod = abs(diff)
    if mod > t[j, k]:
        out[j, k] = matrix[j, k] + diff / mod * (mod - t[j, k])
    return out


def test_soft_threshold_equals_successive_projections(table_cache):
    rng = np.random.default_rng(42)
    N = 5
    raw = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
    jk = np.add.outer(np.arange(N), np.arange(N))
    raw[jk > N - 1] = 0
    t = np.abs(rng.normal(size=(N, N))) * 0.5
    t[jk > N - 1] = 0
    direct = soft_threshold(DensityMatrix(raw), t).entries
    coords = [(j, k) for j in range(N) for k in range(N - j)]
    for perm_seed in range(4):
        order = list(coords)
        np.random.default_rng(perm_seed).shuffle(order)
        composed = np.zeros((N, N), dtype=complex)
        for (j, k) in order:
            composed = _project_entry(composed, raw, t, j, k)
        assert np.allclose(composed, direct, atol=1e-14), perm_seed


def test_oracle_bound_cases():
    zero = DensityMatrix(np.zeros((4, 4)))
    t = np.full((3, 3), 0.1)
    assert oracle_bound(zero, t, 3) == 0.0

    big = DensityMatrix(np.full((3, 3), 5.0 + 0j))
    t_small = np.full((3, 3), 0.1)
    want = sum(4 * 0.1**2 for (j, k) in [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0)])
    want += sum(25.0 for (j, k) in [(1, 2), (2, 1), (2, 2)])
    assert oracle_bound(big, t_small, 3) == pytest.approx(want)

    vac = density_matrix(StateModel.vacuum(), 10)
    t_vac = np.full((4, 4), 0.3)  # 2t < 1
    assert oracle_bound(vac, t_vac, 4) == pytest.approx(4 * 0.3**2)

    with pytest.raises(ValueError):
        oracle_bound(DensityMatrix(np.eye(2)), t, 3)


def test_sklearn_estimator_interface(table_cache):
    est = DensityMatrixEstimator(eta=0.9, N=4)
    params = est.get_params()
    assert params["eta"] == 0.9 and params["N"] == 4
    cloned = clone(est)
    assert cloned.get_params() == params

    records = sample_records(StateModel.coherent(1.0), 5000, NoiseConfig(0.9), seed=9)
    est.fit(records, table=table_cache(4, 0.9))
    assert est.N_ == 4
    assert est.matrix_.shape == (4, 4)
    assert est.raw_matrix_.shape == (4, 4)
    assert est.thresholds_.shape == (4, 4)
    assert est.result_.n_samples == 5000


def test_sklearn_estimator_validation():
    est = DensityMatrixEstimator(eta=0.9, N=2)
    with pytest.raises(ValueError):
        est.fit(np.array([[0.1, 0.2, 0.3]]))  # wrong column count
    with pytest.raises(ValueError):
        est.fit(np.array([[0.1, 5.0]]))  # phase outside [0, pi]
    with pytest.raises(ValueError):
        est.fit(np.array([[np.nan, 0.2]]))


def test_estimation_result_serialization(table_cache):
    records = sample_records(StateModel.vacuum(), 2000, NoiseConfig(0.9), seed=14)
    cfg = EstimatorConfig(eta=0.9, N_override=3)
    result = estimate(records, cfg, table=table_cache(3, 0.9))
    blob = result.to_json_dict(cfg)
    assert blob["N_used"] == 3
    assert blob["config"]["eta"] == 0.9
    assert len(blob["thresholds"]) == 6
    assert blob["raw"]["dim"] == 3
