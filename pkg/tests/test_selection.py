import numpy as np
import pytest

from greedyprune import (
    EpsGap,
    FeatureInstance,
    MaxSize,
    PruneReport,
    SelectionState,
    counterexample_instance,
    forward_step_nearest,
    forward_step_scan,
    lstar_solve,
    run_backward,
    run_forward,
    run_frank_wolfe,
    run_random_subset,
    vec_loss,
)

from helpers import generic_instance, interior_2d_instance, small_instance


def test_state_incremental_average_matches_counts():
    inst = generic_instance(0)
    state = SelectionState(inst)
    rng = np.random.default_rng(1)
    for _ in range(30):
        state.apply(int(rng.integers(inst.n_rows)))
    np.testing.assert_allclose(state.u, state.recompute_u(), rtol=1e-12)
    assert state.k == 30 == state.counts.sum()


def test_state_w_is_k_times_residual():
    inst = generic_instance(1)
    state = SelectionState(inst)
    state.apply(0)
    state.apply(1)
    np.testing.assert_allclose(state.w, 2 * (inst.y_s - state.u), rtol=1e-14)


def test_scan_and_nearest_agree():
    for i in range(20):
        inst = generic_instance(i)
        s1, s2 = SelectionState(inst), SelectionState(inst)
        for _ in range(25):
            i1 = forward_step_scan(inst, s1)
            i2 = forward_step_nearest(inst, s2)
            assert i1 == i2
            s1.apply(i1)
            s2.apply(i2)


def test_forward_ties_break_to_smallest_index():
    # two identical rows: the first one must win every step
    P = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 5.0]])
    inst = FeatureInstance(P=P, y_s=np.array([1.0, 0.0]), provenance="direct")
    rep = run_forward(inst, MaxSize(5))
    assert list(rep.chosen) == [0] * 5


def test_forward_allows_repeats_of_one_row():
    P = np.array([[2.0], [-1.0]])
    inst = FeatureInstance(P=P, y_s=np.array([2.0]), provenance="direct")
    rep = run_forward(inst, MaxSize(6))
    assert rep.counts[0] == 6 and rep.counts[1] == 0
    assert rep.losses[-1] == pytest.approx(0.0, abs=1e-15)


def test_forward_matches_per_step_brute_force():
    # greedy chooses the exact argmin every step on exhaustively checkable sizes
    for i in range(15):
        inst = small_instance(i)
        rep = run_forward(inst, MaxSize(12))
        counts = np.zeros(inst.n_rows, dtype=np.int64)
        for step in range(12):
            best_i, best_loss = -1, np.inf
            for cand in range(inst.n_rows):
                trial = counts.copy()
                trial[cand] += 1
                u = trial @ inst.P / trial.sum()
                cl = vec_loss(u, inst.y_s)
                if cl < best_loss:
                    best_i, best_loss = cand, cl
            assert best_i == rep.chosen[step]
            counts[best_i] += 1


def test_forward_trace_structure():
    inst = generic_instance(2)
    rep = run_forward(inst, MaxSize(10))
    np.testing.assert_array_equal(rep.sizes, np.arange(1, 11))
    assert rep.method == "forward"
    assert rep.fingerprint == inst.fingerprint()
    assert rep.initial_loss == pytest.approx(vec_loss(np.zeros(inst.n_outputs), inst.y_s))
    assert rep.final_loss == rep.losses[-1]
    assert rep.metadata["converged"] is True


def test_eps_gap_stop_rule():
    inst = generic_instance(3)
    # reference 0 makes the rule: vec_loss/2 <= eps
    rep_all = run_forward(inst, MaxSize(60))
    target = rep_all.losses[20] / 2.0
    rep = run_forward(inst, EpsGap(eps=target, reference_loss=0.0, max_steps=500))
    assert rep.losses[-1] / 2.0 <= target
    assert len(rep.sizes) <= 22
    assert rep.metadata["converged"] is True


def test_eps_gap_cap_marks_non_converged():
    inst = generic_instance(4)
    rep = run_forward(inst, EpsGap(eps=0.0, reference_loss=-1.0, max_steps=5))
    assert len(rep.sizes) == 5
    assert rep.metadata["converged"] is False


def test_eps_gap_validation():
    with pytest.raises(ValueError):
        EpsGap(eps=-0.1, reference_loss=0.0)
    with pytest.raises(ValueError):
        MaxSize(-1)


def test_max_size_zero_returns_empty_trace():
    inst = generic_instance(5)
    rep = run_forward(inst, MaxSize(0))
    assert len(rep.sizes) == 0
    assert rep.final_loss == rep.initial_loss


def test_backward_trace_shape_and_start():
    inst = generic_instance(6)
    rep = run_backward(inst)
    assert rep.method == "backward"
    np.testing.assert_array_equal(rep.sizes, np.arange(inst.n_rows, 0, -1))
    assert rep.chosen[0] == -1  # initial row records the full set, no removal
    assert np.all(rep.chosen[1:] >= 0)
    full = vec_loss(inst.P.mean(axis=0), inst.y_s)
    assert rep.losses[0] == pytest.approx(full, rel=1e-12)


def test_backward_greedy_removal_matches_brute_force():
    for i in range(8):
        inst = small_instance(i)
        rep = run_backward(inst)
        keep = list(range(inst.n_rows))
        for step in range(1, len(rep.sizes)):
            best_j, best_loss = None, np.inf
            for j in keep:
                trial = [r for r in keep if r != j]
                u = inst.P[trial].mean(axis=0)
                cl = vec_loss(u, inst.y_s)
                if cl < best_loss:
                    best_j, best_loss = j, cl
            assert best_j == rep.chosen[step]
            keep.remove(best_j)
            assert rep.losses[step] == pytest.approx(best_loss, rel=1e-12)


def test_frank_wolfe_reaches_interior_target():
    inst, _ = interior_2d_instance(0)
    rep = run_frank_wolfe(inst, 200)
    assert rep.method == "frank-wolfe"
    assert rep.losses[-1] <= rep.losses[0] + 1e-15
    sol = lstar_solve(inst, tol=1e-10)
    assert sol.loss <= 1e-10  # interior target: l* = 0


def test_random_subset_deterministic_and_sized():
    inst = generic_instance(7)
    r1 = run_random_subset(inst, 12, seed=3)
    r2 = run_random_subset(inst, 12, seed=3)
    r3 = run_random_subset(inst, 12, seed=4)
    np.testing.assert_array_equal(r1.chosen, r2.chosen)
    assert not np.array_equal(r1.chosen, r3.chosen)
    assert r1.counts.sum() == 12


def test_report_validation_rejects_ragged_arrays():
    with pytest.raises(ValueError):
        PruneReport(
            method="forward",
            fingerprint="x",
            counts=np.array([1]),
            sizes=np.array([1, 2]),
            chosen=np.array([0]),
            losses=np.array([1.0]),
            initial_loss=2.0,
        )


def test_forward_sizes_must_increment():
    with pytest.raises(ValueError):
        PruneReport(
            method="forward",
            fingerprint="x",
            counts=np.array([2]),
            sizes=np.array([1, 3]),
            chosen=np.array([0, 0]),
            losses=np.array([1.0, 0.5]),
            initial_loss=2.0,
        )


def test_counterexample_instance_shape_and_planted_optimum():
    inst = counterexample_instance()
    assert inst.P.shape == (43, 2)
    np.testing.assert_array_equal(inst.y_s, [0.0, 1.0])
    u = (4 * inst.P[2] + inst.P[3]) / 5.0
    assert vec_loss(u, inst.y_s) <= 1e-12


def test_counterexample_backward_stays_above_forward_floor():
    # backward elimination gets stuck on this geometry; forward selection
    # hits the target exactly at size 3 (multiset {0:x2, 1:x1})
    inst = counterexample_instance()
    back = run_backward(inst)
    fwd = run_forward(inst, MaxSize(50))
    assert back.losses.min() == pytest.approx(0.028864366144094707, rel=1e-9)
    assert fwd.losses.min() == 0.0
    assert int(fwd.sizes[np.argmin(fwd.losses)]) == 3
