"""Acceptance checks. Each test records one PASS/FAIL line; the lines are
printed in the terminal summary and by running this file as a script."""
import time

import numpy as np
import pytest
import scipy.linalg

from amgtune.amg import AmgConfig, amg_solve, build_interpolation, cljp_split, setup_hierarchy, strength_sets
from amgtune.amg import C_POINT, F_POINT, CfSplitting
from amgtune.dataset import (
    THETA_GRID, SplitSpec, TimingPolicy, collect_curves, savgol_smooth, split_dataset,
)
from amgtune.evaluate import aggregate, evaluate_problems
from amgtune.nn import (
    ConvBlock, NetworkSpec, SampleSet, TrainConfig, forward_batch, he_init, predict_samples, train,
)
from amgtune.pooling import PooledTensor, normalize, pool
from amgtune.problems import SuiteConfig, generate_suite, poisson_problem
from amgtune.sparse import from_dense, triple_product
from amgtune.tuner import TUNE_GRID, TunedCurve, calibrate_sigma_bar, predict_curve, select_theta, sigma_hat, tune_matrix

from amg_oracles import random_strength_graph, splitting_is_valid
from conftest import laplacian_1d, random_spd
from nn_oracles import gradcheck
from pooling_oracle import dense_pool

RESULTS: list[str] = []


def record(name, ok, detail):
    RESULTS.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok


# network used for the desk-scale end-to-end run and the overhead check
DESK_M = 32
DESK_SPEC = NetworkSpec(m=DESK_M, conv_blocks=(ConvBlock(8, 1, 5), ConvBlock(16, 1, 3)),
                        cnn_output_size=64,
                        dense_widths=(128, 128), include_p=False)
DESK_SUITE = SuiteConfig(count=600, p_values=(1,), modes=(1, 2, 3), sizes=(2, 3, 4, 5),
                         cells=(6, 8, 10, 12, 13), eps_max_values=(1.0, 3.0, 10.0), seed=0)
DESK_TRAIN = TrainConfig(max_epochs=200, seed=0, time_limit_seconds=15 * 60)


def test_amg_poisson():
    t0 = time.perf_counter()
    details, ok = [], True
    for n in (8, 16):
        inst = poisson_problem(n)
        u, st = amg_solve(inst.A, inst.f, None, AmgConfig(theta=0.5, nu1=1, nu2=1, N_max=40, tol=1e-8))
        ok &= st.converged and st.relative_residual <= 1e-8 and st.iterations <= 40
        details.append(f"{n}^3: {st.iterations} cycles, rel res {st.relative_residual:.1e}")
        if n == 8:
            ref = scipy.linalg.solve(inst.A.to_dense(), inst.f, assume_a="pos")
            err = np.abs(u - ref).max() / np.abs(u).max()
            ok &= err <= 1e-6
            details.append(f"oracle err {err:.1e}")
    secs = time.perf_counter() - t0
    ok &= secs < 30
    assert record("AMG correctness", ok, ", ".join(details) + f", {secs:.1f} s")


def test_galerkin_oracle():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        R, A, P = (rng.normal(size=(20, 20)) * (rng.random((20, 20)) < 0.2) for _ in range(3))
        C = triple_product(from_dense(R), from_dense(A), from_dense(P)).to_dense()
        worst = max(worst, float(np.abs(C - R @ A @ P).max()))
    assert record("Galerkin oracle", worst <= 1e-12, f"max abs error {worst:.1e} over 100 cases")


def test_cljp_validity():
    rng = np.random.default_rng(1)
    bad_split = 0
    for k in range(50):
        n = int(rng.integers(1, 201))
        G = random_strength_graph(rng, n, float(rng.uniform(0.0, 8.0 / max(n, 1))))
        bad_split += not splitting_is_valid(G, cljp_split(G, k))
    bad_h = 0
    for k in range(50):
        n = int(rng.integers(2, 201))
        H = setup_hierarchy(from_dense(random_spd(rng, n, float(rng.uniform(0.02, 0.2)))),
                            AmgConfig(theta=float(rng.uniform(0.1, 0.9)), seed=k))
        s = H.level_sizes
        dec = all(a > b for a, b in zip(s, s[1:]))
        ends = s[-1] <= H.config.coarse_max or H.truncated in ("stagnation", "max_levels")
        bad_h += not (dec and ends)
    ok = bad_split == 0 and bad_h == 0
    assert record("CLJP validity", ok, f"{bad_split}/50 invalid splittings, {bad_h}/50 bad hierarchies")


def test_interpolation_hand_case():
    A = laplacian_1d(3)
    label = np.array([F_POINT, C_POINT, F_POINT], dtype=np.int8)
    split = CfSplitting(label, np.zeros(3, dtype=np.int64), np.zeros(0, dtype=np.int64), 1, False)
    P = build_interpolation(A, strength_sets(A, 0.25), split).to_dense()
    ok = P[0, 0] == 0.5 and P[2, 0] == 0.5 and P[1, 0] == 1.0
    assert record("Interpolation hand case", ok, f"w01={P[0, 0]!r}, w21={P[2, 0]!r}")


def test_pooling_oracle():
    rng = np.random.default_rng(2)
    worst3, exact, norm_ok, cases = 0.0, True, True, 0
    for m in (1, 2, 3, 7, 50, 75):
        for _ in range(10):
            n = int(rng.integers(1, 201))
            M = rng.normal(size=(n, n)) * (rng.random((n, n)) < rng.uniform(0.01, 0.3))
            V = pool(from_dense(M), m).data
            ref = dense_pool(M, m)
            exact &= all(np.array_equal(V[c], ref[c]) for c in (0, 1, 3))
            worst3 = max(worst3, float(np.abs(V[2] - ref[2]).max()))
            W = normalize(PooledTensor(V, n)).data
            norm_ok &= bool(np.all(np.abs(W) <= 1) and np.array_equal(W == 0, V == 0))
            norm_ok &= all(np.abs(W[c]).max() == 1 for c in range(4) if np.any(V[c]))
            cases += 1
    W0 = normalize(PooledTensor(np.zeros((4, 3, 3)), 3)).data
    norm_ok &= bool(np.all(W0 == 0))
    ok = exact and worst3 <= 1e-12 and norm_ok
    assert record("Pooling oracle", ok, f"{cases} cases, channels 1/2/4 exact={exact}, "
                                        f"channel 3 err {worst3:.1e}, normalisation ok={norm_ok}")


def test_savgol_exactness():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        deg = int(rng.integers(0, 8))
        y = np.polyval(rng.normal(size=deg + 1), THETA_GRID)
        s, _ = savgol_smooth(y, 21, 7)
        worst = max(worst, float(np.abs(s - y)[10:-10].max()))
    assert record("Savitzky-Golay exactness", worst <= 1e-8, f"max error {worst:.1e} on 50 polynomials")


def test_gradient_check():
    errs = [gradcheck(seed) for seed in range(10)]
    worst = max(errs)
    assert record("Gradient check", worst <= 1e-6, f"max relative error {worst:.1e} over 10 seeds")


def test_output_contracts():
    rng = np.random.default_rng(4)
    spec = NetworkSpec(m=8, conv_blocks=(ConvBlock(3, 1, 3),), cnn_output_size=6,
                       dense_widths=(8, 8), include_p=True)
    n, ok = 0, True
    for k in range(100):
        P = he_init(spec, k)
        scale = 10.0 ** rng.uniform(-2, 2)
        for name in P.arrays:
            P.arrays[name] = rng.normal(0, scale, P.arrays[name].shape)
        imgs = rng.uniform(-1, 1, (4, 4, 8, 8))
        sc = np.column_stack([rng.integers(1, 4, 100), rng.uniform(1, 25, 100), rng.uniform(0, 1, 100)])
        t, s, _ = forward_batch(P, imgs, rng.integers(0, 4, 100), sc)
        ok &= bool(np.all((t >= 0) & (t <= 1)) and np.all(s >= 0) and np.all(np.isfinite(s)))
        n += len(t)
    assert record("Output contracts", ok, f"{n} random inputs")


def test_sigma_gating():
    n = len(TUNE_GRID)
    c0 = TunedCurve(TUNE_GRID, np.zeros(n), np.full(n, 0.37))
    c1 = TunedCurve(TUNE_GRID, np.ones(n), np.full(n, 0.37))
    ok = sigma_hat(c0) == pytest.approx(0.37, rel=1e-15) and sigma_hat(c1) == 0.0
    rng = np.random.default_rng(5)
    for _ in range(1000):
        c = TunedCurve(TUNE_GRID, rng.uniform(0, 1, n), rng.uniform(0, 2, n))
        sb = float(rng.uniform(0, 1))
        r = select_theta(c, sb)
        ok &= r.used_default == (r.sigma_hat_value > sb)
        ok &= r.theta_star == 0.5 if r.used_default else r.theta_star in TUNE_GRID
    r = select_theta(TunedCurve(TUNE_GRID, (TUNE_GRID - 0.6) ** 2, np.zeros(n)), 1.0)
    ok &= r.theta_star == 0.6 and not r.used_default
    assert record("Sigma gating", ok, f"hand cases, 1000 random curves, convex argmin {r.theta_star:.3f}")


def test_elbow_calibration():
    cal = calibrate_sigma_bar([10, 9, 8, 1, 0.9, 0.8])
    ok = cal.sigma_bar == 1 and cal.elbow == 3
    assert record("Elbow calibration", ok, f"sigma_bar={cal.sigma_bar}, index {cal.elbow}")


@pytest.fixture(scope="module")
def desk_run():
    """Generate, collect, split, train, calibrate and evaluate once."""
    t0 = time.perf_counter()
    insts = generate_suite(DESK_SUITE)
    pol = TimingPolicy("cost_model")
    curves = collect_curves(insts, AmgConfig(), pol, m=DESK_M)
    t_collect = time.perf_counter() - t0
    tr, va, te = split_dataset(curves, SplitSpec(0.2, 0.2, 0.6, seed=0))
    t1 = time.perf_counter()
    params, hist = train(tr, va, DESK_SPEC, DESK_TRAIN)
    t_train = time.perf_counter() - t1
    va_ok = [c for c in va if not c.review_flag]
    cal = calibrate_sigma_bar([sigma_hat(predict_curve(params, c.V_hat, c.p, c.log2_n1)) for c in va_ok])
    by_id = {i.problem_id: i for i in insts}
    recs = evaluate_problems([by_id[c.problem_id] for c in te], te, params, cal.sigma_bar,
                             AmgConfig(), pol, baseline_theta=0.5)
    return dict(tr=tr, va=va, te=te, params=params, hist=hist, cal=cal, recs=recs,
                t_collect=t_collect, t_train=t_train)


@pytest.mark.slow
def test_end_to_end(desk_run):
    r = desk_run
    f = lambda cs: [c for c in cs if not c.review_flag]  # noqa: E731
    tes = SampleSet.from_curves(f(r["te"]), DESK_SPEC)
    trs = SampleSet.from_curves(f(r["tr"]), DESK_SPEC)
    t_hat, _ = predict_samples(r["params"], tes)
    mse = float(np.mean((t_hat - tes.targets) ** 2))
    base = float(np.mean((trs.targets.mean() - tes.targets) ** 2))
    s = aggregate(r["recs"], 0.5, r["cal"].sigma_bar)
    n_def = sum(x.used_default for x in r["recs"])
    ok_mse = mse <= 0.5 * base
    ok_close = s.within_10pct >= 0.70
    ok_time = r["hist"].epoch[-1] < 200 and r["t_train"] <= 15 * 60
    detail = (f"MSE ratio {mse / base:.3f} (<= 0.5: {ok_mse}), within 10% of grid min on "
              f"{100 * s.within_10pct:.1f}% of {s.n} test problems (>= 70%: {ok_close}), "
              f"defaults {n_def}, sigma_bar {r['cal'].sigma_bar:.4f}, PB {s.PB:.2f}, "
              f"train {r['t_train']:.0f} s over {len(r['hist'].epoch)} epochs, "
              f"collect {r['t_collect']:.0f} s")
    assert record("End-to-end desk-scale", ok_mse and ok_close and ok_time, detail)


def test_transfer_learning():
    insts = generate_suite(SuiteConfig(count=10, cells=(6, 8), seed=11))
    curves = collect_curves(insts, AmgConfig(), TimingPolicy(), m=DESK_M)
    tr, va = curves[:6], curves[6:]
    init = he_init(DESK_SPEC, 3)
    base = dict(max_epochs=4, seed=0, include_flagged=True)
    _, h_cached = train(tr, va, DESK_SPEC, TrainConfig(freeze_conv=True, cache_features=True, **base), init)
    _, h_graph = train(tr, va, DESK_SPEC, TrainConfig(freeze_conv=True, cache_features=False, **base), init)
    _, h_full = train(tr, va, DESK_SPEC, TrainConfig(freeze_conv=False, **base), init)
    diff = float(np.abs(np.subtract(h_cached.step_loss, h_graph.step_loss)).max())
    ratio = h_cached.seconds / h_full.seconds
    ok = diff <= 1e-10 and ratio < 0.5
    assert record("Transfer learning", ok, f"per-step loss diff {diff:.1e} over "
                                           f"{len(h_cached.step_loss)} steps, time ratio {ratio:.3f}")


def test_overhead():
    inst = poisson_problem(32)
    t0 = time.perf_counter()
    amg_solve(inst.A, inst.f, None, AmgConfig(theta=0.5))
    solve = time.perf_counter() - t0
    parts = []
    ok = True
    for label, spec in (("desk network", DESK_SPEC), ("full-size network", NetworkSpec())):
        P = he_init(spec, 0)
        tune_matrix(inst.A, P, np.inf)  # warm caches
        best = min(tune_matrix(inst.A, P, np.inf).seconds for _ in range(3))
        frac = best / solve
        ok &= frac < 0.05
        parts.append(f"{label} {100 * frac:.2f}%")
    assert record("Overhead", ok, f"solve {solve:.2f} s on 32^3; tuner " + ", ".join(parts))


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
