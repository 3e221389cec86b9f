import base64
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amgtune.amg import AmgConfig
from amgtune.dataset import (
    SCHEMA_VERSION, THETA_GRID, DatasetFormatError, SplitSpec, TimingPolicy, build_curve,
    collect_curves, measure_curve, measure_point, normalize_curve, read_dataset, repeat_count,
    review_curve, savgol_smooth, split_dataset, write_dataset,
)
from amgtune.problems import SuiteConfig, generate_suite, poisson_problem


def test_theta_grid():
    assert len(THETA_GRID) == 37
    assert THETA_GRID[0] == 0.05 and THETA_GRID[-1] == 0.95
    np.testing.assert_allclose(np.diff(THETA_GRID), 0.025)


def test_repeat_count_rule():
    pol = TimingPolicy("wallclock", 2, 100, 60.0)
    assert repeat_count(120.0, pol) == 2
    assert repeat_count(1.0, pol) == 60
    assert repeat_count(1e-6, pol) == 100


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-9, 1e4), st.floats(1e-3, 1e4))
def test_repeat_count_clamped(mean, budget):
    r = repeat_count(mean, TimingPolicy("wallclock", 2, 100, budget))
    assert 2 <= r <= 100


def test_measure_point_runs_r_times():
    calls = []

    def run():
        calls.append(1)
        return 0.5

    mean, r = measure_point(run, TimingPolicy("wallclock", 2, 100, 2.0))
    assert (mean, r, len(calls)) == (0.5, 4, 4)


def test_timing_policy_validation():
    with pytest.raises(ValueError):
        TimingPolicy("stopwatch")
    with pytest.raises(ValueError):
        TimingPolicy(r_min=5, r_max=3)


def test_measure_curve_cost_model_is_deterministic():
    inst = poisson_problem(5)
    grid = THETA_GRID[::9]
    a = measure_curve(inst, AmgConfig(), TimingPolicy(), grid)
    b = measure_curve(inst, AmgConfig(), TimingPolicy(), grid)
    np.testing.assert_array_equal(a.t_mean, b.t_mean)
    assert np.all(a.t_mean > 0) and not a.nonconverged.any()


def test_measure_curve_marks_nonconvergence():
    inst = poisson_problem(5)
    raw = measure_curve(inst, AmgConfig(N_max=1, tol=1e-14), TimingPolicy(), [0.25, 0.5])
    assert raw.nonconverged.all() and np.all(raw.iterations == 1)


def test_measure_curve_wallclock():
    inst = poisson_problem(3)
    raw = measure_curve(inst, AmgConfig(), TimingPolicy("wallclock", 2, 3, 1e-9), [0.5])
    assert raw.repeats.tolist() == [2] and raw.t_mean[0] > 0


@pytest.mark.parametrize("seed", range(5))
def test_savgol_exact_on_polynomials(seed):
    r = np.random.default_rng(seed)
    x = np.linspace(-1, 1, 37)
    y = np.polyval(r.normal(size=8), x) + 10
    s, _ = savgol_smooth(y)
    np.testing.assert_allclose(s[10:27], y[10:27], atol=1e-8)
    # truncated end windows still fit degree 7 exactly
    np.testing.assert_allclose(s, y, atol=1e-8)


def test_savgol_constant_curve():
    s, flag = savgol_smooth(np.full(37, 3.0))
    np.testing.assert_allclose(s, 3.0, rtol=1e-12)
    assert not flag


def test_savgol_spike_is_flagged():
    y = np.full(37, 10.0)
    y[18] = 1.0
    s, flag = savgol_smooth(y)
    assert flag
    assert s.min() > 1.0


def test_savgol_errors():
    with pytest.raises(ValueError):
        savgol_smooth(np.ones(10))
    with pytest.raises(ValueError):
        savgol_smooth(np.ones(37), window=20)


def test_review_nonpositive():
    assert review_curve(np.ones(3), np.array([1.0, 0.0, 1.0]))


def test_normalize_curve():
    t = np.array([3.0, 1.0, 2.0, 5.0])
    out, deg = normalize_curve(t)
    assert out.tolist() == [0.5, 0.0, 0.25, 1.0] and not deg
    out2, _ = normalize_curve(7.0 * t - 3.0)
    np.testing.assert_allclose(out2, out, atol=1e-15)
    z, deg = normalize_curve(np.full(5, 2.0))
    assert deg and np.all(z == 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=2, max_size=40), st.floats(1e-3, 1e3),
       st.floats(-1e3, 1e3))
def test_normalize_curve_affine_invariant_argmin(vals, a, b):
    t = np.array(vals, dtype=float)
    out, deg = normalize_curve(t)
    if deg:
        return
    out2, deg2 = normalize_curve(a * t + b)
    assert out.min() == 0 and out.max() == 1 and not deg2
    np.testing.assert_allclose(out2, out, atol=1e-9)
    assert np.argmin(out) == np.argmin(out2)


def _fake_curves(n_base, twins=2, m=4):
    out = []
    for b in range(n_base):
        for r in range(twins):
            t = np.linspace(1, 2, 37) + b
            tn, _ = normalize_curve(t)
            from amgtune.dataset import ProblemCurve
            out.append(ProblemCurve(f"b{b}-r{r}", f"b{b}", f"r{r}", np.zeros((4, m, m)), 1,
                                    3.0, THETA_GRID.copy(), t, t, tn))
    return out


def test_split_counts_and_twins():
    curves = _fake_curves(10)
    tr, va, te = split_dataset(curves, SplitSpec(seed=3))
    bases = [{c.base_problem_id for c in part} for part in (tr, va, te)]
    assert [len(b) for b in bases] == [2, 2, 6]
    assert not (bases[0] & bases[1] or bases[0] & bases[2] or bases[1] & bases[2])
    assert len(tr) + len(va) + len(te) == 20
    again = split_dataset(curves, SplitSpec(seed=3))
    assert [c.problem_id for c in again[0]] == [c.problem_id for c in tr]


def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec(0.5, 0.5, 0.5)


@pytest.fixture(scope="module")
def small_curves():
    insts = generate_suite(SuiteConfig(count=2, cells=(4,), seed=2))
    return collect_curves(insts, AmgConfig(), TimingPolicy(), m=5, tag="t")


def test_collected_curve_invariants(small_curves):
    for c in small_curves:
        c.validate()
        assert c.V_hat.shape == (4, 5, 5)
        np.testing.assert_array_equal(c.V_hat, c.V_hat.astype(np.float32))
        assert c.t_normalized.min() == 0 and c.t_normalized.max() == 1
        assert c.machine_tag == "t" and c.log2_n1 == np.log2(27)


def test_dataset_roundtrip(tmp_path, small_curves):
    path = tmp_path / "d.jsonl"
    write_dataset(path, small_curves)
    back = read_dataset(path)
    for a, b in zip(small_curves, back):
        np.testing.assert_array_equal(a.V_hat, b.V_hat)
        np.testing.assert_array_equal(a.t_raw_mean, b.t_raw_mean)
        np.testing.assert_array_equal(a.t_normalized, b.t_normalized)
        assert a.log2_n1 == b.log2_n1 and a.problem_id == b.problem_id
    write_dataset(tmp_path / "e.jsonl", back)
    assert (tmp_path / "e.jsonl").read_bytes() == path.read_bytes()


def test_dataset_tampered_payload(tmp_path, small_curves):
    rec = small_curves[0].to_record()
    raw = base64.b64decode(rec["V_hat"]["data"])[:-4]
    rec["V_hat"]["data"] = base64.b64encode(raw).decode()
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(DatasetFormatError, match="bytes"):
        read_dataset(path)


def test_dataset_version_mismatch(tmp_path, small_curves):
    rec = small_curves[0].to_record()
    assert rec["schema_version"] == SCHEMA_VERSION
    rec["schema_version"] = 99
    path = tmp_path / "v.jsonl"
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(DatasetFormatError, match="99"):
        read_dataset(path)


def test_collect_parallel_matches_serial(small_curves):
    insts = generate_suite(SuiteConfig(count=2, cells=(4,), seed=2))
    par = collect_curves(insts, AmgConfig(), TimingPolicy(), m=5, tag="t", workers=2)
    for a, b in zip(small_curves, par):
        assert a.to_record() == b.to_record()


def test_build_curve_flags_degenerate():
    from amgtune.dataset import RawCurve
    inst = poisson_problem(3)
    raw = RawCurve(THETA_GRID.copy(), np.full(37, 5.0), np.ones(37, int), np.ones(37, int),
                   np.zeros(37, bool), "cost_model")
    c = build_curve(inst, raw, m=3)
    assert c.degenerate and c.review_flag and np.all(c.t_normalized == 0)
    c.validate()
