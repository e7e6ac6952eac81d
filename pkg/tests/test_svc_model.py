import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svcvv import svc_model, synth
from svcvv.core import DivergenceError, ImuSeries, SvcError, TimeSeries
from svcvv.params import preset
from svcvv.svc_model import ModelConfig, ModelState

from oracles import rodrigues

REDUCED = preset("svc-vv").with_overrides(K_vc=5.0, K_vvc=0.0)


def _static(seconds, f=(0.0, 9.81, 0.0)):
    n = int(round(seconds / 0.01))
    return ImuSeries(np.arange(n) * 0.01, np.tile(f, (n, 1)), np.zeros((n, 3)))


def test_init_level():
    st0 = svc_model.init_state(_static(1.0, (0, 0, 9.81)))
    assert np.allclose(st0.g, [0, 0, 9.81]) and np.allclose(st0.q, [1, 0, 0, 0])
    assert np.allclose(st0.g_hat, st0.g) and np.allclose(st0.v_s, st0.g)
    assert not st0.scc.any() and not st0.msi.any()


def test_init_tilted_ten_degrees():
    f = rodrigues([1, 0, 0], np.radians(10)) @ np.array([0, 0, 9.81])
    st0 = svc_model.init_state(_static(1.0, f * 1.01))
    assert np.allclose(st0.g, [0, -9.81 * np.sin(np.radians(10)), 9.81 * np.cos(np.radians(10))])
    assert np.linalg.norm(st0.g) == pytest.approx(9.81)


def test_init_window_errors_and_zero_ghat():
    with pytest.raises(SvcError, match="insufficient initialization window"):
        svc_model.init_state(_static(0.5))
    st0 = svc_model.init_state(_static(2.0), config=ModelConfig(ghat_init="zero"))
    assert not st0.g_hat.any()


def test_state_vector_round_trip():
    st0 = svc_model.init_state(_static(1.0))
    v = st0.to_vector()
    assert v.shape == (27,)
    assert np.array_equal(ModelState.from_vector(v).to_vector(), v)


def test_step_contract():
    st0 = svc_model.init_state(_static(1.0))
    with pytest.raises(SvcError, match="required"):
        svc_model.step(st0, [0, 9.81, 0], [0, 0, 0], None, preset("svc-vv"))
    s1, out = svc_model.step(st0, [0, 9.81, 0], [0, 0, 0])
    assert out.msi == 0.0 and np.allclose(out.d_v, 0) and out.d_vv is None
    assert s1.t == pytest.approx(0.01)


def test_step_matches_run_trial(short_slalom):
    imu = short_slalom.imu
    res = svc_model.run_trial(imu)
    s = svc_model.init_state(imu)
    for k in range(300):
        s, out = svc_model.step(s, imu.f[k], imu.omega[k])
        # separately compiled kernels may differ in the last few ulps
        assert out.msi == pytest.approx(res.msi[k], rel=1e-9, abs=1e-15)
    assert np.linalg.norm(out.d_v) == pytest.approx(res.norm_dv[299], rel=1e-9, abs=1e-15)


def test_rest_is_conflict_free():
    res = svc_model.run_trial(_static(300.0))
    assert res.max_msi < 1e-12 and res.norm_dv.max() < 1e-12


def test_divergence_names_block():
    st0 = svc_model.init_state(_static(1.0))
    bad = preset("svc").with_overrides(tau=1e-6)
    with pytest.raises(DivergenceError, match="numerical divergence in vestibular"):
        for _ in range(200):
            st0, _ = svc_model.step(st0, [1.0, 9.81, 0], [0, 0, 0.5], params=bad)


def test_run_trial_errors(short_slalom):
    imu = short_slalom.imu
    with pytest.raises(SvcError, match="requires a visual vertical"):
        svc_model.run_trial(imu, variant="svc-vv")
    with pytest.raises(SvcError, match="unknown variant"):
        svc_model.run_trial(imu, variant="x")
    shifted = TimeSeries(imu.t + 0.007, np.tile([0, 9.81, 0], (len(imu), 1)))
    with pytest.raises(SvcError, match="timestamp misalignment"):
        svc_model.run_trial(imu, shifted, variant="svc-vv")
    t = imu.t.copy()
    t[50:] += 0.006
    with pytest.raises(SvcError, match="timestamp misalignment"):
        svc_model.run_trial(ImuSeries(t, imu.f, imu.omega))


def test_svc_ignores_vv(short_slalom):
    imu = short_slalom.imu
    a = svc_model.run_trial(imu)
    b = svc_model.run_trial(imu, synth.vv_constant(len(imu), 40.0))
    assert a.msi.tobytes() == b.msi.tobytes()


def _smooth_imu(seed, seconds=30.0):
    rng = np.random.default_rng(seed)
    n = int(seconds / 0.01)
    t = np.arange(n) * 0.01
    f = np.tile([0.0, 9.81, 0.0], (n, 1))
    w = np.zeros((n, 3))
    for k in range(3):
        amp, fr, ph = rng.uniform(0, 2), rng.uniform(0.05, 1), rng.uniform(0, 6)
        f[:, k] += amp * np.sin(2 * np.pi * fr * t + ph) * (t > 1)
        amp, fr, ph = rng.uniform(0, 1), rng.uniform(0.05, 1), rng.uniform(0, 6)
        w[:, k] = amp * np.sin(2 * np.pi * fr * t + ph) * (t > 1)
    vv_theta = 90 + 20 * np.sin(2 * np.pi * rng.uniform(0.05, 0.5) * t)
    return ImuSeries(t, f, w), synth.vv_constant(n, 90) * 0 + np.column_stack(
        [9.81 * np.cos(np.radians(vv_theta)), 9.81 * np.sin(np.radians(vv_theta)), 0 * t]
    )


@settings(max_examples=10)
@given(st.integers(0, 2**31))
def test_reduction_property(seed):
    imu, vv = _smooth_imu(seed)
    a = svc_model.run_trial(imu)
    b = svc_model.run_trial(imu, vv, REDUCED, "svc-vv")
    assert np.max(np.abs(a.msi - b.msi)) < 1e-9


@settings(max_examples=10)
@given(st.integers(0, 2**31), st.sampled_from(["svc", "svc-vv"]))
def test_bounded_and_deterministic(seed, variant):
    imu, vv = _smooth_imu(seed)
    a = svc_model.run_trial(imu, vv, variant=variant)
    b = svc_model.run_trial(imu, vv, variant=variant)
    assert np.all(a.msi >= 0) and np.all(a.msi < 85)
    assert a.msi.tobytes() == b.msi.tobytes() and a.g.tobytes() == b.g.tobytes()
    assert a.mean_msi <= a.max_msi


def test_trial_csv(tmp_path, short_slalom):
    res = svc_model.run_trial(short_slalom.imu, synth.vv_from_gravity(short_slalom.gravity), variant="svc-vv")
    path = tmp_path / "trial.csv"
    res.to_csv(path)
    head = path.read_text().splitlines()[:2]
    assert head[0] == f"# params_hash={preset('svc-vv').digest()} variant=svc-vv"
    assert head[1] == "t,msi,norm_dv,norm_dvv,theta_vv,theta_g"
    back = svc_model.load_trial_csv(path)
    assert np.array_equal(back["msi"], res.msi) and np.array_equal(back["theta_g"], res.theta_g)
    s = res.summary()
    assert s["n_samples"] == len(res.t) and s["mean_msi"] <= s["max_msi"]


def test_slalom_msi_rises_then_decays():
    track = synth.gen_slalom_track(synth.SlalomSpec(duration=600))
    imu = track.imu
    # append 10 min at rest after the drive
    extra = 60000
    t = np.concatenate([imu.t, imu.t[-1] + 0.01 * (1 + np.arange(extra))])
    f = np.concatenate([imu.f, np.tile(imu.f[-1], (extra, 1))])
    w = np.concatenate([imu.omega, np.zeros((extra, 3))])
    res = svc_model.run_trial(ImuSeries(t, f, w))
    k_stop = len(imu)
    assert res.msi[k_stop // 2] < res.msi[k_stop - 1]
    assert res.msi[-1] < res.max_msi
    assert np.argmax(res.msi) >= k_stop - 1
