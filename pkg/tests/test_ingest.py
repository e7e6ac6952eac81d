import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from svcvv import ingest
from svcvv.core import ImuSeries, TimeSeries
from svcvv.ingest import IngestError
from svcvv.vvp import VvSeries

HEADER = "t,fx,fy,fz,wx,wy,wz\n"


def _write(path, rows, header=HEADER):
    path.write_text(header + "".join(",".join(str(v) for v in r) + "\n" for r in rows))
    return path


def test_load_three_rows(tmp_path):
    p = _write(tmp_path / "imu.csv", [(0.0, 0, 9.81, 0, 0, 0, 0), (0.01, 0, 9.81, 0, 0, 0, 0), (0.02, 0, 9.8, 0, 0.1, 0, 0)])
    imu = ingest.load_imu(p)
    assert len(imu) == 3 and imu.f[2, 1] == 9.8 and imu.omega[2, 0] == 0.1


def test_column_order_is_by_name(tmp_path):
    p = _write(tmp_path / "imu.csv", [(1, 2, 3, 4, 5, 6, 0.0)], header="wx,wy,wz,fx,fy,fz,t\n")
    imu = ingest.load_imu(p)
    assert np.array_equal(imu.omega[0], [1, 2, 3]) and np.array_equal(imu.f[0], [4, 5, 6])


def test_errors_name_lines(tmp_path):
    rows = [(k * 0.01, 0, 9.81, 0, 0, 0, 0) for k in range(5)]
    dup = rows[:3] + [rows[2]] + rows[3:]
    with pytest.raises(IngestError, match="line 5.*duplicated"):
        ingest.load_imu(_write(tmp_path / "a.csv", dup))
    with pytest.raises(IngestError, match="missing column"):
        ingest.load_imu(_write(tmp_path / "b.csv", rows, header="t,fx,fy,fz,wx,wy\n"))
    back = rows[:3] + [(0.015, 0, 9.81, 0, 0, 0, 0)]
    with pytest.raises(IngestError, match="line 5.*non-monotonic"):
        ingest.load_imu(_write(tmp_path / "c.csv", back))
    bad = tmp_path / "d.csv"
    bad.write_text(HEADER + "0,0,9.81,0,0,0,0\n0.01,0,abc,0,0,0,0\n")
    with pytest.raises(IngestError, match="line 3"):
        ingest.load_imu(bad)


def test_gap_exceeds_tolerance(tmp_path):
    t = list(np.arange(10) * 0.01) + list(0.09 + 0.025 + np.arange(5) * 0.01)
    p = _write(tmp_path / "g.csv", [(tk, 0, 9.81, 0, 0, 0, 0) for tk in t])
    with pytest.raises(IngestError, match="gap exceeds tolerance"):
        ingest.load_imu(p)
    # lenient mode holds the last sample across the gap
    imu = ingest.load_imu(p, strict=False)
    assert np.allclose(np.diff(imu.t), 0.01)


def test_jitter_and_single_missing_sample(tmp_path):
    t = np.arange(20) * 0.01
    t[5] += 0.0005  # 5 % jitter
    t = np.delete(t, 9)  # one missing sample (20 ms step is allowed)
    rows = [(tk, k, 9.81, 0, 0, 0, 0) for k, tk in enumerate(t)]
    imu = ingest.load_imu(_write(tmp_path / "j.csv", rows))
    assert len(imu) == 20 and np.allclose(np.diff(imu.t), 0.01)
    assert imu.f[9, 0] == imu.f[8, 0]  # held
    t[3] += 0.003  # 30 % jitter
    with pytest.raises(IngestError, match="jitter"):
        ingest.load_imu(_write(tmp_path / "k.csv", [(tk, 0, 9.81, 0, 0, 0, 0) for tk in t]))


@settings(max_examples=25)
@given(n=st.integers(1, 50), seed=st.integers(0, 2**31))
def test_imu_round_trip_exact(tmp_path_factory, n, seed):
    rng = np.random.default_rng(seed)
    t = 3.7 + np.arange(n) * 0.01
    imu = ImuSeries(t, rng.normal(size=(n, 3)) * 10, rng.normal(size=(n, 3)))
    path = tmp_path_factory.mktemp("rt") / "imu.csv"
    ingest.write_imu(imu, path)
    back = ingest.load_imu(path)
    assert back.t.tobytes() == imu.t.tobytes()
    assert back.f.tobytes() == imu.f.tobytes() and back.omega.tobytes() == imu.omega.tobytes()


def _frames_dir(tmp_path, n=3, size=(20, 10), listed=None):
    d = tmp_path / "frames"
    d.mkdir(parents=True)
    for k in range(n):
        Image.fromarray(np.full((size[1], size[0], 3), k * 40, np.uint8)).save(d / f"{k:06d}.png")
    ingest.write_index(d / "index.txt", [(k, k / 30) for k in range(listed or n)])
    return d


def test_load_frames(tmp_path):
    refs = ingest.load_frames(_frames_dir(tmp_path), expected_dims=(20, 10))
    assert len(refs) == 3 and refs[1].t == pytest.approx(1 / 30) and refs[0].dims == (20, 10)
    assert ingest.read_frame(refs[2])[0, 0, 0] == 80


def test_load_frames_errors(tmp_path):
    with pytest.raises(IngestError, match="missing"):
        ingest.load_frames(_frames_dir(tmp_path / "a", listed=4))
    with pytest.raises(IngestError, match="differ from expected"):
        ingest.load_frames(_frames_dir(tmp_path / "b"), expected_dims=(30, 10))
    d = _frames_dir(tmp_path / "c")
    (d / "index.txt").unlink()
    with pytest.raises(IngestError, match="frame index not found"):
        ingest.load_frames(d)
    d = _frames_dir(tmp_path / "e")
    (d / "000001.png").write_bytes(b"not a png")
    with pytest.raises(IngestError, match="unreadable"):
        ingest.load_frames(d)


def test_crop_center():
    img = np.arange(720 * 1280).reshape(720, 1280)
    out = ingest.crop_center(img, (1000, 480))
    assert out.shape == (480, 1000) and out[0, 0] == img[120, 140]
    assert ingest.crop_center(img, (1280, 720)) is not None
    assert np.array_equal(ingest.crop_center(img, (1280, 720)), img)
    with pytest.raises(IngestError, match="smaller"):
        ingest.crop_center(np.zeros((400, 800)), (1000, 480))


def _imu(start, end):
    t = np.arange(int(round((end - start) / 0.01)) + 1) * 0.01 + start
    return ImuSeries(t, np.tile([0, 9.81, 0], (len(t), 1)), np.zeros((len(t), 3)))


def _vv(start, end):
    t = np.arange(int(round((end - start) * 30)) + 1) / 30 + start
    return TimeSeries(t, np.column_stack([t, t, 0 * t]))


def test_synchronize_ranges():
    a = ingest.synchronize(_imu(0, 100), _vv(0, 100))
    assert a.imu.t[0] == 0 and a.imu.t[-1] == pytest.approx(100)
    a = ingest.synchronize(_imu(0, 100), _vv(50, 150))
    assert a.imu.t[0] == pytest.approx(50) and a.imu.t[-1] == pytest.approx(100)
    with pytest.raises(IngestError, match="no overlap"):
        ingest.synchronize(_imu(0, 10), _vv(20, 30))


@settings(max_examples=20)
@given(st.floats(0, 3.5), st.floats(0, 3.5))
def test_synchronize_never_invents(s_imu, s_vv):
    vv = _vv(s_vv, s_vv + 4)
    a = ingest.synchronize(_imu(s_imu, s_imu + 4), vv)
    assert set(map(tuple, a.vv.values)) <= set(map(tuple, vv.values))
    assert np.array_equal(a.vv.t, a.imu.t)


def test_vv_series_round_trip(tmp_path):
    s = VvSeries(np.arange(4) / 30, np.array([90.0, 91, 92, 92]), np.ones((4, 3)), np.array([0, 0, 1, 0]))
    ingest.write_vv_series(s, tmp_path / "vv.csv")
    back = ingest.load_vv_series(tmp_path / "vv.csv")
    assert np.array_equal(back.theta, s.theta) and back.quality.tolist() == [0, 0, 1, 0]
