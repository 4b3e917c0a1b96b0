import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from psrsqueeze import trace_analysis as ta


def _trace(lin, x=None, shot_dbm=-80.0, rbw=1e5, fc=1.4e6, **meta):
    x = np.linspace(0, math.pi, len(lin)) if x is None else x
    return ta.HomodyneTrace(x, 10 * np.log10(lin) + shot_dbm, rbw, fc,
                            meta={k: str(v) for k, v in meta.items()})


def _canonical(p):
    a, b, s, c = p["a"], p["b"], p["s"], p["c"]
    if b < 0:
        b, c = -b, c + math.pi
    if s < 0:
        s, c = -s, -c
    return a, b, s, c % (2 * math.pi)


def test_calibrate_flat_and_band():
    tr = _trace(np.ones(32))
    cal = ta.calibrate(tr, ta.ShotReference(-80.0, 0.2))
    np.testing.assert_allclose(cal.noise_db, 0.0, atol=1e-12)
    assert cal.uncertainty_db == 0.2


def test_calibrate_db_definition():
    tr = ta.HomodyneTrace(np.arange(16.0), np.full(16, -76.99), 1e5, 1.4e6)
    cal = ta.calibrate(tr, ta.ShotReference(-80.0))
    assert 10 ** (cal.noise_db[0] / 10) == pytest.approx(2.0, rel=1e-3)


def test_calibrate_metadata_mismatch():
    tr = _trace(np.ones(32))
    with pytest.raises(ta.MetadataMismatch, match="rbw"):
        ta.calibrate(tr, ta.ShotReference(-80.0, rbw=3e5, center_freq=1.4e6))
    with pytest.raises(ta.MetadataMismatch, match="center_freq"):
        ta.calibrate(tr, ta.ShotReference(-80.0, rbw=1e5, center_freq=2e6))


def test_validation():
    with pytest.raises(ValueError):
        ta.HomodyneTrace(np.arange(15.0), np.zeros(15), 1e5, 1.4e6)
    with pytest.raises(ValueError):
        ta.HomodyneTrace(np.arange(16.0), np.zeros(16), 0.0, 1.4e6)
    with pytest.raises(ValueError):
        ta.ShotReference(-80.0, -0.1)


def test_synthetic_sinusoid_extrema():
    phi = np.linspace(0, math.pi, 100)
    cal = ta.calibrate(_trace(1 + 0.1 * np.cos(2 * phi)), ta.ShotReference(-80.0))
    # 0.9 * 1.1 < 1, which the extractor flags without failing
    with pytest.warns(ta.PhysicalConsistencyWarning):
        ex = ta.extract_extrema(cal)
    assert ex.min_db == pytest.approx(10 * math.log10(0.9), abs=1e-6)
    assert ex.max_db == pytest.approx(10 * math.log10(1.1), abs=1e-6)
    assert ex.fit_ok and ex.fit_rms < 1e-8
    assert ex.min_db <= ex.max_db


def test_flat_trace():
    cal = ta.calibrate(_trace(np.full(40, 1.3)), ta.ShotReference(-80.0))
    ex = ta.extract_extrema(cal)
    assert ex.min_db == pytest.approx(10 * math.log10(1.3), abs=1e-9)
    assert ex.max_db == pytest.approx(ex.min_db, abs=1e-9)
    assert abs(ex.fit_params["b"]) < 1e-12


@pytest.mark.filterwarnings("ignore::psrsqueeze.trace_analysis.PhysicalConsistencyWarning")
@given(st.floats(1.0, 3.0), st.floats(0.05, 0.9), st.floats(0.3, 3.0), st.floats(-3.0, 3.0),
       st.integers(40, 300))
def test_parameter_recovery(a, frac, s, c, n):
    b = frac * a
    x = np.linspace(0.0, 2 * math.pi / s, n)  # two quadrature periods
    lin = a + b * np.cos(2 * s * x + c)
    ex = ta.extract_extrema(ta.CalibratedTrace(x, 10 * np.log10(lin), 0.2))
    assert ex.fit_ok
    got = _canonical(ex.fit_params)
    assert got[:3] == pytest.approx((a, b, s), abs=1e-6)
    dc = (got[3] - c % (2 * math.pi) + math.pi) % (2 * math.pi) - math.pi
    assert abs(dc) < 1e-6
    assert ex.min_db == pytest.approx(10 * math.log10(a - b), abs=1e-6)
    assert ex.max_db == pytest.approx(10 * math.log10(a + b), abs=1e-6)
    assert np.all(ex.min_db <= 10 * np.log10(lin) + 1e-6)


def test_refit_idempotent():
    x = np.linspace(0, 9, 150)
    rng = np.random.default_rng(2)
    lin = 1.2 + 0.3 * np.cos(2 * 0.6 * x + 0.4) + 0.01 * rng.normal(size=x.size)
    ex = ta.extract_extrema(ta.CalibratedTrace(x, 10 * np.log10(lin), 0.2))
    p = ex.fit_params
    model = ta.sinusoid(x, *(p[k] for k in "absc"))
    ex2 = ta.extract_extrema(ta.CalibratedTrace(x, 10 * np.log10(model), 0.2))
    for k in "absc":
        assert ex2.fit_params[k] == pytest.approx(p[k], abs=1e-9)


def test_fit_failure_falls_back(monkeypatch):
    def boom(x, y):
        raise RuntimeError("no convergence")

    monkeypatch.setattr(ta, "fit_sinusoid", boom)
    noise = np.linspace(-0.5, 1.0, 20)
    ex = ta.extract_extrema(ta.CalibratedTrace(np.arange(20.0), noise, 0.2))
    assert not ex.fit_ok and ex.fit_params is None
    assert (ex.min_db, ex.max_db) == (-0.5, 1.0)


def test_trace_roundtrip(tmp_path):
    tr = _trace(1 + 0.2 * np.cos(2 * np.linspace(0, 3, 64)), detuning_mhz=-50)
    for delim in (",", "\t"):
        path = tmp_path / "t.csv"
        ta.write_trace(path, tr, delimiter=delim)
        back = ta.read_trace(path)
        np.testing.assert_array_equal(back.power_dbm, tr.power_dbm)
        np.testing.assert_array_equal(back.sweep, tr.sweep)
        assert (back.rbw, back.center_freq, back.n_averages) == (tr.rbw, tr.center_freq, 1)
        assert back.meta["detuning_mhz"] == "-50"


def test_missing_metadata(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("# rbw_hz = 1e5\nsweep,power_dBm\n" + "\n".join(f"{i},-80" for i in range(20)))
    with pytest.raises(ValueError, match="center_freq_hz"):
        ta.read_trace(p)


def test_summary_rows(tmp_path):
    x = np.linspace(0, math.pi, 120)
    # 0.8 dB contrast around a slightly noisy level
    lo, hi = 10 ** (-0.1 / 10), 10 ** (0.7 / 10)
    a, b = (lo + hi) / 2, (hi - lo) / 2
    ta.write_trace(tmp_path / "d1.csv", _trace(a + b * np.cos(2 * x + 0.3), x, detuning_mhz=-200))
    ta.write_trace(tmp_path / "d2.csv", _trace(a + b * np.cos(2 * x), x, rbw=3e5, detuning_mhz=-150))
    shot = ta.ShotReference(-80.0, 0.2, rbw=1e5, center_freq=1.4e6)
    rows = ta.summarize(sorted(tmp_path.glob("*.csv")), shot)
    assert [r["detuning_MHz"] for r in rows] == [-200.0, -150.0]
    assert rows[0]["contrast_dB"] == pytest.approx(0.8, abs=1e-6)
    assert rows[0]["error"] == ""
    assert "MetadataMismatch" in rows[1]["error"]
    text = ta.format_summary(rows)
    assert text.splitlines()[0].startswith("detuning_MHz,min_dB,max_dB,contrast_dB,fit_rms")
