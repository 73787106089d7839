"""Tests for the command-line surface."""

import json
import os

import numpy as np
import pytest

import corowm as cw
from corowm.cli import main, read_state, write_state
from corowm.modulation import ModulationPoint, ModulationTrack


def test_state_round_trip(tmp_path):
    g = cw.make_grid(16.0, 256, [(0.0, 1.0)])
    s = cw.two_bubble(cw.BubbleParams(0.1, 1.0), g)
    path = str(tmp_path / "state.csv")
    write_state(s, path)
    back = read_state(path)
    assert np.array_equal(back.psi.values, s.psi.values)
    assert np.array_equal(back.psi_t.values, s.psi_t.values)
    assert back.degree == s.degree
    assert back.energy_tail == s.energy_tail
    assert back.grid == g


def test_make_data_and_distance(tmp_path, capsys):
    out = str(tmp_path / "bu.csv")
    rc = main(["make-data", "--kind", "blowup_s5", "--tn", "0.12", "--out", out])
    assert rc == 0
    info = json.loads(capsys.readouterr().out)
    assert abs(info["energy"] - 8 * np.pi) < 1e-8
    assert os.path.exists(out) and os.path.exists(out + ".meta.json")

    rc = main(["distance", "--state", out])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"d", "d_plus", "d_minus", "lambda", "mu", "iota",
                        "residual"}
    # the data sits near the two-bubble family at scale ell(t_n)
    ell, _ = cw.ell_of_t(0.12)
    assert abs(doc["lambda"] - ell) < 0.2 * ell
    assert abs(doc["mu"] - 1.0) < 0.2


def _write_synthetic_track(path, C=2.0, T_plus=0.1):
    from scipy.optimize import brentq
    track = ModulationTrack()
    for t in np.linspace(0.0, 0.08, 40):
        target = C * (T_plus - t) ** 2
        lam = brentq(lambda x: x * (-np.log(x)) - target, 1e-300,
                     np.exp(-1.0), rtol=8.9e-16)
        d = 0.02 if t < 0.04 else 0.005  # crosses below eps0/2 = 0.0075
        pt = ModulationPoint(t, lam, 1.0, np.nan, np.nan, 0.0, 0.0, True)
        track.append(t, pt)
        track.rows[-1] = track.rows[-1][:5] + (d,) + track.rows[-1][6:]
    track.write_csv(path)


def test_fit_rate_cli(tmp_path, capsys):
    path = str(tmp_path / "track.csv")
    _write_synthetic_track(path)
    rc = main(["fit-rate", "--track", path, "--window", "0.0", "0.08"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert abs(doc["C"] - 2.0) < 1e-6
    assert abs(doc["T_plus"] - 0.1) < 1e-8


def test_split_intervals_cli(tmp_path, capsys):
    path = str(tmp_path / "track.csv")
    _write_synthetic_track(path)
    rc = main(["split-intervals", "--track", path, "--eps0", "0.015"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["bad"] and doc["good"]


def test_simulate_cli(tmp_path, capsys):
    cfg = {"kind": "small_bump", "params": {"amplitude": 0.2, "width": 1.5},
           "grid": {"r_max": 16.0, "n_base": 256, "patches": []},
           "solver": {"cfl": 0.4, "t_end": 0.1, "output_dt": 0.1}}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out_dir = str(tmp_path / "run")
    rc = main(["simulate", "--config", str(cfg_path), "--out", out_dir])
    assert rc == 0
    assert os.path.exists(os.path.join(out_dir, "manifest.json"))
    assert os.path.exists(os.path.join(out_dir, "events.json"))


def test_cli_requires_command(capsys):
    with pytest.raises(SystemExit):
        main([])
