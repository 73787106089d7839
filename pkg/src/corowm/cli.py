"""Command-line surface: simulate, make-data, distance, fit-rate, split-intervals."""

import argparse
import json
import sys

import numpy as np

from .grid import FieldSample, RadialGrid, WaveMapState
from .functionals import distance
from .modulation import ModulationTrack, split_intervals
from .experiments import ExperimentConfig, fit_blowup_rate, make_blowup_data, \
    run_experiment


def write_state(state, path, extra=None):
    """Dump a state as CSV `r,psi,psi_t` plus a `.meta.json` sidecar."""
    g = state.grid
    with open(path, "w") as fh:
        fh.write("r,psi,psi_t\n")
        for r, p, pt in zip(g.r, state.psi.values, state.psi_t.values):
            fh.write(f"{r:.17g},{p:.17g},{pt:.17g}\n")
    meta = {"degree": state.degree, "time": state.time,
            "energy_tail": state.energy_tail,
            "grid": {"r_max": g.r_max, "base_spacing": g.base_spacing,
                     "segments": [list(s) for s in g.segments]}}
    if extra:
        meta.update(extra)
    with open(path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=1)


def read_state(path):
    with open(path + ".meta.json") as fh:
        meta = json.load(fh)
    gd = meta["grid"]
    grid = RadialGrid(gd["r_max"], gd["base_spacing"],
                      [tuple(s) for s in gd["segments"]])
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return WaveMapState(FieldSample(grid, data[:, 1], "angle"),
                        FieldSample(grid, data[:, 2], "velocity"),
                        time=meta["time"], degree=meta["degree"],
                        energy_tail=meta["energy_tail"])


def _default_blowup_grid(t_n):
    from .experiments import ell_of_t
    from .grid import make_deep_grid
    ell, _ = ell_of_t(t_n)
    levels = max(1, int(np.ceil(np.log2(1.0 / (32.0 * ell)))) + 3)
    return make_deep_grid(32.0, 2048, min(levels, 12))


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="corowm",
        description="Numerical laboratory for corotational wave maps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("make-data", help="construct initial data")
    p.add_argument("--kind", required=True, choices=["blowup_s5"])
    p.add_argument("--tn", type=float, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("distance", help="distance of a state to the two-bubble family")
    p.add_argument("--state", required=True)

    p = sub.add_parser("fit-rate", help="fit the collapse rate on a track window")
    p.add_argument("--track", required=True)
    p.add_argument("--window", type=float, nargs=2, required=True)

    p = sub.add_parser("split-intervals", help="hysteresis split of a distance series")
    p.add_argument("--track", required=True)
    p.add_argument("--eps0", type=float, required=True)

    args = parser.parse_args(argv)

    if args.command == "simulate":
        cfg = ExperimentConfig.from_json(args.config)
        cfg.out_dir = args.out
        run_experiment(cfg)
        print(f"artifacts written to {args.out}")
    elif args.command == "make-data":
        grid = _default_blowup_grid(args.tn)
        state, info = make_blowup_data(args.tn, grid, details=True)
        write_state(state, args.out, extra={"t_n": args.tn, **info})
        print(json.dumps(info))
    elif args.command == "distance":
        state = read_state(args.state)
        print(distance(state).to_json())
    elif args.command == "fit-rate":
        track = ModulationTrack.read_csv(args.track)
        fit = fit_blowup_rate(track, tuple(args.window))
        print(fit.to_json())
    elif args.command == "split-intervals":
        track = ModulationTrack.read_csv(args.track)
        ts = track.column("t")
        ds = track.column("d")
        ok = np.isfinite(ds)
        bad, good = split_intervals(ts[ok], ds[ok], args.eps0)
        print(json.dumps({"bad": [list(iv) for iv in bad],
                          "good": [list(iv) for iv in good]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
