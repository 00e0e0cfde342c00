"""Smoke test for the tlssc Python extension.

Build and install first, e.g. ``pip install --no-build-isolation ./crates/py``.
"""

import math
import tempfile
from pathlib import Path

import tlssc


def check(name, cond, detail=""):
    print(f"{'ok  ' if cond else 'FAIL'} {name} {detail}")
    if not cond:
        raise SystemExit(1)


def main():
    v45 = 45 * tlssc.MPH_TO_MPS
    stop = tlssc.FvdmParams.reference("stopping", v45)
    follow = tlssc.FvdmParams.reference("standard-follow-4", v45)
    check("params", abs(stop.alpha - 0.7510) < 1e-12, repr(stop))
    check("equilibrium", abs(follow.optimal_velocity(follow.equilibrium_spacing(15.0)) - 15.0) < 1e-9)

    sim = tlssc.simulate(stop, v0=0.0, horizon=60.0, leader="stop", stop_line=40.0)
    x_end = sim["series"]["position"][-1]
    check("simulate", sim["collision"] is None and x_end <= 40.0, f"x_end={x_end:.3f}")

    x, f, evals = tlssc.minimize(lambda p: (p[0] - 0.3) ** 2 + (p[1] + 0.2) ** 2, [(-1, 1), (-1, 1)], 300)
    check("minimize", f < 1e-6 and evals <= 310, f"x={x} evals={evals}")

    check("mode", tlssc.decide_mode(True, 90.0) == "Following")
    check("mode exclusive", tlssc.decide_mode(True, 90.0, inclusive=False) == "PermissionStopping")
    replay = tlssc.threshold_replay(150.0)
    check("threshold", replay["decision"]["mode"] == "PermissionStopping" and not replay["crossed_stop_line"])

    seg = tlssc.synth_oscillation(follow, noise_std=0.1, seed=3)
    with tempfile.TemporaryDirectory() as d:
        seg.write(Path(d) / "a.csv")
        tlssc.synth_stopping(stop, noise_std=0.1, seed=4).write(Path(d) / "b.csv")
        segs = tlssc.read_segments(d)
    check("round trip", len(segs) == 2 and segs[0].speeds() == seg.speeds())

    smoothed = [s.smooth() for s in segs]
    rows = tlssc.assess(smoothed)
    check("assess", [r.category for r in rows][-1] == "All behaviors" and rows[-1].segment_count == 2)

    clean = tlssc.synth_oscillation(follow)
    result = tlssc.calibrate([clean], max_evals=400)
    check("calibrate", result.rmse < 0.1, repr(result))
    table = tlssc.render_report([result], rows)
    check("report", table.startswith("Behavior,alpha") and "All behaviors" in table)

    try:
        tlssc.FvdmParams(-1.0, 0.1, 1.0, 1.0, 10.0)
    except tlssc.TlsscError as e:
        check("error", str(e).startswith("invalid_input"), str(e))
    else:
        check("error", False)

    check("moving average", tlssc.moving_average([0.0, 1.0, 2.0, 3.0], 2) == [0.0, 1.0, 2.0, 3.0])
    check("haversine", math.isclose(tlssc.haversine(0, 0, 0, 1), 111195.08, rel_tol=1e-5))
    print("smoke test passed")


if __name__ == "__main__":
    main()
