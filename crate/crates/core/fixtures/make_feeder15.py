"""Writes feeder15.json: a 15-bus radial test feeder with a 144-step
(10-minute) residential baseline.

Layout (bus ids):

    0 - 1 - 2 - 3 - 4            trunk
            |       |
            |       5 - 6 - 7 - 8    long, weak branch
            9 - 10 - 11 - 12         PV lateral
    1 - 13 - 14                      short, stiff spur

Run from this directory: python3 make_feeder15.py
"""

import json
import math

PARAMS = {
    "base_kva": 100.0,
    "v_root_pu": 1.03,
    "peak_kw": 6.0,
    "power_factor_ratio": 0.3,  # kvar per kW of baseline load
}

# (from, to, r_pu, x_pu, s_max_pu)
LINES = [
    (0, 1, 0.0030, 0.0025, 2.5),
    (1, 2, 0.0030, 0.0025, 2.5),
    (2, 3, 0.0040, 0.0030, 2.0),
    (3, 4, 0.0040, 0.0030, 2.0),
    (4, 5, 0.0700, 0.0450, 1.2),
    (5, 6, 0.0700, 0.0450, 1.2),
    (6, 7, 0.0700, 0.0450, 1.2),
    (7, 8, 0.0700, 0.0450, 1.2),
    (2, 9, 0.0050, 0.0035, 2.0),
    (9, 10, 0.0050, 0.0035, 2.0),
    (10, 11, 0.0050, 0.0035, 2.0),
    (11, 12, 0.0050, 0.0035, 2.0),
    (1, 13, 0.0020, 0.0015, 2.0),
    (13, 14, 0.0020, 0.0015, 2.0),
]

STEPS = 144


def shape(hour):
    """Residential demand in per-unit of peak: night floor, morning bump,
    evening peak around 19:00."""
    morning = 0.35 * math.exp(-((hour - 7.5) / 1.5) ** 2)
    evening = 0.65 * math.exp(-((hour - 19.0) / 2.5) ** 2)
    return 0.3 + morning + evening


def main():
    n = 15
    d = []
    e = []
    for bus in range(n):
        if bus == 0:
            row = [0.0] * STEPS
        else:
            # mild, deterministic bus-to-bus diversity
            scale = 1.0 + 0.1 * math.sin(1.7 * bus)
            row = [round(PARAMS["peak_kw"] * scale * shape(24.0 * t / STEPS), 6) for t in range(STEPS)]
        d.append(row)
        e.append([round(PARAMS["power_factor_ratio"] * v, 6) for v in row])
    doc = {
        "base_kva": PARAMS["base_kva"],
        "v_root_pu": PARAMS["v_root_pu"],
        "v_min_pu": 0.95,
        "v_max_pu": 1.05,
        "buses": [{"id": b} for b in range(n)],
        "lines": [
            {"from": f, "to": t, "r_pu": r, "x_pu": x, "s_max_pu": s}
            for (f, t, r, x, s) in LINES
        ],
        "baseline": {"T": STEPS, "d_kw": d, "e_kvar": e},
    }
    with open("feeder15.json", "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


if __name__ == "__main__":
    main()
