"""Independent reference values for the distill-core test suite.

Re-implements the closed-form thermodynamics, schedules and metrics in plain
Python (mpmath for the root solves) and writes
crates/core/tests/fixtures/core.json. Run from the repository root:

    python3 oracles/core_fixtures.py
"""

import json
import math
import pathlib
import random
import tomli as tomllib

import mpmath as mp

mp.mp.dps = 40
ROOT = pathlib.Path(__file__).resolve().parent.parent
cfg = tomllib.loads((ROOT / "config" / "default.toml").read_text())
fluids = tomllib.loads((ROOT / "config" / "reference_fluids.toml").read_text())
sysc = cfg["system"]
H, L = sysc["heavy"]["antoine"], sysc["light"]["antoine"]
W12, W21 = sysc["wilson"]["lambda_12"], sysc["wilson"]["lambda_21"]


def psat(c, t):
    return mp.power(10, c["a"] - c["b"] / (t + c["c"]))


def wilson(x1, l12, l21):
    x2 = 1 - x1
    d1 = x1 + l12 * x2
    d2 = x2 + l21 * x1
    br = l12 / d1 - l21 / d2
    return mp.e ** (-mp.log(d1) + x2 * br), mp.e ** (-mp.log(d2) - x1 * br)


def raoult(x1, t, p):
    g1, g2 = wilson(mp.mpf(x1), W12, W21)
    return g1 * x1 * psat(H, t) / p, g2 * (1 - x1) * psat(L, t) / p


def tb(c, p):
    return c["b"] / (c["a"] - mp.log10(p)) - c["c"]


def bubble(x1, p):
    lo, hi = tb(L, p) - 5, tb(H, p) + 5
    for _ in range(200):
        mid = (lo + hi) / 2
        if sum(raoult(x1, mid, p)) - 1 < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def dew(y1, p):
    y1 = mp.mpf(y1)

    def closure(t):
        # successive substitution for the incipient liquid at fixed t
        x1 = y1
        for _ in range(200):
            g1, g2 = wilson(x1, W12, W21)
            a = y1 * p / (g1 * psat(H, t))
            b = (1 - y1) * p / (g2 * psat(L, t))
            x1_new = a / (a + b)
            if abs(x1_new - x1) < mp.mpf("1e-35"):
                break
            x1 = x1_new
        return a + b - 1

    lo, hi = tb(L, p) - 5, tb(H, p) + 5
    for _ in range(200):
        mid = (lo + hi) / 2
        # closure falls with temperature
        if closure(mid) > 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


out = {}

w = fluids["water"]["antoine"]
out["water_psat_373_15"] = float(psat(w, mp.mpf("373.15")))

g1, g2 = wilson(mp.mpf("0.5"), mp.mpf("0.7"), mp.mpf("1.2"))
out["wilson_07_12_half"] = [float(g1), float(g2)]

p0 = mp.mpf("101.325")
t_half = bubble(0.5, p0)
y = raoult(0.5, t_half, p0)
out["bubble_half_atm"] = {"t": float(t_half), "y_heavy": float(y[0]), "y_light": float(y[1])}
out["pure_boiling_atm"] = {"heavy": float(tb(H, p0)), "light": float(tb(L, p0))}

grid = []
for i in range(11):
    z = i / 10
    grid.append({"z": z, "bubble": float(bubble(z, p0)), "dew": float(dew(z, p0))})
out["bubble_dew_grid_atm"] = grid

rng = random.Random(7)
cases = []
for _ in range(25):
    x1 = rng.uniform(0.0, 1.0)
    t = rng.uniform(330.0, 400.0)
    p = rng.uniform(60.0, 140.0)
    y1 = rng.uniform(0.0, 1.0)
    e1, e2 = raoult(x1, t, p)
    r = (y1 - e1) ** 2 + ((1 - y1) - e2) ** 2
    cases.append({"x": x1, "t": t, "p": p, "y": y1, "residual": float(r)})
out["vle_residual_random"] = cases

R, xn, xd = 0.81, 0.5, 0.964
out["mccabe_table_means"] = {"r": R, "x_n": xn, "x_d": xd, "y_n": R / (R + 1) * xn + xd / (R + 1)}

out["lambda_d_epoch0"] = 1 / (1 + math.exp(6.0))
out["lambda_p_epoch1000"] = 1 - 1 / (1 + math.exp(-0.02 * 700))

# Adam on f(w) = w0^2 + 3 w1^2 from (1, -2), lr 0.1, three steps.
b1, b2, eps, lr = 0.9, 0.999, 1e-8, 0.1
wv, m, v = [1.0, -2.0], [0.0, 0.0], [0.0, 0.0]
trace = []
for k in range(1, 4):
    g = [2 * wv[0], 6 * wv[1]]
    for i in range(2):
        m[i] = b1 * m[i] + (1 - b1) * g[i]
        v[i] = b2 * v[i] + (1 - b2) * g[i] ** 2
        mh = m[i] / (1 - b1**k)
        vh = v[i] / (1 - b2**k)
        wv[i] -= lr * mh / (math.sqrt(vh) + eps)
    trace.append(list(wv))
out["adam_quadratic_trace"] = trace

pred = [0.10, 0.22, 0.29, 0.41]
targ = [0.12, 0.20, 0.30, 0.40]
res = [p - t for p, t in zip(pred, targ)]
mse = sum(r * r for r in res) / 4
mt = sum(targ) / 4
r2 = 1 - sum(r * r for r in res) / sum((t - mt) ** 2 for t in targ)
mr = sum(res) / 4
out["metrics_four_points"] = {
    "pred": pred,
    "target": targ,
    "mse": mse,
    "rmse": math.sqrt(mse),
    "mae": sum(abs(r) for r in res) / 4,
    "r2": r2,
    "residual_std": math.sqrt(sum((r - mr) ** 2 for r in res) / 4),
}

n = 961
n_train = math.floor(0.70 * n)
n_val = math.floor(0.15 * n)
out["split_961"] = [n_train, n_val, n - n_train - n_val]

path = ROOT / "crates" / "core" / "tests" / "fixtures" / "core.json"
path.write_text(json.dumps(out, indent=2) + "\n")
print(f"wrote {path}")
