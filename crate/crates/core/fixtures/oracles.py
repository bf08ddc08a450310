"""Regenerate manifest.json: oracle values for the built-in fixtures.

Every value here is computed without the Rust code paths it checks:
asymptotic cumulants come from derivatives of the log Perron root of the
tilted kernel (high-precision arithmetic), mixing bounds from the second
eigenvalue of reversible kernels, and estimator constants from closed forms.

    python3 oracles.py > manifest.json
"""
import json

import mpmath as mp

mp.mp.dps = 60


def perron_log(tilted):
    """log of the eigenvalue of largest real part."""
    ev = mp.eig(mp.matrix(tilted))[0]
    return mp.log(max(ev, key=lambda z: mp.re(z)).real)


def ct_perron(tilted):
    ev = mp.eig(mp.matrix(tilted))[0]
    return max(ev, key=lambda z: mp.re(z)).real


def derivs(f, h=mp.mpf("1e-12")):
    """First three derivatives at 0 by central differences in 60 digits."""
    f0, fp, fm, f2p, f2m = f(0), f(h), f(-h), f(2 * h), f(-2 * h)
    d1 = (fp - fm) / (2 * h)
    d2 = (fp - 2 * f0 + fm) / h**2
    d3 = (f2p - 2 * fp + 2 * fm - f2m) / (2 * h**3)
    return d1, d2, d3


def edge_mgf(p, mgf):
    """Tilted kernel P(x, y) E[exp(s inc(x, y))]."""
    n = len(p)
    return lambda s: [[p[i][j] * mgf(i, j, s) for j in range(n)] for i in range(n)]


def cumulants(p, mgf):
    tilt = edge_mgf(p, mgf)
    return derivs(lambda s: perron_log(tilt(s)))


def second_eigen_moduli(p):
    ev = sorted((abs(z) for z in mp.eig(mp.matrix(p))[0]), reverse=True)
    return ev[1]


def f(x):
    """Round away finite-difference noise, far below double precision."""
    x = mp.re(x)
    return 0.0 if abs(x) < mp.mpf("1e-20") else float(mp.nstr(x, 15))


def entry(name, kind, description, p, mgf, reversible_l2, extra=None):
    m1, s2, m3 = cumulants(p, mgf)
    oracles = {
        "mean": {"value": f(m1), "method": "derivative of the log Perron root of the tilted kernel"},
        "sigma2": {"value": f(s2), "method": "second derivative of the log Perron root of the tilted kernel"},
        "mu3": {"value": f(m3), "method": "third derivative of the log Perron root of the tilted kernel"},
    }
    if reversible_l2 is not None:
        oracles["mixing_bounds"] = {
            "value": [f(reversible_l2**t) for t in range(0, 6)],
            "method": "reversible kernel: |second eigenvalue|^t for t = 0..5",
        }
    oracles.update(extra or {})
    return {"name": name, "kind": kind, "description": description, "oracles": oracles}


def functional(xi):
    return lambda i, j, s: mp.exp(s * xi[j])


def gaussian_edges(means, var):
    return lambda i, j, s: mp.exp(s * means[j] + var * s * s / 2)


two = [[mp.mpf("0.7"), mp.mpf("0.3")], [mp.mpf("0.2"), mp.mpf("0.8")]]
half = [[mp.mpf("0.5")] * 2] * 2
pm = [[mp.mpf("0.6"), mp.mpf("0.4")], [mp.mpf("0.4"), mp.mpf("0.6")]]
pskew = mp.mpf("0.02")
skew = [[1 - pskew, pskew]] * 2
bd = [[mp.mpf(0)] * 5 for _ in range(5)]
for x in range(5):
    up = mp.mpf("0.3") if x < 4 else 0
    down = mp.mpf("0.2") if x > 0 else 0
    if x < 4:
        bd[x][x + 1] = up
    if x > 0:
        bd[x][x - 1] = down
    bd[x][x] = 1 - up - down

fixtures = [
    entry("two_state", "discrete", "two-state chain P = [[0.7, 0.3], [0.2, 0.8]], occupation of state 1",
          two, functional([0, 1]), second_eigen_moduli(two),
          {"bias_from_state_0": {"value": -0.6, "method": "geometric series (delta_0 - pi) P^k xi summed in closed form"}}),
    entry("iid_rademacher", "discrete", "i.i.d. +-1 steps with probability 1/2 each",
          half, functional([-1, 1]), 0),
    entry("lattice_pm1", "discrete", "symmetric two-state chain with steps -1 and +1, lattice of span 2",
          pm, functional([-1, 1]), second_eigen_moduli(pm)),
    entry("skewed_mixture", "discrete",
          "i.i.d. Bernoulli(0.02) occupation blurred by N(0, 0.01), centered edge means; strongly skewed",
          skew, gaussian_edges([-pskew, 1 - pskew], mp.mpf("0.01")), 0),
    entry("iid_gaussian", "discrete", "i.i.d. N(-0.5, 1) or N(0.5, 1) steps with probability 1/2 each",
          half, gaussian_edges([-mp.mpf("0.5"), mp.mpf("0.5")], 1), 0),
    entry("birth_death_5", "discrete",
          "reversible birth-death chain on 5 states (up 0.3, down 0.2), functional xi(x) = x",
          bd, functional(list(range(5))), second_eigen_moduli(bd)),
]

# Continuous time: cumulant rates are derivatives of the Perron root of G + s diag(xi).
g = [[-1, 1], [2, -2]]
ct_d = derivs(lambda s: ct_perron([[g[0][0], g[0][1]], [g[1][0], g[1][1] + s]]))
fixtures.append({
    "name": "ct_two_state",
    "kind": "continuous",
    "description": "generator G = [[-1, 1], [2, -2]], reward xi = (0, 1)",
    "oracles": {
        "pi": {"value": [2 / 3, 1 / 3], "method": "balance equations"},
        "mean": {"value": f(ct_d[0]), "method": "derivative of the Perron root of G + s diag(xi)"},
        "sigma2": {"value": f(ct_d[1]), "method": "second derivative of the Perron root of G + s diag(xi)"},
        "mu3": {"value": f(ct_d[2]), "method": "third derivative of the Perron root of G + s diag(xi)"},
        "skeleton_second_eigenvalue": {"value": f(mp.exp(-3)), "method": "exp of the nonzero eigenvalue of G"},
    },
})

grid = [(0.3, 0.2), (0.35, 0.25), (0.4, 0.3), (0.25, 0.3), (0.3, 0.4)]
alpha0, tau = [], []
for a, b in grid:
    a, b = mp.mpf(str(a)), mp.mpf(str(b))
    pi1 = a / (a + b)
    alpha0.append(f(pi1))
    tau.append(f(mp.sqrt(pi1 * (1 - pi1) * (2 - a - b) / (a + b))))
fixtures.append({
    "name": "mean_contrast_problem",
    "kind": "m_estimation",
    "description": "F = (1{y = 1} - alpha)^2 over five two-state kernels [[1-a, a], [b, 1-b]]",
    "oracles": {
        "alpha0": {"value": alpha0, "method": "stationary mass a / (a + b)"},
        "tau": {"value": tau, "method": "occupation variance pi0 pi1 (2 - a - b) / (a + b)"},
        "d_ball": {"value": 0.25, "method": "inf m / (4 (E W + 1)) with m = 2, W = 1"},
    },
})

print(json.dumps({"fixtures": fixtures}, indent=2))
