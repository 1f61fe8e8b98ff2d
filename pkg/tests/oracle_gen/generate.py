"""Regenerate the frozen reference values in ``tests/oracles.py``.

Independent of the package: everything is computed with mpmath at 40 digits
from closed forms or direct quadrature.  Run: ``python tests/oracle_gen/generate.py``.
"""
import mpmath as mp

mp.mp.dps = 40


def root(f, x0):
    return mp.findroot(f, x0, tol=mp.mpf(10) ** -35)


def pareto_sb(tau, F):
    # E^sb[F(W)] for Pareto(tau, w_min = 1)
    a = tau - 1
    mean = a / (a - 1)
    return mp.quad(lambda w: w * F(w) * a * w ** (-tau), [1, 2, 10, 100, mp.inf]) / mean


def pareto_e(tau, F):
    a = tau - 1
    return mp.quad(lambda w: F(w) * a * w ** (-tau), [1, 2, 10, 100, mp.inf])


def regress_slope(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum((x - mx) ** 2 for x in xs)


def geom(lo, hi, n):
    return [mp.mpf(lo) * (mp.mpf(hi) / mp.mpf(lo)) ** (mp.mpf(i) / (n - 1)) for i in range(n)]


out = {}

m = root(lambda x: x - 2 * mp.tanh(x), 2)
out["ISING_THETA2_M"] = m
out["ISING_THETA2_PHI"] = mp.tanh(m)
out["ISING_THETA2_PRESSURE_C_SQRT5"] = mp.sqrt(5) / 2 - m**2 / 4 + mp.log(mp.cosh(m))
out["ISING_THETA1_H01_M"] = root(lambda x: x - mp.tanh(x + mp.mpf("0.1")), 0.6)

# uniform spins, W = 1, theta = 4: m = 4 (coth m - 1/m)
mu = root(lambda x: x - 4 * (mp.coth(x) - 1 / x), 3)
out["UNIFORM_THETA4_M"] = mu
out["UNIFORM_THETA4_C10_PRESSURE"] = 5 - mu**2 / 8 + mp.log(mp.sinh(mu) / mu)

# Ising spins, Pareto(3.5) weights
out["ISING_P35_PHI_0p1"] = pareto_sb(3.5, lambda w: mp.tanh(w * mp.mpf("0.1")))
out["ISING_P35_PHI_1"] = pareto_sb(3.5, lambda w: mp.tanh(w))
theta = mp.mpf("1.2") / 3  # theta_c = E[W]/E[W^2] = 1/3
mp35 = root(lambda x: x - theta * pareto_sb(3.5, lambda w: mp.tanh(w * x)), 0.3)
out["ISING_P35_THETA0p4_M"] = mp35
out["ISING_P35_THETA0p4_C1_PRESSURE"] = (
    mp.mpf("0.5") * (mp.mpf(5) / 3)
    - mp.mpf("0.5") * (mp.mpf(5) / 3) * mp35**2 / theta
    + pareto_e(3.5, lambda w: mp.log(mp.cosh(w * mp35)))
)

# log-log slopes for the Ising / W = 1 model on the default window
eps = geom("1e-5", "1e-2", 12)
ms = [root(lambda x, e=e: x - (1 + e) * mp.tanh(x), mp.sqrt(3 * e)) for e in eps]
out["ISING_BETA_SLOPE_DEFAULT_WINDOW"] = regress_slope([mp.log(e) for e in eps], [mp.log(v) for v in ms])
hs = geom("1e-5", "1e-2", 12)
ms = [root(lambda x, h=h: x - mp.tanh(x + h), mp.cbrt(3 * h)) for h in hs]
out["ISING_DELTA_DEFAULT_WINDOW"] = 1 / regress_slope([mp.log(h) for h in hs], [mp.log(v) for v in ms])

# central differences of phi at step 1e-5 with Pareto(4) weights (E^sb[W] = 2)
d = mp.mpf("1e-5")
langevin = lambda x: mp.coth(x) - 1 / x  # noqa: E731
for label, f in (("ISING", mp.tanh), ("UNIFORM", langevin)):
    out[f"{label}_P4_PHI_CENTRAL_DIFF_1e5"] = (
        pareto_sb(4, lambda w: f(w * d)) - pareto_sb(4, lambda w: f(-w * d))
    ) / (2 * d)

out["STEP_KAPPA6"] = -4 * (20 + 7 * mp.sqrt(10)) / 8505
out["STEP_NORMALIZER"] = 8 * (10 - 3 * mp.sqrt(10))
out["PSI2_ISING_LOG2"] = mp.log(mp.mpf(13) / 12) / 2
out["ASINH_1"] = mp.asinh(1)

print('"""Frozen reference values from tests/oracle_gen/generate.py (mpmath, 40 digits)."""')
print()
for k, v in out.items():
    print(f"{k} = {mp.nstr(v, 20)}")
