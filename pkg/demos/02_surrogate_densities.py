"""Normal vs shifted-gamma surrogates under three input shapes.

The output of the growth model at t = 10 is approximated with a
two-moment normal and a three-moment shifted gamma for (a) independent
normal inputs, (b) correlated rate/capacity, and (c) skewed gamma inputs.
Kolmogorov-Smirnov tests against fresh simulations show where each
surrogate breaks down as the sample size grows; a plot-ready CSV of the
three densities is written next to this script.
"""

import csv
from pathlib import Path

import numpy as np

import momentode as mo
from momentode.distributions import (
    CorrPair, DistSpec, Normal, ShiftedGamma, moments_of,
)
from momentode.inference import SnapshotProblem
from momentode.models import Logistic, ObservationPlan, ObservedOutput, output_derivs
from momentode.surrogates import fit_normal, fit_shifted_gamma, propagate

SETTINGS = {
    "independent": dict(
        comps=[("r0", Normal(50.0, 3.0)), ("lam", Normal(1.0, 0.05)),
               ("R", Normal(300.0, 20.0))], corr=()),
    "correlated": dict(
        comps=[("r0", Normal(50.0, 3.0)), ("lam", Normal(1.0, 0.05)),
               ("R", Normal(300.0, 20.0))],
        corr=(CorrPair("lam", "R", 0.6),)),
    "skewed": dict(
        comps=[("r0", ShiftedGamma(50.0, 3.0, 0.2)),
               ("lam", ShiftedGamma(1.0, 0.05, 1.0)),
               ("R", ShiftedGamma(300.0, 20.0, -1.0))], corr=()),
}

rows = []
print("output r(10); KS p-values of fresh samples against each surrogate\n")
print(" setting     | out.skew |   N=1e3 normal  gamma |   N=1e5 normal  gamma")
print("-" * 75)
for name, cfg in SETTINGS.items():
    spec = DistSpec(components=tuple(cfg["comps"]), correlation=cfg["corr"])
    plan = ObservationPlan(times=(10.0,), outputs=(ObservedOutput(0),))
    pr = SnapshotProblem(Logistic(), plan, spec, "gamma")
    im = moments_of(spec)
    D = output_derivs(pr.model, plan, list(im.mean), active=spec.random_indices())
    om = propagate(im, D)
    gam = fit_shifted_gamma(float(om.mu[0]), float(om.Sigma[0, 0]), float(om.omega[0]))
    nor = fit_normal(om)

    small = mo.sample_outputs(pr, None, 1000, seed=1).values[:, 0, 0]
    big = mo.sample_outputs(pr, None, 100_000, seed=2).values[:, 0, 0]
    p = {(n, k): mo.ks_statistic(s, f.cdf)[1]
         for n, s in (("1e3", small), ("1e5", big))
         for k, f in (("normal", nor), ("gamma", gam))}
    print(f" {name:11s} | {om.omega[0]:+8.3f} |"
          f"   {p[('1e3','normal')]:13.3f} {p[('1e3','gamma')]:6.3f} |"
          f"   {p[('1e5','normal')]:13.2e} {p[('1e5','gamma')]:.2e}")

    ys = np.linspace(om.mu[0] - 4 * np.sqrt(om.Sigma[0, 0]),
                     om.mu[0] + 4 * np.sqrt(om.Sigma[0, 0]), 301)
    for y, pn, pg in zip(ys, np.exp(nor.logpdf(ys)), np.exp(gam.logpdf(ys))):
        rows.append([name, float(y), float(pn), float(pg)])

out = Path(__file__).with_name("surrogate_densities.csv")
with open(out, "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["setting", "y", "pdf_normal", "pdf_gamma"])
    w.writerows(rows)
print(f"\ndensity curves written to {out}")
print("note how the strongly skewed setting overwhelms the normal surrogate "
      "at large N while the gamma surrogate holds on far longer")
