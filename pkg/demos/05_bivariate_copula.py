"""Bivariate gamma-copula surrogate for the saturating compartment model.

Both pools are observed at a single time with different noise processes.
The per-output shifted gammas capture each marginal's skewness; a
Gaussian copula, with its parameter looked up from a precomputed
correlation map, reproduces the cross-correlation.  The joint density is
exported on a grid together with simulated points for comparison.
"""

import csv
import time
from pathlib import Path

import numpy as np

import momentode as mo
from momentode.distributions import moments_of
from momentode.models import output_derivs
from momentode.surrogates import build_copula_table, propagate

t0 = time.perf_counter()
table = build_copula_table(n_omega=11, n_rho=21, quad_n=200, forward_n=41)
print(f"correlation-map table built in {time.perf_counter() - t0:.1f}s "
      f"({table.values.shape} nodes)")

study = mo.get_study("nonlinear_two_pool_single", copula_table=table)
problem = study.problem

im = moments_of(problem.template)
D = output_derivs(problem.model, problem.plan, list(im.mean),
                  active=problem.template.random_indices())
om = propagate(im, D)
rho = om.Sigma[0, 1] / np.sqrt(om.Sigma[0, 0] * om.Sigma[1, 1])
print(f"\npropagated moments at t=10: mu={np.round(om.mu, 4)}, "
      f"sd={np.round(np.sqrt(np.diag(om.Sigma)), 4)}")
print(f"marginal skewnesses {np.round(np.asarray(om.omega, float), 3)}, "
      f"output correlation {rho:.3f}")

surs = mo.per_time_surrogates(problem, study.xi_true())
joint = surs[0]
print(f"copula parameter {joint.rho_tilde:.4f} (vs raw target {rho:.4f})")

ss = mo.sample_outputs(problem, study.xi_true(), 100_000, seed=3)
for j in range(2):
    d, p = mo.ks_statistic(ss.values[:10_000, 0, j], joint.marginals[j].cdf)
    print(f"marginal {j+1}: KS vs 1e4 simulations D={d:.4f} p={p:.3f}")

sd = np.sqrt(np.diag(om.Sigma))
y1 = np.linspace(om.mu[0] - 4 * sd[0], om.mu[0] + 4 * sd[0], 101)
y2 = np.linspace(om.mu[1] - 4 * sd[1], om.mu[1] + 4 * sd[1], 101)
g1, g2 = np.meshgrid(y1, y2, indexing="ij")
pdf = np.exp(joint.logpdf(np.column_stack([g1.ravel(), g2.ravel()])))

out = Path(__file__).with_name("bivariate_density.csv")
with open(out, "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["y1", "y2", "pdf"])
    w.writerows(zip(g1.ravel(), g2.ravel(), pdf))
print(f"\njoint density grid written to {out}")
