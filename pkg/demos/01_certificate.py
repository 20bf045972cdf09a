"""The two-feature reference task, end to end.

One invariant feature (coefficient 1, unit noise) and one spurious feature
that is almost a copy of the target in-distribution (alpha = 0.1) but heavily
corrupted out-of-distribution (alpha = 3).  We work out the population
moments, the fitted coefficients, the risks, and the certificate for adding
the spurious feature — the minimal case where chasing ID risk hurts OOD risk.

Run:  python demos/01_certificate.py
"""

import numpy as np

from misspec import (
    Environment,
    FeatureMask,
    TaskSpec,
    certify,
    population_moments,
    risk,
    solve_regression,
    sufficient_alpha_threshold,
)

task = TaskSpec(d_inv=1, d_spu=1, gamma=[1.0], sigma_inv_sq=1.0, sigma_spu_sq=[1.0])
env_id = Environment(alpha=[0.1], env_id="ID")
env_ood = Environment(alpha=[3.0], env_id="OOD")

inv_only = FeatureMask.all_invariant(task)
full = FeatureMask.full(task)

print("== population moments (full mask) ==")
m_id = population_moments(task, env_id, full)
m_ood = population_moments(task, env_ood, full)
print("M_ID  =", np.array2string(m_id.M, precision=4))
print("M_OOD =", np.array2string(m_ood.M, precision=4))
print("b     =", m_id.b, "   s_y =", m_id.s_y)
print("(only the spurious diagonal entry changes between environments)\n")

beta_id = solve_regression(m_id)
print("ID-fitted coefficients:", np.round(beta_id.beta, 6))
print("  invariant-only risk (both envs):", risk(solve_regression(
    population_moments(task, env_id, inv_only)), population_moments(task, env_id, inv_only)))
print("  full-mask risk on ID :", round(risk(beta_id, m_id), 6))
print("  full-mask risk on OOD:", round(risk(beta_id, m_ood), 6), "(same coefficients)\n")

print("== certificate for adding the spurious feature ==")
cert = certify(task, env_id, env_ood, inv_only, 0)
print(f"delta_id           = {cert.delta_id:+.6f}   (ID risk drops)")
print(f"delta_ood_transfer = {cert.delta_ood_transfer:+.6f}   (OOD risk of the deployed fit rises)")
print(f"delta_ood_oracle   = {cert.delta_ood_oracle:+.6f}   (an OOD-refit would still improve)")
print(f"q1={cert.q1:+.4f}  q2={cert.q2:+.4f}  q3={cert.q3:+.4f}  "
      f"(q3 > |q1+q2|: {cert.sufficient_condition_ok})")
print(f"alpha_gap={cert.alpha_gap:.4f}  threshold={cert.alpha_threshold:.4f}")
print("verdict:", cert.verdict.value, "\n")

print("== how much shift does it take? ==")
thr = sufficient_alpha_threshold(task, env_id, env_ood, inv_only, 0)
print(f"sufficient squared-scale gap: {thr:.4f}")
for a in (0.5, 0.9, 1.0099, 1.1, 1.5, 3.0):
    c = certify(task, env_id, Environment(alpha=[a], env_id="OOD"), inv_only, 0)
    print(f"  alpha_ood={a:<7} delta_ood_transfer={c.delta_ood_transfer:+.5f}  {c.verdict.value}")
