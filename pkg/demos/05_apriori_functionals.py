"""Assembling X = Y + Z from block norms of a run, and the boundedness ratio."""

from viscolab import SimConfig, assemble_report, boundedness_report, run_simulation

# on the default box every block sits below R0 = 2, so Z vanishes and X = Y
cfg = SimConfig(dt=0.02, T=4.0, output_every=20, seed=1)
res = run_simulation(cfg)
rep = assemble_report(res.series, cfg.s, cfg.r, cfg.threshold, cfg.ps, cfg.dim, res.residuals)

print("t      Y        Z_p2     X_p2")
for i in range(0, len(rep.times), 2):
    print(f"{rep.times[i]:4.1f}  {rep.Y[i]:.5f}  {rep.Z[cfg.p2][i]:.5f}  {rep.X[cfg.p2][i]:.5f}")

for v in boundedness_report(rep, cfg.lambda1, p2=cfg.p2).values():
    print(v.describe())
