"""Bare vs guided SGD on the 1-d regression task, and why they coincide.

The network is a (1, 12, 10, 8, 1) tanh MLP fit by full-batch MSE to
sin(2x) + 0.5 cos(5x) + 0.3 sin(10x) + 0.1 x^2 on [-2, 2].

The analysis returns no targets here.  The MSE is bounded along the
hidden-weight directions (tanh saturates), so exp(-L/g) is not
integrable over all of parameter space.  Local importance sampling then
never yields a reliable grid of Z(g) values, and without targets the
guided run is the bare run.  Supplying targets by hand shows the
guidance itself works.

Run: python3 demos/regression_benchmark.py   (about 30 s)
"""
import numpy as np

from surge import landscape as ls
from surge import partition_estimator as pe
from surge.optimizer import make_base, train
from surge.series_core import TargetSet

model = ls.MLP((1, 12, 10, 8, 1))
obj = ls.mse_objective(model, ls.synthetic_1d_dataset())
print(f"{model.n_params} parameters")

print("\nseed  targets  bare final  guided final  hand-target final")
for seed in range(5):
    th0 = model.init(seed)
    report = pe.analyze(obj, th0, pe.AnalysisConfig(seed=seed, samples_per_g=1024))
    bare = train(obj, th0, 500, make_base("sgd", 0.05), guided=False)
    guided = train(obj, th0, 500, make_base("sgd", 0.05), lam=1.0, targets=report.targets)
    L0 = obj.value(th0)
    hand = train(obj, th0, 500, make_base("sgd", 0.05), lam=1.0, targets=TargetSet((0.5 * L0,), L0))
    print(f"{seed:4d}  {len(report.targets):7d}  {bare.final_loss:10.5f}  {guided.final_loss:12.5f}"
          f"  {hand.final_loss:17.5f}")
    if seed == 0:
        reasons = sorted({e.get("error", "quick test failed") for e in report.range_search if e["score"] is None})
        print("      range search:", "; ".join(r[:60] for r in reasons[:3]))
