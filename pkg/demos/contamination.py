"""
Why a logistic cut fails when controls are contaminated
=======================================================

A small cluster of controls far out in the marker space drags the
logistic fit, and cutting its predicted risk at the PPV target then
misses many cases. Fitting the rule directly does not care about
the cluster once it sits on the control side of the line.
"""

from ppvrule import DoolrConfig, Prevalence, doolr_fit, standard_rule
from ppvrule.doolr import default_kappa_grid
from ppvrule.harness import evaluate
from ppvrule.simulate import gen_linear

prev = Prevalence(0.01)
alpha = 0.04

train = gen_linear(5000, contaminated=True, seed=1)
test = gen_linear(100_000, contaminated=True, seed=2)
print(f"train rows {train.n}, cases {train.n1}, controls at (6, 6): {int(((train.X == 6).all(1)).sum())}")

std = standard_rule(train, alpha, prev)
print("logistic coefficients:", std.rule.intercept, std.rule.slopes)

# a 51-point kappa grid is plenty for a demo
fit = doolr_fit(train, prev, DoolrConfig(alpha=alpha, kappa_grid=default_kappa_grid(51), restarts=3))
print("direct rule:", fit.rule.intercept, fit.rule.slopes, "kappa", round(fit.kappa_hat, 3))

for name, rule in (("standard", std), ("doolr", fit)):
    m = evaluate(rule, test, prev)
    print(f"{name:9s} test TPR {m.tpr:.3f}  PPV {m.ppv:.4f}")
