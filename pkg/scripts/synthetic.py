"""Train the memory net and its shared-cell ablation on the mode-conditioned toy task."""
import argparse
import json

from intentnav.experiments import synthetic_experiment

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--seed", type=int, default=1)
args = p.parse_args()
for kind, r in synthetic_experiment(seed=args.seed).items():
    print(json.dumps({"kind": kind, "loss_before": r.loss_before, "loss_after": r.loss_after,
                      "separation": r.separation, "iterations": r.iterations, "seconds": round(r.seconds, 1)}))
