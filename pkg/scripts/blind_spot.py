"""Train both controllers on perturbed expert demonstrations and compare them in the blind-spot corridor."""
import argparse

from intentnav import eval as ev
from intentnav.experiments import blind_spot_experiment

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--seeds", type=int, default=20, help="evaluation seeds 0..N-1")
p.add_argument("--kinds", nargs="+", default=["decision", "cnn_reactive"])
args = p.parse_args()
res = blind_spot_experiment(kinds=tuple(args.kinds), eval_seeds=tuple(range(args.seeds)))
print(f"{res.dataset_size} demonstration frames", *res.notes, sep="\n")
print(ev.ablation_report({k: {"blind": v} for k, v in res.logs.items()}, res.throughput).text())
