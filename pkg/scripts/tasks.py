"""Run the scripted expert and the path tracker on the five task fixtures."""
import argparse

from intentnav import eval as ev
from intentnav.experiments import task_experiment

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--tasks", default="ABCDE")
p.add_argument("--seeds", type=int, default=1)
args = p.parse_args()
print(ev.task_report(task_experiment(args.tasks, tuple(range(args.seeds)))).text())
