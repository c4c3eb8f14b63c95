"""Run the expert through the adversarial corridor and print its step outcomes."""
import argparse

from intentnav import eval as ev
from intentnav.sim import ExpertPolicy, adversary_scenario, make_planner, run_episode

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--seeds", type=int, default=5)
args = p.parse_args()
sc = adversary_scenario()
planner = make_planner(sc)
for s in range(args.seeds):
    log = run_episode(ExpertPolicy(), sc, s, planner=planner)
    t = ev.trial_of(log)
    print(f"seed {s}: {t.s}/{t.n} steps, interventions {log.interventions}")
