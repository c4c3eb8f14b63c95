"""Compare anchored and free-running odometry over the three-floorplan route."""
import argparse

import numpy as np

from intentnav.experiments import drift_experiment

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--seeds", type=int, default=50)
p.add_argument("--sigma", type=float, default=0.05)
args = p.parse_args()
r = drift_experiment(tuple(range(args.seeds)), sigma_t=args.sigma)
for a in r.anchored.anchors:
    print(f"anchor at {a['exit']} tick {a['tick']} error {a['error']}")
print(f"free-running terminal error: median {np.median(r.terminal_errors):.2f} m, "
      f"exceeds {r.largest_margin} m margin in {r.exceed_fraction:.0%} of {args.seeds} seeds")
