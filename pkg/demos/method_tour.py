"""Three ways to the same robust plan, and one cheaper approximation.

The reformulation solves one larger nonconvex model. Cutting planes solve a
sequence of nominal-sized models, adding worst-case scenarios found by
separation and tightening the solver gap as they go. The safety factor
search only rescales the quality limits and is usually a little conservative.

    python demos/method_tour.py [--set ellipsoid] [--r 0.2]
"""

import argparse

from robust_pooling.bench import SetConfig, compare, resolve_instance

parser = argparse.ArgumentParser()
parser.add_argument("--instance", default="haverly3")
parser.add_argument("--set", default="ellipsoid")
parser.add_argument("--r", type=float, default=0.2)
args = parser.parse_args()

inst = resolve_instance(args.instance)
cmp = compare(inst, SetConfig(args.set, preset="medium"), args.r)
print(cmp.table())

multi = cmp.results["cut-multi"]
print("\ncut-multi iterations")
for h in multi.history:
    print(f"  {h['iteration']:>2}: gap target {h['delta']:.0e}  profit {-h['objective']:10.4f}"
          f"  epsilon {h['eps']:.2e}  scenarios {h['cuts']}")

safety = cmp.results["safety"]
print(f"\nsafety factor s_min = {safety.safety_factor:.6f}: quality limits divided by s_min,"
      f" profit {safety.profit:.4f} vs {multi.profit:.4f}")
