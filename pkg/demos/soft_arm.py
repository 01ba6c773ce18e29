"""Soft arm driven by three pressure chambers along a circle and a heart.

Prints the tip path projected on the base plane together with the three
chamber inputs.
"""

import sys

from phrod.scenarios import builtin, run_scenario


def main(path="circle"):
    sc = builtin(f"soft_arm_{path}")
    recs = run_scenario(sc)
    print(f"{'t':>6} {'tip x [mm]':>11} {'tip y [mm]':>11} {'tau_1':>8} {'tau_2':>8} {'tau_3':>8}")
    for r in recs[::8]:
        x, y, _ = 1e3 * r.tip_position
        print(f"{r.t:6.3f} {x:11.3f} {y:11.3f} " + " ".join(f"{v:8.2f}" for v in r.tau))


if __name__ == "__main__":
    main(*sys.argv[1:])
