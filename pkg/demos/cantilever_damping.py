"""Elastic against viscoelastic cantilever after a short tip pulse.

The viscous variant moves three quarters of the stiffness into one
Maxwell branch; its energy decays while the elastic rod keeps ringing.
"""

from phrod.scenarios import builtin, run_scenario


def main():
    elastic = run_scenario(builtin("cantilever_oscillation"))
    viscous = run_scenario(builtin("cantilever_oscillation_viscous"))
    print(f"{'t':>6} {'H elastic':>12} {'H viscous':>12} {'dissipated':>12} {'tip z (visc.)':>14}")
    dissipated = 0.0
    for k, (a, b) in enumerate(zip(elastic, viscous)):
        dissipated += b.D
        if k % 25 == 0:
            print(f"{a.t:6.3f} {a.H:12.4e} {b.H:12.4e} {dissipated:12.4e} "
                  f"{b.tip_position[2]:14.4e}")


if __name__ == "__main__":
    main()
