"""Capacity region, simulation bound and moderate deviations for broadcast channels.

Run with ``python demos/broadcast_simulation.py`` (about a minute).
"""

from qbroadcast.channels import OptimizerConfig, capacity_region, complementary_dephasing_channel, depolarizing_channel
from qbroadcast.simulation import (
    BlocklengthParams,
    ModerateSchedule,
    channel_subset_exponents,
    moderate_deviation_curve,
    one_shot_simulation_bound,
)

OPT = OptimizerConfig(grid_points=400, alpha_grid_points=50, probes=10)


def main():
    ch = complementary_dephasing_channel(0.3)
    region = capacity_region(ch, OPT)
    print("thresholds:", {"+".join(s): round(t, 4) for s, t in region.thresholds.items()})
    print("corners:", [tuple(round(x, 4) for x in v) for v in region.vertices_2d])

    rates = (2.0, 2.0)
    exps = channel_subset_exponents(ch, rates, OPT)
    print(f"exponents at rates {rates}:", {"+".join(s): round(e, 4) for s, e in exps.items()})
    for n in (10, 10**3, 10**5):
        rep = one_shot_simulation_bound(ch, rates, BlocklengthParams(n, L=2, dim_a=2), exponents=exps)
        print(f"  n={n}: log2 bound {rep.log2_epsilon_bound:.1f}, per-letter {-rep.log2_epsilon_bound / n:.4f}"
              f" -> {rep.exponent_lower:.4f}")

    tab = moderate_deviation_curve(depolarizing_channel(0.3), ModerateSchedule(0.25, (10**4, 10**6, 10**8)), OPT)
    print(f"moderate deviations (proven constant {tab.proven_constant}):")
    for row in tab.rows:
        print(f"  n={row.n:.0e}: a_n={row.a_n:.4f}  normalized exponent {row.normalized_exponent:.3f}")


if __name__ == "__main__":
    main()
