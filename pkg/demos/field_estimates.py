"""Narrative demo: the back-of-the-envelope physics estimates.

Walks through the broadening budget, the dipole field of a polarized
sub-ensemble, the volume it occupies, and the saturated vapor density
over temperature.
"""

from alignor import (
    BroadeningBudget,
    DipoleConfig,
    broadening_rate,
    circular_power,
    cs_number_density,
    dipole_field,
    ensemble_volume,
    point_dipole_validity,
)

# resonance broadening per degree of pump ellipticity
budget = BroadeningBudget(p_in=2.0, k_lb=30.0, k_serf=0.3, k_ls=90.0)
print(f"pump power {budget.p_in} mW; circular fraction at 1 deg: "
      f"{circular_power(budget.p_in, 1.0):.4f} mW")
print(f"broadening budget: {broadening_rate(budget):.2f} nT/deg "
      f"(direct {budget.k_lb}, via light shift "
      f"{budget.k_serf * budget.k_ls:.0f} nT/mW)")

# how many polarized atoms does a 1 nT latched field need?
n_atoms = 5e11
b = dipole_field(DipoleConfig(n_atoms=n_atoms, distance_mm=1.0))
print(f"\n{n_atoms:.0e} Bohr-magneton atoms, 1 mm on axis: {b:.2f} nT")

density = 2e14
volume, side = ensemble_volume(n_atoms, density)
ratio, verdict = point_dipole_validity(1.0, side)
print(f"at {density:.0e} cm^-3 they fill {volume:.2f} mm^3 "
      f"(cube side {side:.2f} mm); point-dipole treatment: {verdict} "
      f"(l / (L/2) = {ratio:.2f})")

# saturated vapor density over the working temperature range
print(f"\n{'T (C)':>6} {'n (cm^-3)':>12}")
for t_c in (130, 135, 140, 145, 150, 155):
    print(f"{t_c:6d} {cs_number_density(t_c):12.3g}")
