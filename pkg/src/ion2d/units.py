"""Unit system for trapped-ion crystal calculations.

All interior numerics run in dimensionless units built from the ion species
and a reference trap frequency: lengths in units of

    l0 = (q^2 / (4 pi eps0 M omega_ref^2))^(1/3),

times in units of 1/omega_ref, energies in units of M l0^2 omega_ref^2.
In these units the potential of a harmonic trap plus Coulomb repulsion is

    U = 1/2 sum_i (wx^2 x_i^2 + wy^2 y_i^2 + wz^2 z_i^2) + sum_{i<j} 1/r_ij

with w = omega/omega_ref.  SI values appear only at interfaces.
"""

from __future__ import annotations

from dataclasses import dataclass

from scipy.constants import atomic_mass, elementary_charge, epsilon_0, hbar, k as k_B, pi

AMU = atomic_mass
E_CHARGE = elementary_charge
HBAR = hbar
K_B = k_B
COULOMB_K = 1.0 / (4.0 * pi * epsilon_0)


@dataclass(frozen=True)
class IonSpecies:
    """An ion species: mass in kg, charge in C."""

    mass: float
    charge: float = E_CHARGE

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError(f"ion mass must be positive, got {self.mass}")
        if self.charge <= 0:
            raise ValueError(f"ion charge must be positive, got {self.charge}")


#: Singly ionized ytterbium-171.
YB171 = IonSpecies(mass=170.936323 * AMU)


@dataclass(frozen=True)
class UnitSystem:
    """Dimensionless unit system anchored to a species and reference frequency.

    Attributes
    ----------
    length : float
        Characteristic length l0 in meters.
    time : float
        Characteristic time 1/omega_ref in seconds.
    mass : float
        Ion mass in kg.
    omega_ref : float
        Reference angular frequency in rad/s.
    """

    length: float
    time: float
    mass: float
    omega_ref: float

    @classmethod
    def for_trap(cls, species: IonSpecies, omega_ref: float) -> "UnitSystem":
        """Build the unit system for a species in a trap with reference
        angular frequency ``omega_ref`` (rad/s)."""
        if omega_ref <= 0:
            raise ValueError(f"omega_ref must be positive, got {omega_ref}")
        l0 = (COULOMB_K * species.charge**2 / (species.mass * omega_ref**2)) ** (1.0 / 3.0)
        return cls(length=l0, time=1.0 / omega_ref, mass=species.mass, omega_ref=omega_ref)

    @property
    def velocity(self) -> float:
        """Characteristic velocity l0 * omega_ref in m/s."""
        return self.length / self.time

    @property
    def energy(self) -> float:
        """Characteristic energy M l0^2 omega_ref^2 in J."""
        return self.mass * self.length**2 / self.time**2

    def to_si_length(self, x):
        return x * self.length

    def from_si_length(self, x):
        return x / self.length

    def to_si_time(self, t):
        return t * self.time

    def from_si_time(self, t):
        return t / self.time

    def to_si_velocity(self, v):
        return v * self.velocity

    def from_si_velocity(self, v):
        return v / self.velocity

    def from_si_angular_frequency(self, omega):
        return omega * self.time

    def to_si_angular_frequency(self, w):
        return w / self.time
