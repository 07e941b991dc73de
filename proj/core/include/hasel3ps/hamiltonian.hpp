#pragma once

#include "hasel3ps/types.hpp"

namespace hasel3ps {

/// Stored energy of a single actuator:
///   (1/2) K_b theta^2 + (1/2) g L_v m sin(theta) + (1/4) K (l_p - L_p)^2
///   + (1/2) p^2 / I + (1/2) Q1^2 / C1 + (1/2) Q2^2 / C2(theta, l_p).
double actuator_energy(const ActuatorState& x, const ActuatorParams& p,
                       const SharedConstants& c);

/// Analytic gradient of actuator_energy in state order (theta, l_p, p, Q1, Q2).
Vec5 actuator_energy_grad(const ActuatorState& x, const ActuatorParams& p,
                          const SharedConstants& c);

/// Total stored energy of the three-actuator system.
double hamiltonian(const SystemState& x, const ParamsTriple& params,
                   const SharedConstants& c);

/// Gradient of the Hamiltonian in the stacked 15-vector layout
/// [theta(3); l_p(3); p(3); Q1(3); Q2(3)].
Vec15 grad_hamiltonian(const SystemState& x, const ParamsTriple& params,
                       const SharedConstants& c);

}  // namespace hasel3ps
