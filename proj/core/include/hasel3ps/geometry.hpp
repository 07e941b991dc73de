#pragma once

#include "hasel3ps/types.hpp"

namespace hasel3ps {

/// Internal shell angle,
///   delta1 = (pi + theta)/2 - asin((L_v / l_p) sin((pi - theta)/2)).
/// Throws DomainError when the arcsin argument leaves [-1, 1] by more than
/// 1e-12; smaller overshoots are clamped.
double delta1(double theta, double l_p, const SharedConstants& c);

/// Shell cross-section area, A_s = (1/4) l_p L_v sin(delta1).
double shell_area(double theta, double l_p, const SharedConstants& c);

/// Zipped electrode length,
///   l_e = L_e - (A_T - A_s) / X_h,
/// clamped to [0, L_e] (zipping cannot exceed the electrode).
double zipped_length(double theta, double l_p, const SharedConstants& c);

/// Dynamic capacitance: zipped plates in series with the unzipped gap,
///   C2 = eps0 eps_r w ( l_e / (2t) + (L_e - l_e) / (2t + X_h) ).
double dynamic_capacitance(double theta, double l_p, const SharedConstants& c);

/// One-pass evaluation of delta1, A_s, l_e and C2 together with their
/// analytic partials with respect to theta and l_p. The partials of l_e
/// (and hence C2) are zero while the clamp is active.
GeomEval geom_eval(double theta, double l_p, const SharedConstants& c);

}  // namespace hasel3ps
