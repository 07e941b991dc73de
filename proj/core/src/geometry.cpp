#include "hasel3ps/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hasel3ps {

namespace {

constexpr double kAsinSlack = 1e-12;

// arcsin argument, clamped into [-1, 1] when within tolerance.
double asin_arg(double theta, double l_p, const SharedConstants& c) {
    if (!(l_p > 0.0)) {
        std::ostringstream os;
        os << "delta1: l_p must be > 0, got " << l_p;
        throw DomainError(os.str());
    }
    double s = (c.L_v / l_p) * std::sin((M_PI - theta) / 2.0);
    if (std::abs(s) > 1.0 + kAsinSlack) {
        std::ostringstream os;
        os << "delta1: arcsin argument " << s << " outside [-1, 1] at theta=" << theta
           << ", l_p=" << l_p;
        throw DomainError(os.str());
    }
    return std::clamp(s, -1.0, 1.0);
}

}  // namespace

double delta1(double theta, double l_p, const SharedConstants& c) {
    const double s = asin_arg(theta, l_p, c);
    return (M_PI + theta) / 2.0 - std::asin(s);
}

double shell_area(double theta, double l_p, const SharedConstants& c) {
    return 0.25 * l_p * c.L_v * std::sin(delta1(theta, l_p, c));
}

double zipped_length(double theta, double l_p, const SharedConstants& c) {
    const double le = c.L_e - (c.A_T - shell_area(theta, l_p, c)) / c.X_h;
    return std::clamp(le, 0.0, c.L_e);
}

double dynamic_capacitance(double theta, double l_p, const SharedConstants& c) {
    const double le = zipped_length(theta, l_p, c);
    return c.eps_0 * c.eps_r * c.w *
           (le / (2.0 * c.t) + (c.L_e - le) / (2.0 * c.t + c.X_h));
}

GeomEval geom_eval(double theta, double l_p, const SharedConstants& c) {
    GeomEval g;

    const double half = (M_PI - theta) / 2.0;
    const double s = asin_arg(theta, l_p, c);
    g.delta1 = (M_PI + theta) / 2.0 - std::asin(s);

    // d(asin s)/dx = s' / sqrt(1 - s^2); cap the denominator so a flat pouch
    // (s -> 1) yields huge-but-finite partials instead of inf/NaN.
    const double q = std::sqrt(std::max(1.0 - s * s, 1e-14));
    const double ds_dtheta = -(c.L_v / (2.0 * l_p)) * std::cos(half);
    const double ds_dlp = -(c.L_v / (l_p * l_p)) * std::sin(half);
    g.ddelta1_dtheta = 0.5 - ds_dtheta / q;
    g.ddelta1_dlp = -ds_dlp / q;

    const double sd = std::sin(g.delta1);
    const double cd = std::cos(g.delta1);
    g.A_s = 0.25 * l_p * c.L_v * sd;
    g.dAs_dtheta = 0.25 * l_p * c.L_v * cd * g.ddelta1_dtheta;
    g.dAs_dlp = 0.25 * c.L_v * sd + 0.25 * l_p * c.L_v * cd * g.ddelta1_dlp;

    const double le_raw = c.L_e - (c.A_T - g.A_s) / c.X_h;
    g.saturated = (le_raw < 0.0) || (le_raw > c.L_e);
    g.l_e = std::clamp(le_raw, 0.0, c.L_e);
    if (!g.saturated) {
        g.dle_dtheta = g.dAs_dtheta / c.X_h;
        g.dle_dlp = g.dAs_dlp / c.X_h;
    }

    const double cap_gain = c.eps_0 * c.eps_r * c.w;
    const double per_len = 1.0 / (2.0 * c.t) - 1.0 / (2.0 * c.t + c.X_h);
    g.C2 = cap_gain * (g.l_e / (2.0 * c.t) + (c.L_e - g.l_e) / (2.0 * c.t + c.X_h));
    g.dC2_dtheta = cap_gain * per_len * g.dle_dtheta;
    g.dC2_dlp = cap_gain * per_len * g.dle_dlp;

    return g;
}

}  // namespace hasel3ps
