#pragma once

#include <numbers>

// Internal unit conventions: time in ns, angular frequency in rad/ns,
// rates in 1/ns, diffusion strengths in rad^2/ns^3.  Config files speak
// ordinary frequency (GHz) and ps/ns; conversion happens at the boundary.

namespace overhauser::units {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double ghz_to_rad_per_ns(double f_ghz) { return two_pi * f_ghz; }
constexpr double mhz_to_rad_per_ns(double f_mhz) { return two_pi * 1e-3 * f_mhz; }
constexpr double rad_per_ns_to_ghz(double w) { return w / two_pi; }

constexpr double ps_to_ns(double t_ps) { return 1e-3 * t_ps; }
constexpr double us_to_ns(double t_us) { return 1e3 * t_us; }
constexpr double ms_to_ns(double t_ms) { return 1e6 * t_ms; }
constexpr double ns_to_ps(double t_ns) { return 1e3 * t_ns; }

// ratio kappa/alpha quoted in ps^2 (figure-caption style) -> alpha/kappa in rad^2/ns^2
constexpr double kappa_over_alpha_ps2_to_alpha_over_kappa(double r_ps2) {
    return 1.0 / (r_ps2 * 1e-6);
}

}  // namespace overhauser::units
