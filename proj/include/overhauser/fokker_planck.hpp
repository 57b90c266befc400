#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "overhauser/model.hpp"

// Finite-volume solver for the Overhauser-shift probability density
//
//   df/dt = kappa d/dOmega [Omega f] + d/dOmega { [D + alpha C_j(Omega)] d/dOmega f }
//
// on a uniform cell-centered grid with zero-flux boundaries.  Fluxes use
// exponential fitting (Chang-Cooper / Scharfetter-Gummel weights), which
// upwinds on the drift sign at large cell Peclet number, stays second
// order at small Peclet, preserves positivity, and makes the discrete
// zero-flux steady state coincide with the trapezoid evaluation of the
// closed-form solution
//
//   f(Omega) ~ exp[ -kappa int_0^Omega u / (D + alpha C_j(u)) du ].

namespace overhauser {

struct OmegaGrid {
    double omega_min;
    double omega_max;
    std::size_t n_cells;

    void validate() const {
        if (!(omega_min < omega_max))
            throw std::invalid_argument("OmegaGrid: omega_min must be < omega_max");
        if (n_cells < 64)
            throw std::invalid_argument("OmegaGrid: n_cells must be >= 64");
    }

    double h() const { return (omega_max - omega_min) / static_cast<double>(n_cells); }
    double center(std::size_t i) const { return omega_min + (static_cast<double>(i) + 0.5) * h(); }
    double face(std::size_t i) const { return omega_min + static_cast<double>(i) * h(); }

    static OmegaGrid symmetric(double omega_half_width, std::size_t n_cells = 2048) {
        return OmegaGrid{-omega_half_width, omega_half_width, n_cells};
    }
};

/// Default symmetric grid sized to contain the steady state and several
/// count-rate fringes: Omega_max = max(6 sigma, 8 sqrt(D/kappa), 3 * 2pi/tau_min).
inline OmegaGrid default_grid(const ModelParams& p, double tau_min, std::size_t n_cells = 2048) {
    if (!(tau_min > 0.0))
        throw std::invalid_argument("default_grid: tau_min must be > 0");
    const double w = std::max({6.0 * p.sigma, 8.0 * std::sqrt(p.diffusion_d / p.kappa),
                               3.0 * units::two_pi / tau_min});
    return OmegaGrid::symmetric(w, n_cells);
}

/// Discretized probability density f(Omega); density values sit at cell
/// centers, integrals use the midpoint rule (sum * h), which the
/// flux-conservative update preserves exactly.
struct NuclearPdf {
    OmegaGrid grid;
    std::vector<double> density;

    double mass() const {
        return grid.h() * std::accumulate(density.begin(), density.end(), 0.0);
    }

    void normalize() {
        const double m = mass();
        if (!(m > 0.0)) throw std::runtime_error("NuclearPdf: cannot normalize zero/negative mass");
        for (double& v : density) v /= m;
    }

    void validate() const {
        grid.validate();
        if (density.size() != grid.n_cells)
            throw std::invalid_argument("NuclearPdf: density size != n_cells");
        for (double v : density)
            if (!(v >= 0.0)) throw std::invalid_argument("NuclearPdf: negative or non-finite density");
        if (std::abs(mass() - 1.0) > 1e-9)
            throw std::invalid_argument("NuclearPdf: mass differs from 1 by more than 1e-9");
    }

    static NuclearPdf point_mass(const OmegaGrid& grid, double omega0) {
        grid.validate();
        const double h = grid.h();
        auto idx = static_cast<std::ptrdiff_t>(std::floor((omega0 - grid.omega_min) / h));
        idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(grid.n_cells) - 1);
        NuclearPdf pdf{grid, std::vector<double>(grid.n_cells, 0.0)};
        pdf.density[static_cast<std::size_t>(idx)] = 1.0 / h;
        return pdf;
    }

    static NuclearPdf gaussian(const OmegaGrid& grid, double mean, double variance) {
        grid.validate();
        if (!(variance > 0.0))
            throw std::invalid_argument("NuclearPdf::gaussian: variance must be > 0");
        NuclearPdf pdf{grid, std::vector<double>(grid.n_cells)};
        for (std::size_t i = 0; i < grid.n_cells; ++i) {
            const double d = grid.center(i) - mean;
            pdf.density[i] = std::exp(-d * d / (2.0 * variance));
        }
        pdf.normalize();
        return pdf;
    }
};

struct Moments {
    double mean;
    double variance;
};

/// Midpoint-rule first and second central moments.
inline Moments moments(const NuclearPdf& pdf) {
    const double h = pdf.grid.h();
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < pdf.density.size(); ++i) {
        m0 += pdf.density[i];
        m1 += pdf.grid.center(i) * pdf.density[i];
    }
    m0 *= h;
    m1 *= h;
    const double mean = m1 / m0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < pdf.density.size(); ++i) {
        const double d = pdf.grid.center(i) - mean;
        m2 += d * d * pdf.density[i];
    }
    return {mean, m2 * h / m0};
}

/// <C_j> = int C_j(Omega) f(Omega) dOmega, midpoint rule.
template <class CountFn>
double expected_count(const NuclearPdf& pdf, CountFn&& countfn) {
    const double h = pdf.grid.h();
    double acc = 0.0;
    for (std::size_t i = 0; i < pdf.density.size(); ++i)
        acc += countfn(pdf.grid.center(i)) * pdf.density[i];
    return acc * h;
}

namespace detail {

/// Bernoulli function z / (e^z - 1), the exponential-fitting weight.
inline double bernoulli(double z) {
    if (z > 690.0) return 0.0;
    if (z < -690.0) return -z;
    if (std::abs(z) < 1e-10) return 1.0 - 0.5 * z;
    return z / std::expm1(z);
}

/// Per-face flux coefficients: F_{i+1/2} = a[i] * f_i - b[i] * f_{i+1}.
struct FluxCoeffs {
    std::vector<double> a, b;  // size n_cells - 1
    double h;
};

template <class CountFn>
FluxCoeffs flux_coeffs(const OmegaGrid& grid, CountFn&& countfn, const ModelParams& p) {
    const std::size_t n = grid.n_cells;
    const double h = grid.h();
    std::vector<double> deff(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = countfn(grid.center(i));
        deff[i] = p.diffusion_d + p.alpha * c;
        if (!(deff[i] >= 0.0))
            throw std::invalid_argument("fokker_planck: D + alpha*C negative at omega=" +
                                        std::to_string(grid.center(i)));
    }
    FluxCoeffs fc{std::vector<double>(n - 1), std::vector<double>(n - 1), h};
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double dfc = 0.5 * (deff[i] + deff[i + 1]);
        if (deff[i] > 0.0 && deff[i + 1] > 0.0) {
            // face Peclet from the trapezoid of the cell-centered integrand
            // kappa*Omega/D_eff, so the zero-flux state reproduces the
            // cumulative-trapezoid closed form exactly
            const double w = -0.5 * p.kappa * h *
                             (grid.center(i) / deff[i] + grid.center(i + 1) / deff[i + 1]);
            fc.a[i] = dfc / h * bernoulli(-w);
            fc.b[i] = dfc / h * bernoulli(w);
        } else if (dfc > 0.0) {
            const double w = -p.kappa * grid.face(i + 1) * h / dfc;
            fc.a[i] = dfc / h * bernoulli(-w);
            fc.b[i] = dfc / h * bernoulli(w);
        } else {
            // degenerate diffusionless face: plain upwind advection
            const double v = -p.kappa * grid.face(i + 1);
            fc.a[i] = std::max(v, 0.0);
            fc.b[i] = std::max(-v, 0.0);
        }
    }
    return fc;
}

/// Largest dt keeping the explicit update a convex (positivity-preserving)
/// combination, before any safety factor.
inline double positivity_dt_limit(const FluxCoeffs& fc) {
    const std::size_t n = fc.a.size() + 1;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double out = 0.0;
        if (i > 0) out += fc.b[i - 1];
        if (i + 1 < n) out += fc.a[i];
        worst = std::max(worst, out);
    }
    return worst > 0.0 ? fc.h / worst : std::numeric_limits<double>::infinity();
}

inline void check_density(const std::vector<double>& f, std::size_t step, double t) {
    for (double v : f) {
        if (!std::isfinite(v))
            throw std::runtime_error("evolve: non-finite density at step " +
                                     std::to_string(step) + " (t=" + std::to_string(t) + " ns)");
        if (v < -1e-12)
            throw std::runtime_error("evolve: negative density at step " +
                                     std::to_string(step) + " (t=" + std::to_string(t) + " ns)");
    }
}

inline void clamp_roundoff(std::vector<double>& f) {
    for (double& v : f)
        if (v < 0.0) v = 0.0;  // verified >= -1e-12 beforehand
}

}  // namespace detail

/// Safe explicit time step (0.4 x the positivity limit), accounting for both
/// the diffusive h^2 and advective h restrictions.
template <class CountFn>
double stable_dt(const OmegaGrid& grid, CountFn&& countfn, const ModelParams& p) {
    return 0.4 * detail::positivity_dt_limit(detail::flux_coeffs(grid, countfn, p));
}

/// Explicit flux-conservative evolution of f to t_end.  dt must be at or
/// below the positivity limit (stable_dt provides a safe choice); the exact
/// step used is t_end / ceil(t_end/dt).
template <class CountFn>
NuclearPdf evolve(const NuclearPdf& pdf, CountFn&& countfn, const ModelParams& p,
                  double dt, double t_end) {
    pdf.grid.validate();
    p.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("evolve: dt must be > 0");
    if (!(t_end >= 0.0)) throw std::invalid_argument("evolve: t_end must be >= 0");
    NuclearPdf out = pdf;
    if (t_end == 0.0) return out;

    const auto fc = detail::flux_coeffs(pdf.grid, countfn, p);
    const double dt_limit = detail::positivity_dt_limit(fc);
    if (dt > dt_limit)
        throw std::invalid_argument("evolve: dt=" + std::to_string(dt) +
                                    " exceeds stability limit " + std::to_string(dt_limit));

    const auto n_steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));
    const double step = t_end / static_cast<double>(n_steps);
    const double r = step / fc.h;
    const std::size_t n = pdf.grid.n_cells;

    std::vector<double>& f = out.density;
    std::vector<double> flux(n - 1);
    constexpr std::size_t check_interval = 4096;
    for (std::size_t s = 0; s < n_steps; ++s) {
        for (std::size_t i = 0; i + 1 < n; ++i)
            flux[i] = fc.a[i] * f[i] - fc.b[i] * f[i + 1];
        f[0] -= r * flux[0];
        for (std::size_t i = 1; i + 1 < n; ++i)
            f[i] += r * (flux[i - 1] - flux[i]);
        f[n - 1] += r * flux[n - 2];
        if ((s + 1) % check_interval == 0)
            detail::check_density(f, s + 1, static_cast<double>(s + 1) * step);
    }
    detail::check_density(f, n_steps, t_end);
    detail::clamp_roundoff(f);
    return out;
}

/// Backward-Euler variant (unconditionally positive and conservative in
/// flux form; tridiagonal solve per step).  Useful when only the long-time
/// state matters and the explicit dt limit is punishing.
template <class CountFn>
NuclearPdf evolve_implicit(const NuclearPdf& pdf, CountFn&& countfn, const ModelParams& p,
                           double dt, double t_end) {
    pdf.grid.validate();
    p.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("evolve_implicit: dt must be > 0");
    if (!(t_end >= 0.0)) throw std::invalid_argument("evolve_implicit: t_end must be >= 0");
    NuclearPdf out = pdf;
    if (t_end == 0.0) return out;

    const auto fc = detail::flux_coeffs(pdf.grid, countfn, p);
    const auto n_steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));
    const double step = t_end / static_cast<double>(n_steps);
    const double r = step / fc.h;
    const std::size_t n = pdf.grid.n_cells;

    // rows: -r a[i-1] f_{i-1} + (1 + r (a[i] + b[i-1])) f_i - r b[i] f_{i+1} = f_i^old
    std::vector<double> lower(n, 0.0), diag(n, 1.0), upper(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            lower[i] = -r * fc.a[i - 1];
            diag[i] += r * fc.b[i - 1];
        }
        if (i + 1 < n) {
            upper[i] = -r * fc.b[i];
            diag[i] += r * fc.a[i];
        }
    }
    std::vector<double>& f = out.density;
    std::vector<double> cp(n), dp(n);
    for (std::size_t s = 0; s < n_steps; ++s) {
        cp[0] = upper[0] / diag[0];
        dp[0] = f[0] / diag[0];
        for (std::size_t i = 1; i < n; ++i) {
            const double m = diag[i] - lower[i] * cp[i - 1];
            cp[i] = upper[i] / m;
            dp[i] = (f[i] - lower[i] * dp[i - 1]) / m;
        }
        f[n - 1] = dp[n - 1];
        for (std::size_t i = n - 1; i-- > 0;)
            f[i] = dp[i] - cp[i] * f[i + 1];
    }
    detail::check_density(f, n_steps, t_end);
    detail::clamp_roundoff(f);
    return out;
}

/// Closed-form steady state f ~ exp[-kappa int_0^Omega u/(D + alpha C_j(u)) du],
/// inner integral by cumulative trapezoid over cell centers, normalized to
/// unit mass.  Requires D + alpha C_j > 0 everywhere on the grid.
template <class CountFn>
NuclearPdf steady_state_closed_form(CountFn&& countfn, const ModelParams& p,
                                    const OmegaGrid& grid) {
    grid.validate();
    p.validate();
    const std::size_t n = grid.n_cells;
    const double h = grid.h();
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double deff = p.diffusion_d + p.alpha * countfn(grid.center(i));
        if (!(deff > 0.0))
            throw std::invalid_argument(
                "steady_state_closed_form: D + alpha*C vanishes at omega=" +
                std::to_string(grid.center(i)));
        g[i] = grid.center(i) / deff;
    }
    // cumulative exponent; the reference offset drops out in normalization
    std::vector<double> expo(n);
    expo[0] = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i)
        expo[i + 1] = expo[i] + 0.5 * h * (g[i] + g[i + 1]);
    double emin = *std::min_element(expo.begin(), expo.end());
    NuclearPdf pdf{grid, std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i)
        pdf.density[i] = std::exp(-p.kappa * (expo[i] - emin));
    pdf.normalize();
    return pdf;
}

/// L1 distance between two pdfs on the same grid.
inline double l1_distance(const NuclearPdf& a, const NuclearPdf& b) {
    if (a.density.size() != b.density.size())
        throw std::invalid_argument("l1_distance: grids differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.density.size(); ++i)
        acc += std::abs(a.density[i] - b.density[i]);
    return acc * a.grid.h();
}

/// Two-column CSV snapshot (omega_rad_per_ns, density).
inline void write_pdf_csv(const NuclearPdf& pdf, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_pdf_csv: cannot open " + path);
    os << "omega_rad_per_ns,density\n";
    char buf[64];
    for (std::size_t i = 0; i < pdf.density.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", pdf.grid.center(i), pdf.density[i]);
        os << buf;
    }
}

}  // namespace overhauser
