#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "overhauser/model.hpp"

// Reduced first-moment dynamics of the nuclear feedback,
//
//   d omega / dt = -kappa omega + alpha C_j'(omega),
//
// with fixed-point analysis and directional continuation sweeps.  The
// quasi-equilibrium at each scan value is found by integrating the flow
// (basin selection by dynamics, not by global root choice).

namespace overhauser {

enum class Stability { Stable, Unstable };

inline const char* to_string(Stability s) {
    return s == Stability::Stable ? "stable" : "unstable";
}

struct FixedPoint {
    double omega;        ///< rad/ns
    Stability stability;
    double drift_slope;  ///< d(drift)/d(omega) at the root, 1/ns
};

struct FixedPointSet {
    std::vector<FixedPoint> points;

    std::size_t stable_count() const {
        return static_cast<std::size_t>(std::count_if(
            points.begin(), points.end(),
            [](const FixedPoint& fp) { return fp.stability == Stability::Stable; }));
    }

    /// Stable root nearest to omega; throws if there is none.
    const FixedPoint& nearest_stable(double omega) const {
        const FixedPoint* best = nullptr;
        for (const auto& fp : points) {
            if (fp.stability != Stability::Stable) continue;
            if (!best || std::abs(fp.omega - omega) < std::abs(best->omega - omega)) best = &fp;
        }
        if (!best) throw std::runtime_error("FixedPointSet: no stable fixed point");
        return *best;
    }
};

struct SweepRecord {
    double scan_value;  ///< delta_L [rad/ns] or tau [ns]
    double omega_f;     ///< quasi-equilibrium Overhauser shift, rad/ns
    double count;       ///< C_j(omega_f), trions/cycle
    bool jumped;        ///< |d omega_f| exceeded 5x the median neighbor change
};

struct SweepTrace {
    std::vector<SweepRecord> records;
};

/// Non-convergence of the quasi-equilibrium integration; carries the last omega.
struct RelaxError : std::runtime_error {
    double last_omega;
    explicit RelaxError(double omega, const std::string& msg)
        : std::runtime_error(msg), last_omega(omega) {}
};

/// Mean-field drift -kappa omega + alpha C_j'(omega).
inline double drift(double omega, const SequenceSpec& seq, const ModelParams& p) {
    return -p.kappa * omega + p.alpha * count_rate_derivative(seq.kind, omega, seq.scan, p);
}

namespace detail {

inline double drift_slope(double omega, const SequenceSpec& seq, const ModelParams& p) {
    const double h = 1e-6 * std::max(1.0, std::abs(omega));
    return (drift(omega + h, seq, p) - drift(omega - h, seq, p)) / (2.0 * h);
}

}  // namespace detail

/// Integrate d omega/dt = drift(omega) from omega0 until |drift| < tol;
/// adaptive Bogacki-Shampine 3(2) pair, max integration time 1e4/kappa.
inline double relax_to_steady(double omega0, const SequenceSpec& seq, const ModelParams& p,
                              double tol = 1e-8) {
    if (!(tol > 0.0)) throw std::invalid_argument("relax_to_steady: tol must be > 0");
    seq.validate();
    p.validate();

    const double t_max = 1e4 / p.kappa;
    const double dt_max = 1.0 / p.kappa;
    double t = 0.0;
    double w = omega0;
    double dt = 0.1 / p.kappa;
    double k1 = drift(w, seq, p);
    const double atol = 1e-12, rtol = 1e-9;

    while (std::abs(k1) >= tol) {
        if (t >= t_max)
            throw RelaxError(w, "relax_to_steady: no quasi-equilibrium within t=1e4/kappa"
                                " (last omega=" + std::to_string(w) + ")");
        dt = std::min({dt, dt_max, t_max - t});
        const double k2 = drift(w + 0.5 * dt * k1, seq, p);
        const double k3 = drift(w + 0.75 * dt * k2, seq, p);
        const double w3 = w + dt * (2.0 * k1 + 3.0 * k2 + 4.0 * k3) / 9.0;
        const double k4 = drift(w3, seq, p);
        const double w2 = w + dt * (7.0 * k1 + 6.0 * k2 + 8.0 * k3 + 3.0 * k4) / 24.0;
        const double err = std::abs(w3 - w2);
        const double scale = atol + rtol * std::max(std::abs(w), std::abs(w3));
        if (err <= scale) {
            t += dt;
            w = w3;
            k1 = k4;  // FSAL
        }
        const double ratio = err > 0.0 ? 0.9 * std::pow(scale / err, 1.0 / 3.0) : 5.0;
        dt *= std::clamp(ratio, 0.2, 5.0);
        if (!(dt > 1e-12 / p.kappa))
            throw RelaxError(w, "relax_to_steady: step size collapsed at omega=" +
                                    std::to_string(w));
    }
    return w;
}

/// All roots of the drift in `bracket`, by dense sign-change scan plus
/// bisection, deduplicated within the scan resolution.  Stability follows
/// the sign of the numeric drift slope (negative => stable).
inline FixedPointSet find_all_fixed_points(const SequenceSpec& seq, const ModelParams& p,
                                           std::pair<double, double> bracket,
                                           std::size_t n_scan = 4001) {
    seq.validate();
    p.validate();
    auto [lo, hi] = bracket;
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi))
        throw std::invalid_argument("find_all_fixed_points: bracket must be finite and ordered");
    if (n_scan < 3) throw std::invalid_argument("find_all_fixed_points: n_scan must be >= 3");

    const double scan_h = (hi - lo) / static_cast<double>(n_scan - 1);
    std::vector<double> roots;
    double x_prev = lo;
    double d_prev = drift(x_prev, seq, p);
    for (std::size_t i = 1; i < n_scan; ++i) {
        const double x = lo + scan_h * static_cast<double>(i);
        const double d = drift(x, seq, p);
        if (d_prev == 0.0) {
            roots.push_back(x_prev);
        } else if (d_prev * d < 0.0) {
            double a = x_prev, b = x, da = d_prev;
            for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(1.0, std::abs(a)); ++it) {
                const double m = 0.5 * (a + b);
                const double dm = drift(m, seq, p);
                if (dm == 0.0) { a = b = m; break; }
                if (da * dm < 0.0) b = m;
                else { a = m; da = dm; }
            }
            roots.push_back(0.5 * (a + b));
        }
        x_prev = x;
        d_prev = d;
    }
    if (d_prev == 0.0) roots.push_back(x_prev);

    std::sort(roots.begin(), roots.end());
    FixedPointSet out;
    for (double r : roots) {
        if (!out.points.empty() && std::abs(r - out.points.back().omega) < 0.5 * scan_h) continue;
        const double slope = detail::drift_slope(r, seq, p);
        out.points.push_back({r, slope < 0.0 ? Stability::Stable : Stability::Unstable, slope});
    }
    return out;
}

/// Directional continuation sweep: each scan value relaxes to quasi-equilibrium
/// seeded with the previous omega_f (the first point with omega_init).
inline SweepTrace sweep(const std::vector<double>& scan_values, SequenceSpec seq,
                        const ModelParams& p, double omega_init = 0.0,
                        double tol = 1e-8) {
    p.validate();
    if (scan_values.empty()) return {};
    if (scan_values.size() >= 2) {
        const bool up = scan_values[1] > scan_values[0];
        for (std::size_t i = 1; i < scan_values.size(); ++i)
            if (up ? !(scan_values[i] > scan_values[i - 1]) : !(scan_values[i] < scan_values[i - 1]))
                throw std::invalid_argument("sweep: scan values must be strictly monotone");
    }

    SweepTrace trace;
    trace.records.reserve(scan_values.size());
    double w = omega_init;
    for (std::size_t i = 0; i < scan_values.size(); ++i) {
        seq.scan = scan_values[i];
        try {
            w = relax_to_steady(w, seq, p, tol);
        } catch (const RelaxError& e) {
            throw std::runtime_error("sweep: scan index " + std::to_string(i) +
                                     " (value=" + std::to_string(scan_values[i]) + "): " + e.what());
        }
        trace.records.push_back({scan_values[i], w, count_rate(seq, w, p), false});
    }

    // jump diagnostics: |d omega_f| above 5x the median neighbor change
    if (trace.records.size() >= 2) {
        std::vector<double> steps(trace.records.size() - 1);
        for (std::size_t i = 0; i + 1 < trace.records.size(); ++i)
            steps[i] = std::abs(trace.records[i + 1].omega_f - trace.records[i].omega_f);
        std::vector<double> sorted = steps;
        std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
        const double median = sorted[sorted.size() / 2];
        for (std::size_t i = 0; i + 1 < trace.records.size(); ++i)
            if (steps[i] > 5.0 * median) trace.records[i + 1].jumped = true;
    }
    return trace;
}

/// Bracket guaranteed to contain every drift root: roots obey
/// |omega| = (alpha/kappa) |C'(omega)|, and C' lives where the pump line
/// has support, so pad the scan window by the largest attainable shift.
inline std::pair<double, double> default_root_bracket(const SequenceSpec& seq,
                                                      const ModelParams& p) {
    const double delta_l = seq.kind == SeqKind::OnePulse ? seq.scan : 0.0;
    double lo = std::min(0.0, delta_l) - 6.0 * p.sigma;
    double hi = std::max(0.0, delta_l) + 6.0 * p.sigma;
    double cmax = 0.0;
    const int n = 2000;
    for (int i = 0; i <= n; ++i) {
        const double w = lo + (hi - lo) * static_cast<double>(i) / n;
        cmax = std::max(cmax, std::abs(count_rate_derivative(seq.kind, w, seq.scan, p)));
    }
    const double reach = 1.2 * p.alpha * cmax / p.kappa + 1.0;
    return {lo - reach, hi + reach};
}

}  // namespace overhauser
