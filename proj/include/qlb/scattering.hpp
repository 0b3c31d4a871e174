#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <variant>
#include <vector>

#include "qlb/core.hpp"
#include "qlb/error.hpp"
#include "qlb/quadrature.hpp"
#include "qlb/rng.hpp"
#include "qlb/vec3.hpp"

namespace qlb {

using Complex = std::complex<double>;

/// Relative tolerance of the elastic shell check in amplitude().
inline constexpr double k_shell_tolerance = 1e-9;

/// Energy-independent, isotropic scattering amplitude f = -a.
struct ConstantLengthModel {
    double scattering_length = 1.0;

    void validate() const {
        QLB_REQUIRE(std::isfinite(scattering_length) && scattering_length > 0.0,
                    "scattering length must be positive");
    }
};

/// Hard sphere of radius R via the partial-wave series.  l_max < 0 picks
/// ceil(2 k R) + 4 terms, enough for ~1e-10 truncation at the momenta a
/// thermal gas explores.
struct HardSphereModel {
    double radius = 1.0;
    int l_max = -1;

    void validate() const {
        QLB_REQUIRE(std::isfinite(radius) && radius > 0.0, "sphere radius must be positive");
        QLB_REQUIRE(l_max == -1 || l_max >= 0, "l_max must be -1 (auto) or non-negative");
    }
};

/// First-order amplitude of a Gaussian potential:
/// f(Q) = -strength * exp(-Q^2 width^2), Q the momentum transfer.
/// Real and a function of Q alone, so kernel phases collapse.
struct BornGaussianModel {
    double strength = 1.0;
    double width = 1.0;

    void validate() const {
        QLB_REQUIRE(std::isfinite(strength) && strength > 0.0, "Born strength must be positive");
        QLB_REQUIRE(std::isfinite(width) && width > 0.0, "Born width must be positive");
    }
};

using ScatteringModel = std::variant<ConstantLengthModel, HardSphereModel, BornGaussianModel>;

inline void validate(const ScatteringModel& model) {
    std::visit([](const auto& m) { m.validate(); }, model);
}

namespace detail {

inline int hs_l_max(const HardSphereModel& m, double k) {
    if (m.l_max >= 0) return m.l_max;
    return static_cast<int>(std::ceil(2.0 * k * m.radius)) + 4;
}

/// Partial-wave amplitudes t_l = e^{i delta_l} sin(delta_l) for a hard
/// sphere: tan(delta_l) = j_l(kR) / y_l(kR), hence
/// t_l = j_l / (y_l - i j_l) evaluated without forming the tangent.
inline std::vector<Complex> hs_partial_amplitudes(const HardSphereModel& m, double k, int l_max) {
    std::vector<Complex> t(l_max + 1);
    const double x = k * m.radius;
    for (int l = 0; l <= l_max; ++l) {
        const double j = std::sph_bessel(static_cast<unsigned>(l), x);
        const double y = std::sph_neumann(static_cast<unsigned>(l), x);
        const double d2 = j * j + y * y;
        t[l] = Complex(j * y / d2, j * j / d2);
    }
    return t;
}

inline Complex hs_amplitude(const HardSphereModel& m, double k, double cos_theta) {
    if (k * m.radius < 1e-8) return Complex(-m.radius, 0.0);
    const int l_max = hs_l_max(m, k);
    const std::vector<Complex> t = hs_partial_amplitudes(m, k, l_max);
    // Legendre recurrence in cos_theta alongside the partial-wave sum.
    Complex acc(0.0, 0.0);
    double p_prev = 1.0;
    double p_curr = cos_theta;
    for (int l = 0; l <= l_max; ++l) {
        const double pl = (l == 0) ? 1.0 : (l == 1) ? cos_theta : p_curr;
        acc += (2.0 * l + 1.0) * t[l] * pl;
        if (l >= 1) {
            const double p_next =
                ((2.0 * l + 1.0) * cos_theta * p_curr - l * p_prev) / (l + 1.0);
            p_prev = p_curr;
            p_curr = p_next;
        }
    }
    return acc / k;
}

} // namespace detail

/// On-shell scattering amplitude f(p_out, p_in) for |p_out| = |p_in|.
/// Throws ContractViolation if the shell condition is violated beyond
/// k_shell_tolerance (relative).
inline Complex amplitude(const ScatteringModel& model, const Vec3& p_out, const Vec3& p_in) {
    QLB_REQUIRE(is_finite(p_out) && is_finite(p_in), "amplitude: momenta must be finite");
    const double ki = norm(p_in);
    const double ko = norm(p_out);
    const double scale = std::max(ki, ko);
    if (std::abs(ko - ki) > k_shell_tolerance * scale)
        throw ContractViolation("amplitude: momenta are off the elastic shell");
    const double k = 0.5 * (ki + ko);
    double cos_theta = 1.0;
    if (ki > 0.0 && ko > 0.0)
        cos_theta = std::clamp(dot(p_out, p_in) / (ko * ki), -1.0, 1.0);
    return std::visit(
        [&](const auto& m) -> Complex {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ConstantLengthModel>) {
                return Complex(-m.scattering_length, 0.0);
            } else if constexpr (std::is_same_v<T, BornGaussianModel>) {
                const double q2 = norm2(p_out - p_in);
                return Complex(-m.strength * std::exp(-q2 * m.width * m.width), 0.0);
            } else {
                return detail::hs_amplitude(m, k, cos_theta);
            }
        },
        model);
}

inline double differential_cross_section(const ScatteringModel& model, const Vec3& p_out,
                                         const Vec3& p_in) {
    return std::norm(amplitude(model, p_out, p_in));
}

/// Forward amplitude f(theta = 0) at wavenumber k.
inline Complex forward_amplitude(const ScatteringModel& model, double k) {
    const Vec3 p(0.0, 0.0, k);
    return amplitude(model, p, p);
}

/// Total cross section at wavenumber k, closed-form per model.
inline double total_cross_section(const ScatteringModel& model, double k) {
    QLB_REQUIRE(std::isfinite(k) && k >= 0.0, "total_cross_section: k must be >= 0");
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ConstantLengthModel>) {
                return 4.0 * M_PI * m.scattering_length * m.scattering_length;
            } else if constexpr (std::is_same_v<T, BornGaussianModel>) {
                const double s = m.strength;
                const double x = 8.0 * m.width * m.width * k * k;
                if (x < 1e-10) return 4.0 * M_PI * s * s * (1.0 - 0.5 * x);
                return 4.0 * M_PI * s * s * (-std::expm1(-x)) / x;
            } else {
                if (k * m.radius < 1e-8) return 4.0 * M_PI * m.radius * m.radius;
                const int l_max = detail::hs_l_max(m, k);
                const std::vector<Complex> t = detail::hs_partial_amplitudes(m, k, l_max);
                double acc = 0.0;
                for (int l = 0; l <= l_max; ++l) acc += (2.0 * l + 1.0) * std::norm(t[l]);
                return 4.0 * M_PI / (k * k) * acc;
            }
        },
        model);
}

/// Total cross section by angular quadrature of |f|^2.  Independent of
/// the closed forms above; used for cross-checks and the optical-theorem
/// consistency test.
inline double total_cross_section_quadrature(const ScatteringModel& model, double k,
                                             int n_nodes = 64) {
    QLB_REQUIRE(std::isfinite(k) && k > 0.0, "quadrature cross section needs k > 0");
    const GaussLegendre& g = gauss_legendre(n_nodes);
    const Vec3 p_in(0.0, 0.0, k);
    double acc = 0.0;
    for (int i = 0; i < n_nodes; ++i) {
        const double c = g.nodes[i];
        const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        const Vec3 p_out(k * s, 0.0, k * c);
        acc += g.weights[i] * std::norm(amplitude(model, p_out, p_in));
    }
    return 2.0 * M_PI * acc;
}

/// Upper bound on sigma(k) for k in [0, k_max]; used as a collision-rate
/// majorant.  Exact for the closed-form models, a padded scan otherwise.
inline double sigma_upper_bound(const ScatteringModel& model, double k_max) {
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ConstantLengthModel>) {
                return 4.0 * M_PI * m.scattering_length * m.scattering_length;
            } else if constexpr (std::is_same_v<T, BornGaussianModel>) {
                return 4.0 * M_PI * m.strength * m.strength;
            } else {
                double best = 4.0 * M_PI * m.radius * m.radius;
                for (int i = 1; i <= 64; ++i) {
                    const double k = k_max * i / 64.0;
                    best = std::max(best, total_cross_section(model, k));
                }
                return 1.02 * best;
            }
        },
        model);
}

/// Classical mean collision rate of a tracer at momentum P in the gas:
///   R(P) = n_gas * <sigma(|rel|) |rel| / m*>_mu
/// by tensor Gauss-Legendre over the Maxwell support.  The error field
/// compares against a half-order rule.
struct RateEstimate {
    double value = 0.0;
    double error = 0.0;
};

namespace detail {

/// Substituting the relative momentum q as the integration variable
/// makes the radial integrand smooth (the |q| factor folds into the
/// spherical volume element), so the rule converges spectrally.
inline double collision_rate_at_order(const GasSpec& gas, const TracerSpec& tracer,
                                      const ScatteringModel& model, const Vec3& P, int n) {
    const MaxwellMu mu = MaxwellMu::of(gas);
    const double m_star = tracer.reduced_mass(gas);
    const double r = tracer.mass_ratio(gas);
    const double p_mag = norm(P);
    const double q_cut = (mu.support_halfwidth() + r * p_mag) / (1.0 + r);
    const GaussLegendre& base = gauss_legendre(n);
    const GaussLegendre& ang = gauss_legendre(n);
    const double jac = std::pow(1.0 + r, 3);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double q = 0.5 * q_cut * (base.nodes[i] + 1.0);
        const double wq = 0.5 * q_cut * base.weights[i];
        const double sigma = total_cross_section(model, q);
        double ang_acc = 0.0;
        for (int j = 0; j < n; ++j) {
            const double c = ang.nodes[j];
            // |(1+r) q + r P|^2 with the polar axis along P.
            const double arg2 = (1.0 + r) * (1.0 + r) * q * q + r * r * p_mag * p_mag +
                                2.0 * r * (1.0 + r) * q * p_mag * c;
            const double p_t = mu.p_thermal();
            ang_acc += ang.weights[j] * std::exp(-arg2 / (p_t * p_t));
        }
        ang_acc /= std::pow(M_PI, 1.5) * std::pow(mu.p_thermal(), 3);
        acc += wq * q * q * sigma * q * ang_acc;
    }
    return gas.number_density * jac * 2.0 * M_PI * acc / m_star;
}

} // namespace detail

inline RateEstimate mean_collision_rate(const GasSpec& gas, const TracerSpec& tracer,
                                        const ScatteringModel& model, const Vec3& P,
                                        int n_nodes = 32) {
    gas.validate();
    tracer.validate();
    validate(model);
    QLB_REQUIRE(is_finite(P), "mean_collision_rate: P must be finite");
    QLB_REQUIRE(n_nodes >= 8, "mean_collision_rate: need at least 8 nodes per axis");
    const double value = detail::collision_rate_at_order(gas, tracer, model, P, n_nodes);
    const double coarse = detail::collision_rate_at_order(gas, tracer, model, P, n_nodes / 2);
    return {value, std::abs(value - coarse)};
}

/// Draw cos(theta) from the normalized differential cross section at
/// wavenumber k.
inline double sample_scattering_cosine(const ScatteringModel& model, double k, SplitMix64& rng) {
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ConstantLengthModel>) {
                (void)m;
                return 1.0 - 2.0 * rng.uniform();
            } else if constexpr (std::is_same_v<T, BornGaussianModel>) {
                const double s = 4.0 * m.width * m.width * k * k;
                if (s < 1e-9) return 1.0 - 2.0 * rng.uniform();
                const double e = std::exp(-2.0 * s);
                const double u = rng.uniform();
                const double c = 1.0 + std::log(e + u * (1.0 - e)) / s;
                return std::clamp(c, -1.0, 1.0);
            } else {
                if (k * m.radius < 1e-8) return 1.0 - 2.0 * rng.uniform();
                // Rejection sampling against a uniform proposal.  The scan
                // resolution tracks l_max so the forward peak is not missed.
                const int n_scan = 16 * detail::hs_l_max(m, k) + 17;
                double bound = 0.0;
                for (int i = 0; i <= n_scan; ++i) {
                    const double c = -1.0 + 2.0 * static_cast<double>(i) / n_scan;
                    bound = std::max(bound, std::norm(detail::hs_amplitude(m, k, c)));
                }
                bound *= 1.10;
                for (int iter = 0; iter < 100000; ++iter) {
                    const double c = 1.0 - 2.0 * rng.uniform();
                    const double v = rng.uniform() * bound;
                    if (v <= std::norm(detail::hs_amplitude(m, k, c))) return c;
                }
                throw Error("sample_scattering_cosine: rejection bound violated");
            }
        },
        model);
}

} // namespace qlb
