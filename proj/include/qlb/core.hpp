#pragma once

#include <cmath>
#include <limits>

#include "qlb/error.hpp"
#include "qlb/quadrature.hpp"
#include "qlb/rng.hpp"
#include "qlb/vec3.hpp"

namespace qlb {

/// Background gas parameters.  Works in units with hbar = k_B = 1; the
/// thermal momentum scale is derived, never stored, so the relation
/// p_thermal = sqrt(2 m T) holds by construction.
struct GasSpec {
    double mass = 1.0;
    double number_density = 1.0;
    double temperature = 1.0;

    double p_thermal() const { return std::sqrt(2.0 * mass * temperature); }

    void validate() const {
        QLB_REQUIRE(std::isfinite(mass) && mass > 0.0, "gas mass must be positive");
        QLB_REQUIRE(std::isfinite(number_density) && number_density > 0.0,
                    "gas number density must be positive");
        QLB_REQUIRE(std::isfinite(temperature) && temperature > 0.0,
                    "gas temperature must be positive");
    }
};

/// Tracer particle.  The infinite-mass limit is a first-class state: all
/// kinematic formulas are written in terms of the mass ratio r = m/M,
/// which is exactly 0 for an infinite tracer mass.
struct TracerSpec {
    double mass = 1.0;

    static TracerSpec finite(double mass) {
        QLB_REQUIRE(std::isfinite(mass) && mass > 0.0, "tracer mass must be positive and finite");
        return TracerSpec{mass};
    }

    static TracerSpec infinite() {
        return TracerSpec{std::numeric_limits<double>::infinity()};
    }

    bool is_infinite() const { return std::isinf(mass); }

    /// r = m_gas / M_tracer; exactly 0 for an infinite tracer.
    double mass_ratio(const GasSpec& gas) const { return gas.mass / mass; }

    /// Reduced mass m_gas M / (m_gas + M) = m_gas / (1 + r); equals m_gas
    /// exactly in the infinite-mass limit.
    double reduced_mass(const GasSpec& gas) const {
        return gas.mass / (1.0 + mass_ratio(gas));
    }

    /// Kinetic-energy prefactor 1/(2M); exactly 0 for an infinite tracer.
    double inv_two_mass() const { return 0.5 / mass; }

    void validate() const {
        QLB_REQUIRE(mass > 0.0 && !std::isnan(mass), "tracer mass must be positive");
    }
};

/// Relative momentum of a gas particle (momentum p) and the tracer
/// (momentum P): rel = (m*/m) p - (m*/M) P = (p - r P) / (1 + r).
inline Vec3 relative_momentum(const Vec3& p, const Vec3& P, const GasSpec& gas,
                              const TracerSpec& tracer) {
    const double r = tracer.mass_ratio(gas);
    return (p - r * P) / (1.0 + r);
}

/// Split v into components parallel and perpendicular to `direction`.
struct Decomposition {
    Vec3 parallel;
    Vec3 perpendicular;
};

inline Decomposition decompose(const Vec3& v, const Vec3& direction) {
    const double n2 = norm2(direction);
    if (!(n2 > 0.0) || !is_finite(direction))
        throw DegenerateDirection("decompose: direction must be finite and nonzero");
    const Vec3 par = direction * (dot(v, direction) / n2);
    return {par, v - par};
}

/// Maxwell-Boltzmann momentum distribution
///   mu(p) = exp(-p^2 / p_th^2) / (pi^{3/2} p_th^3),
/// normalized to unit integral over momentum space.
class MaxwellMu {
public:
    explicit MaxwellMu(double p_thermal) : p_th_(p_thermal) {
        QLB_REQUIRE(std::isfinite(p_thermal) && p_thermal > 0.0,
                    "thermal momentum must be positive");
        norm_ = 1.0 / (std::pow(M_PI, 1.5) * p_th_ * p_th_ * p_th_);
    }

    static MaxwellMu of(const GasSpec& gas) { return MaxwellMu(gas.p_thermal()); }

    double p_thermal() const { return p_th_; }

    double density(const Vec3& p) const { return norm_ * std::exp(-norm2(p) / (p_th_ * p_th_)); }

    double sqrt_density(const Vec3& p) const {
        return std::sqrt(norm_) * std::exp(-0.5 * norm2(p) / (p_th_ * p_th_));
    }

    /// Half-width beyond which the density is < e^-36 of its peak; used
    /// as the transverse quadrature cutoff.
    double support_halfwidth() const { return 6.0 * p_th_; }

private:
    double p_th_;
    double norm_;
};

/// Draw one gas momentum from mu.  Consumes two Box-Muller pairs (four
/// normals); the fourth is discarded to keep the per-draw stream layout
/// fixed.
inline Vec3 sample_mu(const GasSpec& gas, SplitMix64& rng) {
    const double sigma = gas.p_thermal() / std::sqrt(2.0);
    const NormalPair ab = normal_pair(rng);
    const NormalPair cd = normal_pair(rng);
    return {sigma * ab.a, sigma * ab.b, sigma * cd.a};
}

} // namespace qlb
