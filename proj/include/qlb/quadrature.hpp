#pragma once

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include "qlb/error.hpp"
#include "qlb/vec3.hpp"

namespace qlb {

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

inline GaussLegendre compute_gauss_legendre(int n) {
    QLB_REQUIRE(n >= 1, "quadrature order must be positive");
    GaussLegendre rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    if (n == 1) {
        rule.nodes[0] = 0.0;
        rule.weights[0] = 2.0;
        return rule;
    }
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Tricomi initial guess, then Newton on P_n.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 1.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int l = 2; l <= n; ++l) {
                const double p2 = ((2.0 * l - 1.0) * x * p1 - (l - 1.0) * p0) / l;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

} // namespace detail

/// Cached Gauss-Legendre rule of order n on [-1, 1].
inline const GaussLegendre& gauss_legendre(int n) {
    static std::mutex mutex;
    static std::map<int, GaussLegendre> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_legendre(n)).first;
    return it->second;
}

/// Gauss-Legendre rule scaled to [-halfwidth, +halfwidth].
inline GaussLegendre gauss_legendre_scaled(int n, double halfwidth) {
    const GaussLegendre& base = gauss_legendre(n);
    GaussLegendre rule = base;
    for (double& x : rule.nodes) x *= halfwidth;
    for (double& w : rule.weights) w *= halfwidth;
    return rule;
}

/// Orthonormal basis of the plane perpendicular to direction.
///
/// The first vector is built from the coordinate axis least aligned with
/// the direction (ties broken toward the lower axis index), so the basis
/// is a deterministic function of the direction alone.  Under
/// direction -> -direction, e1 is unchanged and e2 flips sign; together
/// with the +/- symmetric quadrature nodes this makes the transverse node
/// set identical for a momentum transfer and its reverse.
struct PlaneBasis {
    Vec3 e1;
    Vec3 e2;
};

inline PlaneBasis plane_basis(const Vec3& direction) {
    const double n2 = norm2(direction);
    if (!(n2 > 0.0) || !is_finite(direction))
        throw DegenerateDirection("plane_basis: direction must be finite and nonzero");
    const Vec3 u = direction / std::sqrt(n2);
    const std::array<double, 3> a = {std::abs(u.x), std::abs(u.y), std::abs(u.z)};
    int axis = 0;
    if (a[1] < a[axis]) axis = 1;
    if (a[2] < a[axis]) axis = 2;
    const Vec3 e = (axis == 0) ? Vec3{1, 0, 0} : (axis == 1) ? Vec3{0, 1, 0} : Vec3{0, 0, 1};
    Vec3 e1 = e - u * dot(e, u);
    e1 = e1 / norm(e1);
    const Vec3 e2 = cross(u, e1);
    return {e1, e2};
}

/// Mean of 1/|v| over the unit cube centered at the origin,
/// in closed form: 3 ln(2 + sqrt(3)) - pi / 2.
inline double zero_cell_average() {
    return 3.0 * std::log(2.0 + std::sqrt(3.0)) - M_PI / 2.0;
}

namespace detail {

/// Mean of 1/|n + u| over u in the unit cube, for integer offset n != 0.
/// Smooth integrand (the pole sits in the zero cell only), so a modest
/// tensor rule is exact to ~1e-10.
inline double offset_cell_average(int ix, int iy, int iz) {
    const GaussLegendre& g = gauss_legendre(16);
    double acc = 0.0;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
            for (int k = 0; k < 16; ++k) {
                const double x = ix + 0.5 * g.nodes[i];
                const double y = iy + 0.5 * g.nodes[j];
                const double z = iz + 0.5 * g.nodes[k];
                const double w = g.weights[i] * g.weights[j] * g.weights[k] * 0.125;
                acc += w / std::sqrt(x * x + y * y + z * z);
            }
    return acc;
}

} // namespace detail

/// Correction factor |n| * <1/|n + u|>_cell for the singular 1/Q weight
/// on a unit lattice: multiplying a node value 1/|n| by this factor turns
/// it into the exact cell average of 1/|.|.  Equals 1 for |n| >= 4
/// (cell averaging of a harmonic function reproduces the center value up
/// to quartic terms).  Symmetric under any sign flip or axis permutation
/// of n, which the cache key exploits.
inline double singular_cell_correction(int ix, int iy, int iz) {
    const long r2 = static_cast<long>(ix) * ix + static_cast<long>(iy) * iy +
                    static_cast<long>(iz) * iz;
    QLB_REQUIRE(r2 > 0, "singular_cell_correction: zero cell is handled separately");
    if (r2 >= 16) return 1.0;
    std::array<int, 3> key = {std::abs(ix), std::abs(iy), std::abs(iz)};
    if (key[0] > key[1]) std::swap(key[0], key[1]);
    if (key[1] > key[2]) std::swap(key[1], key[2]);
    if (key[0] > key[1]) std::swap(key[0], key[1]);
    static std::mutex mutex;
    static std::map<std::array<int, 3>, double> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it == cache.end()) {
        const double avg = detail::offset_cell_average(key[0], key[1], key[2]);
        it = cache.emplace(key, std::sqrt(static_cast<double>(r2)) * avg).first;
    }
    return it->second;
}

} // namespace qlb
