#pragma once

#include <complex>
#include <cstddef>
#include <cstdlib>
#include <vector>

#include "qlb/error.hpp"
#include "qlb/vec3.hpp"

namespace qlb {

/// Integer offset on the momentum lattice; doubles as a node coordinate
/// (relative to the grid center) and as a momentum-transfer index.
struct Offset {
    int x = 0;
    int y = 0;
    int z = 0;

    constexpr bool operator==(const Offset& o) const { return x == o.x && y == o.y && z == o.z; }
    constexpr bool operator!=(const Offset& o) const { return !(*this == o); }
    constexpr Offset operator+(const Offset& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Offset operator-(const Offset& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Offset operator-() const { return {-x, -y, -z}; }

    constexpr bool operator<(const Offset& o) const {
        if (x != o.x) return x < o.x;
        if (y != o.y) return y < o.y;
        return z < o.z;
    }

    constexpr long norm2() const {
        return static_cast<long>(x) * x + static_cast<long>(y) * y + static_cast<long>(z) * z;
    }
};

/// Uniform cubic momentum grid, n^3 nodes at spacing dp, centered on the
/// origin (n odd, so P = 0 is a node).  Node coordinates run over
/// [-h, h]^3 with h = (n-1)/2.
class MomentumGrid {
public:
    MomentumGrid() = default;

    static MomentumGrid make(int n, double extent) {
        QLB_REQUIRE(extent > 0.0 && std::isfinite(extent), "grid extent must be positive");
        return make_with_spacing(n, 2.0 * extent / (n - 1));
    }

    static MomentumGrid make_with_spacing(int n, double spacing) {
        QLB_REQUIRE(n >= 3 && n % 2 == 1, "grid size must be odd and >= 3");
        QLB_REQUIRE(spacing > 0.0 && std::isfinite(spacing), "grid spacing must be positive");
        MomentumGrid g;
        g.n_ = n;
        g.dp_ = spacing;
        return g;
    }

    int n() const { return n_; }
    int half() const { return (n_ - 1) / 2; }
    double spacing() const { return dp_; }
    double extent() const { return dp_ * half(); }
    double cell_volume() const { return dp_ * dp_ * dp_; }
    std::size_t size() const {
        return static_cast<std::size_t>(n_) * n_ * n_;
    }

    bool contains(const Offset& c) const {
        const int h = half();
        return std::abs(c.x) <= h && std::abs(c.y) <= h && std::abs(c.z) <= h;
    }

    Vec3 point(const Offset& c) const { return {c.x * dp_, c.y * dp_, c.z * dp_}; }

    /// Linear index; x outermost, z innermost.
    std::size_t index(const Offset& c) const {
        const int h = half();
        return (static_cast<std::size_t>(c.x + h) * n_ + (c.y + h)) * n_ + (c.z + h);
    }

    Offset node(std::size_t idx) const {
        const int h = half();
        const int z = static_cast<int>(idx % n_);
        const int y = static_cast<int>((idx / n_) % n_);
        const int x = static_cast<int>(idx / (static_cast<std::size_t>(n_) * n_));
        return {x - h, y - h, z - h};
    }

    bool operator==(const MomentumGrid& o) const { return n_ == o.n_ && dp_ == o.dp_; }

    /// All nonzero momentum-transfer offsets with |q| * dp <= q_max that
    /// connect at least one pair of grid nodes, in lexicographic order.
    /// The set is symmetric under q -> -q.
    std::vector<Offset> transfer_lattice(double q_max) const {
        QLB_REQUIRE(q_max > 0.0, "q_max must be positive");
        const int reach = n_ - 1;
        const double r2_max = (q_max / dp_) * (q_max / dp_);
        std::vector<Offset> lattice;
        for (int x = -reach; x <= reach; ++x)
            for (int y = -reach; y <= reach; ++y)
                for (int z = -reach; z <= reach; ++z) {
                    const Offset q{x, y, z};
                    if (q.norm2() == 0) continue;
                    if (static_cast<double>(q.norm2()) <= r2_max) lattice.push_back(q);
                }
        return lattice;
    }

private:
    int n_ = 0;
    double dp_ = 0.0;
};

/// One momentum-offset sector of the density matrix: the values
/// rho(P, P - delta) for all grid nodes P with both P and P - delta on
/// the grid.  Stored over the full grid layout; entries outside the
/// sector support are identically zero.
struct SectorState {
    MomentumGrid grid;
    Offset delta;
    double time = 0.0;
    std::vector<std::complex<double>> field;

    static SectorState zero(const MomentumGrid& grid, const Offset& delta) {
        QLB_REQUIRE(grid.n() >= 3, "grid must be initialized");
        SectorState s;
        s.grid = grid;
        s.delta = delta;
        s.field.assign(grid.size(), {0.0, 0.0});
        return s;
    }

    bool in_support(const Offset& c) const {
        return grid.contains(c) && grid.contains(c - delta);
    }
};

} // namespace qlb
