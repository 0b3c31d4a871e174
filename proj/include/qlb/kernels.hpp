#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "qlb/core.hpp"
#include "qlb/error.hpp"
#include "qlb/grid.hpp"
#include "qlb/parallel.hpp"
#include "qlb/quadrature.hpp"
#include "qlb/scattering.hpp"
#include "qlb/vec3.hpp"

namespace qlb {

/// Transverse-plane quadrature: n_nodes Gauss-Legendre points per axis on
/// [-cutoff * p_thermal, +cutoff * p_thermal].  The integrand carries a
/// centered Gaussian of width p_thermal in this plane whatever the outer
/// momenta are, so a fixed cutoff of 6 keeps the truncation below e^-36
/// while letting every kernel evaluation share one node set.  Shared
/// nodes are what make the discrete gain/loss balance exact.
struct QuadratureSpec {
    int n_nodes = 24;
    double cutoff = 6.0;

    void validate() const {
        QLB_REQUIRE(n_nodes >= 4, "quadrature needs at least 4 nodes per axis");
        QLB_REQUIRE(std::isfinite(cutoff) && cutoff >= 3.0, "quadrature cutoff must be >= 3");
    }

    bool operator==(const QuadratureSpec& o) const {
        return n_nodes == o.n_nodes && cutoff == o.cutoff;
    }
};

/// Factors of one gain-kernel amplitude F(K; P; Q): the scattering
/// amplitude at the constrained relative momenta, the root of the gas
/// distribution at the constrained gas momentum, and the constant
/// prefactor sqrt(n_gas m) / m*.
struct FParts {
    Complex amplitude{0.0, 0.0};
    double mu_sqrt = 0.0;
    double prefactor = 0.0;
    Vec3 p_out{};
    Vec3 p_in{};

    Complex value() const { return amplitude * (mu_sqrt * prefactor); }
};

/// Evaluates gain-kernel amplitudes and their pair contractions for one
/// fixed set of physics parameters.  Binds the specs once so table
/// builders and operator evaluations cannot drift apart.
class KernelEvaluator {
public:
    KernelEvaluator(const GasSpec& gas, const TracerSpec& tracer, const ScatteringModel& model,
                    const QuadratureSpec& quad)
        : gas_(gas),
          tracer_(tracer),
          model_(model),
          quad_(quad),
          mu_(MaxwellMu::of(gas)),
          rule_(gauss_legendre_scaled(quad.n_nodes, quad.cutoff * gas.p_thermal())) {
        gas_.validate();
        tracer_.validate();
        qlb::validate(model_);
        quad_.validate();
        r_ = tracer_.mass_ratio(gas_);
        m_star_ = tracer_.reduced_mass(gas_);
        prefactor_ = std::sqrt(gas_.number_density * gas_.mass) / m_star_;
        const ConstantLengthModel* cl = std::get_if<ConstantLengthModel>(&model_);
        fast_ = (cl != nullptr);
        if (fast_) {
            const double p_t = gas_.p_thermal();
            double g1 = 0.0;
            for (std::size_t i = 0; i < rule_.nodes.size(); ++i)
                g1 += rule_.weights[i] *
                      std::exp(-rule_.nodes[i] * rule_.nodes[i] / (p_t * p_t));
            fast_scale_ = gas_.number_density * gas_.mass / (m_star_ * m_star_) *
                          cl->scattering_length * cl->scattering_length * g1 * g1 /
                          (std::pow(M_PI, 1.5) * p_t * p_t * p_t);
        }
    }

    const GasSpec& gas() const { return gas_; }
    const TracerSpec& tracer() const { return tracer_; }
    const ScatteringModel& model() const { return model_; }
    const QuadratureSpec& quad() const { return quad_; }
    bool has_separable_fast_path() const { return fast_; }

    /// F(K; P; Q), split into factors.  All projections are taken w.r.t.
    /// the direction of Q; the gas momentum argument is fixed by energy
    /// and momentum conservation, so the amplitude is on shell by
    /// construction.
    FParts eval_F_parts(const Vec3& K, const Vec3& P, const Vec3& Q) const {
        QLB_REQUIRE(is_finite(K) && is_finite(P), "eval_F: momenta must be finite");
        const double q2 = norm2(Q);
        if (!(q2 > 0.0) || !is_finite(Q))
            throw DegenerateDirection("eval_F: momentum transfer must be nonzero");
        const double q_mag = std::sqrt(q2);
        const Vec3 q_hat = Q / q_mag;
        const Vec3 k_perp = K - q_hat * dot(K, q_hat);
        const double p_par_mag = dot(P, q_hat);
        const Vec3 p_par = q_hat * p_par_mag;
        const Vec3 p_perp = P - p_par;
        const Vec3 rel = (k_perp - r_ * p_perp) / (1.0 + r_);
        const Vec3 p_out = rel - Q * 0.5;
        const Vec3 p_in = rel + Q * 0.5;
        FParts parts;
        parts.amplitude = qlb::amplitude(model_, p_out, p_in);
        parts.p_out = p_out;
        parts.p_in = p_in;
        const Vec3 mu_arg = k_perp + q_hat * (0.5 * (1.0 + r_) * q_mag) + p_par * r_;
        parts.mu_sqrt = mu_.sqrt_density(mu_arg);
        parts.prefactor = prefactor_;
        return parts;
    }

    Complex eval_F(const Vec3& K, const Vec3& P, const Vec3& Q) const {
        return eval_F_parts(K, P, Q).value();
    }

    /// Gain kernel m_in(P, P'; Q): transverse-plane contraction of two
    /// F amplitudes over the shared Gauss-Legendre node set, divided by
    /// |Q|.  A Gram inner product, so the diagonal is real and the
    /// two-sided Cauchy-Schwarz bound holds with rounding-level slack.
    Complex m_in(const Vec3& P, const Vec3& P_prime, const Vec3& Q) const {
        if (fast_) return Complex(m_in_fast(P, P_prime, Q), 0.0);
        return m_in_generic(P, P_prime, Q);
    }

    /// Same kernel addressed by midpoint and separation:
    /// m_in(mid + sep/2, mid - sep/2; Q).
    Complex m_in_from_midpoint(const Vec3& mid, const Vec3& sep, const Vec3& Q) const {
        return m_in(mid + sep * 0.5, mid - sep * 0.5, Q);
    }

    double m_in_diagonal(const Vec3& P, const Vec3& Q) const {
        if (fast_) return m_in_fast(P, P, Q);
        return m_in_generic_diagonal(P, Q);
    }

    /// Classical (diagonal) gain kernel by the pinned-gas-momentum route:
    /// the longitudinal gas component is fixed at the value the kernel's
    /// energy constraint selects, and the integrand is the classical
    /// density mu times the differential cross section.  Shares no code
    /// with m_in; agreement of the two routes is an acceptance check.
    double m_in_classical(const Vec3& P, const Vec3& Q) const {
        const double q2 = norm2(Q);
        if (!(q2 > 0.0) || !is_finite(Q))
            throw DegenerateDirection("m_in_classical: momentum transfer must be nonzero");
        const double q_mag = std::sqrt(q2);
        const Vec3 q_hat = Q / q_mag;
        const double kappa0 =
            0.5 * (1.0 + r_) * q_mag + r_ * (dot(P, q_hat) - q_mag);
        const PlaneBasis basis = plane_basis(Q);
        const Vec3 source = P - Q;
        const int n = quad_.n_nodes;
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const Vec3 gas_p =
                    basis.e1 * rule_.nodes[i] + basis.e2 * rule_.nodes[j] + q_hat * kappa0;
                const Vec3 p_in = relative_momentum(gas_p, source, gas_, tracer_);
                const Vec3 p_out = p_in - Q;
                acc += rule_.weights[i] * rule_.weights[j] * mu_.density(gas_p) *
                       differential_cross_section(model_, p_out, p_in);
            }
        return acc * gas_.number_density * gas_.mass / (m_star_ * m_star_ * q_mag);
    }

    /// Zero-cell pair kernel limit: the angular average over the six
    /// axis directions of |Q| * m_in(P, P'; Q) as |Q| -> 0.  Multiplied
    /// by the zero-cell average of 1/|Q| at the table level, it becomes
    /// the sub-resolution self-transfer rate density.
    Complex self_pair_limit(const Vec3& P, const Vec3& P_prime) const {
        const double delta = 1e-6 * gas_.p_thermal();
        static const Vec3 dirs[6] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                     {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        Complex acc(0.0, 0.0);
        for (const Vec3& d : dirs) acc += m_in(P, P_prime, d * delta) * delta;
        return acc / 6.0;
    }

private:
    double m_in_fast(const Vec3& P, const Vec3& P_prime, const Vec3& Q) const {
        const double q2 = norm2(Q);
        if (!(q2 > 0.0) || !is_finite(Q))
            throw DegenerateDirection("m_in: momentum transfer must be nonzero");
        const double q_mag = std::sqrt(q2);
        const double p_t = gas_.p_thermal();
        const double inv_q = 1.0 / q_mag;
        const double s = 0.5 * (1.0 + r_) * q_mag + r_ * (dot(P, Q) * inv_q - q_mag);
        const double s_p = 0.5 * (1.0 + r_) * q_mag + r_ * (dot(P_prime, Q) * inv_q - q_mag);
        return fast_scale_ * inv_q * std::exp(-0.5 * (s * s + s_p * s_p) / (p_t * p_t));
    }

    Complex m_in_generic(const Vec3& P, const Vec3& P_prime, const Vec3& Q) const {
        const double q_mag = norm(Q);
        const PlaneBasis basis = plane_basis(Q);
        const Vec3 source_a = P - Q;
        const Vec3 source_b = P_prime - Q;
        const int n = quad_.n_nodes;
        Complex acc(0.0, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const Vec3 K = basis.e1 * rule_.nodes[i] + basis.e2 * rule_.nodes[j];
                const Complex fa = eval_F(K, source_a, Q);
                const Complex fb = eval_F(K, source_b, Q);
                // Form the node product before scaling by the (real) weight;
                // this keeps the value exactly conjugate under P <-> P'.
                acc += (fa * std::conj(fb)) * (rule_.weights[i] * rule_.weights[j]);
            }
        return acc / q_mag;
    }

    double m_in_generic_diagonal(const Vec3& P, const Vec3& Q) const {
        const double q_mag = norm(Q);
        const PlaneBasis basis = plane_basis(Q);
        const Vec3 source = P - Q;
        const int n = quad_.n_nodes;
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const Vec3 K = basis.e1 * rule_.nodes[i] + basis.e2 * rule_.nodes[j];
                acc += rule_.weights[i] * rule_.weights[j] * std::norm(eval_F(K, source, Q));
            }
        return acc / q_mag;
    }

    GasSpec gas_;
    TracerSpec tracer_;
    ScatteringModel model_;
    QuadratureSpec quad_;
    MaxwellMu mu_;
    GaussLegendre rule_;
    double r_ = 0.0;
    double m_star_ = 0.0;
    double prefactor_ = 0.0;
    bool fast_ = false;
    double fast_scale_ = 0.0;
};

/// Retained (on-grid) and escaped (off-grid) parts of the discrete
/// out-rate column sum at one node.
struct OutRates {
    double retained = 0.0;
    double escaped = 0.0;
};

/// Discrete classical out-rate at grid node `c`: the column sum of the
/// diagonal gain kernel over the transfer lattice, cell-corrected, plus
/// the zero-cell self term.  The same function supplies the decay rates
/// of the evolution generator, so gain and loss always balance.
inline OutRates out_rates_at(const KernelEvaluator& eval, const MomentumGrid& grid,
                             const std::vector<Offset>& lattice, const Offset& c) {
    const double dv = grid.cell_volume();
    const double dp = grid.spacing();
    const Vec3 P = grid.point(c);
    OutRates rates;
    for (const Offset& q : lattice) {
        const Vec3 Q = grid.point(q);
        const double cc = singular_cell_correction(q.x, q.y, q.z);
        const Offset target = c + q;
        const double val =
            eval.m_in_diagonal(grid.point(target), Q) * cc * dv;
        if (grid.contains(target))
            rates.retained += val;
        else
            rates.escaped += val;
    }
    rates.retained += eval.self_pair_limit(P, P).real() * zero_cell_average() / dp * dv;
    return rates;
}

/// Tabulated gain kernel for one sector offset: entries
///   T[q][p] = m_in(P_p, P_p - delta; Q_q) * cell_correction(q)
/// over the full transfer lattice, plus zero-cell self terms, decay
/// column sums, and escape rates.  Entries with P outside the sector
/// support are zero.  Layout is Q-major in memory.
struct KernelTable {
    MomentumGrid grid;
    Offset delta;
    double q_max = 0.0;
    QuadratureSpec quad;
    GasSpec gas;
    TracerSpec tracer;
    ScatteringModel model;
    std::vector<Offset> lattice;
    bool real_valued = false;
    std::vector<double> re;
    std::vector<double> im;
    std::vector<double> self_re;
    std::vector<double> self_im;
    std::vector<double> out_rate;
    std::vector<double> escape_rate;

    std::size_t entry_index(std::size_t qi, std::size_t pi) const {
        return qi * grid.size() + pi;
    }

    Complex entry(std::size_t qi, std::size_t pi) const {
        const std::size_t k = entry_index(qi, pi);
        return {re[k], real_valued ? 0.0 : im[k]};
    }

    Complex self_entry(std::size_t pi) const {
        return {self_re[pi], real_valued ? 0.0 : self_im[pi]};
    }

    double max_out_rate() const {
        double m = 0.0;
        for (double v : out_rate) m = std::max(m, v);
        return m;
    }
};

struct TabulateOptions {
    int workers = 0;
};

/// Build the kernel table for one sector offset.
inline KernelTable tabulate(const MomentumGrid& grid, const Offset& delta, const GasSpec& gas,
                            const TracerSpec& tracer, const ScatteringModel& model,
                            const QuadratureSpec& quad, double q_max,
                            const TabulateOptions& opts = {}) {
    QLB_REQUIRE(grid.n() >= 3, "tabulate: grid must be initialized");
    QLB_REQUIRE(std::abs(delta.x) < grid.n() && std::abs(delta.y) < grid.n() &&
                    std::abs(delta.z) < grid.n(),
                "tabulate: sector offset leaves no supported nodes");
    QLB_REQUIRE(q_max >= grid.spacing(),
                "tabulate: q_max must cover at least one lattice spacing");

    const KernelEvaluator eval(gas, tracer, model, quad);
    KernelTable table;
    table.grid = grid;
    table.delta = delta;
    table.q_max = q_max;
    table.quad = quad;
    table.gas = gas;
    table.tracer = tracer;
    table.model = model;
    table.lattice = grid.transfer_lattice(q_max);
    table.real_valued = std::holds_alternative<ConstantLengthModel>(model) ||
                        std::holds_alternative<BornGaussianModel>(model);

    const std::size_t np = grid.size();
    const std::size_t nq = table.lattice.size();
    table.re.assign(nq * np, 0.0);
    if (!table.real_valued) table.im.assign(nq * np, 0.0);
    table.self_re.assign(np, 0.0);
    if (!table.real_valued) table.self_im.assign(np, 0.0);
    table.out_rate.assign(np, 0.0);
    table.escape_rate.assign(np, 0.0);

    const Vec3 delta_vec = grid.point(delta);

    parallel_for(nq, opts.workers, [&](std::size_t qa, std::size_t qb) {
        for (std::size_t qi = qa; qi < qb; ++qi) {
            const Offset q = table.lattice[qi];
            const Vec3 Q = grid.point(q);
            const double cc = singular_cell_correction(q.x, q.y, q.z);
            double* row_re = table.re.data() + qi * np;
            double* row_im = table.real_valued ? nullptr : table.im.data() + qi * np;
            for (std::size_t pi = 0; pi < np; ++pi) {
                const Offset c = grid.node(pi);
                if (!grid.contains(c - delta)) continue;
                const Vec3 P = grid.point(c);
                const Complex v = eval.m_in(P, P - delta_vec, Q) * cc;
                row_re[pi] = v.real();
                if (row_im) row_im[pi] = v.imag();
            }
        }
    });

    const double self_scale = zero_cell_average() / grid.spacing();
    parallel_for(np, opts.workers, [&](std::size_t pa, std::size_t pb) {
        for (std::size_t pi = pa; pi < pb; ++pi) {
            const Offset c = grid.node(pi);
            if (grid.contains(c - delta)) {
                const Vec3 P = grid.point(c);
                const Complex s = eval.self_pair_limit(P, P - delta_vec) * self_scale;
                table.self_re[pi] = s.real();
                if (!table.real_valued) table.self_im[pi] = s.imag();
            }
            const OutRates rates = out_rates_at(eval, grid, table.lattice, c);
            table.out_rate[pi] = rates.retained;
            table.escape_rate[pi] = rates.escaped;
        }
    });

    return table;
}

} // namespace qlb
