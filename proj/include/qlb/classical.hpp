#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "qlb/core.hpp"
#include "qlb/error.hpp"
#include "qlb/grid.hpp"
#include "qlb/kernels.hpp"
#include "qlb/parallel.hpp"
#include "qlb/rng.hpp"
#include "qlb/scattering.hpp"

namespace qlb {

// ---------------------------------------------------------------------
// Grid solver for the classical linear Boltzmann equation.
//
// Uses the diagonal kernel table but applies it through its own real
// arithmetic loops (straightforward per-target traversal with explicit
// bounds checks), deliberately sharing no code with the quantum
// evolution path.  Agreement of the two on diagonal data is a
// cross-validation target, not a tautology.

/// d/dt w = gain - loss on the grid, written into deriv.
inline void classical_apply(const KernelTable& table, const std::vector<double>& w,
                            std::vector<double>& deriv, int workers = 0) {
    QLB_REQUIRE(table.delta == Offset{}, "classical_apply: needs the diagonal kernel table");
    const MomentumGrid& grid = table.grid;
    const std::size_t np = grid.size();
    QLB_REQUIRE(w.size() == np, "classical_apply: field size mismatch");
    deriv.assign(np, 0.0);
    const double dv = grid.cell_volume();
    const std::size_t nq = table.lattice.size();

    parallel_for(np, workers, [&](std::size_t pa, std::size_t pb) {
        for (std::size_t p = pa; p < pb; ++p) {
            const Offset c = grid.node(p);
            double acc = table.self_re[p] * w[p];
            for (std::size_t qi = 0; qi < nq; ++qi) {
                const Offset source = c - table.lattice[qi];
                if (!grid.contains(source)) continue;
                acc += table.re[qi * np + p] * w[grid.index(source)];
            }
            deriv[p] = dv * acc - table.out_rate[p] * w[p];
        }
    });
}

/// One RK4 step of the classical equation.
inline void classical_step(const KernelTable& table, std::vector<double>& w, double dt,
                           int workers = 0) {
    QLB_REQUIRE(dt > 0.0 && dt <= 0.1 / table.max_out_rate() * (1.0 + 1e-12),
                "classical step exceeds the stability bound 0.1 / max out-rate");
    const std::size_t np = w.size();
    std::vector<double> k1, k2, k3, k4, tmp(np);
    classical_apply(table, w, k1, workers);
    for (std::size_t i = 0; i < np; ++i) tmp[i] = w[i] + 0.5 * dt * k1[i];
    classical_apply(table, tmp, k2, workers);
    for (std::size_t i = 0; i < np; ++i) tmp[i] = w[i] + 0.5 * dt * k2[i];
    classical_apply(table, tmp, k3, workers);
    for (std::size_t i = 0; i < np; ++i) tmp[i] = w[i] + dt * k3[i];
    classical_apply(table, tmp, k4, workers);
    for (std::size_t i = 0; i < np; ++i)
        w[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

struct ClassicalRecord {
    long step = 0;
    double time = 0.0;
    double trace = 0.0;
    double energy = 0.0;
    double min_w = 0.0;
};

/// Evolve classical weights, sampling moments every record_stride steps.
inline std::vector<ClassicalRecord> classical_evolve(const KernelTable& table,
                                                     std::vector<double>& w,
                                                     const TracerSpec& tracer, double dt,
                                                     long n_steps, int record_stride = 1,
                                                     int workers = 0) {
    QLB_REQUIRE(record_stride >= 1, "classical_evolve: record stride must be >= 1");
    const MomentumGrid& grid = table.grid;
    const double dv = grid.cell_volume();
    const double inv2m = tracer.inv_two_mass();
    std::vector<ClassicalRecord> records;
    const auto sample = [&](long step, double time) {
        ClassicalRecord r;
        r.step = step;
        r.time = time;
        r.min_w = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < w.size(); ++p) {
            r.trace += w[p];
            r.energy += w[p] * norm2(grid.point(grid.node(p)));
            r.min_w = std::min(r.min_w, w[p]);
        }
        r.trace *= dv;
        r.energy *= dv * inv2m;
        return r;
    };
    records.push_back(sample(0, 0.0));
    for (long step = 1; step <= n_steps; ++step) {
        classical_step(table, w, dt, workers);
        if (step % record_stride == 0 || step == n_steps)
            records.push_back(sample(step, step * dt));
    }
    return records;
}

// ---------------------------------------------------------------------
// Direct simulation Monte Carlo for the same kinetics.

/// Null-collision majorant for the per-particle collision rate at tracer
/// momentum P.  Bounds n sigma(k_rel) v_rel for every gas partner the
/// thermal sampler can produce in practice; the acceptance-ratio guard
/// in the run loop turns the (probability ~ e^-64) tail breach into a
/// hard error instead of a silent bias.
inline double rate_majorant(const GasSpec& gas, const TracerSpec& tracer,
                            const ScatteringModel& model, const Vec3& P) {
    const double r = tracer.mass_ratio(gas);
    const double k_up = (8.0 * gas.p_thermal() + r * norm(P)) / (1.0 + r);
    const double v_up =
        2.0 * tracer.inv_two_mass() * norm(P) + 8.0 * gas.p_thermal() / gas.mass;
    return gas.number_density * sigma_upper_bound(model, k_up) * v_up;
}

/// Kinematics of one accepted collision with a given gas partner: draws
/// the outgoing relative direction from the differential cross section
/// and returns all post-collision momenta.  Momentum and energy are
/// conserved identically by construction.
struct CollisionEvent {
    Vec3 tracer_out;
    Vec3 gas_out;
    double k_rel = 0.0;
    double cos_theta = 1.0;
};

inline CollisionEvent collide_with_partner(const Vec3& P, const Vec3& p_gas, const GasSpec& gas,
                                           const TracerSpec& tracer,
                                           const ScatteringModel& model, SplitMix64& rng) {
    const Vec3 p_rel = relative_momentum(p_gas, P, gas, tracer);
    const double k = norm(p_rel);
    CollisionEvent ev;
    ev.k_rel = k;
    if (k == 0.0) {
        ev.tracer_out = P;
        ev.gas_out = p_gas;
        return ev;
    }
    // Wavenumber equals the relative momentum magnitude with hbar = 1.
    const double c = sample_scattering_cosine(model, k, rng);
    const double phi = 2.0 * M_PI * rng.uniform();
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    const PlaneBasis basis = plane_basis(p_rel);
    const Vec3 dir = p_rel / k;
    const Vec3 p_rel_out =
        (dir * c + basis.e1 * (s * std::cos(phi)) + basis.e2 * (s * std::sin(phi))) * k;
    const Vec3 transfer = p_rel - p_rel_out;
    ev.cos_theta = c;
    ev.tracer_out = P + transfer;
    ev.gas_out = p_gas - transfer;
    return ev;
}

struct DsmcOptions {
    std::size_t n_particles = 100000;
    double t_final = 1.0;
    double snapshot_dt = 0.1;
    std::uint64_t seed = 1;
    int workers = 0;
};

struct DsmcMoments {
    double mean_energy = 0.0;
    double se_energy = 0.0;
    double mean_abs_p = 0.0;
    Vec3 mean_p;
};

struct DsmcResult {
    std::vector<double> times;
    std::vector<DsmcMoments> moments;
    std::vector<double> hist_edges;
    std::vector<double> hist_density;   // final |P| histogram, unit mass
    std::uint64_t proposed_events = 0;
    std::uint64_t accepted_events = 0;
    double max_accept_ratio = 0.0;
};

namespace detail {

/// Per-1024-particle blocks: partial sums are formed per block in index
/// order and combined across blocks in index order, so reductions are
/// bitwise identical for any worker count.
inline constexpr std::size_t k_dsmc_block = 1024;

struct DsmcBlockAccum {
    std::vector<double> energy;     // [snapshot * n_blocks + block]
    std::vector<double> energy_sq;
    std::vector<double> abs_p;
    std::vector<double> px, py, pz;
    std::vector<std::uint64_t> hist; // [bin * n_blocks + block]
    std::uint64_t proposed = 0;
    std::uint64_t accepted = 0;
    double max_ratio = 0.0;
};

} // namespace detail

/// Run the DSMC ensemble.  Each particle owns a derived RNG stream, so
/// trajectories are a pure function of (seed, particle index).
inline DsmcResult dsmc_run(const GasSpec& gas, const TracerSpec& tracer,
                           const ScatteringModel& model, const DsmcOptions& options,
                           const std::function<Vec3(SplitMix64&)>& initial_momentum) {
    gas.validate();
    tracer.validate();
    validate(model);
    QLB_REQUIRE(options.n_particles >= 1000, "dsmc: ensemble too small to be meaningful");
    QLB_REQUIRE(options.t_final > 0.0 && options.snapshot_dt > 0.0, "dsmc: bad time grid");

    const std::size_t n_snapshots =
        static_cast<std::size_t>(std::floor(options.t_final / options.snapshot_dt + 1e-9)) + 1;
    const std::size_t n_blocks =
        (options.n_particles + detail::k_dsmc_block - 1) / detail::k_dsmc_block;
    const double m_star = tracer.reduced_mass(gas);
    const double inv2m = tracer.inv_two_mass();

    const int n_bins = 60;
    const double hist_max = 6.0 * std::max(gas.p_thermal(),
                                           std::sqrt(2.0 * gas.temperature *
                                                     (tracer.is_infinite() ? gas.mass : tracer.mass)));

    detail::DsmcBlockAccum acc;
    acc.energy.assign(n_snapshots * n_blocks, 0.0);
    acc.energy_sq.assign(n_snapshots * n_blocks, 0.0);
    acc.abs_p.assign(n_snapshots * n_blocks, 0.0);
    acc.px.assign(n_snapshots * n_blocks, 0.0);
    acc.py.assign(n_snapshots * n_blocks, 0.0);
    acc.pz.assign(n_snapshots * n_blocks, 0.0);
    acc.hist.assign(static_cast<std::size_t>(n_bins) * n_blocks, 0);

    std::vector<std::uint64_t> block_proposed(n_blocks, 0);
    std::vector<std::uint64_t> block_accepted(n_blocks, 0);
    std::vector<double> block_max_ratio(n_blocks, 0.0);

    parallel_for(n_blocks, options.workers, [&](std::size_t ba, std::size_t bb) {
        for (std::size_t block = ba; block < bb; ++block) {
            const std::size_t i0 = block * detail::k_dsmc_block;
            const std::size_t i1 =
                std::min(options.n_particles, i0 + detail::k_dsmc_block);
            for (std::size_t i = i0; i < i1; ++i) {
                SplitMix64 rng = derive_stream(options.seed, i);
                Vec3 P = initial_momentum(rng);
                double t = 0.0;
                for (std::size_t snap = 0; snap < n_snapshots; ++snap) {
                    const double t_snap = snap * options.snapshot_dt;
                    // Advance this particle's jump process to t_snap.
                    while (true) {
                        const double majorant = rate_majorant(gas, tracer, model, P);
                        const double tau = -std::log(rng.uniform_pos()) / majorant;
                        if (t + tau > t_snap) {
                            t = t_snap;
                            break;
                        }
                        t += tau;
                        block_proposed[block] += 1;
                        const Vec3 partner = sample_mu(gas, rng);
                        const double k_rel =
                            norm(relative_momentum(partner, P, gas, tracer));
                        const double rate = gas.number_density *
                                            total_cross_section(model, k_rel) * k_rel / m_star;
                        const double ratio = rate / majorant;
                        block_max_ratio[block] = std::max(block_max_ratio[block], ratio);
                        if (ratio > 1.0)
                            throw Error("dsmc: majorant violated; acceptance ratio > 1");
                        if (rng.uniform() < ratio) {
                            block_accepted[block] += 1;
                            P = collide_with_partner(P, partner, gas, tracer, model, rng)
                                    .tracer_out;
                        }
                    }
                    const std::size_t slot = snap * n_blocks + block;
                    const double e = norm2(P) * inv2m;
                    acc.energy[slot] += e;
                    acc.energy_sq[slot] += e * e;
                    acc.abs_p[slot] += norm(P);
                    acc.px[slot] += P.x;
                    acc.py[slot] += P.y;
                    acc.pz[slot] += P.z;
                    if (snap + 1 == n_snapshots) {
                        int bin = static_cast<int>(norm(P) / hist_max * n_bins);
                        bin = std::clamp(bin, 0, n_bins - 1);
                        acc.hist[static_cast<std::size_t>(bin) * n_blocks + block] += 1;
                    }
                }
            }
        }
    });

    DsmcResult result;
    result.times.resize(n_snapshots);
    result.moments.resize(n_snapshots);
    const double inv_n = 1.0 / static_cast<double>(options.n_particles);
    for (std::size_t snap = 0; snap < n_snapshots; ++snap) {
        result.times[snap] = snap * options.snapshot_dt;
        double e = 0.0, e2 = 0.0, ap = 0.0, px = 0.0, py = 0.0, pz = 0.0;
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const std::size_t slot = snap * n_blocks + b;
            e += acc.energy[slot];
            e2 += acc.energy_sq[slot];
            ap += acc.abs_p[slot];
            px += acc.px[slot];
            py += acc.py[slot];
            pz += acc.pz[slot];
        }
        DsmcMoments m;
        m.mean_energy = e * inv_n;
        const double var = std::max(0.0, e2 * inv_n - m.mean_energy * m.mean_energy);
        m.se_energy = std::sqrt(var * inv_n);
        m.mean_abs_p = ap * inv_n;
        m.mean_p = Vec3(px * inv_n, py * inv_n, pz * inv_n);
        result.moments[snap] = m;
    }
    result.hist_edges.resize(n_bins + 1);
    result.hist_density.resize(n_bins);
    const double bin_w = hist_max / n_bins;
    for (int b = 0; b <= n_bins; ++b) result.hist_edges[b] = b * bin_w;
    for (int b = 0; b < n_bins; ++b) {
        std::uint64_t count = 0;
        for (std::size_t blk = 0; blk < n_blocks; ++blk)
            count += acc.hist[static_cast<std::size_t>(b) * n_blocks + blk];
        result.hist_density[b] = static_cast<double>(count) * inv_n / bin_w;
    }
    for (std::size_t b = 0; b < n_blocks; ++b) {
        result.proposed_events += block_proposed[b];
        result.accepted_events += block_accepted[b];
        result.max_accept_ratio = std::max(result.max_accept_ratio, block_max_ratio[b]);
    }
    return result;
}

/// Initial-momentum samplers for the standard scenarios.
inline std::function<Vec3(SplitMix64&)> cold_gaussian_sampler(double sigma, const Vec3& center) {
    return [sigma, center](SplitMix64& rng) {
        const NormalPair ab = normal_pair(rng);
        const NormalPair cd = normal_pair(rng);
        return Vec3(center.x + sigma * ab.a, center.y + sigma * ab.b, center.z + sigma * cd.a);
    };
}

inline std::function<Vec3(SplitMix64&)> thermal_sampler(const GasSpec& gas,
                                                        const TracerSpec& tracer) {
    QLB_REQUIRE(!tracer.is_infinite(), "thermal_sampler: needs a finite tracer mass");
    const double sigma = std::sqrt(tracer.mass * gas.temperature);
    return cold_gaussian_sampler(sigma, Vec3{});
}

} // namespace qlb
