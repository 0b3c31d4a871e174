#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "qlb/error.hpp"
#include "qlb/grid.hpp"
#include "qlb/kernels.hpp"
#include "qlb/parallel.hpp"

namespace qlb {

/// Largest stable step for the collision integrator, as a fraction of
/// the fastest decay time on the grid.
inline double max_time_step(const KernelTable& table) { return 0.1 / table.max_out_rate(); }

/// Default step: half the stability bound's safety factor.
inline double default_time_step(const KernelTable& table) { return 0.05 / table.max_out_rate(); }

namespace detail {

/// Collision-generator application: gain term as a box-bounded lattice
/// convolution against the tabulated kernel, loss term as the paired
/// decay rates.  Every jump is kept only if both its source and target
/// node pairs lie on the grid, so gain and loss balance exactly and the
/// diagonal dynamics conserves trace to rounding.
///
/// Accumulation order per target node is fixed (self term, then transfer
/// offsets in lattice order) and targets are partitioned across workers,
/// so results are bitwise independent of the worker count.
inline void apply_generator(const KernelTable& table, const std::vector<Complex>& in,
                            std::vector<Complex>& out, int workers) {
    const MomentumGrid& grid = table.grid;
    const int n = grid.n();
    const std::size_t np = grid.size();
    QLB_REQUIRE(in.size() == np, "apply_generator: field size mismatch");
    out.assign(np, Complex(0.0, 0.0));

    const Offset delta = table.delta;
    const double dv = grid.cell_volume();
    const std::size_t nq = table.lattice.size();
    const bool real_tab = table.real_valued;

    // Per-axis target bounds in 0-based coordinates for one constraint
    // set {0, d}: lo = max(0, d), hi = (n-1) + min(0, d).
    const auto lo1 = [n](int d) { return std::max(0, d); };
    const auto hi1 = [n](int d) { return (n - 1) + std::min(0, d); };

    const int dx = delta.x, dy = delta.y, dz = delta.z;

    parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t xa, std::size_t xb) {
        for (std::size_t xu = xa; xu < xb; ++xu) {
            const int x = static_cast<int>(xu);
            // Support bounds for this slab (P and P - delta on grid).
            if (x < lo1(dx) || x > hi1(dx)) continue;
            const std::size_t slab = xu * n * n;

            // Self term first: fixed position in the accumulation order.
            for (int y = lo1(dy); y <= hi1(dy); ++y) {
                const std::size_t row = slab + static_cast<std::size_t>(y) * n;
                for (int z = lo1(dz); z <= hi1(dz); ++z) {
                    const std::size_t p = row + z;
                    out[p] = table.self_entry(p) * in[p];
                }
            }

            for (std::size_t qi = 0; qi < nq; ++qi) {
                const Offset q = table.lattice[qi];
                const int lox = std::max({0, dx, q.x, q.x + dx});
                const int hix = (n - 1) + std::min({0, dx, q.x, q.x + dx});
                if (x < lox || x > hix) continue;
                const int loy = std::max({0, dy, q.y, q.y + dy});
                const int hiy = (n - 1) + std::min({0, dy, q.y, q.y + dy});
                const int loz = std::max({0, dz, q.z, q.z + dz});
                const int hiz = (n - 1) + std::min({0, dz, q.z, q.z + dz});
                if (loy > hiy || loz > hiz) continue;
                const std::ptrdiff_t qlin =
                    (static_cast<std::ptrdiff_t>(q.x) * n + q.y) * n + q.z;
                const double* row_re = table.re.data() + qi * np;
                const double* row_im = real_tab ? nullptr : table.im.data() + qi * np;
                for (int y = loy; y <= hiy; ++y) {
                    const std::size_t row = slab + static_cast<std::size_t>(y) * n;
                    for (int z = loz; z <= hiz; ++z) {
                        const std::size_t p = row + z;
                        const Complex src = in[p - qlin];
                        if (row_im)
                            out[p] += Complex(row_re[p], row_im[p]) * src;
                        else
                            out[p] += row_re[p] * src;
                    }
                }
            }

            // Scale the gain by the cell volume and subtract the paired
            // decay rates.
            for (int y = lo1(dy); y <= hi1(dy); ++y) {
                const std::size_t row = slab + static_cast<std::size_t>(y) * n;
                for (int z = lo1(dz); z <= hi1(dz); ++z) {
                    const std::size_t p = row + z;
                    const Offset c{x - grid.half(), y - grid.half(), z - grid.half()};
                    const std::size_t pm = grid.index(c - delta);
                    const double decay = 0.5 * (table.out_rate[p] + table.out_rate[pm]);
                    out[p] = dv * out[p] - decay * in[p];
                }
            }
        }
    });
}

} // namespace detail

/// One classical RK4 substep of the collision generator.
inline void collision_step_rk4(const KernelTable& table, std::vector<Complex>& field, double dt,
                               int workers) {
    QLB_REQUIRE(dt > 0.0 && dt <= max_time_step(table) * (1.0 + 1e-12),
                "collision step exceeds the stability bound 0.1 / max out-rate");
    const std::size_t np = field.size();
    std::vector<Complex> k1, k2, k3, k4;
    std::vector<Complex> tmp(np);

    detail::apply_generator(table, field, k1, workers);
    for (std::size_t i = 0; i < np; ++i) tmp[i] = field[i] + (0.5 * dt) * k1[i];
    detail::apply_generator(table, tmp, k2, workers);
    for (std::size_t i = 0; i < np; ++i) tmp[i] = field[i] + (0.5 * dt) * k2[i];
    detail::apply_generator(table, tmp, k3, workers);
    for (std::size_t i = 0; i < np; ++i) tmp[i] = field[i] + dt * k3[i];
    detail::apply_generator(table, tmp, k4, workers);
    for (std::size_t i = 0; i < np; ++i)
        field[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

/// Free-streaming phase rotation over dt: each sector entry picks up
/// exp(-i (|P|^2 - |P - delta|^2) dt / (2M)).  Exact, and the identity
/// for the diagonal sector or an infinite-mass tracer.
inline void free_phase(SectorState& state, const TracerSpec& tracer, double dt) {
    if (state.delta == Offset{}) return;
    const double inv2m = tracer.inv_two_mass();
    if (inv2m == 0.0) return;
    const MomentumGrid& grid = state.grid;
    const Vec3 dvec = grid.point(state.delta);
    const double d2 = norm2(dvec);
    for (std::size_t p = 0; p < state.field.size(); ++p) {
        const Offset c = grid.node(p);
        if (!state.in_support(c)) continue;
        const Vec3 P = grid.point(c);
        const double phase = -(2.0 * dot(P, dvec) - d2) * inv2m * dt;
        state.field[p] *= Complex(std::cos(phase), std::sin(phase));
    }
}

/// One Strang-split step: half free phase, RK4 collision substep, half
/// free phase.  Second order in dt overall.
inline void strang_step(SectorState& state, const KernelTable& table, const TracerSpec& tracer,
                        double dt, int workers = 0) {
    QLB_REQUIRE(state.grid == table.grid && state.delta == table.delta,
                "strang_step: state and table metadata mismatch");
    free_phase(state, tracer, 0.5 * dt);
    collision_step_rk4(table, state.field, dt, workers);
    free_phase(state, tracer, 0.5 * dt);
    state.time += dt;
}

// ---------------------------------------------------------------------
// Initial states

/// Diagonal sector holding the grid-discretized tracer Maxwell state,
/// normalized to unit trace on the grid.  Exactly stationary under the
/// discrete collision generator.
inline SectorState discretized_maxwell(const MomentumGrid& grid, const GasSpec& gas,
                                       const TracerSpec& tracer) {
    QLB_REQUIRE(!tracer.is_infinite(),
                "discretized_maxwell: infinite-mass tracer has no normalizable thermal state");
    const double p_th2 = 2.0 * tracer.mass * gas.temperature;
    SectorState s = SectorState::zero(grid, Offset{});
    double total = 0.0;
    for (std::size_t p = 0; p < s.field.size(); ++p) {
        const double w = std::exp(-norm2(grid.point(grid.node(p))) / p_th2);
        s.field[p] = w;
        total += w;
    }
    const double scale = 1.0 / (total * grid.cell_volume());
    for (auto& v : s.field) v *= scale;
    return s;
}

/// Diagonal isotropic Gaussian, normalized to unit trace.
inline SectorState gaussian_diagonal(const MomentumGrid& grid, double sigma,
                                     const Vec3& center = {}) {
    QLB_REQUIRE(sigma > 0.0, "gaussian_diagonal: width must be positive");
    SectorState s = SectorState::zero(grid, Offset{});
    double total = 0.0;
    for (std::size_t p = 0; p < s.field.size(); ++p) {
        const Vec3 d = grid.point(grid.node(p)) - center;
        const double w = std::exp(-0.5 * norm2(d) / (sigma * sigma));
        s.field[p] = w;
        total += w;
    }
    const double scale = 1.0 / (total * grid.cell_volume());
    for (auto& v : s.field) v *= scale;
    return s;
}

/// Sectors of the pure state |psi><psi| with psi a superposition of two
/// Gaussian packets centered at c1 and c2 (relative phase `phase`), cut
/// to the requested sector offsets.  deltas must start with the diagonal
/// offset {0,0,0}.
inline std::vector<SectorState> pure_state_sectors(const MomentumGrid& grid,
                                                   const std::vector<Offset>& deltas,
                                                   const Vec3& c1, const Vec3& c2, double sigma,
                                                   double phase = 0.0) {
    QLB_REQUIRE(!deltas.empty() && deltas[0] == Offset{},
                "pure_state_sectors: first offset must be the diagonal");
    QLB_REQUIRE(sigma > 0.0, "pure_state_sectors: width must be positive");
    std::vector<Complex> psi(grid.size());
    double total = 0.0;
    const Complex rel_phase(std::cos(phase), std::sin(phase));
    for (std::size_t p = 0; p < psi.size(); ++p) {
        const Vec3 P = grid.point(grid.node(p));
        const double g1 = std::exp(-0.25 * norm2(P - c1) / (sigma * sigma));
        const double g2 = std::exp(-0.25 * norm2(P - c2) / (sigma * sigma));
        psi[p] = g1 + rel_phase * g2;
        total += std::norm(psi[p]);
    }
    const double scale = 1.0 / std::sqrt(total * grid.cell_volume());
    for (auto& v : psi) v *= scale;

    std::vector<SectorState> sectors;
    sectors.reserve(deltas.size());
    for (const Offset& d : deltas) {
        SectorState s = SectorState::zero(grid, d);
        for (std::size_t p = 0; p < psi.size(); ++p) {
            const Offset c = grid.node(p);
            if (!s.in_support(c)) continue;
            s.field[p] = psi[p] * std::conj(psi[grid.index(c - d)]);
        }
        sectors.push_back(std::move(s));
    }
    return sectors;
}

// ---------------------------------------------------------------------
// Monitors and the evolution driver

struct MonitorThresholds {
    double trace_drift = 1e-9;
    double sector_growth = 1e-9;
    double negativity = 1e-10;
    double minor = 1e-8;
    double entropy_decrease = 1e-6;
};

struct EvolveOptions {
    double dt = 0.0;        // 0: default_time_step of the diagonal table
    long n_steps = 0;
    int workers = 0;
    int record_stride = 1;
    int minor_stride = 0;   // 0: minors off
    bool check_entropy = false;
    bool abort_on_violation = true;
    MonitorThresholds thresholds;
};

/// One recorded monitor sample.
struct StepRecord {
    long step = 0;
    double time = 0.0;
    double trace = 0.0;
    double energy = 0.0;
    double min_diag = 0.0;
    double entropy = 0.0;        // -sum w ln(w / w_stationary) dV, if enabled
    double min_minor = 0.0;      // smallest two-point eigenvalue, if enabled
    double leakage = 0.0;        // cumulative forgone escape flux
    std::vector<double> sector_l1;
};

/// Smallest eigenvalue over all 2x2 blocks [[w(P), rho_d(P)],
/// [conj(rho_d(P)), w(P-d)]] the sector defines.
inline double two_point_min_eigenvalue(const SectorState& diagonal, const SectorState& sector) {
    QLB_REQUIRE(diagonal.delta == Offset{}, "two_point: first argument must be the diagonal");
    QLB_REQUIRE(diagonal.grid == sector.grid, "two_point: grid mismatch");
    const MomentumGrid& grid = diagonal.grid;
    double min_eig = 0.0;
    bool first = true;
    for (std::size_t p = 0; p < sector.field.size(); ++p) {
        const Offset c = grid.node(p);
        if (!sector.in_support(c)) continue;
        const double a = diagonal.field[p].real();
        const double b2 = std::norm(sector.field[p]);
        const double cc = diagonal.field[grid.index(c - sector.delta)].real();
        const double eig =
            0.5 * (a + cc) - std::sqrt(0.25 * (a - cc) * (a - cc) + b2);
        if (first || eig < min_eig) {
            min_eig = eig;
            first = false;
        }
    }
    return min_eig;
}

namespace detail {

inline double sector_l1(const SectorState& s, double dv) {
    double acc = 0.0;
    for (const Complex& v : s.field) acc += std::abs(v);
    return acc * dv;
}

inline double relative_entropy_functional(const SectorState& diagonal,
                                          const std::vector<double>& stationary, double dv,
                                          double negativity_tol) {
    double acc = 0.0;
    for (std::size_t p = 0; p < diagonal.field.size(); ++p) {
        const double w = diagonal.field[p].real();
        if (w <= 0.0) {
            if (w < -negativity_tol)
                throw MonitorViolation("entropy monitor: diagonal weight below -tolerance");
            continue;
        }
        acc += w * std::log(w / stationary[p]);
    }
    return -acc * dv;
}

} // namespace detail

/// Evolve a family of sectors under shared physics.  sectors[0] must be
/// the diagonal; tables are matched to sectors by index.  Returns one
/// record per `record_stride` steps (plus the initial sample).  Monitors
/// compare against their thresholds and throw MonitorViolation when
/// `abort_on_violation` is set.
inline std::vector<StepRecord> evolve(std::vector<SectorState>& sectors,
                                      const std::vector<KernelTable>& tables,
                                      const TracerSpec& tracer, const EvolveOptions& options) {
    QLB_REQUIRE(!sectors.empty() && sectors.size() == tables.size(),
                "evolve: sectors and tables must pair up");
    QLB_REQUIRE(sectors[0].delta == Offset{}, "evolve: sectors[0] must be the diagonal");
    for (std::size_t i = 0; i < sectors.size(); ++i) {
        QLB_REQUIRE(sectors[i].grid == tables[i].grid && sectors[i].delta == tables[i].delta,
                    "evolve: sector/table metadata mismatch");
        QLB_REQUIRE(sectors[i].grid == sectors[0].grid, "evolve: sectors share one grid");
    }
    QLB_REQUIRE(options.n_steps >= 0, "evolve: negative step count");

    const MomentumGrid& grid = sectors[0].grid;
    const double dv = grid.cell_volume();
    const double dt = options.dt > 0.0 ? options.dt : default_time_step(tables[0]);

    std::vector<double> stationary;
    if (options.check_entropy) {
        QLB_REQUIRE(!tracer.is_infinite(), "entropy monitor needs a finite tracer mass");
        const SectorState maxwell = discretized_maxwell(grid, tables[0].gas, tracer);
        stationary.resize(maxwell.field.size());
        for (std::size_t p = 0; p < stationary.size(); ++p)
            stationary[p] = maxwell.field[p].real();
    }

    const double inv2m = tracer.inv_two_mass();
    double leakage = 0.0;

    const auto sample = [&](long step) {
        StepRecord rec;
        rec.step = step;
        rec.time = sectors[0].time;
        rec.leakage = leakage;
        double trace = 0.0;
        double energy = 0.0;
        double min_diag = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < sectors[0].field.size(); ++p) {
            const double w = sectors[0].field[p].real();
            trace += w;
            energy += w * norm2(grid.point(grid.node(p)));
            min_diag = std::min(min_diag, w);
        }
        rec.trace = trace * dv;
        rec.energy = energy * dv * inv2m;
        rec.min_diag = min_diag;
        if (options.check_entropy)
            rec.entropy = detail::relative_entropy_functional(
                sectors[0], stationary, dv, options.thresholds.negativity);
        if (options.minor_stride > 0) {
            double min_minor = 0.0;
            bool first = true;
            for (std::size_t i = 1; i < sectors.size(); ++i) {
                const double e = two_point_min_eigenvalue(sectors[0], sectors[i]);
                if (first || e < min_minor) {
                    min_minor = e;
                    first = false;
                }
            }
            rec.min_minor = min_minor;
        }
        rec.sector_l1.reserve(sectors.size());
        for (const SectorState& s : sectors) rec.sector_l1.push_back(detail::sector_l1(s, dv));
        return rec;
    };

    std::vector<StepRecord> records;
    records.push_back(sample(0));
    const double initial_trace = records.front().trace;

    for (long step = 1; step <= options.n_steps; ++step) {
        // Forgone escape flux of the current diagonal weights.
        double esc = 0.0;
        for (std::size_t p = 0; p < sectors[0].field.size(); ++p)
            esc += tables[0].escape_rate[p] * std::max(0.0, sectors[0].field[p].real());
        leakage += esc * dv * dt;

        for (std::size_t i = 0; i < sectors.size(); ++i)
            strang_step(sectors[i], tables[i], tracer, dt, options.workers);

        const bool record = (step % options.record_stride == 0) || step == options.n_steps;
        const bool minors_due =
            options.minor_stride > 0 && ((step % options.minor_stride == 0) || step == options.n_steps);
        if (!(record || minors_due)) continue;
        StepRecord rec = sample(step);
        if (options.abort_on_violation) {
            const MonitorThresholds& t = options.thresholds;
            if (std::abs(rec.trace - initial_trace) > t.trace_drift)
                throw MonitorViolation("trace drift beyond threshold at step " +
                                       std::to_string(step));
            if (rec.min_diag < -t.negativity)
                throw MonitorViolation("diagonal negativity beyond threshold at step " +
                                       std::to_string(step));
            for (std::size_t i = 0; i < sectors.size(); ++i) {
                const double before = records.back().sector_l1[i];
                if (rec.sector_l1[i] > before * (1.0 + t.sector_growth) + 1e-300)
                    throw MonitorViolation("sector L1 norm grew at step " + std::to_string(step));
            }
            if (options.check_entropy &&
                rec.entropy < records.back().entropy - t.entropy_decrease)
                throw MonitorViolation("entropy decreased beyond threshold at step " +
                                       std::to_string(step));
            if (options.minor_stride > 0 && rec.min_minor < -t.minor)
                throw MonitorViolation("two-point positivity violated at step " +
                                       std::to_string(step));
        }
        if (record || minors_due) records.push_back(std::move(rec));
    }
    return records;
}

} // namespace qlb
