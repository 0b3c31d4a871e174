#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qlb/classical.hpp"
#include "qlb/core.hpp"
#include "qlb/evolution.hpp"
#include "qlb/grid.hpp"
#include "qlb/io.hpp"
#include "qlb/kernels.hpp"
#include "qlb/rng.hpp"
#include "qlb/scattering.hpp"
#include "qlb/serialize.hpp"

namespace qlb {

/// One verification criterion: what was measured, against what bound.
struct Criterion {
    std::string id;
    std::string description;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string detail;
};

/// Pinned tolerances per criterion and profile.  The strict profile
/// tightens the checks that measure exact structural identities; the
/// statistics- and discretization-limited ones keep their bounds.
inline double criterion_tolerance(const std::string& id, const std::string& profile,
                                  const std::map<std::string, double>& overrides) {
    static const std::map<std::string, double> defaults = {
        {"AC-1", 1e-12}, {"AC-2", 1e-9},  {"AC-3", 1e-10}, {"AC-4", 1e-8},
        {"AC-5", 3.0},   {"AC-6", 1e-12}, {"AC-7", 1e-8},  {"AC-8", 2e-2},
        {"AC-9", 1.0},   {"AC-10", 1.0},  {"AC-11", 1e-10}, {"AC-12", 1e-10},
    };
    static const std::map<std::string, double> strict = {
        {"AC-1", 1e-13}, {"AC-2", 1e-10}, {"AC-3", 1e-12}, {"AC-6", 1e-13},
        {"AC-11", 1e-11}, {"AC-12", 1e-11},
    };
    auto ov = overrides.find(id);
    if (ov != overrides.end()) return ov->second;
    if (profile == "strict") {
        auto it = strict.find(id);
        if (it != strict.end()) return it->second;
    }
    auto it = defaults.find(id);
    QLB_REQUIRE(it != defaults.end(), "unknown criterion id: " + id);
    return it->second;
}

// Desk-scale reference setup: unit gas mass, T chosen so the gas thermal
// momentum is 1, density chosen so the stationary collision rate at
// P = 0 is exactly 1, unit scattering length, N = 21 grid of extent 5.
inline GasSpec desk_gas() { return GasSpec{1.0, 1.0 / (8.0 * std::sqrt(M_PI)), 0.5}; }
inline TracerSpec desk_tracer() { return TracerSpec::finite(1.0); }
inline ScatteringModel desk_model() { return ConstantLengthModel{1.0}; }
inline MomentumGrid desk_grid() { return MomentumGrid::make(21, 5.0); }
inline double desk_q_max() { return 3.5; }

/// Shared lazily-built state for the verification runs: kernel tables
/// and the mixed-sector reference run are reused across criteria.
class VerifyContext {
public:
    explicit VerifyContext(int workers = 0, std::string profile = "default",
                           std::map<std::string, double> overrides = {})
        : workers_(workers), profile_(std::move(profile)), overrides_(std::move(overrides)) {}

    int workers() const { return workers_; }

    double tolerance(const std::string& id) const {
        return criterion_tolerance(id, profile_, overrides_);
    }

    const KernelTable& table(const Offset& delta) {
        auto it = tables_.find(delta);
        if (it == tables_.end()) {
            TabulateOptions opts;
            opts.workers = workers_;
            auto t = std::make_shared<KernelTable>(
                tabulate(desk_grid(), delta, desk_gas(), desk_tracer(), desk_model(),
                         QuadratureSpec{}, desk_q_max(), opts));
            it = tables_.emplace(delta, std::move(t)).first;
        }
        return *it->second;
    }

    static std::vector<Offset> mixed_offsets() {
        return {Offset{0, 0, 0}, Offset{0, 0, 1}, Offset{0, 0, 2}, Offset{0, 0, 3}};
    }

    std::vector<KernelTable> mixed_tables() {
        std::vector<KernelTable> t;
        for (const Offset& d : mixed_offsets()) t.push_back(table(d));
        return t;
    }

    static std::vector<SectorState> mixed_initial_states() {
        return pure_state_sectors(desk_grid(), mixed_offsets(), Vec3(0, 0, 1.0),
                                  Vec3(0, 0, -1.0), 1.0 / 3.0, 0.0);
    }

    /// Two-packet superposition evolved 200 steps with per-step records
    /// and per-step positivity minors; shared by the contraction and
    /// positivity criteria.
    const std::vector<StepRecord>& mixed_run() {
        if (mixed_records_.empty()) {
            std::vector<SectorState> sectors = mixed_initial_states();
            const std::vector<KernelTable> tables = mixed_tables();
            EvolveOptions o;
            o.n_steps = 200;
            o.workers = workers_;
            o.minor_stride = 1;
            o.record_stride = 1;
            mixed_records_ = evolve(sectors, tables, desk_tracer(), o);
        }
        return mixed_records_;
    }

private:
    int workers_;
    std::string profile_;
    std::map<std::string, double> overrides_;
    std::map<Offset, std::shared_ptr<KernelTable>> tables_;
    std::vector<StepRecord> mixed_records_;
};

namespace detail {

inline Criterion make_criterion(const VerifyContext& ctx, const std::string& id,
                                const std::string& description, double measured,
                                bool extra_pass = true) {
    Criterion c;
    c.id = id;
    c.description = description;
    c.measured = measured;
    c.tolerance = ctx.tolerance(id);
    c.pass = (measured <= c.tolerance) && extra_pass;
    return c;
}

} // namespace detail

/// AC-1: probability conservation of the diagonal dynamics.
inline Criterion run_ac1(VerifyContext& ctx) {
    std::vector<SectorState> sectors;
    sectors.push_back(gaussian_diagonal(desk_grid(), 1.0 / 3.0));
    std::vector<KernelTable> tables{ctx.table(Offset{})};
    EvolveOptions o;
    o.n_steps = 200;
    o.workers = ctx.workers();
    const std::vector<StepRecord> records = evolve(sectors, tables, desk_tracer(), o);
    double worst = 0.0;
    for (const StepRecord& r : records)
        worst = std::max(worst, std::abs(r.trace - records.front().trace));
    Criterion c = detail::make_criterion(
        ctx, "AC-1", "diagonal evolution conserves total probability over 200 steps", worst);
    c.detail = "max |trace(t) - trace(0)| across " + std::to_string(records.size()) + " samples";
    return c;
}

/// AC-2: per-step L1 contraction of every sector.
inline Criterion run_ac2(VerifyContext& ctx) {
    const std::vector<StepRecord>& records = ctx.mixed_run();
    double worst = 0.0;
    for (std::size_t k = 1; k < records.size(); ++k)
        for (std::size_t s = 0; s < records[k].sector_l1.size(); ++s) {
            const double grow = (records[k].sector_l1[s] - records[k - 1].sector_l1[s]) /
                                records.front().sector_l1[s];
            worst = std::max(worst, grow);
        }
    Criterion c = detail::make_criterion(
        ctx, "AC-2", "sector L1 norms never grow from one step to the next", worst);
    c.detail = "largest per-step relative L1 increase over 4 sectors, 200 steps";
    return c;
}

/// AC-3: diagonal quantum path vs the independent classical solver.
inline Criterion run_ac3(VerifyContext& ctx) {
    const KernelTable& table = ctx.table(Offset{});
    const double dt = default_time_step(table);
    const long n_steps = 100;

    std::vector<SectorState> sectors;
    sectors.push_back(gaussian_diagonal(desk_grid(), 1.0 / 3.0));
    std::vector<double> w(sectors[0].field.size());
    for (std::size_t p = 0; p < w.size(); ++p) w[p] = sectors[0].field[p].real();

    std::vector<KernelTable> tables{table};
    EvolveOptions o;
    o.n_steps = n_steps;
    o.dt = dt;
    o.workers = ctx.workers();
    o.record_stride = n_steps;
    evolve(sectors, tables, desk_tracer(), o);
    for (long s = 0; s < n_steps; ++s) classical_step(table, w, dt, ctx.workers());

    double max_diff = 0.0, scale = 0.0;
    for (std::size_t p = 0; p < w.size(); ++p) {
        max_diff = std::max(max_diff, std::abs(sectors[0].field[p].real() - w[p]));
        max_diff = std::max(max_diff, std::abs(sectors[0].field[p].imag()));
        scale = std::max(scale, std::abs(w[p]));
    }
    Criterion c = detail::make_criterion(
        ctx, "AC-3", "diagonal evolution matches the independent classical grid solver",
        max_diff / scale);
    c.detail = "max pointwise deviation after 100 shared-step evolutions, relative to peak";
    return c;
}

/// AC-4: the two kernel evaluation routes agree off the lattice.
inline Criterion run_ac4(VerifyContext& ctx) {
    const KernelEvaluator eval(desk_gas(), desk_tracer(), desk_model(), QuadratureSpec{});
    SplitMix64 rng(20240817u);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Vec3 P(6.0 * rng.uniform() - 3.0, 6.0 * rng.uniform() - 3.0,
                     6.0 * rng.uniform() - 3.0);
        const NormalPair ab = normal_pair(rng);
        const NormalPair cd = normal_pair(rng);
        Vec3 dir(ab.a, ab.b, cd.a);
        dir = dir / norm(dir);
        const double q_mag = 0.2 + 2.8 * rng.uniform();
        const Vec3 Q = dir * q_mag;
        const double a = eval.m_in_diagonal(P, Q);
        const double b = eval.m_in_classical(P, Q);
        worst = std::max(worst, std::abs(a - b) / std::abs(b));
    }
    Criterion c = detail::make_criterion(
        ctx, "AC-4", "diagonal gain kernel equals its classically-reduced form", worst);
    c.detail = "max relative difference over 100 random (P, Q) evaluations";
    return c;
}

/// AC-5: empirical thinning rate at frozen momentum vs quadrature rate.
inline Criterion run_ac5(VerifyContext& ctx) {
    const GasSpec gas = desk_gas();
    const TracerSpec tracer = desk_tracer();
    const ScatteringModel model = desk_model();
    const double m_star = tracer.reduced_mass(gas);
    double worst_z = 0.0;
    std::string detail;
    int which = 0;
    for (const Vec3& P : {Vec3{0, 0, 0}, Vec3{1.2, -0.4, 0.8}}) {
        const RateEstimate expected = mean_collision_rate(gas, tracer, model, P, 48);
        const std::size_t n_particles = 20000;
        const double t_obs = 10.0;
        std::uint64_t accepted = 0;
        for (std::size_t i = 0; i < n_particles; ++i) {
            SplitMix64 rng = derive_stream(777 + which, i);
            double t = 0.0;
            while (true) {
                const double majorant = rate_majorant(gas, tracer, model, P);
                t += -std::log(rng.uniform_pos()) / majorant;
                if (t > t_obs) break;
                const Vec3 partner = sample_mu(gas, rng);
                const double k_rel = norm(relative_momentum(partner, P, gas, tracer));
                const double rate =
                    gas.number_density * total_cross_section(model, k_rel) * k_rel / m_star;
                if (rate > majorant) throw Error("verify: majorant violated");
                if (rng.uniform() < rate / majorant) ++accepted;
            }
        }
        const double emp = static_cast<double>(accepted) / (n_particles * t_obs);
        const double se = std::sqrt(expected.value / (n_particles * t_obs));
        const double z = std::abs(emp - expected.value) /
                         std::sqrt(se * se + expected.error * expected.error);
        worst_z = std::max(worst_z, z);
        detail += (which ? "; " : "") + std::string("|z| = ") + std::to_string(z) +
                  " (empirical " + std::to_string(emp) + " vs " +
                  std::to_string(expected.value) + ")";
        ++which;
    }
    Criterion c = detail::make_criterion(
        ctx, "AC-5", "Monte Carlo collision frequency matches the quadrature rate", worst_z);
    c.detail = detail;
    return c;
}

/// AC-6: Born amplitudes are functions of the transfer alone, and the
/// transfer produced by the kernel kinematics is exact.
inline Criterion run_ac6(VerifyContext& ctx) {
    const BornGaussianModel born{1.0, 0.7};
    const KernelEvaluator eval(desk_gas(), desk_tracer(), ScatteringModel(born),
                               QuadratureSpec{});
    SplitMix64 rng(4242u);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto box = [&](double w) { return w * (2.0 * rng.uniform() - 1.0); };
        const Vec3 K(box(4.0), box(4.0), box(4.0));
        const Vec3 P(box(4.0), box(4.0), box(4.0));
        Vec3 Q(box(2.0), box(2.0), box(2.0));
        if (norm(Q) < 0.1) Q = Vec3(0.3, -0.2, 0.5);
        const FParts parts = eval.eval_F_parts(K, P, Q);
        const double defect = norm(parts.p_out - parts.p_in + Q) / norm(Q);
        const double expected =
            -born.strength * std::exp(-norm2(Q) * born.width * born.width);
        const double amp_dev =
            std::abs(parts.amplitude - Complex(expected, 0.0)) / std::abs(expected);
        worst = std::max({worst, defect, amp_dev});
    }
    Criterion c = detail::make_criterion(
        ctx, "AC-6",
        "Born amplitude depends on the momentum transfer alone; the transfer is exact", worst);
    c.detail = "max over 500 draws of transfer defect and amplitude deviation";
    return c;
}

/// AC-7: H-theorem and thermalization of the diagonal dynamics.
inline Criterion run_ac7(VerifyContext& ctx) {
    const KernelTable& table = ctx.table(Offset{});
    const double dt = default_time_step(table);
    const long n_steps = static_cast<long>(std::ceil(30.0 / dt));

    std::vector<SectorState> sectors;
    sectors.push_back(gaussian_diagonal(desk_grid(), 1.0 / 3.0));
    std::vector<KernelTable> tables{table};
    EvolveOptions o;
    o.n_steps = n_steps;
    o.dt = dt;
    o.workers = ctx.workers();
    o.check_entropy = true;
    const std::vector<StepRecord> records = evolve(sectors, tables, desk_tracer(), o);

    double worst_decrease = 0.0;
    for (std::size_t k = 1; k < records.size(); ++k)
        worst_decrease = std::max(worst_decrease, records[k - 1].entropy - records[k].entropy);

    const double e_target = 1.5 * desk_gas().temperature;
    const double e_err = std::abs(records.back().energy - e_target) / e_target;
    Criterion c = detail::make_criterion(
        ctx, "AC-7", "entropy relative to the thermal state is monotone; energy reaches 3T/2",
        worst_decrease, e_err <= 1e-3);
    c.detail = "worst per-step entropy decrease; final energy " +
               std::to_string(records.back().energy) + " vs " + std::to_string(e_target) +
               " (rel err " + std::to_string(e_err) + ", bound 1e-3) after t = 30";
    return c;
}

/// AC-8: the lattice out-rate converges to the exact rate at the origin.
inline Criterion run_ac8(VerifyContext& ctx) {
    const KernelEvaluator eval(desk_gas(), desk_tracer(), desk_model(), QuadratureSpec{});
    const double exact =
        mean_collision_rate(desk_gas(), desk_tracer(), desk_model(), Vec3{}, 48).value;
    const MomentumGrid g21 = desk_grid();
    const MomentumGrid g31 = MomentumGrid::make(31, 5.0);
    const double r21 =
        out_rates_at(eval, g21, g21.transfer_lattice(desk_q_max()), Offset{}).retained;
    const double r31 =
        out_rates_at(eval, g31, g31.transfer_lattice(desk_q_max()), Offset{}).retained;
    const double rel21 = std::abs(r21 - exact) / exact;
    const double rel31 = std::abs(r31 - exact) / exact;
    Criterion c = detail::make_criterion(
        ctx, "AC-8", "discrete out-rate at P = 0 recovers the exact collision rate", rel21,
        rel31 <= 1e-2);
    c.detail = "N=21: " + std::to_string(rel21) + " (bound 2e-2); N=31: " + std::to_string(rel31) +
               " (bound 1e-2); exact rate " + std::to_string(exact);
    return c;
}

/// AC-9: grid relaxation vs DSMC moments.
inline Criterion run_ac9(VerifyContext& ctx) {
    const KernelTable& table = ctx.table(Offset{});
    const double snap_dt = 1.0;
    const double t_final = 10.0;
    const long per_snap = static_cast<long>(std::ceil(snap_dt / default_time_step(table)));
    const double dt = snap_dt / static_cast<double>(per_snap);

    SectorState init = gaussian_diagonal(desk_grid(), 1.0 / 3.0);
    std::vector<double> w(init.field.size());
    for (std::size_t p = 0; p < w.size(); ++p) w[p] = init.field[p].real();
    const std::vector<ClassicalRecord> grid_records =
        classical_evolve(table, w, desk_tracer(), dt,
                         per_snap * static_cast<long>(t_final / snap_dt),
                         static_cast<int>(per_snap), ctx.workers());

    DsmcOptions d;
    d.n_particles = 100000;
    d.t_final = t_final;
    d.snapshot_dt = snap_dt;
    d.seed = 99;
    d.workers = ctx.workers();
    const DsmcResult mc = dsmc_run(desk_gas(), desk_tracer(), desk_model(), d,
                                   cold_gaussian_sampler(1.0 / 3.0, Vec3{}));

    QLB_REQUIRE(grid_records.size() == mc.times.size(),
                "verify: snapshot grids disagree between solvers");
    double worst = 0.0;
    double worst_t = 0.0;
    for (std::size_t k = 0; k < mc.times.size(); ++k) {
        const double diff = std::abs(grid_records[k].energy - mc.moments[k].mean_energy);
        const double band = 3.0 * mc.moments[k].se_energy + 0.02 * grid_records[k].energy;
        if (diff / band > worst) {
            worst = diff / band;
            worst_t = mc.times[k];
        }
    }
    Criterion c = detail::make_criterion(
        ctx, "AC-9", "grid and DSMC energy relaxation agree within statistics plus 2%", worst);
    c.detail = "max normalized energy deviation " + std::to_string(worst) + " at t = " +
               std::to_string(worst_t) + " over " + std::to_string(mc.times.size()) +
               " snapshots";
    return c;
}

/// AC-10: second-order convergence of the split propagator.
inline Criterion run_ac10(VerifyContext& ctx) {
    const std::vector<KernelTable> tables = ctx.mixed_tables();
    const double dt0 = max_time_step(tables[0]);
    const long n0 = 50;

    const auto run_at = [&](int refine) {
        std::vector<SectorState> sectors = VerifyContext::mixed_initial_states();
        EvolveOptions o;
        o.dt = dt0 / (1 << refine);
        o.n_steps = n0 << refine;
        o.workers = ctx.workers();
        o.record_stride = static_cast<int>(o.n_steps);
        evolve(sectors, tables, desk_tracer(), o);
        return sectors;
    };

    const std::vector<SectorState> ref = run_at(3);
    const auto dist = [&](const std::vector<SectorState>& a) {
        double acc = 0.0;
        for (std::size_t s = 1; s < a.size(); ++s)
            for (std::size_t p = 0; p < a[s].field.size(); ++p)
                acc += std::norm(a[s].field[p] - ref[s].field[p]);
        return std::sqrt(acc * a[1].grid.cell_volume());
    };
    const double e1 = dist(run_at(0));
    const double e2 = dist(run_at(1));
    const double ratio = e1 / e2;
    Criterion c = detail::make_criterion(
        ctx, "AC-10", "halving the step shrinks the splitting error fourfold",
        std::abs(ratio - 4.0));
    c.detail = "error ratio " + std::to_string(ratio) + ", acceptance band [3, 5]";
    return c;
}

/// AC-11: unitarity of the partial-wave amplitude via the forward
/// amplitude, against the independently integrated cross section.
inline Criterion run_ac11(VerifyContext& ctx) {
    const ScatteringModel model = HardSphereModel{1.0, -1};
    double worst = 0.0;
    std::string detail;
    for (double k : {0.5, 1.0, 2.0}) {
        const double quad = total_cross_section_quadrature(model, k, 96);
        const double optical = 4.0 * M_PI / k * forward_amplitude(model, k).imag();
        const double rel = std::abs(quad - optical) / optical;
        worst = std::max(worst, rel);
        detail += (detail.empty() ? "" : "; ") + std::string("k=") + std::to_string(k) +
                  ": " + std::to_string(rel);
    }
    Criterion c = detail::make_criterion(
        ctx, "AC-11", "angular integral of |f|^2 equals the forward-amplitude rate", worst);
    c.detail = detail;
    return c;
}

/// AC-12: two-point positivity through the mixed evolution.
inline Criterion run_ac12(VerifyContext& ctx) {
    const std::vector<StepRecord>& records = ctx.mixed_run();
    double worst = 0.0;
    for (const StepRecord& r : records) worst = std::max(worst, -r.min_minor);
    Criterion c = detail::make_criterion(
        ctx, "AC-12", "two-point positivity minors stay non-negative in mixed evolution", worst);
    c.detail = "most negative minor across 200 steps, sign-flipped and clamped at 0";
    return c;
}

inline std::vector<Criterion> run_criteria(VerifyContext& ctx,
                                           const std::vector<std::string>& only = {}) {
    using Runner = Criterion (*)(VerifyContext&);
    static const std::vector<std::pair<std::string, Runner>> runners = {
        {"AC-1", run_ac1},  {"AC-2", run_ac2},  {"AC-3", run_ac3},  {"AC-4", run_ac4},
        {"AC-5", run_ac5},  {"AC-6", run_ac6},  {"AC-7", run_ac7},  {"AC-8", run_ac8},
        {"AC-9", run_ac9},  {"AC-10", run_ac10}, {"AC-11", run_ac11}, {"AC-12", run_ac12},
    };
    std::vector<Criterion> out;
    for (const auto& [id, fn] : runners) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        out.push_back(fn(ctx));
    }
    return out;
}

inline Json criteria_report(const std::vector<Criterion>& criteria) {
    Json arr = Json::array();
    int failures = 0;
    for (const Criterion& c : criteria) {
        arr.push_back(Json{{"id", c.id},
                           {"description", c.description},
                           {"measured", c.measured},
                           {"tolerance", c.tolerance},
                           {"pass", c.pass},
                           {"detail", c.detail}});
        if (!c.pass) ++failures;
    }
    return Json{{"criteria", arr}, {"failures", failures}};
}

} // namespace qlb
