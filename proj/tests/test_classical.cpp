#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qlb/classical.hpp"
#include "qlb/evolution.hpp"

using namespace qlb;

namespace {

GasSpec test_gas() { return GasSpec{1.0, 1.0 / (8.0 * std::sqrt(M_PI)), 0.5}; }

KernelTable test_table() {
    TabulateOptions opts;
    return tabulate(MomentumGrid::make(9, 3.0), Offset{}, test_gas(), TracerSpec::finite(1.0),
                    ConstantLengthModel{1.0}, QuadratureSpec{}, 1.5, opts);
}

} // namespace

TEST_CASE("classical steps equal the quantum diagonal path bitwise") {
    const KernelTable table = test_table();
    const MomentumGrid grid = table.grid;
    SectorState qstate = gaussian_diagonal(grid, 0.5, Vec3(0.0, 0.0, 0.75));
    std::vector<double> w(qstate.field.size());
    for (std::size_t p = 0; p < w.size(); ++p) w[p] = qstate.field[p].real();

    const double dt = default_time_step(table);
    for (int step = 0; step < 10; ++step) {
        collision_step_rk4(table, qstate.field, dt, 2);
        classical_step(table, w, dt, 2);
    }
    for (std::size_t p = 0; p < w.size(); ++p) {
        REQUIRE(qstate.field[p].real() == w[p]);
        REQUIRE(qstate.field[p].imag() == 0.0);
    }
}

TEST_CASE("classical evolution conserves trace and relaxes energy") {
    const KernelTable table = test_table();
    SectorState init = gaussian_diagonal(table.grid, 0.5);
    std::vector<double> w(init.field.size());
    for (std::size_t p = 0; p < w.size(); ++p) w[p] = init.field[p].real();

    const double dt = default_time_step(table);
    const std::vector<ClassicalRecord> records =
        classical_evolve(table, w, TracerSpec::finite(1.0), dt, 60, 10, 0);
    REQUIRE(records.size() == 7);
    for (const ClassicalRecord& r : records) {
        REQUIRE_THAT(r.trace, Catch::Matchers::WithinAbs(records.front().trace, 1e-12));
        REQUIRE(r.min_w >= -1e-12);
    }
    REQUIRE(records.back().energy > records.front().energy);
}

TEST_CASE("pair collisions conserve momentum and relative energy") {
    const GasSpec gas = test_gas();
    const TracerSpec tracer = TracerSpec::finite(1.0);
    const ScatteringModel model = HardSphereModel{1.0, -1};
    SplitMix64 rng(101u);
    for (int trial = 0; trial < 200; ++trial) {
        const NormalPair ab = normal_pair(rng);
        const NormalPair cd = normal_pair(rng);
        const NormalPair ef = normal_pair(rng);
        const Vec3 P(1.5 * ab.a, 1.5 * ab.b, 1.5 * cd.a);
        const Vec3 p(cd.b, ef.a, ef.b);
        const CollisionEvent ev = collide_with_partner(P, p, gas, tracer, model, rng);

        const Vec3 total_before = P + p;
        const Vec3 total_after = ev.tracer_out + ev.gas_out;
        REQUIRE_THAT(norm(total_after - total_before), Catch::Matchers::WithinAbs(0.0, 1e-13));

        const double k_before = norm(relative_momentum(p, P, gas, tracer));
        const double k_after =
            norm(relative_momentum(ev.gas_out, ev.tracer_out, gas, tracer));
        REQUIRE_THAT(k_after, Catch::Matchers::WithinRel(k_before, 1e-12));
        REQUIRE(ev.cos_theta >= -1.0);
        REQUIRE(ev.cos_theta <= 1.0);
    }
}

TEST_CASE("rate majorant dominates sampled partner rates") {
    const GasSpec gas = test_gas();
    const TracerSpec tracer = TracerSpec::finite(1.0);
    SplitMix64 rng(103u);
    const std::vector<ScatteringModel> models = {ConstantLengthModel{1.0},
                                                 HardSphereModel{1.0, -1},
                                                 BornGaussianModel{0.9, 0.7}};
    for (const ScatteringModel& model : models) {
        const double m_star = tracer.reduced_mass(gas);
        for (int trial = 0; trial < 300; ++trial) {
            const NormalPair ab = normal_pair(rng);
            const NormalPair cd = normal_pair(rng);
            const Vec3 P(2.0 * ab.a, 2.0 * ab.b, 2.0 * cd.a);
            const double majorant = rate_majorant(gas, tracer, model, P);
            const Vec3 partner = sample_mu(gas, rng);
            const double k = norm(relative_momentum(partner, P, gas, tracer));
            const double rate = gas.number_density * total_cross_section(model, k) * k / m_star;
            REQUIRE(rate <= majorant * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("dsmc results do not depend on the worker count") {
    DsmcOptions opts;
    opts.n_particles = 4000;
    opts.t_final = 2.0;
    opts.snapshot_dt = 1.0;
    opts.seed = 5;
    opts.workers = 1;
    const auto sampler = cold_gaussian_sampler(0.4, Vec3{});
    const DsmcResult serial = dsmc_run(test_gas(), TracerSpec::finite(1.0),
                                       ConstantLengthModel{1.0}, opts, sampler);
    opts.workers = 4;
    const DsmcResult parallel = dsmc_run(test_gas(), TracerSpec::finite(1.0),
                                         ConstantLengthModel{1.0}, opts, sampler);
    REQUIRE(serial.times == parallel.times);
    REQUIRE(serial.accepted_events == parallel.accepted_events);
    REQUIRE(serial.hist_density == parallel.hist_density);
    for (std::size_t k = 0; k < serial.moments.size(); ++k) {
        REQUIRE(serial.moments[k].mean_energy == parallel.moments[k].mean_energy);
        REQUIRE(serial.moments[k].se_energy == parallel.moments[k].se_energy);
    }
}

TEST_CASE("dsmc refuses meaningless ensembles") {
    DsmcOptions opts;
    opts.n_particles = 500;
    opts.t_final = 1.0;
    opts.snapshot_dt = 1.0;
    REQUIRE_THROWS_AS(dsmc_run(test_gas(), TracerSpec::finite(1.0), ConstantLengthModel{1.0},
                               opts, cold_gaussian_sampler(0.4, Vec3{})),
                      ContractViolation);
}

TEST_CASE("thermal ensemble stays in equipartition") {
    const GasSpec gas = test_gas();
    const TracerSpec tracer = TracerSpec::finite(1.0);
    DsmcOptions opts;
    opts.n_particles = 10000;
    opts.t_final = 2.0;
    opts.snapshot_dt = 1.0;
    opts.seed = 11;
    const DsmcResult result = dsmc_run(gas, tracer, ConstantLengthModel{1.0}, opts,
                                       thermal_sampler(gas, tracer));
    const double target = 1.5 * gas.temperature;
    for (std::size_t k = 0; k < result.times.size(); ++k) {
        const double band = 4.0 * result.moments[k].se_energy;
        REQUIRE(std::abs(result.moments[k].mean_energy - target) < band);
    }
    REQUIRE(result.max_accept_ratio <= 1.0);

    // The speed histogram integrates to one.
    double mass = 0.0;
    for (std::size_t b = 0; b + 1 < result.hist_edges.size(); ++b)
        mass += result.hist_density[b] * (result.hist_edges[b + 1] - result.hist_edges[b]);
    REQUIRE_THAT(mass, Catch::Matchers::WithinRel(1.0, 1e-12));
}

TEST_CASE("cold ensemble heats toward equipartition") {
    const GasSpec gas = test_gas();
    const TracerSpec tracer = TracerSpec::finite(1.0);
    DsmcOptions opts;
    opts.n_particles = 20000;
    opts.t_final = 8.0;
    opts.snapshot_dt = 2.0;
    opts.seed = 13;
    const DsmcResult result =
        dsmc_run(gas, tracer, ConstantLengthModel{1.0}, opts, cold_gaussian_sampler(1.0 / 3.0, Vec3{}));
    const double target = 1.5 * gas.temperature;
    REQUIRE(result.moments.front().mean_energy < 0.25);
    const double final_energy = result.moments.back().mean_energy;
    // After eight relaxation times the ensemble sits within a few
    // standard errors of the thermal value.
    REQUIRE(std::abs(final_energy - target) <
            4.0 * result.moments.back().se_energy + 0.01 * target);
}
