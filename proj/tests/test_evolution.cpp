#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "qlb/evolution.hpp"
#include "qlb/kernels.hpp"

using namespace qlb;

namespace {

GasSpec test_gas() { return GasSpec{1.0, 1.0 / (8.0 * std::sqrt(M_PI)), 0.5}; }

MomentumGrid test_grid() { return MomentumGrid::make(9, 3.0); }

KernelTable test_table(const Offset& delta) {
    TabulateOptions opts;
    opts.workers = 0;
    return tabulate(test_grid(), delta, test_gas(), TracerSpec::finite(1.0),
                    ConstantLengthModel{1.0}, QuadratureSpec{}, 1.5, opts);
}

} // namespace

TEST_CASE("initial state builders normalize and validate") {
    const MomentumGrid grid = test_grid();
    const SectorState g = gaussian_diagonal(grid, 0.5, Vec3(0.0, 0.0, 0.75));
    double trace = 0.0;
    for (const Complex& v : g.field) trace += v.real();
    REQUIRE_THAT(trace * grid.cell_volume(), Catch::Matchers::WithinRel(1.0, 1e-13));
    REQUIRE_THROWS_AS(gaussian_diagonal(grid, 0.0), ContractViolation);

    const SectorState m = discretized_maxwell(grid, test_gas(), TracerSpec::finite(1.0));
    double mtrace = 0.0, menergy = 0.0;
    for (std::size_t p = 0; p < m.field.size(); ++p) {
        mtrace += m.field[p].real();
        menergy += m.field[p].real() * norm2(grid.point(grid.node(p)));
    }
    REQUIRE_THAT(mtrace * grid.cell_volume(), Catch::Matchers::WithinRel(1.0, 1e-13));
    // Kinetic energy of the discretized thermal state: 3T/2 with small
    // truncation corrections from the finite box.
    REQUIRE_THAT(menergy * grid.cell_volume() * 0.5, Catch::Matchers::WithinRel(0.75, 2e-2));
    REQUIRE_THROWS_AS(discretized_maxwell(grid, test_gas(), TracerSpec::infinite()),
                      ContractViolation);

    REQUIRE_THROWS_AS(
        pure_state_sectors(grid, {Offset{0, 0, 1}}, Vec3{}, Vec3{}, 0.5, 0.0),
        ContractViolation);
}

TEST_CASE("pure-state sectors have unit trace and clean positivity") {
    const MomentumGrid grid = test_grid();
    const std::vector<Offset> deltas = {Offset{}, Offset{0, 0, 1}, Offset{0, 0, 2}};
    const std::vector<SectorState> s =
        pure_state_sectors(grid, deltas, Vec3(0.0, 0.0, 0.75), Vec3(0.0, 0.0, -0.75), 0.4, 0.3);
    REQUIRE(s.size() == 3);
    double trace = 0.0;
    for (const Complex& v : s[0].field) {
        trace += v.real();
        REQUIRE(v.real() >= 0.0);
        REQUIRE(v.imag() == 0.0);
    }
    REQUIRE_THAT(trace * grid.cell_volume(), Catch::Matchers::WithinRel(1.0, 1e-13));
    for (std::size_t i = 1; i < s.size(); ++i)
        REQUIRE(two_point_min_eigenvalue(s[0], s[i]) >= -1e-15);
}

TEST_CASE("free phase applies the analytic factor and respects limits") {
    const MomentumGrid grid = test_grid();
    const TracerSpec tracer = TracerSpec::finite(2.0);
    SectorState s = SectorState::zero(grid, Offset{0, 0, 1});
    for (std::size_t p = 0; p < s.field.size(); ++p)
        if (s.in_support(grid.node(p))) s.field[p] = {1.0, 0.5};
    SectorState reference = s;

    const double dt = 0.37;
    free_phase(s, tracer, dt);
    const Vec3 dvec = grid.point(Offset{0, 0, 1});
    bool compared = false;
    for (std::size_t p = 0; p < s.field.size(); ++p) {
        const Offset c = grid.node(p);
        if (!s.in_support(c)) continue;
        const Vec3 P = grid.point(c);
        const double phase =
            -(2.0 * dot(P, dvec) - norm2(dvec)) * tracer.inv_two_mass() * dt;
        const Complex expect = reference.field[p] * std::exp(Complex(0.0, phase));
        REQUIRE_THAT(std::abs(s.field[p] - expect), Catch::Matchers::WithinAbs(0.0, 1e-15));
        compared = true;
    }
    REQUIRE(compared);

    // Infinite mass: no phase at all.
    SectorState frozen = reference;
    free_phase(frozen, TracerSpec::infinite(), dt);
    REQUIRE(frozen.field == reference.field);

    // Diagonal sector: identically no phase.
    SectorState diag = SectorState::zero(grid, Offset{});
    diag.field.assign(diag.field.size(), {0.25, 0.0});
    const std::vector<Complex> before = diag.field;
    free_phase(diag, tracer, dt);
    REQUIRE(diag.field == before);
}

TEST_CASE("time step guard rejects unstable steps") {
    const KernelTable table = test_table(Offset{});
    std::vector<Complex> field(table.grid.size(), {0.1, 0.0});
    REQUIRE_THROWS_AS(
        collision_step_rk4(table, field, 0.2 / table.max_out_rate(), 0),
        ContractViolation);
    REQUIRE_NOTHROW(collision_step_rk4(table, field, 0.09 / table.max_out_rate(), 0));
}

TEST_CASE("diagonal relaxation conserves trace and stays positive") {
    const KernelTable table = test_table(Offset{});
    std::vector<SectorState> sectors;
    sectors.push_back(gaussian_diagonal(test_grid(), 0.5));
    EvolveOptions opts;
    opts.n_steps = 50;
    opts.check_entropy = true;
    const std::vector<StepRecord> records =
        evolve(sectors, {table}, TracerSpec::finite(1.0), opts);

    REQUIRE(records.size() == 51);
    for (const StepRecord& r : records) {
        REQUIRE_THAT(r.trace, Catch::Matchers::WithinAbs(records.front().trace, 1e-12));
        REQUIRE(r.min_diag >= -1e-12);
    }
    // Entropy is non-decreasing along the relaxation.
    for (std::size_t k = 1; k < records.size(); ++k)
        REQUIRE(records[k].entropy >= records[k - 1].entropy - 1e-10);
    // Energy moves toward the thermal value.
    REQUIRE(records.back().energy > records.front().energy);
    // Leakage stays small: the transfer cutoff retains almost all flux.
    REQUIRE(records.back().leakage >= 0.0);
    REQUIRE(records.back().leakage < 1e-2);
}

TEST_CASE("discretized thermal state is nearly stationary") {
    const KernelTable table = test_table(Offset{});
    std::vector<SectorState> sectors;
    sectors.push_back(discretized_maxwell(test_grid(), test_gas(), TracerSpec::finite(1.0)));
    const std::vector<Complex> initial = sectors[0].field;
    EvolveOptions opts;
    opts.n_steps = 20;
    const std::vector<StepRecord> records =
        evolve(sectors, {table}, TracerSpec::finite(1.0), opts);

    double drift = 0.0, scale = 0.0;
    for (std::size_t p = 0; p < initial.size(); ++p) {
        drift += std::abs(sectors[0].field[p] - initial[p]);
        scale += std::abs(initial[p]);
    }
    REQUIRE(drift / scale < 0.02);
    REQUIRE_THAT(records.back().energy,
                 Catch::Matchers::WithinRel(records.front().energy, 2e-2));
}

TEST_CASE("sector norms contract and conjugate sectors stay paired") {
    const MomentumGrid grid = test_grid();
    const std::vector<Offset> deltas = {Offset{}, Offset{0, 0, 1}, Offset{0, 0, -1}};
    std::vector<SectorState> sectors =
        pure_state_sectors(grid, deltas, Vec3(0.0, 0.0, 0.75), Vec3(0.0, 0.0, -0.75), 0.4, 0.0);
    std::vector<KernelTable> tables;
    for (const Offset& d : deltas) tables.push_back(test_table(d));

    EvolveOptions opts;
    opts.n_steps = 40;
    opts.minor_stride = 1;
    const std::vector<StepRecord> records =
        evolve(sectors, tables, TracerSpec::finite(1.0), opts);

    for (std::size_t k = 1; k < records.size(); ++k)
        for (std::size_t i = 0; i < sectors.size(); ++i)
            REQUIRE(records[k].sector_l1[i] <=
                    records[k - 1].sector_l1[i] * (1.0 + 1e-12) + 1e-300);

    // Off-diagonal norms genuinely decay for separated packets.
    REQUIRE(records.back().sector_l1[1] < 0.9 * records.front().sector_l1[1]);

    // Hermiticity pairing: rho_d(P) equals conj(rho_{-d}(P - d)).
    const SectorState& plus = sectors[1];
    const SectorState& minus = sectors[2];
    double worst = 0.0;
    for (std::size_t p = 0; p < plus.field.size(); ++p) {
        const Offset c = grid.node(p);
        if (!plus.in_support(c)) continue;
        const Complex mirrored = std::conj(minus.field[grid.index(c - plus.delta)]);
        worst = std::max(worst, std::abs(plus.field[p] - mirrored));
    }
    REQUIRE(worst < 1e-13);

    // Positivity minors hold throughout (monitors did not abort), and
    // the recorded minimum stays above the acceptance band.
    for (const StepRecord& r : records) REQUIRE(r.min_minor >= -1e-10);
}

TEST_CASE("monitors abort on a corrupted state") {
    const KernelTable table = test_table(Offset{});
    std::vector<SectorState> sectors;
    sectors.push_back(gaussian_diagonal(test_grid(), 0.5));
    sectors[0].field[0] = {-0.1, 0.0};
    EvolveOptions opts;
    opts.n_steps = 3;
    REQUIRE_THROWS_AS(evolve(sectors, {table}, TracerSpec::finite(1.0), opts),
                      MonitorViolation);
}

TEST_CASE("evolution rejects mismatched inputs") {
    const KernelTable diag = test_table(Offset{});
    std::vector<SectorState> sectors;
    sectors.push_back(SectorState::zero(test_grid(), Offset{0, 0, 1}));
    EvolveOptions opts;
    REQUIRE_THROWS_AS(evolve(sectors, {diag}, TracerSpec::finite(1.0), opts),
                      ContractViolation);
}
