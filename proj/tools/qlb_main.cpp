// Command-line front end: builds kernel tables, runs the quantum and
// classical solvers, runs the particle Monte Carlo, and executes the
// verification suite.  All outputs are deterministic for a fixed
// config, seed, and grid; worker count never changes results.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qlb/classical.hpp"
#include "qlb/config.hpp"
#include "qlb/csv.hpp"
#include "qlb/evolution.hpp"
#include "qlb/io.hpp"
#include "qlb/verify.hpp"

namespace {

constexpr int k_exit_ok = 0;
constexpr int k_exit_error = 1;
constexpr int k_exit_config = 2;
constexpr int k_exit_monitor = 3;
constexpr int k_exit_verify = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "qlb_out";
    long long seed = -1;     // -1: keep the config value
    int workers = -1;        // -1: keep the config value
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    cmd->add_option("-c,--config", args.config_path, "run configuration (JSON)")
        ->required(config_required);
    cmd->add_option("-o,--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--workers", args.workers, "worker threads (0 = hardware)");
}

qlb::RunConfig load_config(const CommonArgs& args) {
    qlb::RunConfig cfg = qlb::config_from_file(args.config_path);
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    if (args.workers >= 0) cfg.workers = args.workers;
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw qlb::IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw qlb::IoError("write failed: " + path);
}

void write_echo(const qlb::RunConfig& cfg, const std::string& out_dir) {
    write_text(out_dir + "/config_echo.json", qlb::config_echo(cfg).dump(2) + "\n");
}

std::string offset_tag(const qlb::Offset& d) {
    return std::to_string(d.x) + "_" + std::to_string(d.y) + "_" + std::to_string(d.z);
}

/// Load each requested sector table from the cache directory, building
/// and saving any that are missing or whose metadata does not match.
std::vector<qlb::KernelTable> ensure_tables(const qlb::RunConfig& cfg,
                                            const std::vector<qlb::Offset>& offsets,
                                            const std::string& out_dir) {
    const std::string table_dir = out_dir + "/tables";
    std::filesystem::create_directories(table_dir);
    const qlb::MomentumGrid grid = cfg.grid();
    const double q_max = cfg.effective_q_max();
    std::vector<qlb::KernelTable> tables;
    for (const qlb::Offset& d : offsets) {
        const std::string path = table_dir + "/table_" + offset_tag(d) + ".qlb";
        if (qlb::table_file_matches(path, grid, d, cfg.gas, cfg.tracer, cfg.model,
                                    cfg.quadrature, q_max)) {
            std::cout << "table (" << d.x << "," << d.y << "," << d.z << "): cached\n";
            tables.push_back(qlb::load_table(path));
            continue;
        }
        qlb::TabulateOptions opts;
        opts.workers = cfg.workers;
        qlb::KernelTable t = qlb::tabulate(grid, d, cfg.gas, cfg.tracer, cfg.model,
                                           cfg.quadrature, q_max, opts);
        qlb::save_table(t, path);
        std::cout << "table (" << d.x << "," << d.y << "," << d.z
                  << "): built, max out-rate " << t.max_out_rate() << "\n";
        tables.push_back(std::move(t));
    }
    return tables;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double max_residual = 0.0;
    long n_points = 0;
};

/// Least-squares line through (t, ln v) for the strictly positive
/// samples; used to extract per-sector decay rates.
LineFit fit_log_series(const std::vector<double>& t, const std::vector<double>& v) {
    LineFit fit;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(v[i] > 0.0)) continue;
        const double y = std::log(v[i]);
        sx += t[i];
        sy += y;
        sxx += t[i] * t[i];
        sxy += t[i] * y;
        ++fit.n_points;
    }
    if (fit.n_points < 2) return fit;
    const double n = static_cast<double>(fit.n_points);
    const double denom = n * sxx - sx * sx;
    if (denom <= 0.0) return fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(v[i] > 0.0)) continue;
        fit.max_residual = std::max(
            fit.max_residual, std::abs(std::log(v[i]) - fit.slope * t[i] - fit.intercept));
    }
    return fit;
}

int cmd_kernel(const CommonArgs& args) {
    qlb::RunConfig cfg = load_config(args);
    std::filesystem::create_directories(args.out_dir);
    write_echo(cfg, args.out_dir);
    const std::vector<qlb::KernelTable> tables =
        ensure_tables(cfg, cfg.scenario.offsets, args.out_dir);
    qlb::Json summary;
    summary["tables"] = qlb::Json::array();
    for (const qlb::KernelTable& t : tables)
        summary["tables"].push_back(qlb::Json{{"delta", qlb::to_json(t.delta)},
                                              {"max_out_rate", t.max_out_rate()},
                                              {"lattice_size", t.lattice.size()},
                                              {"real_valued", t.real_valued}});
    write_text(args.out_dir + "/summary.json", summary.dump(2) + "\n");
    return k_exit_ok;
}

int cmd_evolve(const CommonArgs& args) {
    qlb::RunConfig cfg = load_config(args);
    std::filesystem::create_directories(args.out_dir + "/states");
    write_echo(cfg, args.out_dir);

    std::vector<qlb::SectorState> sectors = qlb::build_scenario_states(cfg);
    std::vector<qlb::Offset> offsets;
    for (const qlb::SectorState& s : sectors) offsets.push_back(s.delta);
    const std::vector<qlb::KernelTable> tables = ensure_tables(cfg, offsets, args.out_dir);

    for (const qlb::SectorState& s : sectors)
        qlb::save_state(s, args.out_dir + "/states/state_" + offset_tag(s.delta) +
                               "_initial.qlb");

    qlb::EvolveOptions opts;
    opts.dt = cfg.integration.dt;
    if (opts.dt <= 0.0)
        opts.dt = cfg.integration.dt_factor / tables[0].max_out_rate();
    opts.n_steps = cfg.integration.n_steps;
    opts.record_stride = cfg.integration.record_stride;
    opts.minor_stride = cfg.integration.minor_stride;
    opts.check_entropy = cfg.integration.check_entropy;
    opts.workers = cfg.workers;
    opts.abort_on_violation = cfg.abort_on_violation;
    opts.thresholds = cfg.thresholds;

    const std::vector<qlb::StepRecord> records =
        qlb::evolve(sectors, tables, cfg.tracer, opts);

    std::vector<std::string> columns = {"step",    "time",      "trace",   "energy",
                                        "min_diag", "entropy",  "min_minor", "leakage"};
    for (const qlb::SectorState& s : sectors) columns.push_back("l1_" + offset_tag(s.delta));
    qlb::CsvWriter csv(args.out_dir + "/monitors.csv", columns);
    for (const qlb::StepRecord& r : records) {
        std::vector<double> row = {static_cast<double>(r.step), r.time,    r.trace,
                                   r.energy,                    r.min_diag, r.entropy,
                                   r.min_minor,                 r.leakage};
        for (double l1 : r.sector_l1) row.push_back(l1);
        csv.row(row);
    }

    for (const qlb::SectorState& s : sectors)
        qlb::save_state(s, args.out_dir + "/states/state_" + offset_tag(s.delta) +
                               "_final.qlb");

    std::vector<double> times;
    for (const qlb::StepRecord& r : records) times.push_back(r.time);
    qlb::Json sector_summaries = qlb::Json::array();
    for (std::size_t i = 0; i < sectors.size(); ++i) {
        std::vector<double> l1;
        for (const qlb::StepRecord& r : records) l1.push_back(r.sector_l1[i]);
        qlb::Json entry{{"delta", qlb::to_json(sectors[i].delta)},
                        {"l1_initial", l1.front()},
                        {"l1_final", l1.back()}};
        if (!(sectors[i].delta == qlb::Offset{})) {
            const LineFit fit = fit_log_series(times, l1);
            entry["decoherence_rate"] = -fit.slope;
            entry["log_fit_residual"] = fit.max_residual;
            entry["fit_points"] = fit.n_points;
        }
        sector_summaries.push_back(entry);
    }

    const qlb::StepRecord& last = records.back();
    qlb::Json summary{{"dt", opts.dt},
                      {"n_steps", opts.n_steps},
                      {"final_time", last.time},
                      {"initial_trace", records.front().trace},
                      {"final_trace", last.trace},
                      {"trace_drift", std::abs(last.trace - records.front().trace)},
                      {"final_energy", last.energy},
                      {"min_diag", last.min_diag},
                      {"leakage", last.leakage},
                      {"sectors", sector_summaries}};
    write_text(args.out_dir + "/summary.json", summary.dump(2) + "\n");
    std::cout << "evolved " << opts.n_steps << " steps, dt " << opts.dt << ", trace drift "
              << std::abs(last.trace - records.front().trace) << "\n";
    return k_exit_ok;
}

int cmd_classical(const CommonArgs& args) {
    qlb::RunConfig cfg = load_config(args);
    if (cfg.scenario.type == qlb::ScenarioType::two_packet)
        throw qlb::ConfigError("classical: scenario must be diagonal");
    std::filesystem::create_directories(args.out_dir);
    write_echo(cfg, args.out_dir);

    const std::vector<qlb::KernelTable> tables =
        ensure_tables(cfg, {qlb::Offset{}}, args.out_dir);
    const qlb::KernelTable& table = tables[0];

    std::vector<qlb::SectorState> init = qlb::build_scenario_states(cfg);
    std::vector<double> w(init[0].field.size());
    for (std::size_t p = 0; p < w.size(); ++p) w[p] = init[0].field[p].real();

    double dt = cfg.integration.dt;
    if (dt <= 0.0) dt = cfg.integration.dt_factor / table.max_out_rate();
    const std::vector<qlb::ClassicalRecord> records =
        qlb::classical_evolve(table, w, cfg.tracer, dt, cfg.integration.n_steps,
                              cfg.integration.record_stride, cfg.workers);

    qlb::CsvWriter csv(args.out_dir + "/moments.csv",
                       {"step", "time", "trace", "energy", "min_w"});
    for (const qlb::ClassicalRecord& r : records)
        csv.row({static_cast<double>(r.step), r.time, r.trace, r.energy, r.min_w});

    qlb::Json summary{{"dt", dt},
                      {"n_steps", cfg.integration.n_steps},
                      {"final_time", records.back().time},
                      {"trace_drift",
                       std::abs(records.back().trace - records.front().trace)},
                      {"final_energy", records.back().energy},
                      {"final_min_w", records.back().min_w}};
    write_text(args.out_dir + "/summary.json", summary.dump(2) + "\n");
    std::cout << "classical run: " << cfg.integration.n_steps << " steps, final energy "
              << records.back().energy << "\n";
    return k_exit_ok;
}

int cmd_dsmc(const CommonArgs& args) {
    qlb::RunConfig cfg = load_config(args);
    if (cfg.scenario.type == qlb::ScenarioType::two_packet)
        throw qlb::ConfigError("dsmc: scenario must be diagonal");
    std::filesystem::create_directories(args.out_dir);
    write_echo(cfg, args.out_dir);

    qlb::DsmcOptions opts;
    opts.n_particles = cfg.dsmc.n_particles;
    opts.t_final = cfg.dsmc.t_final;
    opts.snapshot_dt = cfg.dsmc.snapshot_dt;
    opts.seed = cfg.seed;
    opts.workers = cfg.workers;

    const auto sampler = cfg.scenario.type == qlb::ScenarioType::thermal
                             ? qlb::thermal_sampler(cfg.gas, cfg.tracer)
                             : qlb::cold_gaussian_sampler(cfg.effective_width(),
                                                          cfg.scenario.center);
    const qlb::DsmcResult result =
        qlb::dsmc_run(cfg.gas, cfg.tracer, cfg.model, opts, sampler);

    qlb::CsvWriter moments(args.out_dir + "/moments.csv",
                           {"time", "mean_energy", "se_energy", "mean_abs_p", "mean_px",
                            "mean_py", "mean_pz"});
    for (std::size_t k = 0; k < result.times.size(); ++k) {
        const qlb::DsmcMoments& m = result.moments[k];
        moments.row({result.times[k], m.mean_energy, m.se_energy, m.mean_abs_p, m.mean_p.x,
                     m.mean_p.y, m.mean_p.z});
    }

    qlb::CsvWriter hist(args.out_dir + "/histogram.csv", {"p_lo", "p_hi", "density"});
    for (std::size_t b = 0; b + 1 < result.hist_edges.size(); ++b)
        hist.row({result.hist_edges[b], result.hist_edges[b + 1], result.hist_density[b]});

    qlb::Json summary{
        {"n_particles", opts.n_particles},
        {"t_final", opts.t_final},
        {"seed", opts.seed},
        {"proposed_events", result.proposed_events},
        {"accepted_events", result.accepted_events},
        {"acceptance_fraction",
         static_cast<double>(result.accepted_events) /
             static_cast<double>(std::max<std::uint64_t>(result.proposed_events, 1))},
        {"max_accept_ratio", result.max_accept_ratio},
        {"final_mean_energy", result.moments.back().mean_energy},
        {"final_se_energy", result.moments.back().se_energy}};
    write_text(args.out_dir + "/summary.json", summary.dump(2) + "\n");
    std::cout << "dsmc: " << result.accepted_events << " collisions over "
              << opts.n_particles << " particles, final energy "
              << result.moments.back().mean_energy << "\n";
    return k_exit_ok;
}

int cmd_verify(const std::string& out_dir, const std::string& criteria_csv,
               const std::string& profile, int workers) {
    std::vector<std::string> only;
    std::stringstream ss(criteria_csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) only.push_back(item);

    qlb::VerifyContext ctx(workers < 0 ? 0 : workers, profile);
    const std::vector<qlb::Criterion> criteria = qlb::run_criteria(ctx, only);
    if (criteria.empty()) throw qlb::ConfigError("verify: no criteria matched the selection");

    int failures = 0;
    for (const qlb::Criterion& c : criteria) {
        char measured[32], tol[32];
        std::snprintf(measured, sizeof(measured), "%.3e", c.measured);
        std::snprintf(tol, sizeof(tol), "%.3e", c.tolerance);
        std::cout << c.id << ' ' << (c.pass ? "PASS" : "FAIL") << " measured=" << measured
                  << " tol=" << tol << " : " << c.description << "\n";
        if (!c.pass) ++failures;
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        qlb::Json report = qlb::criteria_report(criteria);
        report["profile"] = profile;
        write_text(out_dir + "/report.json", report.dump(2) + "\n");
    }
    std::cout << (failures == 0 ? "all criteria passed"
                                : std::to_string(failures) + " criteria failed")
              << "\n";
    return failures == 0 ? k_exit_ok : k_exit_verify;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantum linear Boltzmann equation toolkit"};
    app.require_subcommand(1);

    CommonArgs kernel_args, evolve_args, classical_args, dsmc_args;
    CLI::App* kernel = app.add_subcommand("kernel", "build and cache collision kernel tables");
    add_common(kernel, kernel_args);
    CLI::App* evolve = app.add_subcommand("evolve", "run the sector evolution with monitors");
    add_common(evolve, evolve_args);
    CLI::App* classical =
        app.add_subcommand("classical", "run the classical grid solver");
    add_common(classical, classical_args);
    CLI::App* dsmc = app.add_subcommand("dsmc", "run the particle Monte Carlo");
    add_common(dsmc, dsmc_args);

    std::string verify_out, verify_criteria, verify_profile = "default";
    int verify_workers = -1;
    CLI::App* verify = app.add_subcommand("verify", "run the verification criteria");
    verify->add_option("-o,--out", verify_out, "directory for report.json");
    verify->add_option("--criteria", verify_criteria,
                       "comma-separated criterion ids (default: all)");
    verify->add_option("--tolerance-profile", verify_profile,
                       "tolerance profile: default or strict");
    verify->add_option("--workers", verify_workers, "worker threads (0 = hardware)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? k_exit_ok : k_exit_config;
    }

    try {
        if (*kernel) return cmd_kernel(kernel_args);
        if (*evolve) return cmd_evolve(evolve_args);
        if (*classical) return cmd_classical(classical_args);
        if (*dsmc) return cmd_dsmc(dsmc_args);
        if (*verify)
            return cmd_verify(verify_out, verify_criteria, verify_profile, verify_workers);
    } catch (const qlb::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return k_exit_config;
    } catch (const qlb::MonitorViolation& e) {
        std::cerr << "monitor violation: " << e.what() << "\n";
        return k_exit_monitor;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return k_exit_error;
    }
    return k_exit_config;
}
