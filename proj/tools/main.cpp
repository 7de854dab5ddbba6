// reflow: simulation and stability-certification toolkit for a production-flow
// conservation law with nonlocal velocity under boundary feedback.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "reflow/csv.hpp"
#include "reflow/experiments.hpp"
#include "reflow/lyapunov.hpp"
#include "reflow/model.hpp"
#include "reflow/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace reflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitIo = 4;

struct Options {
    std::string preset;  // example1 | example2 | "" for custom
    double rho_star = 0.0;
    double k = 0.0;
    double A = 1.0;
    double B = 1.0;
    double t_final = 0.0;  // 0: use the preset's horizon
    std::string disturbance = "zero";
    std::string init;  // file:<path> for custom runs
    int J = 100;
    double cfl = 0.75;
    int record_stride = 100;
    std::string beta_mode = "experiment";
    std::string frame = "physical";
    std::string out;
    int jobs = 0;  // 0: hardware concurrency
    std::vector<int> J_list = {100, 200, 400, 800, 1600};
    int ref_factor = 2;
    std::vector<double> k_list = {0.1, 0.3, 0.5, 0.7};
};

DisturbanceSignal parse_disturbance(const std::string& spec) {
    if (spec == "zero") return DisturbanceSignal::zero();
    if (spec.rfind("sin:", 0) == 0) {
        std::string rest = spec.substr(4);
        auto c1 = rest.find(':');
        if (c1 == std::string::npos)
            throw std::invalid_argument("disturbance spec must be sin:<amplitude>:<omega>[:phase]");
        double amp = std::stod(rest.substr(0, c1));
        std::string tail = rest.substr(c1 + 1);
        auto c2 = tail.find(':');
        double omega = std::stod(c2 == std::string::npos ? tail : tail.substr(0, c2));
        double phase = c2 == std::string::npos ? 0.0 : std::stod(tail.substr(c2 + 1));
        return DisturbanceSignal::sinusoid(amp, omega, phase);
    }
    if (spec.rfind("file:", 0) == 0) {
        auto table = csv::read_table2(spec.substr(5));
        return DisturbanceSignal::sampled(std::move(table.first), std::move(table.second));
    }
    throw std::invalid_argument("unknown disturbance spec '" + spec +
                                "' (expected zero, sin:amp:omega[:phase], or file:<path>)");
}

std::function<double(double)> parse_initial(const std::string& spec) {
    if (spec.rfind("file:", 0) != 0)
        throw std::invalid_argument("initial-condition spec must be file:<path> for custom runs");
    auto table = csv::read_table2(spec.substr(5));
    if (table.first.size() < 2)
        throw std::invalid_argument("initial-condition table needs at least two samples");
    for (std::size_t i = 1; i < table.first.size(); ++i)
        if (!(table.first[i] > table.first[i - 1]))
            throw std::invalid_argument("initial-condition sample positions must be strictly "
                                        "increasing");
    auto xs = std::make_shared<std::vector<double>>(std::move(table.first));
    auto ys = std::make_shared<std::vector<double>>(std::move(table.second));
    return [xs, ys](double x) {
        const auto& t = *xs;
        const auto& v = *ys;
        if (x <= t.front()) return v.front();
        if (x >= t.back()) return v.back();
        auto it = std::upper_bound(t.begin(), t.end(), x);
        std::size_t i = static_cast<std::size_t>(it - t.begin());
        double w = (x - t[i - 1]) / (t[i] - t[i - 1]);
        return v[i - 1] + w * (v[i] - v[i - 1]);
    };
}

// Resolves the preset/flag combination and reflects the chosen horizon back
// into opt.t_final so manifests carry fully resolved parameters.
ExperimentPreset resolve_preset(Options& opt) {
    ExperimentPreset p;
    if (opt.preset == "example1") p = ExperimentPreset::example1();
    else if (opt.preset == "example2") p = ExperimentPreset::example2();
    else if (!opt.preset.empty())
        throw std::invalid_argument("unknown preset '" + opt.preset + "'");
    else {
        p.name = "custom";
        p.rho_star = opt.rho_star;
        p.k = opt.k;
        p.model = VelocityModel{opt.A, opt.B};
        p.disturbance = parse_disturbance(opt.disturbance);
        if (opt.init.empty())
            throw std::invalid_argument("custom runs need --init file:<path>");
        p.initial = parse_initial(opt.init);
        FeedbackConfig validate(p.k, p.rho_star);  // range checks
        (void)validate;
        if (!(opt.t_final > 0.0))
            throw std::invalid_argument("custom runs need --t-final > 0");
    }
    if (opt.t_final > 0.0) p.t_final = opt.t_final;
    opt.t_final = p.t_final;
    return p;
}

BetaMode parse_beta_mode(const std::string& s) {
    if (s == "experiment") return BetaMode::experiment;
    if (s == "rigorous") return BetaMode::rigorous;
    throw std::invalid_argument("beta mode must be experiment or rigorous");
}

Frame parse_frame(const std::string& s) {
    if (s == "physical") return Frame::physical;
    if (s == "perturbation") return Frame::perturbation;
    throw std::invalid_argument("frame must be physical or perturbation");
}

fs::path resolve_out(const Options& opt) {
    if (!opt.out.empty()) return opt.out;
    if (const char* env = std::getenv("REFLOW_OUT_DIR")) return env;
    throw std::invalid_argument("no output directory: pass --out or set REFLOW_OUT_DIR");
}

int effective_jobs(int jobs) {
    if (jobs > 0) return jobs;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

json options_json(const std::string& command, const Options& opt) {
    json j;
    j["command"] = command;
    j["preset"] = opt.preset;
    j["rho_star"] = opt.rho_star;
    j["k"] = opt.k;
    j["A"] = opt.A;
    j["B"] = opt.B;
    j["t_final"] = opt.t_final;
    j["disturbance"] = opt.disturbance;
    j["init"] = opt.init;
    j["J"] = opt.J;
    j["cfl"] = opt.cfl;
    j["record_stride"] = opt.record_stride;
    j["beta_mode"] = opt.beta_mode;
    j["frame"] = opt.frame;
    j["jobs"] = opt.jobs;
    j["J_list"] = opt.J_list;
    j["ref_factor"] = opt.ref_factor;
    j["k_list"] = opt.k_list;
    return j;
}

Options options_from_json(const json& j) {
    Options opt;
    opt.preset = j.at("preset").get<std::string>();
    opt.rho_star = j.at("rho_star").get<double>();
    opt.k = j.at("k").get<double>();
    opt.A = j.at("A").get<double>();
    opt.B = j.at("B").get<double>();
    opt.t_final = j.at("t_final").get<double>();
    opt.disturbance = j.at("disturbance").get<std::string>();
    opt.init = j.at("init").get<std::string>();
    opt.J = j.at("J").get<int>();
    opt.cfl = j.at("cfl").get<double>();
    opt.record_stride = j.at("record_stride").get<int>();
    opt.beta_mode = j.at("beta_mode").get<std::string>();
    opt.frame = j.at("frame").get<std::string>();
    opt.jobs = j.at("jobs").get<int>();
    opt.J_list = j.at("J_list").get<std::vector<int>>();
    opt.ref_factor = j.at("ref_factor").get<int>();
    opt.k_list = j.at("k_list").get<std::vector<double>>();
    return opt;
}

void write_manifest(const fs::path& dir, const json& manifest) {
    fs::create_directories(dir);
    std::ofstream out(dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest: " + (dir / "manifest.json").string());
    out << manifest.dump(2) << "\n";
}

void write_dissipation_report(const fs::path& file, const DissipationReport& rep) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write report: " + file.string());
    out << "steps: " << rep.steps << "\n"
        << "closure_inconsistent_steps: " << rep.inconsistent_steps << "\n"
        << "violations: " << rep.violations << "\n"
        << "violations_on_consistent_steps: " << rep.violations_consistent << "\n"
        << "all_pass: " << (rep.all_pass ? "true" : "false") << "\n"
        << "consistent_all_pass: " << (rep.consistent_all_pass ? "true" : "false") << "\n"
        << "worst_margin: " << csv::format_double(rep.worst_margin) << "\n"
        << "worst_step: " << rep.worst_step << "\n"
        << "worst_margin_alt_convention: " << csv::format_double(rep.worst_margin_alt) << "\n"
        << "eta_hat: " << csv::format_double(rep.eta_hat) << "\n"
        << "nu: " << csv::format_double(rep.nu) << "\n";
}

void write_iss_report(const fs::path& file, const IssReport& rep) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write report: " + file.string());
    out << "checked_levels: " << rep.checked << "\n"
        << "all_pass: " << (rep.all_pass ? "true" : "false") << "\n"
        << "sigma2: " << csv::format_double(rep.sigma2) << "\n"
        << "delta2: " << csv::format_double(rep.delta2) << "\n"
        << "gamma1: " << csv::format_double(rep.gamma1) << "\n"
        << "gamma2: " << csv::format_double(rep.gamma2) << "\n"
        << "gamma3: " << csv::format_double(rep.gamma3) << "\n"
        << "worst_margin: " << csv::format_double(rep.worst_margin) << "\n"
        << "worst_index: " << rep.worst_index << "\n"
        << "max_disturbance: " << csv::format_double(rep.max_disturbance) << "\n"
        << "final_norm: " << csv::format_double(rep.final_norm) << "\n";
}

int cmd_simulate(Options opt) {
    ExperimentPreset preset = resolve_preset(opt);
    const fs::path out_dir = resolve_out(opt);
    const Frame frame = parse_frame(opt.frame);
    const BetaMode mode = parse_beta_mode(opt.beta_mode);

    LyapunovCertificate cert = make_certificate(FeedbackConfig(preset.k, preset.rho_star),
                                                preset.model, Grid(opt.J), mode);
    if (!cert.valid) {
        std::cerr << "warning: certificate infeasible (";
        for (std::size_t i = 0; i < cert.reasons.size(); ++i)
            std::cerr << (i ? "; " : "") << cert.reasons[i];
        std::cerr << "); simulating without one\n";
    }

    Trajectory tr = run_preset(preset, opt.J, opt.cfl, frame, opt.record_stride,
                               cert.valid ? cert.weights : std::vector<double>{});
    fs::create_directories(out_dir);
    if (cert.valid) {
        attach_rates(cert, tr.min_velocity(), tr.max_velocity());
        auto L = lyapunov_series(tr, cert);
        csv::write_trajectory(out_dir / "trajectory.csv", tr, &L);
    } else {
        csv::write_trajectory(out_dir / "trajectory.csv", tr);
    }
    csv::write_state_snapshots(out_dir / "states", tr);
    csv::write_certificate(out_dir / "certificate.csv", cert);

    json manifest = options_json("simulate", opt);
    manifest["outputs"] = {"trajectory.csv", "states/", "certificate.csv"};
    manifest["steps"] = tr.steps();
    manifest["sigma2"] = tr.min_velocity();
    manifest["delta2"] = tr.max_velocity();
    write_manifest(out_dir, manifest);
    std::cout << "simulate: " << tr.steps() << " steps, sigma2 = "
              << csv::format_double(tr.min_velocity()) << ", outputs in " << out_dir.string()
              << "\n";
    return kExitOk;
}

int cmd_check(Options opt) {
    ExperimentPreset preset = resolve_preset(opt);
    const fs::path out_dir = resolve_out(opt);
    const BetaMode mode = parse_beta_mode(opt.beta_mode);

    LyapunovCertificate cert = make_certificate(FeedbackConfig(preset.k, preset.rho_star),
                                                preset.model, Grid(opt.J), mode);
    if (!cert.valid) {
        std::string why;
        for (std::size_t i = 0; i < cert.reasons.size(); ++i)
            why += (i ? "; " : "") + cert.reasons[i];
        throw std::invalid_argument("check requires a feasible certificate: " + why);
    }

    Trajectory tr =
        run_preset(preset, opt.J, opt.cfl, Frame::perturbation, opt.record_stride, cert.weights);
    attach_rates(cert, tr.min_velocity(), tr.max_velocity());
    DissipationReport diss = check_step_dissipation(tr, cert);
    IssReport iss = check_iss_bound(tr, cert, tr.l2_deviation.front());

    fs::create_directories(out_dir);
    auto L = lyapunov_series(tr, cert);
    csv::write_trajectory(out_dir / "trajectory.csv", tr, &L);
    csv::write_certificate(out_dir / "certificate.csv", cert);
    write_dissipation_report(out_dir / "dissipation_report.txt", diss);
    write_iss_report(out_dir / "iss_report.txt", iss);

    json manifest = options_json("check", opt);
    manifest["outputs"] = {"trajectory.csv", "certificate.csv", "dissipation_report.txt",
                           "iss_report.txt"};
    manifest["steps"] = tr.steps();
    manifest["sigma2"] = iss.sigma2;
    manifest["delta2"] = iss.delta2;
    write_manifest(out_dir, manifest);

    std::cout << "check: dissipation "
              << (diss.consistent_all_pass ? "holds on every closure-consistent step"
                                           : "VIOLATED")
              << " (" << diss.steps - diss.inconsistent_steps << "/" << diss.steps
              << " steps checked against the closure hypothesis), ISS bound "
              << (iss.all_pass ? "holds" : "VIOLATED") << " at " << iss.checked
              << " levels; outputs in " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_converge(Options opt) {
    ExperimentPreset preset = resolve_preset(opt);
    const fs::path out_dir = resolve_out(opt);
    auto rows = convergence_study(preset, opt.J_list, opt.cfl, opt.ref_factor,
                                  parse_beta_mode(opt.beta_mode), effective_jobs(opt.jobs));
    fs::create_directories(out_dir);
    write_convergence_csv(out_dir / "table.csv", rows);
    write_convergence_table(out_dir / "table.txt", rows);

    json manifest = options_json("converge", opt);
    manifest["outputs"] = {"table.csv", "table.txt"};
    json sigma2 = json::array();
    for (const auto& r : rows) sigma2.push_back(r.sigma2);
    manifest["sigma2_by_J"] = sigma2;
    write_manifest(out_dir, manifest);

    for (const auto& r : rows)
        std::cout << "J = " << r.J << ": error = " << csv::format_double(r.l2_error)
                  << ", gamma1 = " << csv::format_double(r.gamma1)
                  << ", sigma2 = " << csv::format_double(r.sigma2) << "\n";
    return kExitOk;
}

int cmd_decay(Options opt) {
    ExperimentPreset preset = resolve_preset(opt);
    const fs::path out_dir = resolve_out(opt);
    auto series = decay_series(preset, opt.k_list, opt.cfl, opt.J, effective_jobs(opt.jobs));
    fs::create_directories(out_dir);
    write_decay_csv(out_dir / "decay.csv", series);

    json manifest = options_json("decay", opt);
    manifest["outputs"] = {"decay.csv"};
    json slopes = json::array(), plateaus = json::array();
    for (const auto& s : series) {
        slopes.push_back(s.fitted_slope);
        plateaus.push_back(s.plateau);
    }
    manifest["fitted_slopes"] = slopes;
    manifest["plateaus"] = plateaus;
    write_manifest(out_dir, manifest);

    for (const auto& s : series)
        std::cout << "k = " << csv::format_double(s.k)
                  << ": slope = " << csv::format_double(s.fitted_slope)
                  << ", plateau = " << csv::format_double(s.plateau) << "\n";
    return kExitOk;
}

int cmd_reproduce(Options opt) {
    if (opt.preset != "example1" && opt.preset != "example2")
        throw std::invalid_argument("reproduce needs a preset: example1 or example2");
    ExperimentPreset preset = resolve_preset(opt);
    const fs::path out_dir = resolve_out(opt);
    const int jobs = effective_jobs(opt.jobs);
    fs::create_directories(out_dir);

    json manifest = options_json("reproduce", opt);
    json outputs = json::array();
    for (double cfl : {0.5, 0.9}) {
        auto rows = convergence_study(preset, opt.J_list, cfl, opt.ref_factor,
                                      parse_beta_mode(opt.beta_mode), jobs);
        std::string tag = cfl == 0.5 ? "cfl0.5" : "cfl0.9";
        write_convergence_csv(out_dir / ("table_" + tag + ".csv"), rows);
        write_convergence_table(out_dir / ("table_" + tag + ".txt"), rows);
        outputs.push_back("table_" + tag + ".csv");
        outputs.push_back("table_" + tag + ".txt");
        json sigma2 = json::array(), gamma1 = json::array();
        for (const auto& r : rows) {
            sigma2.push_back(r.sigma2);
            gamma1.push_back(r.gamma1);
        }
        manifest["sigma2_" + tag] = sigma2;
        manifest["gamma1_" + tag] = gamma1;
        for (const auto& r : rows)
            std::cout << "cfl " << cfl << " J = " << r.J
                      << ": gamma1 = " << csv::format_double(r.gamma1) << "\n";
    }

    auto series = decay_series(preset, opt.k_list, 0.75, 1000, jobs);
    write_decay_csv(out_dir / "figure_decay_cfl0.75.csv", series);
    outputs.push_back("figure_decay_cfl0.75.csv");
    json slopes = json::array();
    for (const auto& s : series) slopes.push_back(s.fitted_slope);
    manifest["figure_fitted_slopes"] = slopes;

    manifest["outputs"] = outputs;
    write_manifest(out_dir, manifest);
    std::cout << "reproduce " << opt.preset << ": outputs in " << out_dir.string() << "\n";
    return kExitOk;
}

int dispatch(const std::string& command, Options opt) {
    if (command == "simulate") return cmd_simulate(opt);
    if (command == "check") return cmd_check(opt);
    if (command == "converge") return cmd_converge(opt);
    if (command == "decay") return cmd_decay(opt);
    if (command == "reproduce") return cmd_reproduce(opt);
    throw std::invalid_argument("unknown command '" + command + "'");
}

int cmd_rerun(const std::string& manifest_path, const std::string& out_override) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path);
    json manifest = json::parse(in);
    Options opt = options_from_json(manifest);
    opt.out = out_override.empty()
                  ? fs::path(manifest_path).parent_path().string()
                  : out_override;
    if (opt.out.empty()) opt.out = ".";
    return dispatch(manifest.at("command").get<std::string>(), opt);
}

void add_common_flags(CLI::App* cmd, Options& opt, bool with_grid = true) {
    cmd->add_option("--preset", opt.preset, "example1 or example2");
    cmd->add_option("--rho-star", opt.rho_star, "equilibrium density (custom runs)");
    cmd->add_option("--k", opt.k, "feedback gain in [0,1) (custom runs)");
    cmd->add_option("--A", opt.A, "velocity numerator");
    cmd->add_option("--B", opt.B, "velocity mass offset");
    cmd->add_option("--t-final", opt.t_final, "time horizon (custom runs)");
    cmd->add_option("--disturbance", opt.disturbance,
                    "zero, sin:<amp>:<omega>[:phase], or file:<path>");
    cmd->add_option("--init", opt.init, "file:<path> with x,rho samples (custom runs)");
    if (with_grid) {
        cmd->add_option("--J", opt.J, "cell count");
        cmd->add_option("--cfl", opt.cfl, "CFL number in (0,1]");
    }
    cmd->add_option("--record-stride", opt.record_stride, "snapshot every m-th step");
    cmd->add_option("--beta-mode", opt.beta_mode, "experiment or rigorous");
    cmd->add_option("--out", opt.out, "output directory (default: $REFLOW_OUT_DIR)");
    cmd->add_option("--jobs", opt.jobs, "worker cap for parallel studies (0: all cores)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nonlocal-velocity production flow: simulation and ISS certification"};
    app.require_subcommand(1);
    Options opt;

    auto* simulate_cmd = app.add_subcommand("simulate", "run one closed-loop simulation");
    add_common_flags(simulate_cmd, opt);
    simulate_cmd->add_option("--frame", opt.frame, "physical or perturbation");

    auto* converge_cmd = app.add_subcommand("converge", "grid-refinement study");
    add_common_flags(converge_cmd, opt);
    converge_cmd->add_option("--J-list", opt.J_list, "resolutions (each must divide J_ref)");
    converge_cmd->add_option("--ref-factor", opt.ref_factor, "J_ref = factor * max(J list)");

    auto* decay_cmd = app.add_subcommand("decay", "log-norm decay series across gains");
    add_common_flags(decay_cmd, opt);
    decay_cmd->add_option("--k-list", opt.k_list, "feedback gains");

    auto* check_cmd = app.add_subcommand("check", "certificate + dissipation/ISS reports");
    add_common_flags(check_cmd, opt);

    auto* reproduce_cmd =
        app.add_subcommand("reproduce", "tables (CFL 0.5/0.9) and figure data (CFL 0.75)");
    reproduce_cmd->add_option("preset", opt.preset, "example1 or example2")->required();
    reproduce_cmd->add_option("--out", opt.out, "output directory");
    reproduce_cmd->add_option("--jobs", opt.jobs, "worker cap (0: all cores)");
    reproduce_cmd->add_option("--ref-factor", opt.ref_factor, "reference refinement factor");
    reproduce_cmd->add_option("--beta-mode", opt.beta_mode, "experiment or rigorous");

    std::string manifest_path, rerun_out;
    auto* rerun_cmd = app.add_subcommand("rerun", "repeat a run from its manifest");
    rerun_cmd->add_option("manifest", manifest_path, "path to manifest.json")->required();
    rerun_cmd->add_option("--out", rerun_out, "output directory (default: manifest's directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (simulate_cmd->parsed()) return cmd_simulate(opt);
        if (converge_cmd->parsed()) return cmd_converge(opt);
        if (decay_cmd->parsed()) return cmd_decay(opt);
        if (check_cmd->parsed()) return cmd_check(opt);
        if (reproduce_cmd->parsed()) return cmd_reproduce(opt);
        if (rerun_cmd->parsed()) return cmd_rerun(manifest_path, rerun_out);
    } catch (const CertificateInfeasible& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::runtime_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitConfig;
}
