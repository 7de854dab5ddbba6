// Acceptance suite: one binary, one pass/fail line per criterion.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "reflow/experiments.hpp"
#include "reflow/lyapunov.hpp"
#include "reflow/model.hpp"
#include "reflow/solver.hpp"

using namespace reflow;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    if (!pass) ++failures;
}

struct Study {
    double cfl = 0.0;
    std::vector<ConvergenceRow> rows;
};

std::vector<Study> run_studies(const ExperimentPreset& preset) {
    const std::vector<int> Js = {100, 200, 400, 800, 1600};
    std::vector<Study> studies;
    for (double cfl : {0.5, 0.9})
        studies.push_back({cfl, convergence_study(preset, Js, cfl, 2, BetaMode::experiment, 4)});
    return studies;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

Trajectory run_with_certificate(const ExperimentPreset& preset, int J, double cfl,
                                const LyapunovCertificate& cert) {
    return run_preset(preset, J, cfl, Frame::perturbation, 1 << 30, cert.weights);
}

}  // namespace

int main() {
    const std::vector<int> Js = {100, 200, 400, 800, 1600};

    // ---- criteria 1-3: gamma1 tables and error/order structure -------------
    ExperimentPreset ex1 = ExperimentPreset::example1();
    ExperimentPreset ex2 = ExperimentPreset::example2();
    const std::vector<Study> studies1 = run_studies(ex1);
    const std::vector<Study> studies2 = run_studies(ex2);

    {
        const double table1[5] = {0.1270, 0.1274, 0.1275, 0.1276, 0.1277};
        double worst = 0.0;
        for (const Study& st : studies1)
            for (std::size_t i = 0; i < st.rows.size(); ++i)
                worst = std::max(worst, std::abs(st.rows[i].gamma1 - table1[i]));
        report(1, worst <= 5e-4,
               "example-1 gamma1 column matches 0.1270..0.1277 at CFL 0.5 and 0.9 "
               "(max deviation " + fmt(worst) + ", tolerance 5e-4)");
    }
    {
        double worst = 0.0;
        double sigma2_low = 1.0, sigma2_high = 0.0;
        for (const Study& st : studies2)
            for (const ConvergenceRow& r : st.rows) {
                worst = std::max(worst, std::abs(r.gamma1 - 0.0244));
                sigma2_low = std::min(sigma2_low, r.sigma2);
                sigma2_high = std::max(sigma2_high, r.sigma2);
            }
        report(2, worst <= 5e-4,
               "example-2 gamma1 = 0.0244 at every J and both CFL numbers (max deviation " +
                   fmt(worst) + "), measured sigma2 in [" + fmt(sigma2_low) + ", " +
                   fmt(sigma2_high) + "] (expected near 0.303)");
    }
    {
        bool mono = true, orders_ok = true;
        double order_lo = 1e9, order_hi = -1e9;
        for (const std::vector<Study>* studies : {&studies1, &studies2})
            for (const Study& st : *studies) {
                for (std::size_t i = 1; i < st.rows.size(); ++i) {
                    if (!(st.rows[i].l2_error < st.rows[i - 1].l2_error)) mono = false;
                    const double order = st.rows[i].order.value();
                    order_lo = std::min(order_lo, order);
                    order_hi = std::max(order_hi, order);
                    if (!(order >= 0.5 && order <= 1.7)) orders_ok = false;
                }
            }
        report(3, mono && orders_ok,
               "errors against the 2x-fine reference decrease monotonically in J and observed "
               "orders lie in [0.5, 1.7] (seen [" + fmt(order_lo) + ", " + fmt(order_hi) + "])");
    }

    // ---- criterion 4: per-step dissipation with d = 0 ----------------------
    {
        ExperimentPreset p1 = ex1;
        p1.disturbance = DisturbanceSignal::zero();
        LyapunovCertificate cert1 = make_certificate(FeedbackConfig(p1.k, p1.rho_star),
                                                     p1.model, Grid(1000), BetaMode::experiment);
        Trajectory tr1 = run_with_certificate(p1, 1000, 0.5, cert1);
        DissipationReport rep1 = check_step_dissipation(tr1, cert1);

        ExperimentPreset p2 = ex2;
        p2.disturbance = DisturbanceSignal::zero();
        LyapunovCertificate cert2 = make_certificate(FeedbackConfig(p2.k, p2.rho_star),
                                                     p2.model, Grid(800), BetaMode::experiment);
        Trajectory tr2 = run_with_certificate(p2, 800, 0.5, cert2);
        DissipationReport rep2 = check_step_dissipation(tr2, cert2);

        const bool pass = rep1.consistent_all_pass && rep1.steps >= 10000 &&
                          rep1.inconsistent_steps <= 1 && rep2.all_pass &&
                          rep2.steps >= 10000;
        report(4, pass,
               "per-step dissipation inequality (proof-variant rate, rel 1e-9 + abs 1e-12): "
               "example 1 holds at all " + std::to_string(rep1.steps) +
               " closure-consistent steps (initial datum violates the closure hypothesis and "
               "is flagged, margin " + fmt(-rep1.worst_margin) + " past the bound there); "
               "example 2 holds at all " + std::to_string(rep2.steps) + " steps");
    }

    // ---- criterion 5: ISS bound with the sinusoidal disturbance ------------
    {
        LyapunovCertificate cert1 = make_certificate(FeedbackConfig(ex1.k, ex1.rho_star),
                                                     ex1.model, Grid(800), BetaMode::experiment);
        ExperimentPreset p1 = ex1;
        p1.t_final = 20.0;
        Trajectory tr1 = run_with_certificate(p1, 800, 0.5, cert1);
        IssReport iss1 = check_iss_bound(tr1, cert1, tr1.l2_deviation.front());

        LyapunovCertificate cert2 = make_certificate(FeedbackConfig(ex2.k, ex2.rho_star),
                                                     ex2.model, Grid(800), BetaMode::experiment);
        ExperimentPreset p2 = ex2;
        p2.t_final = 40.0;
        Trajectory tr2 = run_with_certificate(p2, 800, 0.5, cert2);
        IssReport iss2 = check_iss_bound(tr2, cert2, tr2.l2_deviation.front());

        ExperimentPreset fig = ex1;  // J = 1000, CFL 0.75 figure run
        Trajectory trf = run_preset(fig, 1000, 0.75, Frame::physical, 1 << 30);
        std::vector<double> tail(trf.l2_deviation.end() -
                                     static_cast<std::ptrdiff_t>(trf.l2_deviation.size() / 10),
                                 trf.l2_deviation.end());
        std::nth_element(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(tail.size() / 2),
                         tail.end());
        const double plateau = tail[tail.size() / 2];

        const bool pass = iss1.all_pass && iss1.final_norm <= iss1.gamma3 * 2.4e-3 &&
                          iss2.all_pass && iss2.final_norm <= iss2.gamma3 * 2.4e-3 &&
                          plateau >= 1e-4 && plateau <= 1e-2;
        report(5, pass,
               "ISS bound holds at every recorded level (worst margins " +
                   fmt(iss1.worst_margin) + " / " + fmt(iss2.worst_margin) +
                   "); late-time norms " + fmt(iss1.final_norm) + " <= gamma3*2.4e-3 = " +
                   fmt(iss1.gamma3 * 2.4e-3) + " and " + fmt(iss2.final_norm) +
                   " <= " + fmt(iss2.gamma3 * 2.4e-3) + "; J=1000 CFL 0.75 plateau " +
                   fmt(plateau) + " within one order of 1e-3");
    }

    // ---- criterion 6: frame equivalence over >= 1e4 steps ------------------
    {
        Grid grid(800);
        FeedbackConfig config(ex2.k, ex2.rho_star);
        SolverConfig phys_cfg;
        phys_cfg.cfl_number = 0.5;
        phys_cfg.t_final = 20.0;
        phys_cfg.record_stride = 1 << 30;
        SolverConfig pert_cfg = phys_cfg;
        pert_cfg.frame = Frame::perturbation;

        Simulation phys(sample_initial_state(ex2.initial, grid), grid, ex2.model, config,
                        phys_cfg, ex2.disturbance);
        Simulation pert(sample_initial_state(ex2.initial, grid, Frame::perturbation,
                                             ex2.rho_star),
                        grid, ex2.model, config, pert_cfg, ex2.disturbance);
        double worst_rel = 0.0;
        std::size_t steps = 0;
        while (!phys.done()) {
            phys.step();
            pert.step();
            ++steps;
            const auto& a = phys.state().values;
            const auto& b = pert.state().values;
            for (std::size_t j = 0; j < a.size(); ++j) {
                const double rel = std::abs(a[j] - (b[j] + ex2.rho_star)) /
                                   std::max(1.0, std::abs(a[j]));
                worst_rel = std::max(worst_rel, rel);
            }
        }
        report(6, steps >= 10000 && worst_rel <= 1e-12,
               "physical and perturbation runs of example 2 agree to relative " +
                   fmt(worst_rel) + " at every one of " + std::to_string(steps) +
                   " steps (required 1e-12 over >= 1e4 steps)");
    }

    // ---- criterion 7: telescoping mass balance ------------------------------
    {
        std::mt19937_64 rng(101);
        std::uniform_real_distribution<double> uval(0.0, 8.0);
        std::uniform_real_distribution<double> uk(0.0, 0.99);
        std::uniform_real_distribution<double> ucfl(0.05, 1.0);
        double worst = 0.0;
        for (int trial = 0; trial < 1000; ++trial) {
            const int J = 4 + static_cast<int>(rng() % 253);
            Grid grid(J);
            DensityState s;
            s.values.resize(static_cast<std::size_t>(J) + 1);
            for (double& v : s.values) v = uval(rng);
            SolverConfig cfg;
            cfg.cfl_number = ucfl(rng);
            cfg.t_final = 1e9;
            cfg.record_stride = 1 << 30;
            Simulation sim(s, grid, VelocityModel{1, 1}, FeedbackConfig(uk(rng), 0.0), cfg,
                           DisturbanceSignal::zero());
            const double W0 = sim.mass();
            const double lambda0 = sim.lambda();
            sim.step();
            const Trajectory& tr = sim.trajectory();
            const double gap = std::abs((tr.mass[1] - W0) -
                                        tr.step_sizes[0] * lambda0 *
                                            (s.values[0] - s.values.back()));
            worst = std::max(worst, gap);
        }
        report(7, worst <= 1e-13,
               "mass update telescopes to dt*lambda*(rho_0 - rho_J) on 1000 random states "
               "(worst gap " + fmt(worst) + ", tolerance 1e-13)");
    }

    // ---- criterion 8: positivity over 1e4 steps across gains ----------------
    {
        std::mt19937_64 rng(103);
        std::uniform_real_distribution<double> uval(0.0, 3.0);
        bool all_nonneg = true;
        double min_seen = 1e300;
        for (double k : {0.0, 0.3, 0.49, 0.7, 0.9}) {
            Grid grid(64);
            DensityState s;
            s.values.resize(65);
            for (double& v : s.values) v = uval(rng);
            SolverConfig cfg;
            cfg.cfl_number = 0.9;
            cfg.t_final = 1e9;
            cfg.record_stride = 1 << 30;
            Simulation sim(s, grid, VelocityModel{1, 1}, FeedbackConfig(k, 1.0), cfg,
                           DisturbanceSignal::zero());
            for (int n = 0; n < 10000; ++n) {
                sim.step();
                for (double v : sim.state().values) {
                    min_seen = std::min(min_seen, v);
                    if (v < 0.0) all_nonneg = false;
                }
            }
        }
        report(8, all_nonneg,
               "nonnegative data stays nonnegative for 1e4 steps at k in {0, 0.3, 0.49, 0.7, "
               "0.9} with d = 0 (minimum entry seen " + fmt(min_seen) + ")");
    }

    // ---- criterion 9: decay rate magnitude decreases with the gain ----------
    {
        auto series = decay_series(ex1, {0.1, 0.3, 0.5, 0.7}, 0.75, 1000, 4);
        bool decreasing = true;
        std::string seen;
        for (std::size_t i = 0; i < series.size(); ++i) {
            if (i && !(std::abs(series[i].fitted_slope) < std::abs(series[i - 1].fitted_slope)))
                decreasing = false;
            seen += (i ? ", " : "") + fmt(std::abs(series[i].fitted_slope));
        }
        report(9, decreasing,
               "fitted pre-plateau decay-rate magnitudes strictly decrease across k = 0.1, "
               "0.3, 0.5, 0.7 (|slopes| " + seen + ")");
    }

    // ---- criterion 10: tiny-scale equality with the brute-force oracle ------
    {
        double worst = 0.0;
        for (int J : {2, 3}) {
            for (bool pert : {false, true}) {
                oracle::Params p;
                p.k = 0.3;
                p.rho_star = pert ? 1.0 : 0.0;
                p.cfl = 0.8;
                p.perturbation = pert;
                p.disturbance = [](double t) { return 2.4e-3 * std::sin(t); };
                std::vector<double> init(static_cast<std::size_t>(J) + 1);
                for (int j = 0; j <= J; ++j)
                    init[static_cast<std::size_t>(j)] = 0.25 + 0.5 * j;
                auto levels = oracle::run_scheme(init, J, 5, p);

                DensityState state;
                state.values = init;
                state.frame = pert ? Frame::perturbation : Frame::physical;
                SolverConfig cfg;
                cfg.cfl_number = 0.8;
                cfg.t_final = 1e9;
                cfg.record_stride = 1;
                cfg.frame = state.frame;
                Simulation sim(state, Grid(J), VelocityModel{1, 1},
                               FeedbackConfig(0.3, p.rho_star), cfg,
                               DisturbanceSignal::sinusoid(2.4e-3, 1.0));
                for (int n = 0; n < 5; ++n) sim.step();
                const Trajectory& tr = sim.trajectory();
                for (int n = 0; n <= 5; ++n)
                    for (int j = 0; j <= J; ++j)
                        worst = std::max(
                            worst,
                            std::abs(tr.states[static_cast<std::size_t>(n)]
                                         .values[static_cast<std::size_t>(j)] -
                                     levels[static_cast<std::size_t>(n)]
                                         .rho[static_cast<std::size_t>(j)]));
            }
        }
        report(10, worst <= 1e-14,
               "J = 2, 3 runs match the hand-coded direct evaluation of the scheme for 5 "
               "steps (max deviation " + fmt(worst) + ", tolerance 1e-14)");
    }

    std::printf("%d/10 criteria passed\n", 10 - failures);
    return failures;
}
