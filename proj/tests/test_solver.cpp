#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "oracle.hpp"
#include "reflow/solver.hpp"

using namespace reflow;

namespace {

DensityState make_state(std::vector<double> values, Frame frame = Frame::physical) {
    DensityState s;
    s.values = std::move(values);
    s.frame = frame;
    return s;
}

}  // namespace

TEST_CASE("cfl step size") {
    CHECK(cfl_step_size(Grid(100), 0.5, 0.75, 0.0, 100.0) == doctest::Approx(0.015));
    CHECK(cfl_step_size(Grid(100), 0.5, 0.75, 99.999, 100.0) ==
          doctest::Approx(0.001).epsilon(1e-9));
    CHECK(cfl_step_size(Grid(1600), 1.0 / 3.0, 0.9, 0.0, 100.0) ==
          doctest::Approx(0.0016875).epsilon(1e-12));
    CHECK_THROWS_AS(cfl_step_size(Grid(10), 0.0, 0.5, 0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(cfl_step_size(Grid(10), -1.0, 0.5, 0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(cfl_step_size(Grid(10), 1.0, 1.5, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(cfl_step_size(Grid(10), 1.0, 0.5, 2.0, 1.0), std::invalid_argument);
}

TEST_CASE("upwind interior update") {
    // convexity fixed point
    DensityState c = make_state({3.0, 3.0, 3.0, 3.0});
    DensityState out = upwind_interior_step(c, 0.7);
    for (double v : out.values) CHECK(v == doctest::Approx(3.0).epsilon(1e-15));

    // exact transport at r = 1
    DensityState s = make_state({0.25, 1.5, -2.0, 7.0});
    out = upwind_interior_step(s, 1.0);
    CHECK(out.values[1] == 0.25);
    CHECK(out.values[2] == 1.5);
    CHECK(out.values[3] == -2.0);
    CHECK(out.values[0] == 0.25);  // boundary copied, closure applied by the caller

    // single-step hand evaluation
    out = upwind_interior_step(make_state({0.0, 1.0, 0.0}), 0.5);
    CHECK(out.values[1] == 0.5);
    CHECK(out.values[2] == 0.5);

    CHECK_THROWS_AS(upwind_interior_step(s, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(upwind_interior_step(s, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(upwind_interior_step(s, -0.2), std::invalid_argument);
}

TEST_CASE("interior update respects the previous state's range") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::uniform_real_distribution<double> ur(1e-3, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        int J = 2 + static_cast<int>(rng() % 60);
        DensityState s;
        s.values.resize(static_cast<std::size_t>(J) + 1);
        for (double& v : s.values) v = u(rng);
        double lo = *std::min_element(s.values.begin(), s.values.end());
        double hi = *std::max_element(s.values.begin(), s.values.end());
        DensityState out = upwind_interior_step(s, ur(rng));
        double tol = 4e-16 * std::max(std::abs(lo), std::abs(hi));
        for (int j = 1; j <= J; ++j) {
            CHECK(out.values[static_cast<std::size_t>(j)] >= lo - tol);
            CHECK(out.values[static_cast<std::size_t>(j)] <= hi + tol);
        }
    }
}

TEST_CASE("boundary closures") {
    VelocityModel m{1, 1};
    CHECK(boundary_close_physical(5.0, 0.8, FeedbackConfig(0.0, 0.0), m, 123.0) == 0.0);
    CHECK(boundary_close_physical(0.0, 0.5, FeedbackConfig(0.3, 1.0), m, 0.0) ==
          doctest::Approx(0.7).epsilon(1e-15));
    CHECK(boundary_close_physical(1.0, 0.7, FeedbackConfig(0.3, 0.0), m, 0.0024) ==
          doctest::Approx(0.30072).epsilon(1e-15));
    CHECK_THROWS_AS(boundary_close_physical(1.0, 0.0, FeedbackConfig(0.3, 0.0), m, 0.0),
                    std::domain_error);

    // theta(rho* = 1, B = 1) = 0.5
    CHECK(boundary_close_perturbation(0.0, 1.0, FeedbackConfig(0.3, 1.0), m, 0.0) ==
          doctest::Approx(0.35).epsilon(1e-15));
    CHECK(boundary_close_perturbation(0.0, 0.0, FeedbackConfig(0.6, 3.0), m, 0.0) == 0.0);
    CHECK(boundary_close_perturbation(7.0, 2.0, FeedbackConfig(0.0, 1.0), m, 1.0) ==
          doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("frame transformations") {
    FeedbackConfig config(0.3, 1.0);
    DensityState phys = make_state({0.0, 0.5, 1.25, 3.5, 2.0});
    DensityState pert = to_perturbation(phys, config);
    CHECK(pert.frame == Frame::perturbation);
    CHECK(pert.values[0] == -1.0);
    CHECK(pert.values[3] == 2.5);

    DensityState back = from_perturbation(pert, config);
    REQUIRE(back.values.size() == phys.values.size());
    for (std::size_t i = 0; i < back.values.size(); ++i)
        CHECK(back.values[i] == phys.values[i]);  // bit-for-bit for these magnitudes

    CHECK_THROWS_AS(to_perturbation(pert, config), std::invalid_argument);
    CHECK_THROWS_AS(from_perturbation(phys, config), std::invalid_argument);

    Grid grid(4);
    CHECK(total_mass(pert, grid) ==
          doctest::Approx(total_mass(phys, grid) - 1.0).epsilon(1e-14));
}

TEST_CASE("tiny runs match the hand-coded scheme") {
    // brute-force oracle transcribed from the update formulas; J = 2, 3 and
    // five steps, both frames, with and without disturbance
    for (int J : {2, 3}) {
        for (bool pert : {false, true}) {
            for (bool disturb : {false, true}) {
                oracle::Params p;
                p.A = 1.0;
                p.B = 1.0;
                p.k = 0.3;
                p.rho_star = pert ? 1.0 : 0.0;
                p.cfl = 0.8;
                p.perturbation = pert;
                if (disturb) p.disturbance = [](double t) { return 2.4e-3 * std::sin(t); };

                std::vector<double> init(static_cast<std::size_t>(J) + 1);
                for (int j = 0; j <= J; ++j) init[static_cast<std::size_t>(j)] = 0.5 + 0.25 * j;
                auto levels = oracle::run_scheme(init, J, 5, p);

                DensityState state;
                state.values = init;
                state.frame = pert ? Frame::perturbation : Frame::physical;
                SolverConfig cfg;
                cfg.cfl_number = 0.8;
                cfg.t_final = 1e9;  // never clips within five steps
                cfg.record_stride = 1;
                cfg.frame = state.frame;
                DisturbanceSignal d = disturb ? DisturbanceSignal::sinusoid(2.4e-3, 1.0)
                                              : DisturbanceSignal::zero();
                Simulation sim(state, Grid(J), VelocityModel{p.A, p.B},
                               FeedbackConfig(p.k, p.rho_star), cfg, d);
                for (int n = 0; n < 5; ++n) sim.step();

                const Trajectory& tr = sim.trajectory();
                REQUIRE(tr.times.size() == 6);
                for (int n = 0; n <= 5; ++n) {
                    const auto& lv = levels[static_cast<std::size_t>(n)];
                    CHECK(std::abs(tr.times[static_cast<std::size_t>(n)] - lv.t) <= 1e-14);
                    CHECK(std::abs(tr.mass[static_cast<std::size_t>(n)] - lv.W) <= 1e-14);
                    CHECK(std::abs(tr.velocity[static_cast<std::size_t>(n)] - lv.lambda) <=
                          1e-14);
                    const auto& snap = tr.states[static_cast<std::size_t>(n)].values;
                    for (int j = 0; j <= J; ++j)
                        CHECK(std::abs(snap[static_cast<std::size_t>(j)] -
                                       lv.rho[static_cast<std::size_t>(j)]) <= 1e-14);
                }
            }
        }
    }
}

TEST_CASE("discrete mass balance telescopes") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 8.0);
    std::uniform_real_distribution<double> uk(0.0, 0.99);
    std::uniform_real_distribution<double> uc(0.05, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const int J = 4 + static_cast<int>(rng() % 253);
        Grid grid(J);
        DensityState s;
        s.values.resize(static_cast<std::size_t>(J) + 1);
        for (double& v : s.values) v = u(rng);

        SolverConfig cfg;
        cfg.cfl_number = uc(rng);
        cfg.t_final = 1e9;
        cfg.record_stride = 1;
        Simulation sim(s, grid, VelocityModel{1, 1}, FeedbackConfig(uk(rng), 0.0), cfg,
                       DisturbanceSignal::zero());
        const double W0 = sim.mass();
        const double lambda0 = sim.lambda();
        sim.step();
        const Trajectory& tr = sim.trajectory();
        const double lhs = tr.mass[1] - W0;
        const double rhs = tr.step_sizes[0] * lambda0 * (s.values[0] - s.values.back());
        CHECK(std::abs(lhs - rhs) <= 1e-13);
    }
}

TEST_CASE("equilibrium is a fixed point") {
    Grid grid(50);
    DensityState s;
    s.values.assign(51, 1.0);
    SolverConfig cfg;
    cfg.cfl_number = 0.75;
    cfg.t_final = 5.0;
    cfg.record_stride = 1000;
    Trajectory tr = simulate(s, grid, VelocityModel{1, 1}, FeedbackConfig(0.3, 1.0), cfg,
                             DisturbanceSignal::zero());
    for (double n : tr.l2_deviation) CHECK(n <= 1e-12);
}

TEST_CASE("positivity is preserved without disturbance") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (double k : {0.0, 0.45, 0.9}) {
        Grid grid(40);
        DensityState s;
        s.values.resize(41);
        for (double& v : s.values) v = u(rng);
        SolverConfig cfg;
        cfg.cfl_number = 0.9;
        cfg.t_final = 1e9;
        cfg.record_stride = 1 << 30;
        Simulation sim(s, grid, VelocityModel{1, 1}, FeedbackConfig(k, 0.5), cfg,
                       DisturbanceSignal::zero());
        for (int n = 0; n < 2000; ++n) sim.step();
        for (double v : sim.state().values) CHECK(v >= 0.0);
    }
}

TEST_CASE("physical and perturbation runs stay within relative 1e-12") {
    Grid grid(100);
    auto profile = [](double x) { return 2.0 + 2.0 * std::sin(2.0 * std::numbers::pi * x); };
    FeedbackConfig config(0.3, 1.0);
    VelocityModel model{1, 1};
    DisturbanceSignal d = DisturbanceSignal::sinusoid(2.4e-3, 1.0);

    SolverConfig phys_cfg;
    phys_cfg.cfl_number = 0.5;
    phys_cfg.t_final = 5.0;
    phys_cfg.record_stride = 1 << 30;
    SolverConfig pert_cfg = phys_cfg;
    pert_cfg.frame = Frame::perturbation;

    Simulation phys(sample_initial_state(profile, grid), grid, model, config, phys_cfg, d);
    Simulation pert(sample_initial_state(profile, grid, Frame::perturbation, 1.0), grid, model,
                    config, pert_cfg, d);
    while (!phys.done()) {
        phys.step();
        pert.step();
        CHECK(phys.time() == doctest::Approx(pert.time()).epsilon(1e-14));
        const auto& a = phys.state().values;
        const auto& b = pert.state().values;
        for (std::size_t j = 0; j < a.size(); ++j)
            CHECK(std::abs(a[j] - (b[j] + 1.0)) <= 1e-12 * std::max(1.0, std::abs(a[j])));
    }
    CHECK(pert.done());
}

TEST_CASE("simulation validates its configuration") {
    Grid grid(10);
    DensityState s;
    s.values.assign(11, 1.0);
    SolverConfig cfg;
    cfg.t_final = 1.0;

    SolverConfig bad = cfg;
    bad.cfl_number = 0.0;
    CHECK_THROWS_AS(Simulation(s, grid, VelocityModel{1, 1}, FeedbackConfig(0, 0), bad,
                               DisturbanceSignal::zero()),
                    std::invalid_argument);
    bad = cfg;
    bad.cfl_number = 1.2;
    CHECK_THROWS_AS(Simulation(s, grid, VelocityModel{1, 1}, FeedbackConfig(0, 0), bad,
                               DisturbanceSignal::zero()),
                    std::invalid_argument);
    bad = cfg;
    bad.t_final = 0.0;
    CHECK_THROWS_AS(Simulation(s, grid, VelocityModel{1, 1}, FeedbackConfig(0, 0), bad,
                               DisturbanceSignal::zero()),
                    std::invalid_argument);
    bad = cfg;
    bad.frame = Frame::perturbation;  // state is physical
    CHECK_THROWS_AS(Simulation(s, grid, VelocityModel{1, 1}, FeedbackConfig(0, 0), bad,
                               DisturbanceSignal::zero()),
                    std::invalid_argument);
    bad = cfg;
    bad.quadratic_weights.assign(3, 1.0);
    CHECK_THROWS_AS(Simulation(s, grid, VelocityModel{1, 1}, FeedbackConfig(0, 0), bad,
                               DisturbanceSignal::zero()),
                    std::invalid_argument);

    DensityState short_state;
    short_state.values.assign(5, 1.0);
    CHECK_THROWS_AS(Simulation(short_state, grid, VelocityModel{1, 1}, FeedbackConfig(0, 0),
                               cfg, DisturbanceSignal::zero()),
                    std::invalid_argument);
}

TEST_CASE("runs end exactly on the horizon and record the final state") {
    Grid grid(16);
    DensityState s;
    s.values.assign(17, 0.5);
    SolverConfig cfg;
    cfg.cfl_number = 0.75;
    cfg.t_final = 1.0;
    cfg.record_stride = 7;
    Trajectory tr = simulate(s, grid, VelocityModel{1, 1}, FeedbackConfig(0.2, 0.0), cfg,
                             DisturbanceSignal::sinusoid(1e-3, 1.0));
    CHECK(tr.times.back() == 1.0);
    CHECK(tr.state_levels.front() == 0);
    CHECK(tr.state_levels.back() == tr.steps());
    for (std::size_t i = 1; i < tr.times.size(); ++i) CHECK(tr.times[i] > tr.times[i - 1]);
    CHECK(tr.step_sizes.size() + 1 == tr.times.size());
    // every Courant ratio within (0, cfl]
    for (std::size_t n = 0; n < tr.steps(); ++n) {
        double r = tr.velocity[n] * tr.step_sizes[n] / grid.dx;
        CHECK(r > 0.0);
        CHECK(r <= cfg.cfl_number + 1e-12);
    }
}
