#include "reflow/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace reflow {

double Trajectory::min_velocity() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : velocity) m = std::min(m, v);
    return m;
}

double Trajectory::max_velocity() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : velocity) m = std::max(m, v);
    return m;
}

double cfl_step_size(const Grid& grid, double lambda_n, double cfl_number, double t_now,
                     double t_final) {
    if (!(cfl_number > 0.0 && cfl_number <= 1.0))
        throw std::invalid_argument("cfl_step_size: CFL number must lie in (0,1]");
    if (!(t_now < t_final))
        throw std::invalid_argument("cfl_step_size: t_now must be below t_final");
    if (!(lambda_n > 0.0))
        throw std::domain_error("cfl_step_size: nonpositive velocity");
    double dt = cfl_number * grid.dx / lambda_n;
    double remaining = t_final - t_now;
    return dt < remaining ? dt : remaining;
}

void upwind_interior_step(const DensityState& in, double r_n, DensityState& out) {
    if (!(r_n > 0.0 && r_n <= 1.0))
        throw std::invalid_argument("upwind_interior_step: Courant ratio " +
                                    std::to_string(r_n) + " outside (0,1]");
    if (&in == &out)
        throw std::invalid_argument("upwind_interior_step: in and out must not alias");
    out.values.resize(in.values.size());
    out.t = in.t;
    out.frame = in.frame;
    out.values[0] = in.values[0];
    const double omr = 1.0 - r_n;
    for (std::size_t j = 1; j < in.values.size(); ++j)
        out.values[j] = omr * in.values[j] + r_n * in.values[j - 1];
}

DensityState upwind_interior_step(const DensityState& in, double r_n) {
    DensityState out;
    upwind_interior_step(in, r_n, out);
    return out;
}

double boundary_close_physical(double rho_J_next, double lambda_next,
                               const FeedbackConfig& config, const VelocityModel& model,
                               double d_next) {
    if (!(lambda_next > 0.0))
        throw std::domain_error("boundary_close_physical: nonpositive velocity");
    return config.k * rho_J_next +
           (1.0 - config.k) * equilibrium_influx(config, model) / lambda_next +
           config.k * d_next;
}

double boundary_close_perturbation(double rho_J_next, double W_next,
                                   const FeedbackConfig& config, const VelocityModel& model,
                                   double d_next) {
    return config.k * rho_J_next + (1.0 - config.k) * theta(config, model) * W_next +
           config.k * d_next;
}

DensityState to_perturbation(const DensityState& state, const FeedbackConfig& config) {
    if (state.frame != Frame::physical)
        throw std::invalid_argument("to_perturbation: state is not in the physical frame");
    DensityState out = state;
    for (double& v : out.values) v -= config.rho_star;
    out.frame = Frame::perturbation;
    return out;
}

DensityState from_perturbation(const DensityState& state, const FeedbackConfig& config) {
    if (state.frame != Frame::perturbation)
        throw std::invalid_argument("from_perturbation: state is not in the perturbation frame");
    DensityState out = state;
    for (double& v : out.values) v += config.rho_star;
    out.frame = Frame::physical;
    return out;
}

Simulation::Simulation(DensityState init, const Grid& grid, const VelocityModel& model,
                       const FeedbackConfig& config, const SolverConfig& solver_cfg,
                       const DisturbanceSignal& disturbance)
    : grid_(grid),
      model_(model),
      config_(config),
      cfg_(solver_cfg),
      disturbance_(disturbance),
      state_(std::move(init)) {
    if (!(cfg_.cfl_number > 0.0 && cfg_.cfl_number <= 1.0))
        throw std::invalid_argument("Simulation: CFL number must lie in (0,1]");
    if (!(cfg_.t_final > 0.0))
        throw std::invalid_argument("Simulation: t_final must be positive");
    if (cfg_.record_stride < 1)
        throw std::invalid_argument("Simulation: record_stride must be positive");
    if (state_.cells() != grid_.cell_count)
        throw std::invalid_argument("Simulation: initial state does not match the grid");
    if (state_.frame != cfg_.frame)
        throw std::invalid_argument("Simulation: initial state frame does not match the solver "
                                    "configuration");
    if (!cfg_.quadratic_weights.empty() &&
        static_cast<int>(cfg_.quadratic_weights.size()) != grid_.cell_count)
        throw std::invalid_argument("Simulation: quadratic weight count must equal the cell "
                                    "count");

    shift_ = cfg_.frame == Frame::physical ? config_.rho_star : 0.0;
    scratch_ = state_;

    trajectory_.cell_count = grid_.cell_count;
    trajectory_.dx = grid_.dx;
    trajectory_.frame = cfg_.frame;
    trajectory_.rho_star = config_.rho_star;
    trajectory_.k = config_.k;
    trajectory_.A = model_.A;
    trajectory_.B = model_.B;
    trajectory_.cfl_number = cfg_.cfl_number;
    trajectory_.t_final = cfg_.t_final;
    trajectory_.quadratic_weights = cfg_.quadratic_weights;

    // level 0
    double sum = 0.0, dev_sq = 0.0, wdev_sq = 0.0;
    const double* v = state_.values.data();
    const double* w = cfg_.quadratic_weights.empty() ? nullptr : cfg_.quadratic_weights.data();
    for (int j = 1; j <= grid_.cell_count; ++j) {
        double x = v[j];
        sum += x;
        double e = x - shift_;
        dev_sq += e * e;
        if (w) wdev_sq += w[j - 1] * (e * e);
    }
    double W0 = grid_.dx * sum;
    if (cfg_.frame == Frame::perturbation && W0 < -config_.rho_star - 1e-12)
        throw std::invalid_argument("Simulation: initial perturbation mass below -rho_star");

    double lambda0 = cfg_.frame == Frame::physical ? model_(W0) : model_(config_.rho_star + W0);
    trajectory_.times.push_back(state_.t);
    trajectory_.mass.push_back(W0);
    trajectory_.velocity.push_back(lambda0);
    trajectory_.disturbance.push_back(disturbance_(state_.t));
    trajectory_.l2_deviation.push_back(std::sqrt(grid_.dx * dev_sq));
    trajectory_.boundary_value.push_back(state_.values[0]);
    trajectory_.outflow_value.push_back(state_.values[static_cast<std::size_t>(grid_.cell_count)]);
    if (w) trajectory_.weighted_norm_sq.push_back(grid_.dx * wdev_sq);
    trajectory_.states.push_back(state_);
    trajectory_.state_levels.push_back(0);
}

void Simulation::step() {
    const double t_now = trajectory_.times.back();
    const double t_final = cfg_.t_final;
    if (t_now >= t_final) return;

    const double lambda_n = trajectory_.velocity.back();
    const double remaining = t_final - t_now;
    double dt = cfl_step_size(grid_, lambda_n, cfg_.cfl_number, t_now, t_final);
    const bool final_step = dt >= remaining;
    double r = lambda_n * dt / grid_.dx;
    if (r > 1.0) r = 1.0;  // guard against roundoff at CFL number 1

    const int J = grid_.cell_count;
    const double* old = state_.values.data();
    double* next = scratch_.values.data();
    const double* w = cfg_.quadratic_weights.empty() ? nullptr : cfg_.quadratic_weights.data();
    const double omr = 1.0 - r;
    double sum = 0.0, dev_sq = 0.0, wdev_sq = 0.0;
    for (int j = 1; j <= J; ++j) {
        double x = omr * old[j] + r * old[j - 1];
        next[j] = x;
        sum += x;
        double e = x - shift_;
        dev_sq += e * e;
        if (w) wdev_sq += w[j - 1] * (e * e);
    }

    const double W_next = grid_.dx * sum;
    const double lambda_next =
        cfg_.frame == Frame::physical ? model_(W_next) : model_(config_.rho_star + W_next);
    const double t_next = final_step ? t_final : t_now + dt;
    const double d_next = disturbance_(t_next);

    if (cfg_.frame == Frame::physical)
        next[0] = boundary_close_physical(next[J], lambda_next, config_, model_, d_next);
    else
        next[0] = boundary_close_perturbation(next[J], W_next, config_, model_, d_next);

    scratch_.t = t_next;
    std::swap(state_, scratch_);
    ++level_;

    trajectory_.times.push_back(t_next);
    trajectory_.mass.push_back(W_next);
    trajectory_.velocity.push_back(lambda_next);
    trajectory_.disturbance.push_back(d_next);
    trajectory_.l2_deviation.push_back(std::sqrt(grid_.dx * dev_sq));
    trajectory_.boundary_value.push_back(state_.values[0]);
    trajectory_.outflow_value.push_back(state_.values[static_cast<std::size_t>(J)]);
    if (w) trajectory_.weighted_norm_sq.push_back(grid_.dx * wdev_sq);
    trajectory_.step_sizes.push_back(dt);

    if (level_ % static_cast<std::size_t>(cfg_.record_stride) == 0 || done()) {
        trajectory_.states.push_back(state_);
        trajectory_.state_levels.push_back(level_);
    }
}

void Simulation::run() {
    while (!done()) step();
}

Trajectory Simulation::take_trajectory() && { return std::move(trajectory_); }

Trajectory simulate(const DensityState& init, const Grid& grid, const VelocityModel& model,
                    const FeedbackConfig& config, const SolverConfig& solver_cfg,
                    const DisturbanceSignal& disturbance) {
    Simulation sim(init, grid, model, config, solver_cfg, disturbance);
    sim.run();
    return std::move(sim).take_trajectory();
}

}  // namespace reflow
