#pragma once

#include <cstddef>
#include <vector>

#include "reflow/model.hpp"

namespace reflow {

struct SolverConfig {
    double cfl_number = 0.75;  // target Courant ratio, in (0,1]
    double t_final = 1.0;
    int record_stride = 100;  // full state snapshots every m-th step
    Frame frame = Frame::physical;

    /// Optional per-cell quadratic weights (size J, entry j-1 for cell j).
    /// When set, the run records dx * sum_j w_j (rho_j - shift)^2 at every
    /// level, with shift = rho_star in the physical frame and 0 otherwise.
    std::vector<double> quadratic_weights;
};

/// Dense per-level series produced by a run, plus sparse state snapshots.
/// All per-level vectors share length steps()+1; step_sizes has length steps().
struct Trajectory {
    // run identification
    int cell_count = 0;
    double dx = 0.0;
    Frame frame = Frame::physical;
    double rho_star = 0.0;
    double k = 0.0;
    double A = 1.0;
    double B = 1.0;
    double cfl_number = 0.0;
    double t_final = 0.0;

    std::vector<double> times;
    std::vector<double> mass;           // W^n in the run's frame
    std::vector<double> velocity;       // lambda^n
    std::vector<double> disturbance;    // d(t^n)
    std::vector<double> l2_deviation;   // deviation norm from the equilibrium
    std::vector<double> boundary_value; // values[0] at each level
    std::vector<double> outflow_value;  // values[J] at each level
    std::vector<double> weighted_norm_sq;  // only if quadratic_weights were set
    std::vector<double> quadratic_weights; // copy of the weights used
    std::vector<double> step_sizes;

    std::vector<DensityState> states;
    std::vector<std::size_t> state_levels;

    std::size_t steps() const { return step_sizes.size(); }
    double min_velocity() const;
    double max_velocity() const;
};

/// dt = min(cfl_number * dx / lambda_n, t_final - t_now).  Throws
/// std::domain_error if lambda_n <= 0 and std::invalid_argument for a CFL
/// number outside (0,1] or t_now >= t_final.
double cfl_step_size(const Grid& grid, double lambda_n, double cfl_number, double t_now,
                     double t_final);

/// One upwind update of the interior cells: out[j] = (1-r)in[j] + r*in[j-1]
/// for j = 1..J.  out[0] is copied from in[0]; the caller applies the boundary
/// closure afterwards.  Throws std::invalid_argument for r outside (0,1].
void upwind_interior_step(const DensityState& in, double r_n, DensityState& out);
DensityState upwind_interior_step(const DensityState& in, double r_n);

/// Physical-frame closure: k*rho_J + (1-k)*rho_star*lambda(rho_star)/lambda_next + k*d_next.
double boundary_close_physical(double rho_J_next, double lambda_next,
                               const FeedbackConfig& config, const VelocityModel& model,
                               double d_next);

/// Perturbation-frame closure: k*rho_J + (1-k)*theta*W_next + k*d_next.
double boundary_close_perturbation(double rho_J_next, double W_next,
                                   const FeedbackConfig& config, const VelocityModel& model,
                                   double d_next);

/// Entrywise shift by -rho_star / +rho_star with a frame-tag flip.  Throws
/// std::invalid_argument when the input is already in the target frame.
DensityState to_perturbation(const DensityState& state, const FeedbackConfig& config);
DensityState from_perturbation(const DensityState& state, const FeedbackConfig& config);

/// Single closed-loop run.  Strictly sequential; one instance per thread.
///
/// Per step n: lambda^n from the current mass, dt from the CFL bound (clipped
/// to land on t_final), interior upwind update, then W^{n+1}, lambda^{n+1} and
/// the boundary closure with d(t^{n+1}).
class Simulation {
  public:
    Simulation(DensityState init, const Grid& grid, const VelocityModel& model,
               const FeedbackConfig& config, const SolverConfig& solver_cfg,
               const DisturbanceSignal& disturbance);

    bool done() const { return time() >= cfg_.t_final; }
    void step();
    void run();  // steps until done

    double time() const { return trajectory_.times.back(); }
    double mass() const { return trajectory_.mass.back(); }
    double lambda() const { return trajectory_.velocity.back(); }
    const DensityState& state() const { return state_; }
    const Trajectory& trajectory() const { return trajectory_; }
    Trajectory take_trajectory() &&;

  private:
    void record_level(double dt_taken);

    Grid grid_;
    VelocityModel model_;
    FeedbackConfig config_;
    SolverConfig cfg_;
    DisturbanceSignal disturbance_;
    DensityState state_;
    DensityState scratch_;
    double shift_ = 0.0;  // rho_star in the physical frame, 0 in perturbation
    std::size_t level_ = 0;
    Trajectory trajectory_;
};

Trajectory simulate(const DensityState& init, const Grid& grid, const VelocityModel& model,
                    const FeedbackConfig& config, const SolverConfig& solver_cfg,
                    const DisturbanceSignal& disturbance);

}  // namespace reflow
