#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "reflow/lyapunov.hpp"
#include "reflow/model.hpp"
#include "reflow/solver.hpp"

namespace reflow {

/// A fully specified closed-loop setup: equilibrium, gain, velocity family,
/// disturbance, horizon and initial profile.
struct ExperimentPreset {
    std::string name = "custom";
    double rho_star = 0.0;
    double k = 0.0;
    VelocityModel model{1.0, 1.0};
    DisturbanceSignal disturbance = DisturbanceSignal::zero();
    double t_final = 10.0;
    std::function<double(double)> initial;

    /// rho* = 0, rho0(x) = 1 + sin(2 pi x), k = 0.3, d(t) = 2.4e-3 sin t, T = 10
    static ExperimentPreset example1();
    /// rho* = 1, rho0(x) = 2 + 2 sin(2 pi x), k = 0.3, d(t) = 2.4e-3 sin t, T = 20
    static ExperimentPreset example2();
};

struct ConvergenceRow {
    int J = 0;
    double l2_error = 0.0;
    std::optional<double> order;  // log2(e_{J/2} / e_J); absent on the first row
    double gamma1 = 0.0;
    double sigma2 = 0.0;  // observed minimum transport speed (not serialized)

    friend bool operator==(const ConvergenceRow& a, const ConvergenceRow& b) {
        return a.J == b.J && a.l2_error == b.l2_error && a.order == b.order &&
               a.gamma1 == b.gamma1;
    }
};

/// Cell-average restriction of a fine solution (cells 1..J_fine) onto a coarse
/// grid with J cells; J must divide J_fine.
std::vector<double> restrict_cell_average(const std::vector<double>& fine_cells, int coarse_J);

/// Grid-refinement study: each J runs to t_final, errors are measured at the
/// final time against the cell-average restriction of a reference run at
/// J_ref = reference_factor * max(J_list) with the same CFL number.  gamma1 is
/// the certificate decay rate with sigma2 measured on that J's trajectory.
std::vector<ConvergenceRow> convergence_study(const ExperimentPreset& preset,
                                              const std::vector<int>& J_list, double cfl,
                                              int reference_factor,
                                              BetaMode mode = BetaMode::experiment,
                                              int jobs = 1);

struct DecaySeries {
    double k = 0.0;
    std::vector<double> times;
    std::vector<double> log10_norm;
    double plateau = 0.0;       // median deviation norm over the last 10% of the run
    double fitted_slope = 0.0;  // least-squares slope of log10-norm where norm > 10*plateau
    std::size_t fit_points = 0;
};

/// Log-norm decay series for several gains at one resolution.  The preset's
/// gain is ignored; everything else (equilibrium, disturbance, horizon,
/// initial profile) is taken from it.
std::vector<DecaySeries> decay_series(const ExperimentPreset& preset,
                                      const std::vector<double>& k_list, double cfl, int J,
                                      int jobs = 1);

void write_convergence_csv(const std::filesystem::path& file,
                           const std::vector<ConvergenceRow>& rows);
std::vector<ConvergenceRow> read_convergence_csv(const std::filesystem::path& file);

/// Aligned four-column table (J, L2-error, order, gamma1).
void write_convergence_table(const std::filesystem::path& file,
                             const std::vector<ConvergenceRow>& rows);

/// Header t,log10_norm,k; the series are concatenated and keyed by the k column.
void write_decay_csv(const std::filesystem::path& file,
                     const std::vector<DecaySeries>& series);

/// Run a preset once.  Used by the study drivers and the CLI.
Trajectory run_preset(const ExperimentPreset& preset, int J, double cfl, Frame frame,
                      int record_stride, std::vector<double> quadratic_weights = {});

}  // namespace reflow
