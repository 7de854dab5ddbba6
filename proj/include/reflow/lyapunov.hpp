#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "reflow/model.hpp"
#include "reflow/solver.hpp"

namespace reflow {

/// Thrown when no certificate parameters can satisfy the feasibility
/// inequalities (notably the gain condition e^{-beta} >= 2k, which has no
/// solution for k >= 1/2).  The solver itself does not need a certificate.
struct CertificateInfeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class BetaMode {
    experiment,  // limiting beta = -ln(2k); reproduces the published decay rates
    rigorous     // beta strictly inside the feasible interval, chosen by 1-D search
};

/// Parameters of the exponentially weighted quadratic functional
///   L = dx * sum_j rho_j^2 e^{-beta x_j} + a W^2
/// together with the feasibility flags and the decay/gain constants derived
/// from them.  Constants that require trajectory extremes (eta, gamma1, nu,
/// gamma3) stay NaN until attach_rates() or decay_rates() fills them.
struct LyapunovCertificate {
    double beta = 0.0;
    double a = 0.0;
    double theta = 0.0;
    double c1 = 1.0;  // norm-equivalence constant, W^2 <= c1 * weighted sum
    double k = 0.0;
    double rho_star = 0.0;
    double dx = 0.0;
    std::vector<double> weights;  // e^{-beta x_j}, j = 1..J

    double f_dx_experiment = std::numeric_limits<double>::quiet_NaN();
    double f_dx_proof = std::numeric_limits<double>::quiet_NaN();
    double f_continuous = std::numeric_limits<double>::quiet_NaN();

    double alpha1 = std::numeric_limits<double>::quiet_NaN();
    double alpha2 = std::numeric_limits<double>::quiet_NaN();
    double gamma2 = std::numeric_limits<double>::quiet_NaN();  // sqrt(alpha2/alpha1)

    double eta = std::numeric_limits<double>::quiet_NaN();     // sigma2 * f_dx_experiment
    double gamma1 = std::numeric_limits<double>::quiet_NaN();  // eta / 2
    double nu = std::numeric_limits<double>::quiet_NaN();
    double gamma3 = std::numeric_limits<double>::quiet_NaN();

    bool valid = false;
    std::vector<std::string> reasons;  // failure codes when not valid
};

/// Weight-rate selection under the gain condition e^{-beta} >= 2k.
///
/// experiment mode returns the limiting value -ln(2k) for 0 < k < 1/2 (there
/// the mass coefficient a vanishes); rigorous mode maximizes the experiment
/// decay rate f over beta strictly inside (0, -ln(2k)).  For k = 0 both modes
/// maximize f over (0, 50].  Throws CertificateInfeasible for k >= 1/2.
double select_beta(double k, double theta_value, double dx, BetaMode mode);

struct MassCoefficient {
    double a = 0.0;
    bool continuous_ok = false;  // a > -beta / (e^beta - 1)
    bool discrete_ok = false;    // a > -1 / (dx e^{beta dx/2} (e^beta - 1) / (e^{beta dx} - 1))
};

/// a = theta * (2k - e^{-beta}) / (1 - k), with the positivity conditions of
/// the continuous and discrete functionals reported as flags.  Values within a
/// few ulp of zero are snapped to exactly zero (the limiting-beta case).
MassCoefficient select_a(double theta_value, double k, double beta, double dx);

/// Discrete decay rate
///   f(beta) = beta e^{-beta dx}
///           - c1 [ (2 - e^{beta dx})(2k - e^{-beta}) + 2(1-k) e^{-beta dx}
///                  + ((2k - e^{-beta})/(1-k))^2 ] theta^2.
/// Pass c1 = 1 for the experiment variant and c1 = e^beta for the proof
/// variant used by the per-step dissipation inequality.
double f_discrete(double beta, double k, double theta_value, double dx, double c1);

/// Continuous-time decay rate
///   (1/c1) [ beta - theta^2 ((e^beta - 1)/beta) ((2 - e^{-beta})
///            + ((2k - e^{-beta})/(1-k))^2) ].
double f_continuous_rate(double beta, double k, double theta_value, double c1);

struct SandwichConstants {
    double c1 = 0.0;      // e^beta
    double alpha1 = 0.0;  // (1 + a e^beta) e^{-beta}
    double alpha2 = 1.0;
};

/// Norm-equivalence constants: W^2 <= c1 * weighted sum and
/// alpha1 ||rho||^2 <= L <= alpha2 ||rho||^2.  Requires a <= 0 and
/// 1 + a e^beta > 0; throws CertificateInfeasible otherwise.
SandwichConstants sandwich_constants(double beta, double a);

/// Assemble and validate a certificate for the given gain/equilibrium/grid.
/// Never throws: infeasibility is reported through valid = false and reasons.
LyapunovCertificate make_certificate(const FeedbackConfig& config, const VelocityModel& model,
                                     const Grid& grid, BetaMode mode = BetaMode::experiment);

/// L = dx * sum_j rho_j^2 e^{-beta x_j} + a W^2 for a perturbation-frame state.
double lyapunov_value(const DensityState& state, const Grid& grid,
                      const LyapunovCertificate& cert);

/// Per-level Lyapunov series along a trajectory that recorded the certificate's
/// quadratic weights.  Throws std::invalid_argument if the weighted series is
/// missing or was recorded with different weights.
std::vector<double> lyapunov_series(const Trajectory& trajectory,
                                    const LyapunovCertificate& cert);

struct DecayRates {
    double eta = 0.0;
    double gamma1 = 0.0;
};

/// eta = sigma2 * f_dx_experiment and gamma1 = eta/2, where sigma2 is the
/// minimum transport speed observed along a trajectory.
DecayRates decay_rates(const LyapunovCertificate& cert, double sigma2);

/// Fill the trajectory-dependent constants (eta, gamma1, nu, gamma3) of a
/// certificate from the observed velocity extremes.
void attach_rates(LyapunovCertificate& cert, double sigma2, double delta2);

/// Outcome of checking the per-step inequality
///   (L^{n+1} - L^n)/dt <= -(f_proof/c1) lambda^n L^n
///                         + (1/2)(1 + 2 e^{-beta dx}) e^{-beta} lambda^n d^2
/// at every step.  The primary margin uses the disturbance value that entered
/// the interior during the step (the level-n boundary value carries d^n); the
/// alternate margin uses the value written into the boundary node at the end
/// of the step (d^{n+1}).
///
/// The inequality is derived under the standing hypothesis that the level-n
/// boundary value satisfies the feedback closure.  That holds by construction
/// for every level except possibly level 0, whose value comes from the initial
/// datum; steps starting from a closure-inconsistent level are flagged and
/// tallied separately.
struct DissipationReport {
    std::size_t steps = 0;
    std::vector<unsigned char> pass;                // primary-convention result per step
    std::vector<unsigned char> closure_consistent;  // hypothesis holds at the step's start
    std::size_t violations = 0;
    std::size_t violations_consistent = 0;  // violations among hypothesis-satisfying steps
    std::size_t inconsistent_steps = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    std::size_t worst_step = 0;
    double worst_margin_alt = std::numeric_limits<double>::infinity();
    double eta_hat = 0.0;  // sigma2 * f_proof / c1
    double nu = 0.0;       // (1/2)(1 + 2 e^{-beta dx}) e^{-beta} * max lambda
    bool all_pass = false;
    bool consistent_all_pass = false;
};

DissipationReport check_step_dissipation(const Trajectory& trajectory,
                                         const LyapunovCertificate& cert);

/// Outcome of checking the trajectory-level bound
///   ||rho^n|| <= gamma2 e^{-gamma1 t^n} ||rho^0|| + gamma3 max_{s<n} |d^s|
/// with gamma1 = sigma2 f / (2 c1) and
/// gamma3 = sqrt((1/2)(1 + 2 e^{-beta dx}) c1 delta2 e^{-beta} / (sigma2 f alpha1)),
/// where f is the experiment-variant decay rate.
struct IssReport {
    double sigma2 = 0.0;
    double delta2 = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double gamma3 = 0.0;
    std::size_t checked = 0;
    bool all_pass = false;
    double worst_margin = std::numeric_limits<double>::infinity();
    std::size_t worst_index = 0;
    double max_disturbance = 0.0;
    double final_norm = 0.0;
};

IssReport check_iss_bound(const Trajectory& trajectory, const LyapunovCertificate& cert,
                          double rho0_norm);

/// relative 1e-9 + absolute 1e-12, the slack used by both checkers
double inequality_tolerance(double lhs, double rhs);

}  // namespace reflow
