#include "reflow/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reflow {

namespace {

constexpr double kBetaSearchTol = 1e-10;
constexpr double kBetaCapZeroGain = 50.0;

// Golden-section maximization on [lo, hi]; assumes a single interior or
// boundary maximum after the caller has bracketed it coarsely.
template <typename F>
double golden_max(F&& f, double lo, double hi, double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// Coarse scan to bracket the maximum, then golden-section refinement.
template <typename F>
double bracketed_max(F&& f, double lo, double hi, double tol) {
    constexpr int kScan = 2048;
    int best = 0;
    double best_f = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kScan; ++i) {
        double x = lo + (hi - lo) * i / kScan;
        double fx = f(x);
        if (fx > best_f) {
            best_f = fx;
            best = i;
        }
    }
    double a = lo + (hi - lo) * std::max(0, best - 1) / kScan;
    double b = lo + (hi - lo) * std::min(kScan, best + 1) / kScan;
    return golden_max(f, a, b, tol);
}

double mass_coefficient_floor_continuous(double beta) { return -beta / (std::expm1(beta)); }

double mass_coefficient_floor_discrete(double beta, double dx) {
    double s = dx * std::exp(beta * dx / 2.0) * std::expm1(beta) / std::expm1(beta * dx);
    return -1.0 / s;
}

}  // namespace

double select_beta(double k, double theta_value, double dx, BetaMode mode) {
    if (!(k >= 0.0 && k < 1.0)) throw std::invalid_argument("select_beta: k must lie in [0,1)");
    auto f = [&](double beta) { return f_discrete(beta, k, theta_value, dx, 1.0); };
    if (k == 0.0) return bracketed_max(f, 1e-8, kBetaCapZeroGain, kBetaSearchTol);
    if (k >= 0.5)
        throw CertificateInfeasible("no beta > 0 satisfies e^{-beta} >= 2k for k = " +
                                    std::to_string(k));
    const double beta_limit = -std::log(2.0 * k);
    if (mode == BetaMode::experiment) return beta_limit;
    return bracketed_max(f, 1e-8, beta_limit * (1.0 - 1e-12), kBetaSearchTol);
}

MassCoefficient select_a(double theta_value, double k, double beta, double dx) {
    MassCoefficient out;
    out.a = theta_value * (2.0 * k - std::exp(-beta)) / (1.0 - k);
    // at the limiting beta the numerator is an exact zero up to roundoff
    if (std::abs(out.a) <= 8.0 * std::numeric_limits<double>::epsilon()) out.a = 0.0;
    out.continuous_ok = out.a > mass_coefficient_floor_continuous(beta);
    out.discrete_ok = out.a > mass_coefficient_floor_discrete(beta, dx);
    return out;
}

double f_discrete(double beta, double k, double theta_value, double dx, double c1) {
    const double em_beta = std::exp(-beta);
    const double em_bdx = std::exp(-beta * dx);
    const double q = (2.0 * k - em_beta) / (1.0 - k);
    const double bracket =
        (2.0 - std::exp(beta * dx)) * (2.0 * k - em_beta) + 2.0 * (1.0 - k) * em_bdx + q * q;
    return beta * em_bdx - c1 * bracket * theta_value * theta_value;
}

double f_continuous_rate(double beta, double k, double theta_value, double c1) {
    const double em_beta = std::exp(-beta);
    const double q = (2.0 * k - em_beta) / (1.0 - k);
    const double bracket = (2.0 - em_beta) + q * q;
    return (beta - theta_value * theta_value * (std::expm1(beta) / beta) * bracket) / c1;
}

SandwichConstants sandwich_constants(double beta, double a) {
    if (a > 0.0)
        throw CertificateInfeasible("sandwich_constants: mass coefficient must satisfy a <= 0");
    SandwichConstants sc;
    sc.c1 = std::exp(beta);
    const double floor = 1.0 + a * sc.c1;
    if (!(floor > 0.0))
        throw CertificateInfeasible("sandwich_constants: 1 + a e^beta must be positive");
    sc.alpha1 = floor * std::exp(-beta);
    sc.alpha2 = 1.0;
    return sc;
}

LyapunovCertificate make_certificate(const FeedbackConfig& config, const VelocityModel& model,
                                     const Grid& grid, BetaMode mode) {
    LyapunovCertificate cert;
    cert.k = config.k;
    cert.rho_star = config.rho_star;
    cert.dx = grid.dx;
    cert.theta = theta(config, model);

    try {
        cert.beta = select_beta(config.k, cert.theta, grid.dx, mode);
    } catch (const CertificateInfeasible&) {
        cert.valid = false;
        cert.reasons.emplace_back("gain_condition_infeasible");
        return cert;
    }

    MassCoefficient mc = select_a(cert.theta, config.k, cert.beta, grid.dx);
    cert.a = mc.a;
    cert.f_dx_experiment = f_discrete(cert.beta, config.k, cert.theta, grid.dx, 1.0);
    cert.f_dx_proof =
        f_discrete(cert.beta, config.k, cert.theta, grid.dx, std::exp(cert.beta));
    cert.f_continuous = f_continuous_rate(cert.beta, config.k, cert.theta, std::exp(cert.beta));

    bool ok = true;
    if (cert.a > 0.0) {
        cert.reasons.emplace_back("mass_coefficient_positive");
        ok = false;
    }
    if (!mc.continuous_ok) {
        cert.reasons.emplace_back("mass_coefficient_below_continuous_floor");
        ok = false;
    }
    if (!mc.discrete_ok) {
        cert.reasons.emplace_back("mass_coefficient_below_discrete_floor");
        ok = false;
    }
    if (std::exp(-cert.beta) < 2.0 * config.k - 8.0 * std::numeric_limits<double>::epsilon()) {
        cert.reasons.emplace_back("gain_condition_violated");
        ok = false;
    }
    if (!(cert.f_dx_experiment > 0.0)) {
        cert.reasons.emplace_back("decay_rate_nonpositive");
        ok = false;
    }
    if (ok) {
        try {
            SandwichConstants sc = sandwich_constants(cert.beta, cert.a);
            cert.c1 = sc.c1;
            cert.alpha1 = sc.alpha1;
            cert.alpha2 = sc.alpha2;
            cert.gamma2 = std::sqrt(sc.alpha2 / sc.alpha1);
        } catch (const CertificateInfeasible&) {
            cert.reasons.emplace_back("norm_equivalence_infeasible");
            ok = false;
        }
    }
    cert.valid = ok;
    if (!ok) return cert;

    cert.weights.resize(static_cast<std::size_t>(grid.cell_count));
    for (int j = 1; j <= grid.cell_count; ++j)
        cert.weights[static_cast<std::size_t>(j - 1)] = std::exp(-cert.beta * grid.center(j));
    return cert;
}

double lyapunov_value(const DensityState& state, const Grid& grid,
                      const LyapunovCertificate& cert) {
    if (state.frame != Frame::perturbation)
        throw std::invalid_argument("lyapunov_value: state must be in the perturbation frame");
    if (state.cells() != grid.cell_count ||
        cert.weights.size() != static_cast<std::size_t>(grid.cell_count))
        throw std::invalid_argument("lyapunov_value: state/grid/certificate size mismatch");
    double weighted = 0.0;
    double sum = 0.0;
    for (int j = 1; j <= grid.cell_count; ++j) {
        double v = state.values[static_cast<std::size_t>(j)];
        weighted += cert.weights[static_cast<std::size_t>(j - 1)] * v * v;
        sum += v;
    }
    const double W = grid.dx * sum;
    return grid.dx * weighted + cert.a * W * W;
}

std::vector<double> lyapunov_series(const Trajectory& trajectory,
                                    const LyapunovCertificate& cert) {
    if (trajectory.weighted_norm_sq.empty())
        throw std::invalid_argument("lyapunov_series: trajectory carries no weighted norm "
                                    "series; run with the certificate's quadratic weights");
    if (trajectory.quadratic_weights != cert.weights)
        throw std::invalid_argument("lyapunov_series: trajectory was recorded with different "
                                    "quadratic weights than the certificate's");
    const double shift = trajectory.frame == Frame::physical ? trajectory.rho_star : 0.0;
    std::vector<double> L(trajectory.weighted_norm_sq.size());
    for (std::size_t n = 0; n < L.size(); ++n) {
        const double W_tilde = trajectory.mass[n] - shift;
        L[n] = trajectory.weighted_norm_sq[n] + cert.a * W_tilde * W_tilde;
    }
    return L;
}

DecayRates decay_rates(const LyapunovCertificate& cert, double sigma2) {
    if (!cert.valid) throw CertificateInfeasible("decay_rates: certificate is not valid");
    if (!(sigma2 > 0.0)) throw std::domain_error("decay_rates: sigma2 must be positive");
    DecayRates r;
    r.eta = sigma2 * cert.f_dx_experiment;
    r.gamma1 = 0.5 * r.eta;
    return r;
}

void attach_rates(LyapunovCertificate& cert, double sigma2, double delta2) {
    DecayRates r = decay_rates(cert, sigma2);
    cert.eta = r.eta;
    cert.gamma1 = r.gamma1;
    const double em_bdx = std::exp(-cert.beta * cert.dx);
    cert.nu = 0.5 * (1.0 + 2.0 * em_bdx) * std::exp(-cert.beta) * delta2;
    cert.gamma3 = std::sqrt(0.5 * (1.0 + 2.0 * em_bdx) * cert.c1 * delta2 *
                            std::exp(-cert.beta) /
                            (sigma2 * cert.f_dx_experiment * cert.alpha1));
}

double inequality_tolerance(double lhs, double rhs) {
    return 1e-9 * std::max(std::abs(lhs), std::abs(rhs)) + 1e-12;
}

namespace {

// Boundary value expected from the feedback closure at one recorded level.
double closure_value(const Trajectory& tr, const LyapunovCertificate& cert, std::size_t n) {
    const double d_n = tr.disturbance[n];
    if (tr.frame == Frame::perturbation)
        return tr.k * tr.outflow_value[n] + (1.0 - tr.k) * cert.theta * tr.mass[n] +
               tr.k * d_n;
    const double equilibrium =
        tr.rho_star == 0.0 ? 0.0 : tr.rho_star * (tr.A / (tr.B + tr.rho_star));
    return tr.k * tr.outflow_value[n] + (1.0 - tr.k) * equilibrium / tr.velocity[n] +
           tr.k * d_n;
}

}  // namespace

DissipationReport check_step_dissipation(const Trajectory& trajectory,
                                         const LyapunovCertificate& cert) {
    if (cert.weights.empty())
        throw std::invalid_argument("check_step_dissipation: certificate carries no weights");
    const std::vector<double> L = lyapunov_series(trajectory, cert);
    const std::size_t steps = trajectory.steps();

    DissipationReport report;
    report.steps = steps;
    report.pass.resize(steps, 1);
    report.closure_consistent.resize(steps, 1);

    const double em_bdx = std::exp(-cert.beta * cert.dx);
    const double d_gain = 0.5 * (1.0 + 2.0 * em_bdx) * std::exp(-cert.beta);
    const double rate = cert.f_dx_proof / cert.c1;

    for (std::size_t n = 0; n < steps; ++n) {
        const double lambda_n = trajectory.velocity[n];
        const double lhs = (L[n + 1] - L[n]) / trajectory.step_sizes[n];
        const double d_in = trajectory.disturbance[n];      // entered the interior this step
        const double d_out = trajectory.disturbance[n + 1];  // written to the boundary node
        const double rhs = -rate * lambda_n * L[n] + d_gain * lambda_n * d_in * d_in;
        const double rhs_alt = -rate * lambda_n * L[n] + d_gain * lambda_n * d_out * d_out;

        const double margin = rhs - lhs;
        const double margin_alt = rhs_alt - lhs;
        const bool ok = lhs <= rhs + inequality_tolerance(lhs, rhs);

        const double expected0 = closure_value(trajectory, cert, n);
        const double b0 = trajectory.boundary_value[n];
        const bool consistent =
            std::abs(b0 - expected0) <= inequality_tolerance(b0, expected0);

        report.pass[n] = ok ? 1 : 0;
        report.closure_consistent[n] = consistent ? 1 : 0;
        if (!ok) {
            ++report.violations;
            if (consistent) ++report.violations_consistent;
        }
        if (!consistent) ++report.inconsistent_steps;
        if (margin < report.worst_margin) {
            report.worst_margin = margin;
            report.worst_step = n;
        }
        report.worst_margin_alt = std::min(report.worst_margin_alt, margin_alt);
    }

    const double sigma2 = trajectory.min_velocity();
    const double delta2 = trajectory.max_velocity();
    report.eta_hat = sigma2 * rate;
    report.nu = d_gain * delta2;
    report.all_pass = report.violations == 0;
    report.consistent_all_pass = report.violations_consistent == 0;
    return report;
}

IssReport check_iss_bound(const Trajectory& trajectory, const LyapunovCertificate& cert,
                          double rho0_norm) {
    if (!cert.valid)
        throw CertificateInfeasible("check_iss_bound: certificate is not valid");
    IssReport report;
    report.sigma2 = trajectory.min_velocity();
    report.delta2 = trajectory.max_velocity();
    if (!(report.sigma2 > 0.0))
        throw std::domain_error("check_iss_bound: degenerate trajectory, min velocity <= 0");

    const double f = cert.f_dx_experiment;
    const double em_bdx = std::exp(-cert.beta * cert.dx);
    report.gamma1 = report.sigma2 * f / (2.0 * cert.c1);
    report.gamma2 = cert.gamma2;
    report.gamma3 = std::sqrt(0.5 * (1.0 + 2.0 * em_bdx) * cert.c1 * report.delta2 *
                              std::exp(-cert.beta) / (report.sigma2 * f * cert.alpha1));

    double d_max = 0.0;
    report.all_pass = true;
    const std::size_t levels = trajectory.times.size();
    for (std::size_t n = 1; n < levels; ++n) {
        d_max = std::max(d_max, std::abs(trajectory.disturbance[n - 1]));
        const double lhs = trajectory.l2_deviation[n];
        const double rhs = report.gamma2 * std::exp(-report.gamma1 * trajectory.times[n]) *
                               rho0_norm +
                           report.gamma3 * d_max;
        const double margin = rhs - lhs;
        if (margin < report.worst_margin) {
            report.worst_margin = margin;
            report.worst_index = n;
        }
        if (lhs > rhs + inequality_tolerance(lhs, rhs)) report.all_pass = false;
        ++report.checked;
    }
    report.max_disturbance = d_max;
    report.final_norm = trajectory.l2_deviation.back();
    return report;
}

}  // namespace reflow
