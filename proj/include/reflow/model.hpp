#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

namespace reflow {

/// Transport speed as a function of the total mass held in the system,
/// lambda(s) = A / (B + s).  Positive and strictly decreasing on its domain.
struct VelocityModel {
    double A = 1.0;
    double B = 1.0;

    VelocityModel() = default;
    VelocityModel(double A_, double B_) : A(A_), B(B_) {
        if (!(A > 0.0) || !(B > 0.0))
            throw std::invalid_argument("VelocityModel: A and B must be positive");
    }

    /// Evaluate lambda(s).  Throws std::domain_error for s <= -B (plus a small
    /// guard band so roundoff cannot produce a near-singular speed).
    double operator()(double s) const;
};

/// Uniform cell-centered mesh on [0,1].  Cell centers are x_j = (j-1/2)*dx for
/// j = 1..J; index 0 is the inflow boundary node at x = 0.
struct Grid {
    int cell_count = 0;
    double dx = 0.0;

    explicit Grid(int J) : cell_count(J), dx(1.0 / J) {
        if (J <= 0) throw std::invalid_argument("Grid: cell count must be positive");
    }

    double center(int j) const { return (j - 0.5) * dx; }  // j in 1..J

    std::vector<double> centers() const {
        std::vector<double> x(static_cast<std::size_t>(cell_count));
        for (int j = 1; j <= cell_count; ++j) x[static_cast<std::size_t>(j - 1)] = center(j);
        return x;
    }
};

enum class Frame { physical, perturbation };

/// Cell values at one time instant.  values[0] is the inflow boundary value,
/// values[1..J] the cell averages/point values.  The frame tag records whether
/// values are absolute densities or deviations from the equilibrium.
struct DensityState {
    std::vector<double> values;
    double t = 0.0;
    Frame frame = Frame::physical;

    int cells() const { return static_cast<int>(values.size()) - 1; }
};

/// Boundary feedback configuration: gain k in [0,1) on the measured outflux and
/// the target equilibrium density.
struct FeedbackConfig {
    double k = 0.0;
    double rho_star = 0.0;

    FeedbackConfig() = default;
    FeedbackConfig(double k_, double rho_star_) : k(k_), rho_star(rho_star_) {
        if (!(k >= 0.0 && k < 1.0))
            throw std::invalid_argument("FeedbackConfig: k must lie in [0,1)");
        if (!(rho_star >= 0.0))
            throw std::invalid_argument("FeedbackConfig: rho_star must be nonnegative");
    }
};

/// Additive measurement disturbance d(t), evaluable for all t >= 0.
class DisturbanceSignal {
  public:
    enum class Kind { zero, sinusoid, sampled };

    static DisturbanceSignal zero() { return DisturbanceSignal{}; }

    static DisturbanceSignal sinusoid(double amplitude, double angular_frequency,
                                      double phase = 0.0);

    /// Piecewise-linear table; times must be strictly increasing.  Outside the
    /// table the signal is held at the nearest endpoint value.
    static DisturbanceSignal sampled(std::vector<double> times, std::vector<double> values);

    double operator()(double t) const;

    Kind kind() const { return kind_; }
    double amplitude() const { return amplitude_; }
    double angular_frequency() const { return angular_frequency_; }
    double phase() const { return phase_; }
    const std::vector<double>& sample_times() const { return times_; }
    const std::vector<double>& sample_values() const { return values_; }

  private:
    Kind kind_ = Kind::zero;
    double amplitude_ = 0.0;
    double angular_frequency_ = 0.0;
    double phase_ = 0.0;
    std::vector<double> times_;
    std::vector<double> values_;
};

double velocity_eval(const VelocityModel& model, double s);

/// Discrete total mass W = dx * sum_{j=1..J} values[j].  The boundary node is
/// excluded.  Throws std::invalid_argument on a length mismatch.
double total_mass(const DensityState& state, const Grid& grid);

/// theta = rho_star / (B + rho_star), the equilibrium coupling coefficient of
/// the perturbation-frame boundary closure.  Lies in [0,1).
double theta(const FeedbackConfig& config, const VelocityModel& model);

/// Equilibrium influx rho_star * lambda(rho_star).
double equilibrium_influx(const FeedbackConfig& config, const VelocityModel& model);

/// Discrete L2 norm sqrt(dx * sum_{j=1..J} (values[j]-shift)^2), boundary node
/// excluded.  Pass shift = rho_star to measure deviation in the physical frame.
double l2_norm(const DensityState& state, const Grid& grid, double shift = 0.0);

/// Sample a closed-form profile pointwise: values[j] = rho0(x_j) for j = 1..J
/// and values[0] = rho0(0).  In the perturbation frame every entry is shifted
/// by -rho_star.
DensityState sample_initial_state(const std::function<double(double)>& rho0, const Grid& grid,
                                  Frame frame = Frame::physical, double rho_star = 0.0);

}  // namespace reflow
