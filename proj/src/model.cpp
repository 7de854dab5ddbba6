#include "reflow/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace reflow {

double VelocityModel::operator()(double s) const {
    if (s <= -B + 1e-12)
        throw std::domain_error("velocity undefined: s = " + std::to_string(s) +
                                " is at or below -B = " + std::to_string(-B));
    return A / (B + s);
}

double velocity_eval(const VelocityModel& model, double s) { return model(s); }

DisturbanceSignal DisturbanceSignal::sinusoid(double amplitude, double angular_frequency,
                                              double phase) {
    DisturbanceSignal d;
    d.kind_ = Kind::sinusoid;
    d.amplitude_ = amplitude;
    d.angular_frequency_ = angular_frequency;
    d.phase_ = phase;
    return d;
}

DisturbanceSignal DisturbanceSignal::sampled(std::vector<double> times,
                                             std::vector<double> values) {
    if (times.empty() || times.size() != values.size())
        throw std::invalid_argument("DisturbanceSignal: sampled table must be nonempty with "
                                    "matching time/value lengths");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("DisturbanceSignal: sample times must be strictly "
                                        "increasing");
    DisturbanceSignal d;
    d.kind_ = Kind::sampled;
    d.times_ = std::move(times);
    d.values_ = std::move(values);
    return d;
}

double DisturbanceSignal::operator()(double t) const {
    switch (kind_) {
        case Kind::zero:
            return 0.0;
        case Kind::sinusoid:
            return amplitude_ * std::sin(angular_frequency_ * t + phase_);
        case Kind::sampled: {
            if (t <= times_.front()) return values_.front();
            if (t >= times_.back()) return values_.back();
            auto it = std::upper_bound(times_.begin(), times_.end(), t);
            std::size_t i = static_cast<std::size_t>(it - times_.begin());
            double w = (t - times_[i - 1]) / (times_[i] - times_[i - 1]);
            return values_[i - 1] + w * (values_[i] - values_[i - 1]);
        }
    }
    return 0.0;
}

static void require_length(const DensityState& state, const Grid& grid, const char* where) {
    if (state.cells() != grid.cell_count)
        throw std::invalid_argument(std::string(where) + ": state has " +
                                    std::to_string(state.cells()) + " cells, grid has " +
                                    std::to_string(grid.cell_count));
}

double total_mass(const DensityState& state, const Grid& grid) {
    require_length(state, grid, "total_mass");
    double sum = 0.0;
    for (int j = 1; j <= grid.cell_count; ++j) sum += state.values[static_cast<std::size_t>(j)];
    return grid.dx * sum;
}

double theta(const FeedbackConfig& config, const VelocityModel& model) {
    return config.rho_star / (model.B + config.rho_star);
}

double equilibrium_influx(const FeedbackConfig& config, const VelocityModel& model) {
    if (config.rho_star == 0.0) return 0.0;
    return config.rho_star * model(config.rho_star);
}

double l2_norm(const DensityState& state, const Grid& grid, double shift) {
    require_length(state, grid, "l2_norm");
    double sum = 0.0;
    for (int j = 1; j <= grid.cell_count; ++j) {
        double v = state.values[static_cast<std::size_t>(j)] - shift;
        sum += v * v;
    }
    return std::sqrt(grid.dx * sum);
}

DensityState sample_initial_state(const std::function<double(double)>& rho0, const Grid& grid,
                                  Frame frame, double rho_star) {
    DensityState state;
    state.frame = frame;
    state.t = 0.0;
    state.values.resize(static_cast<std::size_t>(grid.cell_count) + 1);
    state.values[0] = rho0(0.0);
    for (int j = 1; j <= grid.cell_count; ++j)
        state.values[static_cast<std::size_t>(j)] = rho0(grid.center(j));
    if (frame == Frame::perturbation)
        for (double& v : state.values) v -= rho_star;
    return state;
}

}  // namespace reflow
