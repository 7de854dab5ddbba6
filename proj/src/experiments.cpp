#include "reflow/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <thread>

#include "reflow/csv.hpp"

namespace reflow {

namespace {

// Deterministic parallel map over an index range: each worker claims indices
// from a shared counter and writes to its own slot.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    int n = std::min<int>(jobs, static_cast<int>(count));
    pool.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace

ExperimentPreset ExperimentPreset::example1() {
    ExperimentPreset p;
    p.name = "example1";
    p.rho_star = 0.0;
    p.k = 0.3;
    p.model = VelocityModel{1.0, 1.0};
    p.disturbance = DisturbanceSignal::sinusoid(2.4e-3, 1.0);
    p.t_final = 10.0;
    p.initial = [](double x) { return 1.0 + std::sin(2.0 * std::numbers::pi * x); };
    return p;
}

ExperimentPreset ExperimentPreset::example2() {
    ExperimentPreset p;
    p.name = "example2";
    p.rho_star = 1.0;
    p.k = 0.3;
    p.model = VelocityModel{1.0, 1.0};
    p.disturbance = DisturbanceSignal::sinusoid(2.4e-3, 1.0);
    p.t_final = 20.0;
    p.initial = [](double x) { return 2.0 + 2.0 * std::sin(2.0 * std::numbers::pi * x); };
    return p;
}

Trajectory run_preset(const ExperimentPreset& preset, int J, double cfl, Frame frame,
                      int record_stride, std::vector<double> quadratic_weights) {
    Grid grid(J);
    FeedbackConfig config(preset.k, preset.rho_star);
    DensityState init = sample_initial_state(preset.initial, grid, frame, preset.rho_star);
    SolverConfig cfg;
    cfg.cfl_number = cfl;
    cfg.t_final = preset.t_final;
    cfg.record_stride = record_stride;
    cfg.frame = frame;
    cfg.quadratic_weights = std::move(quadratic_weights);
    return simulate(init, grid, preset.model, config, cfg, preset.disturbance);
}

std::vector<double> restrict_cell_average(const std::vector<double>& fine_cells, int coarse_J) {
    const int fine_J = static_cast<int>(fine_cells.size());
    if (coarse_J <= 0 || fine_J % coarse_J != 0)
        throw std::invalid_argument("restrict_cell_average: coarse cell count must divide the "
                                    "fine cell count");
    const int m = fine_J / coarse_J;
    std::vector<double> coarse(static_cast<std::size_t>(coarse_J));
    for (int j = 0; j < coarse_J; ++j) {
        double sum = 0.0;
        for (int i = 0; i < m; ++i) sum += fine_cells[static_cast<std::size_t>(j * m + i)];
        coarse[static_cast<std::size_t>(j)] = sum / m;
    }
    return coarse;
}

std::vector<ConvergenceRow> convergence_study(const ExperimentPreset& preset,
                                              const std::vector<int>& J_list, double cfl,
                                              int reference_factor, BetaMode mode, int jobs) {
    if (J_list.empty()) return {};
    if (reference_factor < 2)
        throw std::invalid_argument("convergence_study: reference factor must be at least 2");
    const int J_ref = reference_factor * *std::max_element(J_list.begin(), J_list.end());
    for (int J : J_list)
        if (J <= 0 || J_ref % J != 0)
            throw std::invalid_argument("convergence_study: every J must divide the reference "
                                        "resolution J_ref = " +
                                        std::to_string(J_ref));

    // reference run plus one run per listed J, all independent
    std::vector<Trajectory> runs(J_list.size());
    Trajectory reference;
    parallel_for(J_list.size() + 1, jobs, [&](std::size_t i) {
        const int stride = std::numeric_limits<int>::max();
        if (i == J_list.size())
            reference = run_preset(preset, J_ref, cfl, Frame::physical, stride);
        else
            runs[i] = run_preset(preset, J_list[i], cfl, Frame::physical, stride);
    });

    const std::vector<double> ref_cells(reference.states.back().values.begin() + 1,
                                        reference.states.back().values.end());
    std::vector<ConvergenceRow> rows(J_list.size());
    for (std::size_t i = 0; i < J_list.size(); ++i) {
        const int J = J_list[i];
        const Trajectory& tr = runs[i];
        ConvergenceRow row;
        row.J = J;
        const std::vector<double> restricted = restrict_cell_average(ref_cells, J);
        const DensityState& final_state = tr.states.back();
        double err_sq = 0.0;
        for (int j = 1; j <= J; ++j) {
            double e = final_state.values[static_cast<std::size_t>(j)] -
                       restricted[static_cast<std::size_t>(j - 1)];
            err_sq += e * e;
        }
        row.l2_error = std::sqrt(err_sq / J);
        row.sigma2 = tr.min_velocity();
        LyapunovCertificate cert =
            make_certificate(FeedbackConfig(preset.k, preset.rho_star), preset.model, Grid(J),
                             mode);
        if (cert.valid) row.gamma1 = decay_rates(cert, row.sigma2).gamma1;
        else row.gamma1 = std::numeric_limits<double>::quiet_NaN();
        rows[i] = row;
    }
    std::sort(rows.begin(), rows.end(),
              [](const ConvergenceRow& a, const ConvergenceRow& b) { return a.J < b.J; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        rows[i].order = std::log2(rows[i - 1].l2_error / rows[i].l2_error);
    return rows;
}

std::vector<DecaySeries> decay_series(const ExperimentPreset& preset,
                                      const std::vector<double>& k_list, double cfl, int J,
                                      int jobs) {
    std::vector<DecaySeries> series(k_list.size());
    parallel_for(k_list.size(), jobs, [&](std::size_t i) {
        ExperimentPreset p = preset;
        p.k = k_list[i];
        const Trajectory tr =
            run_preset(p, J, cfl, Frame::physical, std::numeric_limits<int>::max());
        DecaySeries s;
        s.k = k_list[i];
        s.times = tr.times;
        s.log10_norm.resize(tr.l2_deviation.size());
        for (std::size_t n = 0; n < tr.l2_deviation.size(); ++n)
            s.log10_norm[n] = std::log10(tr.l2_deviation[n]);

        // plateau level: median deviation norm over the last 10% of the run
        const std::size_t levels = tr.l2_deviation.size();
        std::size_t tail_start = levels - std::max<std::size_t>(1, levels / 10);
        std::vector<double> tail(tr.l2_deviation.begin() + static_cast<std::ptrdiff_t>(tail_start),
                                 tr.l2_deviation.end());
        std::sort(tail.begin(), tail.end());
        s.plateau = tail.size() % 2 == 1
                        ? tail[tail.size() / 2]
                        : 0.5 * (tail[tail.size() / 2 - 1] + tail[tail.size() / 2]);

        // least-squares slope of log10-norm over the pre-plateau window
        double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
        std::size_t m = 0;
        for (std::size_t n = 0; n < levels; ++n) {
            if (!(tr.l2_deviation[n] > 10.0 * s.plateau)) continue;
            const double t = tr.times[n], y = s.log10_norm[n];
            st += t;
            sy += y;
            stt += t * t;
            sty += t * y;
            ++m;
        }
        s.fit_points = m;
        const double denom = m * stt - st * st;
        s.fitted_slope = (m >= 2 && denom != 0.0)
                             ? (m * sty - st * sy) / denom
                             : std::numeric_limits<double>::quiet_NaN();
        series[i] = std::move(s);
    });
    return series;
}

void write_convergence_csv(const std::filesystem::path& file,
                           const std::vector<ConvergenceRow>& rows) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
    out << "J,l2_error,order,gamma1\n";
    for (const ConvergenceRow& r : rows) {
        out << r.J << ',' << csv::format_double(r.l2_error) << ',';
        if (r.order) out << csv::format_double(*r.order);
        out << ',' << csv::format_double(r.gamma1) << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

std::vector<ConvergenceRow> read_convergence_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open for reading: " + file.string());
    std::vector<ConvergenceRow> rows;
    std::string line;
    if (!std::getline(in, line) || line != "J,l2_error,order,gamma1")
        throw std::runtime_error("unexpected convergence CSV header in " + file.string());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        ConvergenceRow r;
        std::getline(ss, field, ',');
        r.J = std::stoi(field);
        std::getline(ss, field, ',');
        r.l2_error = std::stod(field);
        std::getline(ss, field, ',');
        if (!field.empty()) r.order = std::stod(field);
        std::getline(ss, field, ',');
        r.gamma1 = std::stod(field);
        rows.push_back(r);
    }
    return rows;
}

void write_convergence_table(const std::filesystem::path& file,
                             const std::vector<ConvergenceRow>& rows) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
    out << std::left << std::setw(8) << "J" << std::setw(14) << "L2-error" << std::setw(10)
        << "order" << std::setw(10) << "gamma1" << "\n";
    for (const ConvergenceRow& r : rows) {
        std::ostringstream err, ord, g1;
        err << std::scientific << std::setprecision(4) << r.l2_error;
        if (r.order) ord << std::fixed << std::setprecision(4) << *r.order;
        else ord << "--";
        g1 << std::fixed << std::setprecision(4) << r.gamma1;
        out << std::left << std::setw(8) << r.J << std::setw(14) << err.str() << std::setw(10)
            << ord.str() << std::setw(10) << g1.str() << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

void write_decay_csv(const std::filesystem::path& file,
                     const std::vector<DecaySeries>& series) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
    out << "t,log10_norm,k\n";
    for (const DecaySeries& s : series)
        for (std::size_t n = 0; n < s.times.size(); ++n)
            out << csv::format_double(s.times[n]) << ',' << csv::format_double(s.log10_norm[n])
                << ',' << csv::format_double(s.k) << "\n";
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

}  // namespace reflow
