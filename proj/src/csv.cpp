#include "reflow/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reflow::csv {

namespace {

[[noreturn]] void io_fail(const std::filesystem::path& file, const std::string& what) {
    throw std::runtime_error(what + ": " + file.string());
}

std::ofstream open_out(const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) io_fail(file, "cannot open for writing");
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_trajectory(const std::filesystem::path& file, const Trajectory& trajectory,
                      const std::vector<double>* lyapunov) {
    if (lyapunov && lyapunov->size() != trajectory.times.size())
        throw std::invalid_argument("write_trajectory: Lyapunov series length mismatch");
    std::ofstream out = open_out(file);
    out << "t,dt,W,lambda,d,l2_deviation";
    if (lyapunov) out << ",lyapunov";
    out << "\n";
    for (std::size_t n = 0; n < trajectory.times.size(); ++n) {
        const double dt = n < trajectory.step_sizes.size() ? trajectory.step_sizes[n] : 0.0;
        out << format_double(trajectory.times[n]) << ',' << format_double(dt) << ','
            << format_double(trajectory.mass[n]) << ',' << format_double(trajectory.velocity[n])
            << ',' << format_double(trajectory.disturbance[n]) << ','
            << format_double(trajectory.l2_deviation[n]);
        if (lyapunov) out << ',' << format_double((*lyapunov)[n]);
        out << "\n";
    }
    if (!out) io_fail(file, "write failed");
}

void write_state_snapshots(const std::filesystem::path& directory,
                           const Trajectory& trajectory) {
    std::filesystem::create_directories(directory);
    for (std::size_t i = 0; i < trajectory.states.size(); ++i) {
        const DensityState& s = trajectory.states[i];
        std::ofstream out = open_out(directory / ("state_" + std::to_string(i) + ".csv"));
        out << "x,rho\n";
        out << "0," << format_double(s.values[0]) << "\n";
        for (int j = 1; j <= trajectory.cell_count; ++j)
            out << format_double((j - 0.5) * trajectory.dx) << ','
                << format_double(s.values[static_cast<std::size_t>(j)]) << "\n";
        if (!out) io_fail(directory, "write failed");
    }
}

void write_certificate(const std::filesystem::path& file, const LyapunovCertificate& cert) {
    std::ofstream out = open_out(file);
    out << "beta,a,theta,c1,f_experiment,f_proof,eta,gamma1,gamma2,gamma3,nu,valid,reasons\n";
    out << format_double(cert.beta) << ',' << format_double(cert.a) << ','
        << format_double(cert.theta) << ',' << format_double(cert.c1) << ','
        << format_double(cert.f_dx_experiment) << ',' << format_double(cert.f_dx_proof) << ','
        << format_double(cert.eta) << ',' << format_double(cert.gamma1) << ','
        << format_double(cert.gamma2) << ',' << format_double(cert.gamma3) << ','
        << format_double(cert.nu) << ',' << (cert.valid ? "true" : "false") << ',';
    for (std::size_t i = 0; i < cert.reasons.size(); ++i) {
        if (i) out << ';';
        out << cert.reasons[i];
    }
    out << "\n";
    if (!out) io_fail(file, "write failed");
}

Table2 read_table2(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) io_fail(file, "cannot open for reading");
    Table2 table;
    std::string line;
    bool first_line = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first_line) {
            first_line = false;
            // header row: skip anything that does not start as a number
            std::istringstream probe(line);
            double x;
            if (!(probe >> x)) continue;
        }
        auto comma = line.find(',');
        if (comma == std::string::npos) io_fail(file, "expected two comma-separated columns");
        try {
            table.first.push_back(std::stod(line.substr(0, comma)));
            table.second.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            io_fail(file, "malformed numeric row '" + line + "'");
        }
    }
    return table;
}

}  // namespace reflow::csv
