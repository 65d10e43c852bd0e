#include "cdanse/trace_io.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace cdanse {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_trace_csv(const IterationTrace& trace, std::ostream& out, bool zero_wall) {
    out << "k,update_h1,residual,err_l2,err_h1,err_star,aa_gain,wall_ms\n";
    auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string();
    };
    for (const IterationRecord& r : trace.records) {
        out << r.k << ',' << format_double(r.update_h1) << ',' << format_double(r.residual)
            << ',' << opt(r.err_l2) << ',' << opt(r.err_h1) << ',' << opt(r.err_star) << ','
            << opt(r.aa_gain) << ',' << format_double(zero_wall ? 0.0 : r.wall_ms) << '\n';
    }
}

void write_metadata(const Metadata& meta, std::ostream& out) {
    for (const auto& [k, v] : meta) out << k << '=' << v << '\n';
}

Metadata read_metadata(std::istream& in) {
    Metadata meta;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("read_metadata: malformed line: " + line);
        meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return meta;
}

}  // namespace cdanse
