#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "cdanse/solvers.hpp"

namespace cdanse {

/// CSV schema: k,update_h1,residual,err_l2,err_h1,err_star,aa_gain,wall_ms
/// Optional columns are left empty. With zero_wall the timing column is
/// written as 0 so reruns produce bit-identical files.
void write_trace_csv(const IterationTrace& trace, std::ostream& out, bool zero_wall = true);

/// key=value sidecar, one pair per line, keys in sorted order.
using Metadata = std::map<std::string, std::string>;

void write_metadata(const Metadata& meta, std::ostream& out);
Metadata read_metadata(std::istream& in);

std::string format_double(double v);  // %.17g, round-trip exact

}  // namespace cdanse
