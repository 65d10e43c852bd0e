#pragma once

#include <utility>
#include <vector>

#include "cdanse/fem.hpp"
#include "cdanse/solvers.hpp"

namespace cdanse {

/// Weighted H1 norm sqrt(|v|_H1^2 + |v|_L2^2 / (2 H^2)), interpolation
/// constant taken as 1.
double star_norm(const Vector& v, double H, const LinearBlocks& blocks);

enum class ErrorNorm { star, h1, residual };

struct RateFit {
    double rho = 0.0;       // fitted linear rate exp(slope)
    int k_start = 0;
    int k_end = 0;
    double goodness = 0.0;  // RMS residual of the log-linear fit
    bool ok = false;        // enough usable points
    bool linear_decay = false;  // goodness below threshold
};

/// RMS threshold (in log units) separating clean geometric decay from
/// quadratic or stalled traces; calibrated on synthetic sequences.
inline constexpr double kRateGoodnessThreshold = 0.15;

/// Log-linear least-squares rate over the trace, dropping k = 1 and all
/// entries below floor.
RateFit fit_linear_rate(const IterationTrace& trace, ErrorNorm norm, double floor = 1e-10);

/// Exponents log(rho_H / rho_2H) / log(1/2) for consecutive halving pairs;
/// input ordered by descending H. Throws on a non-halving sequence.
std::vector<double> h_scaling_exponents(const std::vector<std::pair<double, double>>& rates);

struct QuadraticFit {
    double c_q = 0.0;    // geometric mean of e_{k+1} / e_k^2
    double spread = 0.0; // max/min ratio over the window
    int points = 0;      // iterations in the window
    bool ok = false;
};

/// Quadratic-convergence constant over the trailing window of iterations
/// above floor (H1 error against the reference).
QuadraticFit quadratic_constant(const IterationTrace& trace, double floor = 1e-10);

/// Summary table row mirroring the H / iterations / rate / scaling layout.
struct RateTableRow {
    double H = 0.0;
    int iterations = 0;
    double rate_star = 0.0;
    std::optional<double> scaling;
};

std::string rate_table_text(const std::vector<RateTableRow>& rows);
std::string rate_table_csv(const std::vector<RateTableRow>& rows);

}  // namespace cdanse
