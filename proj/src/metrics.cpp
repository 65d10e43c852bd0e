#include "cdanse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace cdanse {

double star_norm(const Vector& v, double H, const LinearBlocks& blocks) {
    if (H <= 0.0) throw std::invalid_argument("star_norm: H must be positive");
    const double h1 = quadratic_norm(v, blocks.K1);
    const double l2 = quadratic_norm(v, blocks.Mv);
    return std::sqrt(h1 * h1 + l2 * l2 / (2.0 * H * H));
}

namespace {

std::vector<std::pair<int, double>> error_series(const IterationTrace& trace, ErrorNorm norm) {
    std::vector<std::pair<int, double>> out;
    out.reserve(trace.records.size());
    for (const IterationRecord& r : trace.records) {
        double e;
        switch (norm) {
            case ErrorNorm::star:
                if (!r.err_star) continue;
                e = *r.err_star;
                break;
            case ErrorNorm::h1:
                if (!r.err_h1) continue;
                e = *r.err_h1;
                break;
            case ErrorNorm::residual:
                e = r.residual;
                break;
        }
        out.push_back({r.k, e});
    }
    return out;
}

}  // namespace

RateFit fit_linear_rate(const IterationTrace& trace, ErrorNorm norm, double floor) {
    RateFit fit;
    std::vector<double> ks, logs;
    for (const auto& [k, e] : error_series(trace, norm)) {
        if (k == 1) continue;  // transient
        if (!(e > floor) || !std::isfinite(e)) continue;
        ks.push_back(static_cast<double>(k));
        logs.push_back(std::log(e));
    }
    if (ks.size() < 4) return fit;  // flagged: too few usable points

    const double n = static_cast<double>(ks.size());
    double sk = 0.0, sl = 0.0, skk = 0.0, skl = 0.0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        sk += ks[i];
        sl += logs[i];
        skk += ks[i] * ks[i];
        skl += ks[i] * logs[i];
    }
    const double denom = n * skk - sk * sk;
    const double slope = (n * skl - sk * sl) / denom;
    const double intercept = (sl - slope * sk) / n;

    double ss = 0.0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double r = logs[i] - (intercept + slope * ks[i]);
        ss += r * r;
    }
    fit.rho = std::exp(slope);
    fit.k_start = static_cast<int>(ks.front());
    fit.k_end = static_cast<int>(ks.back());
    fit.goodness = std::sqrt(ss / n);
    fit.ok = true;
    fit.linear_decay = fit.goodness <= kRateGoodnessThreshold;
    return fit;
}

std::vector<double> h_scaling_exponents(const std::vector<std::pair<double, double>>& rates) {
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < rates.size(); ++i) {
        const double H0 = rates[i].first;
        const double H1 = rates[i + 1].first;
        if (std::abs(H1 - 0.5 * H0) > 1e-12 * H0)
            throw std::invalid_argument("h_scaling_exponents: H values must halve successively");
        out.push_back(std::log(rates[i + 1].second / rates[i].second) / std::log(0.5));
    }
    return out;
}

QuadraticFit quadratic_constant(const IterationTrace& trace, double floor) {
    QuadraticFit fit;
    const auto series = error_series(trace, ErrorNorm::h1);

    // trailing run of consecutive iterations above floor
    int end = static_cast<int>(series.size());
    while (end > 0 && !(series[end - 1].second > floor && std::isfinite(series[end - 1].second)))
        --end;
    int begin = end;
    while (begin > 0 && series[begin - 1].second > floor &&
           std::isfinite(series[begin - 1].second) &&
           (begin == end || series[begin].first == series[begin - 1].first + 1))
        --begin;

    const int count = end - begin;
    if (count < 3) return fit;  // need >= 3 consecutive iterations

    std::vector<double> ratios;
    for (int i = begin; i + 1 < end; ++i)
        ratios.push_back(series[i + 1].second / (series[i].second * series[i].second));

    double log_sum = 0.0;
    double lo = ratios.front(), hi = ratios.front();
    for (double r : ratios) {
        log_sum += std::log(r);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    fit.c_q = std::exp(log_sum / static_cast<double>(ratios.size()));
    fit.spread = hi / lo;
    fit.points = count;
    fit.ok = true;
    return fit;
}

std::string rate_table_text(const std::vector<RateTableRow>& rows) {
    std::ostringstream out;
    out << "      H   iterations   rate_star   scaling_exponent\n";
    char buf[128];
    for (const RateTableRow& r : rows) {
        if (r.scaling)
            std::snprintf(buf, sizeof buf, "%7.5f   %10d   %9.4f   %16.4f\n", r.H,
                          r.iterations, r.rate_star, *r.scaling);
        else
            std::snprintf(buf, sizeof buf, "%7.5f   %10d   %9.4f   %16s\n", r.H,
                          r.iterations, r.rate_star, "----");
        out << buf;
    }
    return out.str();
}

std::string rate_table_csv(const std::vector<RateTableRow>& rows) {
    std::ostringstream out;
    out << "H,iterations,rate_star,scaling_exponent\n";
    char buf[40];
    for (const RateTableRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.H);
        out << buf << ',' << r.iterations << ',';
        std::snprintf(buf, sizeof buf, "%.17g", r.rate_star);
        out << buf << ',';
        if (r.scaling) {
            std::snprintf(buf, sizeof buf, "%.17g", *r.scaling);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace cdanse
