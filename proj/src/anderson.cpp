#include "cdanse/anderson.hpp"

#include <Eigen/QR>

#include <cmath>
#include <stdexcept>

namespace cdanse {

void AndersonConfig::validate() const {
    if (depth < 0) throw std::invalid_argument("AndersonConfig: depth must be >= 0");
    if (!(beta > 0.0 && beta <= 1.0))
        throw std::invalid_argument("AndersonConfig: beta must be in (0, 1]");
}

AndersonAccelerator::AndersonAccelerator(AndersonConfig config, AndersonNorm norm)
    : config_(config), norm_(norm) {
    config_.validate();
}

void AndersonAccelerator::set_weight(const SparseMatrix& weight, int weighted_size) {
    weight_llt_.compute(weight);
    if (weight_llt_.info() != Eigen::Success)
        throw std::runtime_error("AndersonAccelerator: inner-product weight is not SPD");
    weighted_size_ = weighted_size;
    has_weight_ = true;
}

void AndersonAccelerator::reset() {
    step_ = 0;
    prev_x_.resize(0);
    prev_y_.resize(0);
    e_cols_.clear();
    f_cols_.clear();
}

Vector AndersonAccelerator::apply_weight(const Vector& v) const {
    if (norm_ == AndersonNorm::euclidean) return v;
    if (!has_weight_) throw std::logic_error("AndersonAccelerator: h1 norm requires a weight");
    // v^T K v = |L^T P v|^2 for the Cholesky factorization P K P^T = L L^T
    return weight_llt_.matrixU() * (weight_llt_.permutationP() * v.head(weighted_size_));
}

AndersonUpdate AndersonAccelerator::update(const Vector& x, const Vector& g_of_x) {
    const Vector y = g_of_x - x;
    const double ynorm = apply_weight(y).norm();

    AndersonUpdate out;
    if (ynorm == 0.0) {
        out.x_next = x;  // already converged; gain undefined
        return out;
    }

    if (step_ > 0) {
        f_cols_.insert(f_cols_.begin(), y - prev_y_);
        e_cols_.insert(e_cols_.begin(), x - prev_x_);
        if (static_cast<int>(f_cols_.size()) > config_.depth) {
            f_cols_.pop_back();
            e_cols_.pop_back();
        }
    }
    prev_x_ = x;
    prev_y_ = y;
    ++step_;

    const int mk = static_cast<int>(f_cols_.size());
    if (mk == 0) {
        // relaxed fixed-point update; exact hand-off at beta = 1
        out.x_next = config_.beta == 1.0 ? g_of_x : Vector(x + config_.beta * y);
        if (config_.depth == 0) out.gain = 1.0;
        return out;
    }

    // least squares min_gamma |F gamma - y|_X via column-pivoted QR of the
    // weighted columns; rank deficiency drops the oldest columns
    const Vector yw = apply_weight(y);
    Vector gamma;
    double theta = 1.0;
    int cols = mk;
    while (true) {
        Eigen::MatrixXd Fw(yw.size(), cols);
        for (int j = 0; j < cols; ++j) Fw.col(j) = apply_weight(f_cols_[j]);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Fw);
        qr.setThreshold(1e-12);
        if (qr.rank() == cols) {
            gamma = qr.solve(yw);
            theta = (Fw * gamma - yw).norm() / ynorm;
            break;
        }
        if (cols == 1) {  // fully degenerate history: fall back to plain update
            gamma.resize(0);
            break;
        }
        --cols;
        f_cols_.resize(cols);
        e_cols_.resize(cols);
    }

    if (gamma.size() == 0) {
        out.x_next = config_.beta == 1.0 ? g_of_x : Vector(x + config_.beta * y);
        out.gain = 1.0;
        return out;
    }

    Vector combo = Vector::Zero(x.size());
    for (int j = 0; j < cols; ++j)
        combo += gamma[j] * (e_cols_[j] + config_.beta * f_cols_[j]);
    out.x_next = x + config_.beta * y - combo;
    out.gain = std::min(theta, 1.0);
    return out;
}

}  // namespace cdanse
