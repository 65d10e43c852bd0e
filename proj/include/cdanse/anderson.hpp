#pragma once

#include <Eigen/SparseCholesky>

#include <optional>
#include <vector>

#include "cdanse/fem.hpp"

namespace cdanse {

struct AndersonConfig {
    int depth = 5;       // m = 0 degenerates to relaxed fixed-point iteration
    double beta = 1.0;   // relaxation in (0, 1]

    void validate() const;
};

enum class AndersonNorm { euclidean, h1 };

struct AndersonUpdate {
    Vector x_next;
    std::optional<double> gain;  // theta in [0,1]; empty on the first step and at convergence
};

/// Anderson mixing over a fixed-point map, keeping the last m iterate and
/// residual differences and combining them through a least-squares problem
/// solved by column-pivoted QR in the configured inner product.
///
/// In h1 mode the inner product weights the leading weighted_size entries
/// of the iterate vector by an SPD operator (the free-dof velocity
/// stiffness); trailing entries ride along with zero weight.
class AndersonAccelerator {
public:
    explicit AndersonAccelerator(AndersonConfig config,
                                 AndersonNorm norm = AndersonNorm::euclidean);

    /// Required before updates in h1 mode. weight must be SPD.
    void set_weight(const SparseMatrix& weight, int weighted_size);

    /// One accelerated step given the current iterate x and g(x).
    AndersonUpdate update(const Vector& x, const Vector& g_of_x);

    void reset();

    int history_columns() const { return static_cast<int>(f_cols_.size()); }

private:
    Vector apply_weight(const Vector& v) const;

    AndersonConfig config_;
    AndersonNorm norm_;
    Eigen::SimplicialLLT<SparseMatrix> weight_llt_;
    bool has_weight_ = false;
    int weighted_size_ = 0;

    int step_ = 0;  // k
    Vector prev_x_;
    Vector prev_y_;
    std::vector<Vector> e_cols_;  // iterate differences, newest first
    std::vector<Vector> f_cols_;  // residual differences, newest first
};

}  // namespace cdanse
