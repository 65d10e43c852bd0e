#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <random>

#include "cdanse/anderson.hpp"
#include "cdanse/solvers.hpp"

using namespace cdanse;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace

TEST_CASE("config validation") {
    AndersonConfig bad;
    bad.depth = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.depth = 2;
    bad.beta = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.beta = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("depth zero is the relaxed fixed-point update with unit gain") {
    AndersonConfig cfg;
    cfg.depth = 0;
    cfg.beta = 0.25;
    AndersonAccelerator aa(cfg);
    const Vector x = vec({1.0, -2.0});
    const Vector g = vec({2.0, 0.0});
    const AndersonUpdate upd = aa.update(x, g);
    CHECK(upd.x_next[0] == doctest::Approx(1.25));
    CHECK(upd.x_next[1] == doctest::Approx(-1.5));
    REQUIRE(upd.gain.has_value());
    CHECK(*upd.gain == 1.0);
}

TEST_CASE("depth zero with unit relaxation hands g back bitwise") {
    AndersonConfig cfg;
    cfg.depth = 0;
    cfg.beta = 1.0;
    AndersonAccelerator aa(cfg);
    const Vector x = vec({0.1, 0.2, 0.3});
    const Vector g = vec({0.7, -0.4, 2.0});
    const AndersonUpdate upd = aa.update(x, g);
    CHECK(upd.x_next == g);
}

TEST_CASE("zero residual means convergence, gain undefined") {
    AndersonAccelerator aa(AndersonConfig{2, 1.0});
    const Vector x = vec({1.0, 1.0});
    const AndersonUpdate upd = aa.update(x, x);
    CHECK(upd.x_next == x);
    CHECK(!upd.gain.has_value());
}

TEST_CASE("depth one solves an affine scalar map in one accelerated step") {
    const double c = 1.0, rho = 0.4;
    const double fixed_point = c / (1.0 - rho);
    auto g = [&](const Vector& x) { return vec({c + rho * x[0]}); };

    for (double beta : {1.0, 0.5}) {
        AndersonConfig cfg;
        cfg.depth = 1;
        cfg.beta = beta;
        AndersonAccelerator aa(cfg);
        Vector x0 = vec({0.0});
        const AndersonUpdate u1 = aa.update(x0, g(x0));
        CHECK(!u1.gain.has_value());  // no least-squares problem yet
        const Vector x1 = u1.x_next;
        const AndersonUpdate u2 = aa.update(x1, g(x1));
        CHECK(u2.x_next[0] == doctest::Approx(fixed_point).epsilon(1e-12));
    }
}

TEST_CASE("orthogonal residual difference forces the plain update") {
    AndersonConfig cfg;
    cfg.depth = 1;
    cfg.beta = 1.0;
    AndersonAccelerator aa(cfg);
    const Vector x0 = vec({0.0, 0.0});
    const Vector g0 = vec({2.0, 0.0});  // y1 = (2,0)
    aa.update(x0, g0);
    const Vector x1 = vec({5.0, 5.0});
    const Vector g1 = vec({6.0, 6.0});  // y2 = (1,1), y2 - y1 = (-1,1) orthogonal to y2
    const AndersonUpdate upd = aa.update(x1, g1);
    CHECK(upd.x_next[0] == doctest::Approx(6.0).epsilon(1e-14));
    CHECK(upd.x_next[1] == doctest::Approx(6.0).epsilon(1e-14));
    REQUIRE(upd.gain.has_value());
    CHECK(*upd.gain == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("gain matches an independent least-squares oracle") {
    const int dim = 24;
    std::mt19937 rng(31415);
    std::normal_distribution<double> dist;
    auto rand_vec = [&] {
        Vector v(dim);
        for (int i = 0; i < dim; ++i) v[i] = dist(rng);
        return v;
    };

    // SPD weight for the h1-style inner product
    SparseMatrix W(dim, dim);
    std::vector<Eigen::Triplet<double>> ts;
    for (int i = 0; i < dim; ++i) {
        ts.emplace_back(i, i, 2.0 + 0.1 * i);
        if (i + 1 < dim) {
            ts.emplace_back(i, i + 1, -0.5);
            ts.emplace_back(i + 1, i, -0.5);
        }
    }
    W.setFromTriplets(ts.begin(), ts.end());
    const Eigen::MatrixXd Wd = Eigen::MatrixXd(W);

    for (AndersonNorm norm : {AndersonNorm::euclidean, AndersonNorm::h1}) {
        AndersonConfig cfg;
        cfg.depth = 3;
        cfg.beta = 1.0;
        AndersonAccelerator aa(cfg, norm);
        if (norm == AndersonNorm::h1) aa.set_weight(W, dim);

        std::vector<Vector> xs = {rand_vec()};
        std::vector<Vector> ys;
        for (int k = 0; k < 6; ++k) {
            const Vector g = rand_vec();
            const Vector y = g - xs.back();
            ys.push_back(y);
            const AndersonUpdate upd = aa.update(xs.back(), g);
            CHECK(aa.history_columns() <= cfg.depth);
            if (upd.gain) {
                CHECK(*upd.gain >= 0.0);
                CHECK(*upd.gain <= 1.0);
                // oracle: dense weighted least squares over the same history
                const int mk = std::min<int>(k, cfg.depth);
                REQUIRE(mk >= 1);
                Eigen::MatrixXd F(dim, mk);
                for (int j = 0; j < mk; ++j)
                    F.col(j) = ys[ys.size() - 1 - j] - ys[ys.size() - 2 - j];
                const Eigen::MatrixXd weight =
                    norm == AndersonNorm::h1 ? Wd : Eigen::MatrixXd::Identity(dim, dim);
                const Eigen::MatrixXd G = F.transpose() * weight * F;
                const Vector rhs = F.transpose() * weight * y;
                const Vector gamma = G.ldlt().solve(rhs);
                const Vector r = F * gamma - y;
                const double theta =
                    std::sqrt(r.dot(weight * r)) / std::sqrt(y.dot(weight * y));
                CHECK(*upd.gain == doctest::Approx(theta).epsilon(1e-10));
                // residual of the minimizer is orthogonal to the history span
                const Vector ortho = F.transpose() * (weight * r);
                CHECK(ortho.cwiseAbs().maxCoeff() <=
                      1e-10 * std::sqrt(y.dot(weight * y)));
            }
            xs.push_back(upd.x_next);
        }
    }
}

TEST_CASE("depth zero wrapped Picard reproduces plain Picard bitwise") {
    Problem p = make_cavity_problem(8, 100.0);
    SolverConfig plain;
    plain.nu = p.nu;
    plain.tol = 1e-14;
    plain.max_iters = 5;

    SolverConfig wrapped = plain;
    AndersonConfig aa;
    aa.depth = 0;
    aa.beta = 1.0;
    wrapped.anderson = aa;

    const IterationTrace a = solve_nonlinear(p, plain);
    const IterationTrace b = solve_nonlinear(p, wrapped);
    REQUIRE(a.records.size() == b.records.size());
    CHECK(a.final_state.velocity == b.final_state.velocity);
    CHECK(a.final_state.pressure == b.final_state.pressure);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].update_h1 == b.records[i].update_h1);
        CHECK(a.records[i].residual == b.records[i].residual);
    }
}
