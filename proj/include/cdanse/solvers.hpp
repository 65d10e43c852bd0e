#pragma once

#include <Eigen/UmfPackSupport>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cdanse/anderson.hpp"
#include "cdanse/cda.hpp"
#include "cdanse/fem.hpp"

namespace cdanse {

enum class IterMethod { picard, newton };
enum class SolveStatus { converged, max_iters, diverged };

const char* to_string(IterMethod m);
const char* to_string(SolveStatus s);
IterMethod iter_method_from_string(const std::string& s);

struct SolverBreakdown : std::runtime_error {
    explicit SolverBreakdown(const std::string& reason)
        : std::runtime_error(reason) {}
};

struct SolverConfig {
    IterMethod method = IterMethod::picard;
    NudgingConfig nudging;
    double nu = 0.01;  // 1/Re
    double lid_speed = 1.0;
    double tol = 1e-8;  // H1-seminorm of the velocity update
    int max_iters = 200;
    double divergence_threshold = 1e6;
    std::optional<AndersonConfig> anderson;
    AndersonNorm anderson_norm = AndersonNorm::h1;
    std::optional<int> exact_iters;  // fixed iteration budget (trajectory comparisons)
    bool record_iterates = false;    // keep per-iteration velocity states in the trace

    void validate() const;
};

struct IterationRecord {
    int k = 0;
    double update_h1 = 0.0;
    double residual = 0.0;
    std::optional<double> err_l2;
    std::optional<double> err_h1;
    std::optional<double> err_star;
    std::optional<double> aa_gain;
    double wall_ms = 0.0;
};

struct IterationTrace {
    std::vector<IterationRecord> records;
    SolveStatus status = SolveStatus::max_iters;
    std::string breakdown;   // reason when a step error forced diverged
    bool mu_warning = false;  // penalty weight below nu/(4 H^2), run by override
    State final_state;
    std::vector<Vector> iterates;  // velocity per iteration when recording is on

    int iterations() const { return static_cast<int>(records.size()); }
};

/// Cavity (or forced) problem bundle: everything that does not change
/// across nonlinear iterations.
struct Problem {
    MixedSpace space;
    LinearBlocks blocks;
    VelocityConstraints bc;
    Vector forcing;
    double nu = 0.0;
    double lid_speed = 0.0;
};

Problem make_cavity_problem(int n, double Re, double lid_speed = 1.0);
Problem make_forced_problem(MixedSpace space, double nu,
                            const std::function<Vec2(double, double)>& f);

/// Sparse direct solve (UMFPACK, fill-reducing symmetric strategy).
/// Deterministic for fixed input; verifies the algebraic residual.
Vector linear_solve(const SparseMatrix& K, const Vector& rhs);

/// Direct solver that reuses the symbolic analysis across factorizations
/// with an identical sparsity pattern (the nonlinear iteration case).
class SaddleSolver {
public:
    Vector solve(const SparseMatrix& K, const Vector& rhs);

private:
    Eigen::UmfPackLU<SparseMatrix> lu_;
    bool analyzed_ = false;
    Eigen::Index rows_ = -1;
    Eigen::Index nnz_ = -1;
};

/// Pieces shared by the steps of one nonlinear solve.
struct StepContext {
    const Problem& problem;
    const VelocityConstraints& constraints;          // bc, possibly with direct enforcement
    const NudgingContribution* nudging = nullptr;    // penalty mode only
    SaddleSolver& solver;
};

/// One linearized solve; returns raw coefficient vectors so the caller can
/// run finiteness/divergence checks before forming a State.
void nonlinear_step(const StepContext& ctx, IterMethod method, const State& u_k,
                    Vector& velocity_out, Vector& pressure_out);

State picard_step(const StepContext& ctx, const State& u_k);
State newton_step(const StepContext& ctx, const State& u_k);

/// Full nonlinear solve from u_0 = 0 (or initial_guess when provided).
/// data must be present iff nudging is active; reference enables the error
/// columns of the trace.
IterationTrace solve_nonlinear(const Problem& problem, const SolverConfig& config,
                               const ObservationData* data = nullptr,
                               const State* reference = nullptr,
                               const State* initial_guess = nullptr);

/// Newton with Reynolds continuation; each stage solves at stage_tol and
/// warm-starts the next. Throws with the failing Re on a stage failure.
State reference_solution(const MixedSpace& space, double Re, double lid_speed,
                         const std::vector<double>& schedule, double stage_tol = 1e-11);

/// {200, 400, 700} then geometric steps of 1.5 capped at Re.
std::vector<double> default_continuation_schedule(double Re);

}  // namespace cdanse
