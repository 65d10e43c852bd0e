#include "cdanse/solvers.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace cdanse {

namespace {

// UMFPACK leans on BLAS; on small saddle blocks thread thrash from a
// pthread BLAS costs more than it buys. Respect an explicit user setting.
const bool blas_env_pinned = [] {
    ::setenv("OPENBLAS_NUM_THREADS", "1", /*overwrite=*/0);
    return true;
}();

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

const char* to_string(IterMethod m) {
    return m == IterMethod::picard ? "picard" : "newton";
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iters: return "max_iters";
        case SolveStatus::diverged: return "diverged";
    }
    return "?";
}

IterMethod iter_method_from_string(const std::string& s) {
    if (s == "picard") return IterMethod::picard;
    if (s == "newton") return IterMethod::newton;
    throw std::invalid_argument("unknown method: " + s);
}

void SolverConfig::validate() const {
    if (nu <= 0.0) throw std::invalid_argument("SolverConfig: nu must be positive");
    if (tol <= 0.0) throw std::invalid_argument("SolverConfig: tol must be positive");
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
    if (!(tol < divergence_threshold))
        throw std::invalid_argument("SolverConfig: tol must be below divergence_threshold");
    if (anderson) anderson->validate();
    if (exact_iters && *exact_iters < 1)
        throw std::invalid_argument("SolverConfig: exact_iters must be >= 1");
}

Problem make_cavity_problem(int n, double Re, double lid_speed) {
    if (Re <= 0.0) throw std::invalid_argument("make_cavity_problem: Re must be positive");
    Problem p;
    p.space = build_mixed_space(build_uniform_triangulation(n));
    p.nu = 1.0 / Re;
    p.lid_speed = lid_speed;
    p.blocks = assemble_linear_blocks(p.space, p.nu);
    p.bc = boundary_constraints(p.space, lid_speed);
    p.forcing = Vector::Zero(p.space.velocity_dof_count);
    return p;
}

Problem make_forced_problem(MixedSpace space, double nu,
                            const std::function<Vec2(double, double)>& f) {
    Problem p;
    p.space = std::move(space);
    p.nu = nu;
    p.lid_speed = 0.0;
    p.blocks = assemble_linear_blocks(p.space, nu);
    p.bc = boundary_constraints(p.space, 0.0);
    p.forcing = assemble_forcing(p.space, f);
    return p;
}

Vector SaddleSolver::solve(const SparseMatrix& K, const Vector& rhs) {
    if (!analyzed_ || K.rows() != rows_ || K.nonZeros() != nnz_) {
        lu_.umfpackControl()[UMFPACK_STRATEGY] = UMFPACK_STRATEGY_SYMMETRIC;
        lu_.analyzePattern(K);
        analyzed_ = true;
        rows_ = K.rows();
        nnz_ = K.nonZeros();
    }
    lu_.factorize(K);
    if (lu_.info() != Eigen::Success) throw SolverBreakdown("singular_factorization");
    Vector x = lu_.solve(rhs);
    if (!x.allFinite()) throw SolverBreakdown("non_finite_solution");
    const double scale = K.norm() * x.norm() + rhs.norm();
    const double res = (K * x - rhs).norm();
    if (res > 1e-10 * scale) throw SolverBreakdown("near_singular_solution");
    return x;
}

Vector linear_solve(const SparseMatrix& K, const Vector& rhs) {
    if (K.rows() != K.cols() || K.rows() != rhs.size())
        throw std::invalid_argument("linear_solve: system must be square");
    SaddleSolver solver;
    return solver.solve(K, rhs);
}

void nonlinear_step(const StepContext& ctx, IterMethod method, const State& u_k,
                    Vector& velocity_out, Vector& pressure_out) {
    const Problem& pb = ctx.problem;
    if (u_k.velocity.size() != pb.space.velocity_dof_count)
        throw std::invalid_argument("nonlinear_step: iterate does not match space");

    const SparseMatrix N = assemble_convection(pb.space, u_k.velocity, ConvectionMode::picard);
    SparseMatrix V = pb.blocks.A + N;
    Vector rhs_v = pb.forcing;
    if (method == IterMethod::newton) {
        rhs_v += N * u_k.velocity;  // b(u_k, u_k, .)
        V += assemble_convection(pb.space, u_k.velocity, ConvectionMode::newton_extra);
    }
    if (ctx.nudging) {
        V += ctx.nudging->matrix;
        rhs_v += ctx.nudging->rhs;
    }

    const SaddleSystem sys =
        assemble_saddle_system(pb.space, V, pb.blocks.B, rhs_v, ctx.constraints);
    Vector x = ctx.solver.solve(sys.K, sys.rhs);

    // constrained dofs verbatim
    for (int d = 0; d < sys.n_velocity + sys.n_pressure; ++d)
        if (sys.constrained[d]) x[d] = sys.constrained_value[d];

    velocity_out = x.head(sys.n_velocity);
    pressure_out = x.tail(sys.n_pressure);
    // shift pressure to the zero-mean gauge (unit-area domain)
    const double mean = (pb.blocks.Mp * pressure_out).sum();
    pressure_out.array() -= mean;
}

State picard_step(const StepContext& ctx, const State& u_k) {
    Vector v, p;
    nonlinear_step(ctx, IterMethod::picard, u_k, v, p);
    return State(std::move(v), std::move(p));
}

State newton_step(const StepContext& ctx, const State& u_k) {
    Vector v, p;
    nonlinear_step(ctx, IterMethod::newton, u_k, v, p);
    return State(std::move(v), std::move(p));
}

IterationTrace solve_nonlinear(const Problem& problem, const SolverConfig& config,
                               const ObservationData* data, const State* reference,
                               const State* initial_guess) {
    config.validate();
    const bool nudging_on = config.nudging.mode != NudgingMode::off;
    if (nudging_on && data == nullptr)
        throw std::invalid_argument("solve_nonlinear: nudging requires observation data");
    if (!nudging_on && data != nullptr)
        throw std::invalid_argument("solve_nonlinear: observation data requires nudging mode");

    IterationTrace trace;

    VelocityConstraints constraints = problem.bc;
    NudgingContribution nudging;
    const NudgingContribution* nudging_ptr = nullptr;
    if (nudging_on) {
        trace.mu_warning = config.nudging.validate(config.nu, data->H);
        if (config.nudging.mode == NudgingMode::direct) {
            constraints = apply_direct_enforcement(problem.bc, problem.space, *data);
        } else {
            const SparseMatrix S = build_sampling_operator(problem.space, data->nodes);
            const SparseMatrix M_H = build_coarse_mass(data->nodes);
            nudging = nudging_contribution(S, M_H, config.nudging.mu, *data);
            nudging_ptr = &nudging;
        }
    }

    SaddleSolver solver;
    StepContext ctx{problem, constraints, nudging_ptr, solver};

    std::unique_ptr<AndersonAccelerator> aa;
    if (config.anderson) {
        aa = std::make_unique<AndersonAccelerator>(*config.anderson, config.anderson_norm);
        if (config.anderson_norm == AndersonNorm::h1)
            aa->set_weight(restrict_to_free(problem.blocks.K1, constraints),
                           problem.space.velocity_dof_count -
                               static_cast<int>(constraints.dofs.size()));
    }
    const int n_free_velocity =
        problem.space.velocity_dof_count - static_cast<int>(constraints.dofs.size());

    auto pack = [&](const State& s) {
        Vector x(n_free_velocity + problem.space.pressure_dof_count);
        x.head(n_free_velocity) = gather_free(s.velocity, constraints);
        x.tail(problem.space.pressure_dof_count) = s.pressure;
        return x;
    };
    auto unpack_velocity = [&](const Vector& x, const State& like) {
        Vector v = scatter_free(x.head(n_free_velocity), constraints,
                                problem.space.velocity_dof_count);
        for (std::size_t i = 0; i < constraints.dofs.size(); ++i)
            v[constraints.dofs[i]] = like.velocity[constraints.dofs[i]];
        return v;
    };

    State u = initial_guess ? *initial_guess : zero_state(problem.space);
    const int budget = config.exact_iters ? *config.exact_iters : config.max_iters;

    for (int k = 1; k <= budget; ++k) {
        const auto t0 = Clock::now();
        IterationRecord rec;
        rec.k = k;

        Vector gv, gp;
        try {
            nonlinear_step(ctx, config.method, u, gv, gp);
        } catch (const SolverBreakdown& err) {
            trace.status = SolveStatus::diverged;
            trace.breakdown = err.what();
            rec.update_h1 = std::numeric_limits<double>::infinity();
            rec.residual = std::numeric_limits<double>::infinity();
            rec.wall_ms = ms_since(t0);
            trace.records.push_back(rec);
            trace.final_state = u;
            return trace;
        }

        Vector next_v, next_p;
        if (aa) {
            Vector gx(n_free_velocity + problem.space.pressure_dof_count);
            gx.head(n_free_velocity) = gather_free(gv, constraints);
            gx.tail(problem.space.pressure_dof_count) = gp;
            const AndersonUpdate upd = aa->update(pack(u), gx);
            rec.aa_gain = upd.gain;
            // constrained dofs are identical in u and the solve output
            State g_like(gv, gp);
            next_v = unpack_velocity(upd.x_next, g_like);
            next_p = upd.x_next.tail(problem.space.pressure_dof_count);
        } else {
            next_v = std::move(gv);
            next_p = std::move(gp);
        }

        const bool finite = next_v.allFinite() && next_p.allFinite();
        if (finite) {
            rec.update_h1 = quadratic_norm(next_v - u.velocity, problem.blocks.K1);
            const State next(next_v, next_p);
            rec.residual = nonlinear_residual(problem.space, problem.blocks, problem.forcing,
                                              next, problem.bc);
            if (reference) {
                const Vector d = reference->velocity - next.velocity;
                rec.err_l2 = quadratic_norm(d, problem.blocks.Mv);
                rec.err_h1 = quadratic_norm(d, problem.blocks.K1);
                if (nudging_on) {
                    const double H = data->H;
                    rec.err_star = std::sqrt(*rec.err_h1 * *rec.err_h1 +
                                             *rec.err_l2 * *rec.err_l2 / (2.0 * H * H));
                }
            }
            rec.wall_ms = ms_since(t0);
            trace.records.push_back(rec);
            if (config.record_iterates) trace.iterates.push_back(next.velocity);

            const double size_h1 = quadratic_norm(next.velocity, problem.blocks.K1);
            u = next;
            if (size_h1 > config.divergence_threshold) {
                trace.status = SolveStatus::diverged;
                trace.breakdown = "h1_norm_above_threshold";
                break;
            }
            if (!config.exact_iters && rec.update_h1 <= config.tol) {
                trace.status = SolveStatus::converged;
                break;
            }
            if (k == budget) {
                trace.status = config.exact_iters && rec.update_h1 <= config.tol
                                   ? SolveStatus::converged
                                   : SolveStatus::max_iters;
            }
        } else {
            rec.update_h1 = std::numeric_limits<double>::infinity();
            rec.residual = std::numeric_limits<double>::infinity();
            rec.wall_ms = ms_since(t0);
            trace.records.push_back(rec);
            trace.status = SolveStatus::diverged;
            trace.breakdown = "non_finite_iterate";
            break;
        }
    }

    trace.final_state = u;
    return trace;
}

std::vector<double> default_continuation_schedule(double Re) {
    std::vector<double> sched;
    for (double s : {200.0, 400.0, 700.0})
        if (s < Re) sched.push_back(s);
    double last = sched.empty() ? Re : sched.back();
    while (last < Re) {
        last = std::min(Re, last * 1.5);
        sched.push_back(last);
    }
    if (sched.empty() || sched.back() != Re) sched.push_back(Re);
    return sched;
}

State reference_solution(const MixedSpace& space, double Re, double lid_speed,
                         const std::vector<double>& schedule, double stage_tol) {
    if (schedule.empty() || schedule.back() != Re)
        throw std::invalid_argument("reference_solution: schedule must end at the target Re");

    State u;
    bool have_guess = false;
    for (double stage_re : schedule) {
        Problem p;
        p.space = space;  // shared triangulation across stages
        p.nu = 1.0 / stage_re;
        p.lid_speed = lid_speed;
        p.blocks = assemble_linear_blocks(p.space, p.nu);
        p.bc = boundary_constraints(p.space, lid_speed);
        p.forcing = Vector::Zero(p.space.velocity_dof_count);

        SolverConfig cfg;
        cfg.method = IterMethod::newton;
        cfg.nu = p.nu;
        cfg.lid_speed = lid_speed;
        cfg.tol = stage_tol;
        cfg.max_iters = 50;

        const IterationTrace trace =
            solve_nonlinear(p, cfg, nullptr, nullptr, have_guess ? &u : nullptr);
        if (trace.status != SolveStatus::converged)
            throw std::runtime_error("reference_solution: continuation stage failed at Re = " +
                                     std::to_string(stage_re) + " (" +
                                     to_string(trace.status) + ")");
        u = trace.final_state;
        have_guess = true;
    }
    return u;
}

}  // namespace cdanse
