#include "spiral/continuation.hpp"

#include <cmath>
#include <iostream>

#include "spiral/errors.hpp"

namespace spiral {

std::string param_name(ContinuationParam param) {
    switch (param) {
        case ContinuationParam::R0: return "r0";
        case ContinuationParam::R1: return "r1";
        case ContinuationParam::Lambda: return "lambda";
        case ContinuationParam::Sigma: return "sigma";
        case ContinuationParam::Zeta: return "zeta";
    }
    return "?";
}

namespace {

double get_param(const BvpState& s, ContinuationParam p) {
    switch (p) {
        case ContinuationParam::R0: return s.r0;
        case ContinuationParam::R1: return s.r1;
        case ContinuationParam::Lambda: return s.lambda;
        case ContinuationParam::Sigma: return s.spec.sigma;
        case ContinuationParam::Zeta: return s.spec.zeta;
    }
    return 0.0;
}

void set_param(BvpState& s, ContinuationParam p, double v) {
    switch (p) {
        case ContinuationParam::R0: s.r0 = v; break;
        case ContinuationParam::R1: s.r1 = v; break;
        case ContinuationParam::Lambda: s.lambda = v; break;
        case ContinuationParam::Sigma: s.spec.sigma = v; break;
        case ContinuationParam::Zeta: s.spec.zeta = v; break;
    }
}

std::unique_ptr<RadialProblem> problem_for(const BvpState& s) {
    return s.fields == 1 ? make_reduced_problem(s.spec, s.n_modes)
                         : make_full_problem(s.spec, s.n_modes);
}

// Tangent/secant direction in the scaled product space (nodes RMS-weighted).
struct Direction {
    Eigen::MatrixXd nodes;
    double omega = 0.0;
    double param = 0.0;
};

double dot_scaled(const Direction& a, const Direction& b, double node_weight) {
    return a.nodes.cwiseProduct(b.nodes).sum() * node_weight + a.omega * b.omega +
           a.param * b.param;
}

std::optional<double> mu0_of(const BvpState& s) {
    if (s.bc_kind == BcKind::DirichletCore && s.r0 == 0.0)
        return s.nodes(0, 0);
    return std::nullopt;
}

// dResidual/dParam by central differences (exact for the linear lambda rows,
// accurate enough for the domain and rate parameters).
Eigen::VectorXd param_column(const BvpState& base, ContinuationParam p) {
    const double mu = get_param(base, p);
    const double delta = 1e-6 * std::max(1.0, std::abs(mu));
    BvpState sp = base, sm = base;
    set_param(sp, p, mu + delta);
    set_param(sm, p, mu - delta);
    const auto prob_p = problem_for(sp);
    const auto prob_m = problem_for(sm);
    return (collocate(*prob_p, sp) - collocate(*prob_m, sm)) / (2.0 * delta);
}

double combined_rms(const Eigen::VectorXd& r, double g) {
    return std::sqrt((r.squaredNorm() + g * g) / double(r.size() + 1));
}

// One arclength corrector solve: Newton on [collocation; arclength row] with
// the parameter bordered in. Returns iterations; state and mu move.
int arclength_correct(BvpState& state, ContinuationParam p, const Direction& dir,
                      const BvpState& pred_state, double pred_mu, double node_weight,
                      const NewtonOptions& opts) {
    auto arc_residual = [&](const BvpState& s) {
        Direction dz;
        dz.nodes = s.nodes - pred_state.nodes;
        dz.omega = s.omega - pred_state.omega;
        dz.param = get_param(s, p) - pred_mu;
        return dot_scaled(dz, dir, node_weight);
    };
    auto prob = problem_for(state);
    Eigen::VectorXd res = collocate(*prob, state);
    double g = arc_residual(state);
    double rms = combined_rms(res, g);
    if (rms < opts.tol)
        return 0;
    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        AbdSystem sys;
        Eigen::VectorXd r_asm;
        assemble_newton_system(*prob, state, sys, r_asm);
        Eigen::MatrixXd rhs(r_asm.size(), 2);
        rhs.col(0) = -r_asm;
        rhs.col(1) = param_column(state, p);
        const Eigen::MatrixXd sol = abd_solve(sys, rhs);
        const int n = int(state.nodes.rows());
        const int ncols = int(state.nodes.cols());
        const int last = int(sol.rows()) - 1;

        // c.z for the two solves (their param component is zero)
        auto cdot = [&](int col) {
            double acc = 0.0;
            for (int c = 0; c < ncols; ++c)
                acc += dir.nodes.col(c).dot(sol.col(col).segment(c * n, n)) * node_weight;
            return acc + dir.omega * sol(last, col);
        };
        const double dmu = (-g - cdot(0)) / (dir.param - cdot(1));
        if (!std::isfinite(dmu))
            throw ConvergenceError("arclength corrector: singular bordered system", rms, iter);

        const Eigen::MatrixXd saved_nodes = state.nodes;
        const double saved_omega = state.omega;
        const double saved_mu = get_param(state, p);
        double scale = 1.0;
        bool accepted = false;
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            for (int c = 0; c < ncols; ++c)
                state.nodes.col(c) = saved_nodes.col(c) +
                                     scale * (sol.col(0).segment(c * n, n) -
                                              dmu * sol.col(1).segment(c * n, n));
            state.omega = saved_omega + scale * (sol(last, 0) - dmu * sol(last, 1));
            set_param(state, p, saved_mu + scale * dmu);
            if (p == ContinuationParam::Sigma || p == ContinuationParam::Zeta)
                prob = problem_for(state);
            Eigen::VectorXd res_new = collocate(*prob, state);
            const double g_new = arc_residual(state);
            const double rms_new = combined_rms(res_new, g_new);
            if (std::isfinite(rms_new) && rms_new <= (1.0 - 1e-4 * scale) * rms) {
                res = std::move(res_new);
                g = g_new;
                rms = rms_new;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) {
            state.nodes = saved_nodes;
            state.omega = saved_omega;
            set_param(state, p, saved_mu);
            throw ConvergenceError("arclength corrector: residual did not decrease", rms, iter);
        }
        if (rms < opts.tol)
            return iter;
    }
    throw ConvergenceError("arclength corrector: iteration budget exhausted", rms,
                           opts.max_iterations);
}

int desired_intervals(const BvpState& s, const ContinuationConfig& cfg) {
    const double len = s.domain_length();
    int want = int(std::ceil(len / cfg.target_mesh_spacing));
    return std::clamp(want, cfg.min_intervals, cfg.max_intervals);
}

std::vector<double> equidistributed_mesh(const BvpState& s, int intervals) {
    // arclength monitor from node-value increments, floored to keep spread
    const int M = s.intervals();
    std::vector<double> w(M), cum(M + 1, 0.0);
    for (int j = 0; j < M; ++j) {
        const int p = s.degree;
        w[j] = (s.nodes.col(p * (j + 1)) - s.nodes.col(p * j)).norm() +
               1e-3 * (s.mesh_tau[j + 1] - s.mesh_tau[j]);
        cum[j + 1] = cum[j] + w[j];
    }
    std::vector<double> mesh(intervals + 1);
    mesh[0] = 0.0;
    mesh[intervals] = 1.0;
    for (int i = 1; i < intervals; ++i) {
        const double level = cum[M] * i / intervals;
        const int j = int(std::upper_bound(cum.begin(), cum.end(), level) - cum.begin()) - 1;
        const int jj = std::clamp(j, 0, M - 1);
        const double frac = (level - cum[jj]) / w[jj];
        mesh[i] = s.mesh_tau[jj] + frac * (s.mesh_tau[jj + 1] - s.mesh_tau[jj]);
    }
    return mesh;
}

void record(Branch& branch, const BvpState& state, ContinuationParam p, double residual,
            int iters, const ContinuationConfig& cfg) {
    BranchPoint pt;
    pt.param = get_param(state, p);
    pt.omega = state.omega;
    pt.mu0 = mu0_of(state);
    pt.residual = residual;
    pt.newton_iters = iters;
    if (cfg.on_accept)
        cfg.on_accept(state, pt);
    branch.points.push_back(std::move(pt));
}

} // namespace

Branch continue_in(ContinuationParam param, BvpState& state, double target,
                   const ContinuationConfig& cfg) {
    Branch branch;
    branch.param = param;
    if (param == ContinuationParam::Lambda && state.bc_kind != BcKind::Hybrid)
        throw InputError("lambda continuation requires hybrid boundary conditions");

    const double node_weight =
        1.0 / (double(state.nodes.rows()) * double(state.nodes.cols()));

    // make sure the starting point is converged, and record it
    auto rep = newton_solve(*problem_for(state), state, cfg.newton);
    record(branch, state, param, rep.residual_rms, rep.iterations, cfg);
    if (get_param(state, param) == target) {
        branch.stop_reason = "target";
        return branch;
    }

    double mu = get_param(state, param);
    const double sign = target > mu ? 1.0 : -1.0;
    double h = std::min(cfg.initial_step, std::abs(target - mu));
    BvpState prev = state;
    bool have_secant = false;
    double last_dmu = 0.0;

    for (int step = 0; step < cfg.max_steps; ++step) {
        mu = get_param(state, param);
        if (mu == target) {
            branch.stop_reason = "target";
            return branch;
        }
        const bool landing = std::abs(target - mu) <= h * 1.0000001;
        BvpState trial = state;
        bool ok = false;
        int iters = 0;
        double residual = 0.0;
        try {
            if (landing || !have_secant) {
                // natural step with (when available) secant extrapolation
                const double mu_next = landing ? target : mu + sign * h;
                if (have_secant) {
                    const double dmu = get_param(state, param) - get_param(prev, param);
                    if (std::abs(dmu) > 1e-14) {
                        const double f = (mu_next - mu) / dmu;
                        trial.nodes += f * (state.nodes - prev.nodes);
                        trial.omega += f * (state.omega - prev.omega);
                    }
                }
                set_param(trial, param, mu_next);
                auto r = newton_solve(*problem_for(trial), trial, cfg.newton);
                iters = r.iterations;
                residual = r.residual_rms;
                ok = true;
            } else {
                Direction dir;
                dir.nodes = state.nodes - prev.nodes;
                dir.omega = state.omega - prev.omega;
                dir.param = get_param(state, param) - get_param(prev, param);
                const double norm = std::sqrt(dot_scaled(dir, dir, node_weight));
                dir.nodes /= norm;
                dir.omega /= norm;
                dir.param /= norm;
                const double hs =
                    std::abs(dir.param) > 1e-8 ? h / std::abs(dir.param) : h;
                trial.nodes += hs * dir.nodes;
                trial.omega += hs * dir.omega;
                const double pred_mu = mu + hs * dir.param;
                set_param(trial, param, pred_mu);
                const BvpState pred = trial;
                iters = arclength_correct(trial, param, dir, pred, pred_mu, node_weight,
                                          cfg.newton);
                auto res = collocate(*problem_for(trial), trial);
                residual = res.norm() / std::sqrt(double(res.size()));
                ok = true;
            }
        } catch (const ConvergenceError&) {
            ok = false;
        } catch (const SingularSystemError&) {
            ok = false;
        }

        if (!ok) {
            h *= cfg.cut_factor;
            if (h < cfg.min_step)
                throw ContinuationStall("continuation in " + param_name(param) +
                                            " stalled: step underflow",
                                        std::move(branch));
            continue;
        }

        const double dmu = get_param(trial, param) - mu;
        if (have_secant && last_dmu != 0.0 && dmu * last_dmu < 0.0) {
            branch.fold_detected = true;
            branch.stop_reason = "fold";
            state = trial;
            record(branch, state, param, residual, iters, cfg);
            return branch;
        }
        last_dmu = dmu;
        prev = state;
        state = trial;
        have_secant = true;
        record(branch, state, param, residual, iters, cfg);
        if (cfg.verbose)
            std::cerr << "  " << param_name(param) << " = " << get_param(state, param)
                      << "  omega = " << state.omega << "  (" << iters << " its, h = " << h
                      << ")\n";

        if (iters <= cfg.grow_threshold)
            h = std::min(h * cfg.grow_factor, cfg.max_step);

        // remesh when the physical spacing drifts from the target
        if (param == ContinuationParam::R0 || param == ContinuationParam::R1) {
            const int want = desired_intervals(state, cfg);
            const int have = state.intervals();
            if (want > have || 2 * want < have) {
                BvpState fine = cfg.equidistribute
                                    ? remesh(state, equidistributed_mesh(state, want))
                                    : remesh(state, uniform_mesh(want));
                try {
                    newton_solve(*problem_for(fine), fine, cfg.newton);
                    state = std::move(fine);
                    prev = state;
                    have_secant = false; // unknown layout changed
                } catch (const ConvergenceError&) {
                    // keep the coarse mesh; try again after the next step
                }
            }
        }
    }
    branch.stop_reason = "max_steps";
    throw ContinuationStall("continuation in " + param_name(param) + " hit the step budget",
                            std::move(branch));
}

SpiralSolution homotopy_to_dirichlet(BvpState& state, const ContinuationConfig& cfg,
                                     Branch* branch_out) {
    if (state.bc_kind != BcKind::Hybrid) {
        if (state.bc_kind != BcKind::Neumann)
            throw InputError("homotopy_to_dirichlet expects Neumann or hybrid input");
        state.bc_kind = BcKind::Hybrid;
        state.lambda = 0.0;
    }
    Branch branch = continue_in(ContinuationParam::Lambda, state, 1.0, cfg);
    if (branch.fold_detected)
        throw ContinuationStall("fold encountered in the lambda homotopy", std::move(branch));
    state.bc_kind = BcKind::DirichletCore;
    state.lambda = 1.0;
    auto rep = newton_solve(*problem_for(state), state, cfg.newton);
    if (branch_out)
        *branch_out = std::move(branch);
    return make_solution(state, rep);
}

SpiralSolution close_core(BvpState& state, const ContinuationConfig& cfg, Branch* branch_out) {
    if (state.bc_kind != BcKind::DirichletCore)
        throw InputError("close_core requires Dirichlet-core boundary conditions");
    ContinuationConfig core_cfg = cfg;
    core_cfg.initial_step = std::min(cfg.initial_step, 0.25 * std::max(state.r0, 1e-3));
    Branch branch = continue_in(ContinuationParam::R0, state, 0.0, core_cfg);
    auto rep = newton_solve(*problem_for(state), state, cfg.newton);
    if (branch_out)
        *branch_out = std::move(branch);
    return make_solution(state, rep);
}

PipelineConfig PipelineConfig::defaults_for(const ModelSpec& spec) {
    PipelineConfig cfg;
    if (spec.species == 5) {
        cfg.n_modes = 80;
        cfg.radius_start = 8.0;
        cfg.omega_guess = 0.2;
        cfg.r1_max = 300.0;
        cfg.wavetrain.dt = 0.005;
        cfg.wavetrain.relax_time = 250.0;
    }
    return cfg;
}

PipelineResult run_pipeline(const ModelSpec& spec, const PipelineConfig& cfg) {
    PipelineResult result;
    auto stage = [](const std::string& name, auto&& fn) {
        try {
            fn();
        } catch (const ContinuationStall& e) {
            throw ContinuationStall("stage " + name + ": " + e.what(), e.branch);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("stage " + name + ": " + e.what());
        }
    };

    stage("wavetrain", [&] {
        result.wavetrain = relax_to_wavetrain(spec, cfg.radius_start, cfg.omega_guess,
                                              cfg.n_modes, cfg.wavetrain);
    });

    BvpState state;
    stage("thin-annulus", [&] {
        state = to_initial_bvp_state(result.wavetrain, cfg.epsilon, cfg.cont.min_intervals,
                                     cfg.degree);
        newton_solve(*problem_for(state), state, cfg.cont.newton);
    });

    stage("shrink-r0", [&] {
        ContinuationConfig c = cfg.cont;
        c.initial_step = 0.02;
        c.max_step = 0.5;
        result.branches.emplace_back("shrink-r0",
                                     continue_in(ContinuationParam::R0, state, cfg.r0_min, c));
    });

    stage("grow-r1", [&] {
        ContinuationConfig c = cfg.cont;
        c.initial_step = 0.1;
        c.max_step = 5.0;
        result.branches.emplace_back("grow-r1",
                                     continue_in(ContinuationParam::R1, state, cfg.r1_max, c));
    });

    if (cfg.to_full_disk) {
        stage("lambda-homotopy", [&] {
            ContinuationConfig c = cfg.cont;
            c.initial_step = 0.05;
            c.max_step = 0.25;
            Branch b;
            result.solution = homotopy_to_dirichlet(state, c, &b);
            result.branches.emplace_back("lambda-homotopy", std::move(b));
        });
        stage("close-core", [&] {
            ContinuationConfig c = cfg.cont;
            c.max_step = 0.01;
            Branch b;
            result.solution = close_core(state, c, &b);
            result.branches.emplace_back("close-core", std::move(b));
        });
    } else {
        auto rep = newton_solve(*problem_for(state), state, cfg.cont.newton);
        result.solution = make_solution(state, rep);
    }
    return result;
}

SweepTable sweep_grid(const SpiralSolution& anchor, ContinuationParam outer,
                      std::span<const double> outer_values, ContinuationParam inner,
                      double inner_lo, double inner_hi, double inner_step,
                      const ContinuationConfig& cfg) {
    if (inner_step <= 0.0)
        throw InputError("sweep: inner step must be positive");
    SweepTable table;
    for (double ov : outer_values) {
        BvpState row_state = anchor.state;
        bool row_ok = true;
        try {
            continue_in(outer, row_state, ov, cfg);
            continue_in(inner, row_state, inner_lo, cfg);
        } catch (const ContinuationStall&) {
            row_ok = false;
        }
        const double dir = inner_hi >= inner_lo ? 1.0 : -1.0;
        for (double target = inner_lo; dir * (target - inner_hi) <= 1e-9;
             target += dir * inner_step) {
            SweepPoint pt;
            pt.sigma = outer == ContinuationParam::Sigma ? ov : row_state.spec.sigma;
            pt.zeta = outer == ContinuationParam::Zeta ? ov : row_state.spec.zeta;
            if (!row_ok) {
                pt.stalled = true;
                (inner == ContinuationParam::Sigma ? pt.sigma : pt.zeta) = target;
                table.rows.push_back(pt);
                continue;
            }
            try {
                continue_in(inner, row_state, target, cfg);
                pt.sigma = row_state.spec.sigma;
                pt.zeta = row_state.spec.zeta;
                pt.omega = row_state.omega;
                pt.mu0 = mu0_of(row_state);
            } catch (const ContinuationStall&) {
                pt.stalled = true;
                (inner == ContinuationParam::Sigma ? pt.sigma : pt.zeta) = target;
            }
            table.rows.push_back(pt);
        }
    }
    return table;
}

SweepTable sweep_frequency_map(const SpiralSolution& anchor, std::span<const double> sigmas,
                               double zeta_lo, double zeta_hi, double zeta_step,
                               const ContinuationConfig& cfg) {
    return sweep_grid(anchor, ContinuationParam::Sigma, sigmas, ContinuationParam::Zeta,
                      zeta_lo, zeta_hi, zeta_step, cfg);
}

} // namespace spiral
