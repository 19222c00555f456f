#include "spiral/bvp.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "spiral/errors.hpp"

namespace spiral {

std::string bc_kind_name(BcKind kind) {
    switch (kind) {
        case BcKind::Neumann: return "neumann";
        case BcKind::Hybrid: return "hybrid";
        case BcKind::DirichletCore: return "dirichlet_core";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Collocation scheme
// ---------------------------------------------------------------------------

namespace {

std::vector<double> gauss_points_unit(int p) {
    // Roots of the Legendre polynomial P_p, mapped from (-1,1) to (0,1).
    std::vector<double> pts(p);
    for (int i = 0; i < p; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (p + 0.5));
        for (int it = 0; it < 100; ++it) {
            double pm2 = 1.0, pm1 = x;
            for (int k = 2; k <= p; ++k) {
                const double pk = ((2 * k - 1) * x * pm1 - (k - 1) * pm2) / k;
                pm2 = pm1;
                pm1 = pk;
            }
            const double dp = p * (x * pm1 - pm2) / (x * x - 1.0);
            const double dx = pm1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15)
                break;
        }
        pts[i] = 0.5 * (1.0 + x);
    }
    std::sort(pts.begin(), pts.end());
    return pts;
}

} // namespace

CollocationScheme CollocationScheme::make(int degree) {
    if (degree < 1 || degree > 8)
        throw ConfigError("collocation degree must be in [1, 8]");
    CollocationScheme s;
    s.degree = degree;
    s.gauss = gauss_points_unit(degree);
    s.basis.resize(degree, degree + 1);
    s.basis_deriv.resize(degree, degree + 1);
    std::vector<double> nodes(degree + 1);
    for (int i = 0; i <= degree; ++i)
        nodes[i] = static_cast<double>(i) / degree;
    for (int l = 0; l < degree; ++l) {
        const double x = s.gauss[l];
        for (int i = 0; i <= degree; ++i) {
            double val = 1.0, dsum = 0.0;
            for (int j = 0; j <= degree; ++j) {
                if (j == i)
                    continue;
                val *= (x - nodes[j]) / (nodes[i] - nodes[j]);
                dsum += 1.0 / (x - nodes[j]);
            }
            s.basis(l, i) = val;
            s.basis_deriv(l, i) = val * dsum;
        }
    }
    return s;
}

std::vector<double> uniform_mesh(int intervals) {
    if (intervals < 1)
        throw InputError("mesh needs at least one interval");
    std::vector<double> tau(intervals + 1);
    for (int j = 0; j <= intervals; ++j)
        tau[j] = static_cast<double>(j) / intervals;
    return tau;
}

// ---------------------------------------------------------------------------
// BvpState helpers
// ---------------------------------------------------------------------------

std::vector<double> BvpState::mesh_radii() const {
    std::vector<double> r(mesh_tau.size());
    for (size_t j = 0; j < mesh_tau.size(); ++j)
        r[j] = r_of_tau(mesh_tau[j]);
    return r;
}

Eigen::VectorXd BvpState::interpolate(double r) const {
    const double len = domain_length();
    double tau = len > 0 ? (r - r0) / len : 0.0;
    tau = std::clamp(tau, 0.0, 1.0);
    const int M = intervals();
    int j = int(std::upper_bound(mesh_tau.begin(), mesh_tau.end(), tau) - mesh_tau.begin()) - 1;
    j = std::clamp(j, 0, M - 1);
    const double h = mesh_tau[j + 1] - mesh_tau[j];
    const double local = (tau - mesh_tau[j]) / h;
    const int p = degree;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(nodes.rows());
    for (int i = 0; i <= p; ++i) {
        double w = 1.0;
        for (int jj = 0; jj <= p; ++jj) {
            if (jj == i)
                continue;
            w *= (local - double(jj) / p) / (double(i) / p - double(jj) / p);
        }
        y += w * nodes.col(p * j + i);
    }
    return y;
}

// ---------------------------------------------------------------------------
// Mode-wise right-hand side
// ---------------------------------------------------------------------------

std::pair<Complex, Complex> mode_rhs(double r, int k, Complex a, Complex a_r, Complex f1,
                                     double omega) {
    if (r <= 0.0)
        throw InputError("mode_rhs: radius must be positive (r=0 is boundary-only)");
    const Complex ikw(0.0, k * omega);
    const Complex arp = -f1 - a_r / r + (double(k) * k / (r * r)) * a + ikw * a;
    return {a_r, arp};
}

// ---------------------------------------------------------------------------
// Problems
// ---------------------------------------------------------------------------

namespace {

class ReducedProblem final : public RadialProblem {
  public:
    ReducedProblem(const ModelSpec& spec, int n_modes)
        : spec_(spec), plan_(SymmetryPlan::make(spec, n_modes)), kernel_(spec, plan_),
          n_modes_(n_modes) {}

    int state_dim() const override { return 2 * n_modes_; }
    int n_modes() const override { return n_modes_; }
    const ModelSpec& spec() const override { return spec_; }
    std::unique_ptr<RadialProblem> clone() const override {
        return std::make_unique<ReducedProblem>(spec_, n_modes_);
    }

    void rhs(double r, std::span<const double> y, double omega,
             std::span<double> out) const override {
        if (r <= 0.0)
            throw InputError("rhs: radius must be positive");
        const int N = n_modes_;
        const int h = N / 2;
        auto a = y.subspan(0, N);
        auto ar = y.subspan(N, N);
        f1_.resize(N);
        kernel_.eval(a, {f1_.data(), f1_.size()});
        for (int i = 0; i < N; ++i)
            out[i] = ar[i];
        auto arp = out.subspan(N, N);
        const double r2 = r * r;
        arp[0] = -f1_[0] - ar[0] / r;
        for (int k = 1; k < h; ++k) {
            const int re = 2 * k - 1, im = 2 * k;
            const double k2r2 = double(k) * k / r2;
            arp[re] = -f1_[re] - ar[re] / r + k2r2 * a[re] - k * omega * a[im];
            arp[im] = -f1_[im] - ar[im] / r + k2r2 * a[im] + k * omega * a[re];
        }
        arp[N - 1] = -f1_[N - 1] - ar[N - 1] / r + double(h) * h / r2 * a[N - 1];
    }

    void rhs_jacobian(double r, std::span<const double> y, double omega, Eigen::MatrixXd& dy,
                      Eigen::VectorXd& domega) const override {
        const int N = n_modes_;
        const int h = N / 2;
        const int n = 2 * N;
        auto a = y.subspan(0, N);
        f1_.resize(N);
        kernel_.eval_with_jacobian(a, {f1_.data(), f1_.size()}, jac_);
        dy.setZero(n, n);
        dy.topRightCorner(N, N).setIdentity();
        dy.bottomLeftCorner(N, N) = -jac_;
        const double r2 = r * r;
        for (int k = 1; k < h; ++k) {
            const int re = 2 * k - 1, im = 2 * k;
            const double k2r2 = double(k) * k / r2;
            dy(N + re, re) += k2r2;
            dy(N + im, im) += k2r2;
            dy(N + re, im) += -k * omega;
            dy(N + im, re) += k * omega;
        }
        dy(2 * N - 1, N - 1) += double(h) * h / r2;
        dy.bottomRightCorner(N, N).diagonal().setConstant(-1.0 / r);
        domega.setZero(n);
        auto aseg = y.subspan(0, N);
        for (int k = 1; k < h; ++k) {
            domega[N + 2 * k - 1] = -k * aseg[2 * k];
            domega[N + 2 * k] = k * aseg[2 * k - 1];
        }
    }

  private:
    ModelSpec spec_;
    SymmetryPlan plan_;
    NonlinearKernel kernel_;
    int n_modes_;
    mutable std::vector<double> f1_;
    mutable Eigen::MatrixXd jac_;
};

class FullProblem final : public RadialProblem {
  public:
    FullProblem(const ModelSpec& spec, int n_modes) : spec_(spec), n_modes_(n_modes) {
        if (n_modes % (2 * spec.species) != 0)
            throw ConfigError("mode count N must be an integer multiple of 2m");
    }

    int state_dim() const override { return 2 * spec_.species * n_modes_; }
    int n_modes() const override { return n_modes_; }
    const ModelSpec& spec() const override { return spec_; }
    std::unique_ptr<RadialProblem> clone() const override {
        return std::make_unique<FullProblem>(spec_, n_modes_);
    }

    void rhs(double r, std::span<const double> y, double omega,
             std::span<double> out) const override {
        if (r <= 0.0)
            throw InputError("rhs: radius must be positive");
        const int N = n_modes_;
        const int m = spec_.species;
        const int h = N / 2;
        // species samples
        std::vector<std::vector<double>> u(m);
        for (int s = 0; s < m; ++s)
            u[s] = inverse_dft(unpack_profile(N, y.subspan(s * N, N)));
        // pointwise kinetics, per species spectrum
        Eigen::VectorXd point(m);
        std::vector<std::vector<double>> f(m, std::vector<double>(N));
        for (int i = 0; i < N; ++i) {
            for (int s = 0; s < m; ++s)
                point[s] = u[s][i];
            const Eigen::VectorXd fv = kinetics(point, spec_);
            for (int s = 0; s < m; ++s)
                f[s][i] = fv[s];
        }
        const int NF = m * N;
        for (int s = 0; s < m; ++s) {
            std::vector<double> fp(N);
            pack_profile(forward_dft(f[s]), fp);
            auto a = y.subspan(s * N, N);
            auto ar = y.subspan(NF + s * N, N);
            for (int i = 0; i < N; ++i)
                out[s * N + i] = ar[i];
            auto arp = out.subspan(NF + s * N, N);
            const double r2 = r * r;
            arp[0] = -fp[0] - ar[0] / r;
            for (int k = 1; k < h; ++k) {
                const int re = 2 * k - 1, im = 2 * k;
                const double k2r2 = double(k) * k / r2;
                arp[re] = -fp[re] - ar[re] / r + k2r2 * a[re] - k * omega * a[im];
                arp[im] = -fp[im] - ar[im] / r + k2r2 * a[im] + k * omega * a[re];
            }
            arp[N - 1] = -fp[N - 1] - ar[N - 1] / r + double(h) * h / r2 * a[N - 1];
        }
    }

    void rhs_jacobian(double r, std::span<const double> y, double omega, Eigen::MatrixXd& dy,
                      Eigen::VectorXd& domega) const override {
        const int N = n_modes_;
        const int m = spec_.species;
        const int h = N / 2;
        const int NF = m * N;
        const int n = 2 * NF;
        std::vector<std::vector<double>> u(m);
        for (int s = 0; s < m; ++s)
            u[s] = inverse_dft(unpack_profile(N, y.subspan(s * N, N)));
        // pointwise kinetics Jacobian fields w_st(theta)
        std::vector<std::vector<double>> w(m * m, std::vector<double>(N));
        Eigen::VectorXd point(m);
        for (int i = 0; i < N; ++i) {
            for (int s = 0; s < m; ++s)
                point[s] = u[s][i];
            const Eigen::MatrixXd jk = kinetics_jacobian(point, spec_);
            for (int s = 0; s < m; ++s)
                for (int t = 0; t < m; ++t)
                    w[s * m + t][i] = jk(s, t);
        }
        dy.setZero(n, n);
        dy.topRightCorner(NF, NF).setIdentity();
        const double r2 = r * r;
        for (int s = 0; s < m; ++s) {
            for (int t = 0; t < m; ++t) {
                const Eigen::MatrixXd blk = packed_product_jacobian(forward_dft(w[s * m + t]));
                dy.block(NF + s * N, t * N, N, N) = -blk;
            }
            for (int k = 1; k < h; ++k) {
                const int re = 2 * k - 1, im = 2 * k;
                const double k2r2 = double(k) * k / r2;
                dy(NF + s * N + re, s * N + re) += k2r2;
                dy(NF + s * N + im, s * N + im) += k2r2;
                dy(NF + s * N + re, s * N + im) += -k * omega;
                dy(NF + s * N + im, s * N + re) += k * omega;
            }
            dy(NF + s * N + N - 1, s * N + N - 1) += double(h) * h / r2;
            dy.block(NF + s * N, NF + s * N, N, N).diagonal().setConstant(-1.0 / r);
        }
        domega.setZero(n);
        for (int s = 0; s < m; ++s) {
            auto a = y.subspan(s * N, N);
            for (int k = 1; k < h; ++k) {
                domega[NF + s * N + 2 * k - 1] = -k * a[2 * k];
                domega[NF + s * N + 2 * k] = k * a[2 * k - 1];
            }
        }
    }

  private:
    ModelSpec spec_;
    int n_modes_;
};

} // namespace

std::unique_ptr<RadialProblem> make_reduced_problem(const ModelSpec& spec, int n_modes) {
    return std::make_unique<ReducedProblem>(spec, n_modes);
}

std::unique_ptr<RadialProblem> make_full_problem(const ModelSpec& spec, int n_modes) {
    return std::make_unique<FullProblem>(spec, n_modes);
}

// ---------------------------------------------------------------------------
// Boundary conditions (per field; identical structure for reduced and full)
// ---------------------------------------------------------------------------

void RadialProblem::left_bc(std::span<const double> y0, BcKind kind, double lambda,
                            std::span<double> res, Eigen::MatrixXd* jac) const {
    const int n = state_dim();
    const int NF = n / 2;
    const int N = n_modes();
    const int fields = NF / N;
    if (jac)
        jac->setZero(NF, n);
    for (int f = 0; f < fields; ++f) {
        for (int i = 0; i < N; ++i) {
            const int row = f * N + i;
            const int a_dof = f * N + i;
            const int ar_dof = NF + f * N + i;
            double ca = 0.0, car = 0.0;
            if (kind == BcKind::Neumann || i == 0) {
                car = 1.0;
            } else if (kind == BcKind::Hybrid) {
                car = 1.0 - lambda;
                ca = lambda;
            } else { // DirichletCore, k > 0
                ca = 1.0;
            }
            res[row] = ca * y0[a_dof] + car * y0[ar_dof];
            if (jac) {
                (*jac)(row, a_dof) = ca;
                (*jac)(row, ar_dof) = car;
            }
        }
    }
}

void RadialProblem::right_bc(std::span<const double> y1, std::span<double> res,
                             Eigen::MatrixXd* jac) const {
    const int n = state_dim();
    const int NF = n / 2;
    if (jac)
        jac->setZero(NF + 1, n);
    for (int i = 0; i < NF; ++i) {
        res[i] = y1[NF + i];
        if (jac)
            (*jac)(i, NF + i) = 1.0;
    }
    // phase pinning Im(a_hat(r1, 1)) = 0; packed index 2 of field 0
    res[NF] = y1[2];
    if (jac)
        (*jac)(NF, 2) = 1.0;
}

Eigen::VectorXd boundary_residuals(const RadialProblem& problem, const BvpState& state) {
    const int n = problem.state_dim();
    const int NF = n / 2;
    Eigen::VectorXd res(n + 1);
    const Eigen::VectorXd y0 = state.nodes.col(0);
    const Eigen::VectorXd y1 = state.nodes.col(state.nodes.cols() - 1);
    problem.left_bc({y0.data(), size_t(n)}, state.bc_kind, state.lambda,
                    {res.data(), size_t(NF)}, nullptr);
    problem.right_bc({y1.data(), size_t(n)}, {res.data() + NF, size_t(NF + 1)}, nullptr);
    const double m1 = std::hypot(y1[1], y1[2]);
    if (m1 < 1e-12)
        std::cerr << "warning: phase pinning is singular (mode-1 amplitude ~ 0 at r1)\n";
    return res;
}

// ---------------------------------------------------------------------------
// Collocation residual and Jacobian assembly
// ---------------------------------------------------------------------------

namespace {

struct Layout {
    int n, p, M, nl, nr, rows;
};

Layout layout_of(const RadialProblem& problem, const BvpState& state) {
    Layout L;
    L.n = problem.state_dim();
    L.p = state.degree;
    L.M = state.intervals();
    L.nl = problem.left_bc_count();
    L.nr = problem.right_bc_count();
    L.rows = L.nl + L.nr + L.n * L.p * L.M;
    return L;
}

void check_state(const RadialProblem& problem, const BvpState& state) {
    if (state.nodes.rows() != problem.state_dim())
        throw InputError("state dimension does not match problem");
    if (state.nodes.cols() != state.node_count())
        throw InputError("node count does not match mesh/degree");
    if (state.r1 <= state.r0)
        throw InputError("domain must satisfy r0 < r1");
    for (int j = 0; j < state.intervals(); ++j)
        if (!(state.mesh_tau[j + 1] > state.mesh_tau[j]))
            throw InputError("mesh nodes must be strictly increasing");
}

// Residual of interval j at its Gauss points; y and f are scratch.
void interval_residual(const RadialProblem& problem, const BvpState& state,
                       const CollocationScheme& cs, int j, Eigen::VectorXd& out) {
    const int n = problem.state_dim();
    const int p = state.degree;
    const double htau = state.mesh_tau[j + 1] - state.mesh_tau[j];
    const double len = state.domain_length();
    Eigen::VectorXd y(n), dydt(n);
    std::vector<double> f(n);
    out.resize(p * n);
    for (int l = 0; l < p; ++l) {
        y.setZero();
        dydt.setZero();
        for (int i = 0; i <= p; ++i) {
            y += cs.basis(l, i) * state.nodes.col(p * j + i);
            dydt += (cs.basis_deriv(l, i) / htau) * state.nodes.col(p * j + i);
        }
        const double tau = state.mesh_tau[j] + cs.gauss[l] * htau;
        const double r = state.r_of_tau(tau);
        problem.rhs(r, {y.data(), size_t(n)}, state.omega, f);
        for (int i = 0; i < n; ++i)
            out[l * n + i] = dydt[i] - len * f[i];
    }
}

} // namespace

Eigen::VectorXd collocate(const RadialProblem& problem, const BvpState& state) {
    check_state(problem, state);
    const Layout L = layout_of(problem, state);
    const CollocationScheme cs = CollocationScheme::make(state.degree);
    Eigen::VectorXd res(L.rows);
    const Eigen::VectorXd y0 = state.nodes.col(0);
    const Eigen::VectorXd y1 = state.nodes.col(state.nodes.cols() - 1);
    problem.left_bc({y0.data(), size_t(L.n)}, state.bc_kind, state.lambda,
                    {res.data(), size_t(L.nl)}, nullptr);

    std::vector<std::unique_ptr<RadialProblem>> clones;
    int nthreads = 1;
#ifdef _OPENMP
    nthreads = omp_get_max_threads();
#endif
    for (int t = 0; t < nthreads; ++t)
        clones.push_back(problem.clone());
#pragma omp parallel for schedule(dynamic)
    for (int j = 0; j < L.M; ++j) {
        int tid = 0;
#ifdef _OPENMP
        tid = omp_get_thread_num();
#endif
        Eigen::VectorXd rj;
        interval_residual(*clones[tid], state, cs, j, rj);
        res.segment(L.nl + j * L.p * L.n, L.p * L.n) = rj;
    }
    problem.right_bc({y1.data(), size_t(L.n)},
                     {res.data() + L.nl + L.M * L.p * L.n, size_t(L.nr)}, nullptr);
    return res;
}

namespace {

// Assemble the Newton matrix (ABD + omega border) and residual together.
void assemble(const RadialProblem& problem, const BvpState& state, const CollocationScheme& cs,
              AbdSystem& sys, Eigen::VectorXd& res) {
    const Layout L = layout_of(problem, state);
    sys.n = L.n;
    sys.p = L.p;
    sys.intervals = L.M;
    sys.blocks.assign(L.M, Eigen::MatrixXd());
    sys.border.assign(L.M, Eigen::VectorXd());
    res.resize(L.rows);

    const Eigen::VectorXd y0 = state.nodes.col(0);
    const Eigen::VectorXd y1 = state.nodes.col(state.nodes.cols() - 1);
    Eigen::MatrixXd jl, jr;
    problem.left_bc({y0.data(), size_t(L.n)}, state.bc_kind, state.lambda,
                    {res.data(), size_t(L.nl)}, &jl);
    problem.right_bc({y1.data(), size_t(L.n)},
                     {res.data() + L.nl + L.M * L.p * L.n, size_t(L.nr)}, &jr);
    sys.left_bc = jl;
    sys.left_border = Eigen::VectorXd::Zero(L.nl);
    sys.right_bc = jr;
    sys.right_border = Eigen::VectorXd::Zero(L.nr);

    std::vector<std::unique_ptr<RadialProblem>> clones;
    int nthreads = 1;
#ifdef _OPENMP
    nthreads = omp_get_max_threads();
#endif
    for (int t = 0; t < nthreads; ++t)
        clones.push_back(problem.clone());

    const double len = state.domain_length();
#pragma omp parallel for schedule(dynamic)
    for (int j = 0; j < L.M; ++j) {
        int tid = 0;
#ifdef _OPENMP
        tid = omp_get_thread_num();
#endif
        const RadialProblem& prob = *clones[tid];
        const int n = L.n, p = L.p;
        const double htau = state.mesh_tau[j + 1] - state.mesh_tau[j];
        Eigen::MatrixXd W = Eigen::MatrixXd::Zero(p * n, (p + 1) * n);
        Eigen::VectorXd border = Eigen::VectorXd::Zero(p * n);
        Eigen::VectorXd y(n), dydt(n), dw(n);
        Eigen::MatrixXd dfdy;
        std::vector<double> f(n);
        for (int l = 0; l < p; ++l) {
            y.setZero();
            dydt.setZero();
            for (int i = 0; i <= p; ++i) {
                y += cs.basis(l, i) * state.nodes.col(p * j + i);
                dydt += (cs.basis_deriv(l, i) / htau) * state.nodes.col(p * j + i);
            }
            const double tau = state.mesh_tau[j] + cs.gauss[l] * htau;
            const double r = state.r_of_tau(tau);
            prob.rhs(r, {y.data(), size_t(n)}, state.omega, f);
            prob.rhs_jacobian(r, {y.data(), size_t(n)}, state.omega, dfdy, dw);
            for (int i = 0; i < n; ++i)
                res[L.nl + j * p * n + l * n + i] = dydt[i] - len * f[i];
            for (int i = 0; i <= p; ++i) {
                auto blk = W.block(l * n, i * n, n, n);
                blk = (-len * cs.basis(l, i)) * dfdy;
                blk.diagonal().array() += cs.basis_deriv(l, i) / htau;
            }
            border.segment(l * n, n) = -len * dw;
        }
        sys.blocks[j] = std::move(W);
        sys.border[j] = std::move(border);
    }
}

double rms(const Eigen::VectorXd& v) {
    return v.size() ? v.norm() / std::sqrt(double(v.size())) : 0.0;
}

} // namespace

void assemble_newton_system(const RadialProblem& problem, const BvpState& state,
                            AbdSystem& sys, Eigen::VectorXd& residual) {
    check_state(problem, state);
    const CollocationScheme cs = CollocationScheme::make(state.degree);
    assemble(problem, state, cs, sys, residual);
}

NewtonReport newton_solve(const RadialProblem& problem, BvpState& state,
                          const NewtonOptions& opts) {
    check_state(problem, state);
    const CollocationScheme cs = CollocationScheme::make(state.degree);
    NewtonReport report;
    Eigen::VectorXd res = collocate(problem, state);
    double res_rms = rms(res);
    if (!std::isfinite(res_rms))
        throw ConvergenceError("newton_solve: initial residual is not finite", res_rms, 0);
    report.residual_rms = res_rms;
    if (res_rms < opts.tol) {
        report.step_rms = 0.0;
    } else {
        for (int iter = 1; iter <= opts.max_iterations; ++iter) {
            AbdSystem sys;
            Eigen::VectorXd r_asm;
            assemble(problem, state, cs, sys, r_asm);
            const Eigen::MatrixXd delta = abd_solve(sys, -r_asm);
            const int ncols = int(state.nodes.cols());
            const int n = int(state.nodes.rows());
            Eigen::MatrixXd node_step(n, ncols);
            for (int c = 0; c < ncols; ++c)
                node_step.col(c) = delta.col(0).segment(c * n, n);
            const double omega_step = delta(delta.rows() - 1, 0);
            const double step_rms = delta.norm() / std::sqrt(double(delta.rows()));

            double scale = 1.0;
            bool accepted = false;
            const Eigen::MatrixXd saved_nodes = state.nodes;
            const double saved_omega = state.omega;
            for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
                state.nodes = saved_nodes + scale * node_step;
                state.omega = saved_omega + scale * omega_step;
                Eigen::VectorXd res_new = collocate(problem, state);
                const double new_rms = rms(res_new);
                if (std::isfinite(new_rms) && new_rms <= (1.0 - 1e-4 * scale) * res_rms) {
                    res_rms = new_rms;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if (!accepted) {
                state.nodes = saved_nodes;
                state.omega = saved_omega;
                throw ConvergenceError("newton_solve: residual did not decrease after damping",
                                       res_rms, iter);
            }
            report.iterations = iter;
            report.residual_rms = res_rms;
            report.step_rms = scale * step_rms;
            if (opts.verbose)
                std::cerr << "  newton iter " << iter << " rms " << res_rms << " step "
                          << report.step_rms << " omega " << state.omega << "\n";
            if (res_rms < opts.tol && report.step_rms < opts.tol)
                break;
            if (iter == opts.max_iterations)
                throw ConvergenceError("newton_solve: no convergence within iteration budget",
                                       res_rms, iter);
        }
    }
    const auto y1 = state.nodes.col(state.nodes.cols() - 1);
    report.pinning_singular = std::hypot(y1[1], y1[2]) < 1e-12;
    return report;
}

SpiralSolution make_solution(BvpState state, const NewtonReport& report) {
    SpiralSolution sol;
    sol.diagnostics.residual_rms = report.residual_rms;
    sol.diagnostics.newton_iterations = report.iterations;
    sol.diagnostics.mesh_intervals = state.intervals();
    sol.diagnostics.pinning_singular = report.pinning_singular;
    if (state.bc_kind == BcKind::DirichletCore && state.r0 == 0.0)
        sol.mu0 = state.nodes(0, 0);
    sol.state = std::move(state);
    return sol;
}

std::vector<Eigen::MatrixXd> reconstruct(const BvpState& state, std::span<const double> radii) {
    const int N = state.n_modes;
    const int m = state.spec.species;
    const SymmetryPlan plan = SymmetryPlan::make(state.spec, N);
    std::vector<Eigen::MatrixXd> out;
    for (double r : radii) {
        if (r < state.r0 - 1e-12 || r > state.r1 + 1e-12)
            throw InputError("reconstruct: radius outside [r0, r1]");
        const Eigen::VectorXd y = state.interpolate(r);
        Eigen::MatrixXd fields(m, N);
        if (state.fields == 1) {
            const auto prof = unpack_profile(N, {y.data(), size_t(N)});
            const auto a = inverse_dft(prof);
            for (int s = 0; s < m; ++s) {
                const int sh = ((plan.sample_shift[s]) % N + N) % N;
                for (int i = 0; i < N; ++i)
                    fields(s, i) = a[(i + sh) % N];
            }
        } else {
            for (int s = 0; s < m; ++s) {
                const auto prof = unpack_profile(N, {y.data() + s * N, size_t(N)});
                const auto u = inverse_dft(prof);
                for (int i = 0; i < N; ++i)
                    fields(s, i) = u[i];
            }
        }
        out.push_back(std::move(fields));
    }
    return out;
}

BvpState remesh(const BvpState& state, const std::vector<double>& new_mesh_tau) {
    BvpState out = state;
    out.mesh_tau = new_mesh_tau;
    const int p = state.degree;
    const int M = static_cast<int>(new_mesh_tau.size()) - 1;
    out.nodes.resize(state.nodes.rows(), p * M + 1);
    for (int j = 0; j < M; ++j) {
        const double h = new_mesh_tau[j + 1] - new_mesh_tau[j];
        for (int i = (j == 0 ? 0 : 1); i <= p; ++i) {
            const double tau = new_mesh_tau[j] + h * double(i) / p;
            out.nodes.col(p * j + i) = state.interpolate(state.r_of_tau(tau));
        }
    }
    return out;
}

} // namespace spiral
