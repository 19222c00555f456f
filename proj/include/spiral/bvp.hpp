#pragma once

#include <complex>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spiral/abd.hpp"
#include "spiral/model.hpp"
#include "spiral/spectral.hpp"

namespace spiral {

enum class BcKind { Neumann, Hybrid, DirichletCore };

std::string bc_kind_name(BcKind kind);

/// Values and derivatives of the degree-p Lagrange basis (equally spaced
/// nodes on [0,1]) at the p Gauss collocation points.
struct CollocationScheme {
    int degree = 4;
    std::vector<double> gauss;          // p points in (0,1)
    Eigen::MatrixXd basis;              // p x (p+1): L_i(g_l)
    Eigen::MatrixXd basis_deriv;        // p x (p+1): L_i'(g_l)
    static CollocationScheme make(int degree);
};

/// Discrete state of the radial two-point BVP in Fourier space.
///
/// The mesh is stored normalized (tau in [0,1], r = r0 + tau (r1-r0)) so the
/// same unknown layout survives continuation in r0 and r1. Node columns hold
/// the packed coefficients [a-part (fields*N), a_r-part (fields*N)];
/// fields == 1 for the symmetry-reduced system, m for the full system.
struct BvpState {
    ModelSpec spec;
    int n_modes = 60; // N
    int degree = 4;   // collocation degree p
    int fields = 1;   // 1 (reduced) or m (full system)
    std::vector<double> mesh_tau; // M+1 nodes, 0 = first, 1 = last
    double r0 = 0.0, r1 = 0.0;
    double omega = 0.0;
    double lambda = 0.0; // boundary homotopy, 0 = Neumann, 1 = Dirichlet core
    BcKind bc_kind = BcKind::Neumann;
    Eigen::MatrixXd nodes; // (2*fields*N) x (p*M + 1)

    int intervals() const { return static_cast<int>(mesh_tau.size()) - 1; }
    int state_dim() const { return 2 * fields * n_modes; }
    int node_count() const { return degree * intervals() + 1; }
    double domain_length() const { return r1 - r0; }
    double r_of_tau(double tau) const { return r0 + tau * (r1 - r0); }

    /// Physical radii of the mesh nodes t_1..t_M.
    std::vector<double> mesh_radii() const;
    /// Packed solution interpolated at radius r (collocation polynomial).
    Eigen::VectorXd interpolate(double r) const;
};

std::vector<double> uniform_mesh(int intervals);

/// Right-hand side of the first-order system for one Fourier mode:
///   a' = a_r,  a_r' = -f1 - a_r / r + (k^2/r^2) a + i k omega a.
/// Throws InputError for r <= 0 (collocation points are strictly interior).
std::pair<Complex, Complex> mode_rhs(double r, int k, Complex a, Complex a_r, Complex f1,
                                     double omega);

/// Problem backend: reduced (single symmetry-reduced field) or full
/// (all m species, no symmetry reduction; oracle for equivalence tests).
class RadialProblem {
  public:
    virtual ~RadialProblem() = default;
    virtual int state_dim() const = 0;
    virtual int n_modes() const = 0;
    virtual const ModelSpec& spec() const = 0;
    /// dy/dr at radius r (physical derivative).
    virtual void rhs(double r, std::span<const double> y, double omega,
                     std::span<double> out) const = 0;
    /// Jacobians of rhs wrt y and omega.
    virtual void rhs_jacobian(double r, std::span<const double> y, double omega,
                              Eigen::MatrixXd& dy, Eigen::VectorXd& domega) const = 0;
    virtual std::unique_ptr<RadialProblem> clone() const = 0;

    // boundary rows; left depends on (bc_kind, lambda)
    int left_bc_count() const { return state_dim() / 2; }
    int right_bc_count() const { return state_dim() / 2 + 1; }
    void left_bc(std::span<const double> y0, BcKind kind, double lambda, std::span<double> res,
                 Eigen::MatrixXd* jac) const;
    void right_bc(std::span<const double> y1, std::span<double> res, Eigen::MatrixXd* jac) const;
};

std::unique_ptr<RadialProblem> make_reduced_problem(const ModelSpec& spec, int n_modes);
std::unique_ptr<RadialProblem> make_full_problem(const ModelSpec& spec, int n_modes);

/// Residuals of the boundary and pinning conditions only
/// (left rows, then right rows including the pinning row last).
Eigen::VectorXd boundary_residuals(const RadialProblem& problem, const BvpState& state);

/// Full collocation residual [left BC; interval equations; right BC+pinning].
Eigen::VectorXd collocate(const RadialProblem& problem, const BvpState& state);

struct NewtonOptions {
    double tol = 1e-10;        // RMS residual and RMS step
    int max_iterations = 50;
    int max_backtracks = 5;
    bool verbose = false;
};

struct NewtonReport {
    int iterations = 0;
    double residual_rms = 0.0;
    double step_rms = 0.0;
    bool pinning_singular = false; // mode-1 amplitude at r1 ~ 0, phase undefined
};

/// Damped Newton on the collocation system with omega as the bordered
/// unknown. Throws ConvergenceError on divergence, SingularSystemError on a
/// singular Jacobian.
NewtonReport newton_solve(const RadialProblem& problem, BvpState& state,
                          const NewtonOptions& opts = {});

/// Newton matrix (ABD blocks + omega border) and residual for one state;
/// building block for the continuation corrector.
void assemble_newton_system(const RadialProblem& problem, const BvpState& state,
                            AbdSystem& sys, Eigen::VectorXd& residual);

struct SolveDiagnostics {
    double residual_rms = 0.0;
    int newton_iterations = 0;
    int mesh_intervals = 0;
    bool pinning_singular = false;
};

/// A converged state plus the core value (defined on the full disk only).
struct SpiralSolution {
    BvpState state;
    std::optional<double> mu0;
    SolveDiagnostics diagnostics;
};

SpiralSolution make_solution(BvpState state, const NewtonReport& report);

/// Physical-space reconstruction: species values on the theta grid at the
/// requested radii. result[i] is an m x N matrix (species x theta sample).
std::vector<Eigen::MatrixXd> reconstruct(const BvpState& state, std::span<const double> radii);

/// Interpolate a state onto a new normalized mesh (same degree and layout).
BvpState remesh(const BvpState& state, const std::vector<double>& new_mesh_tau);

} // namespace spiral
