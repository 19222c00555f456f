#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spiral/bvp.hpp"
#include "spiral/wavetrain.hpp"

namespace spiral {

enum class ContinuationParam { R0, R1, Lambda, Sigma, Zeta };

std::string param_name(ContinuationParam param);

struct ContinuationConfig {
    double initial_step = 0.05; // in the continued parameter
    double min_step = 1e-8;
    double max_step = 0.5;
    double grow_factor = 1.3; // applied after quick Newton convergence
    double cut_factor = 0.5;
    int grow_threshold = 3; // iterations counting as "quick"
    int max_steps = 5000;
    NewtonOptions newton;
    // remeshing while the domain grows/shrinks
    double target_mesh_spacing = 0.5;
    int min_intervals = 4;
    int max_intervals = 400;
    bool equidistribute = false; // arclength-based node placement on remesh
    bool verbose = false;
    // called after every accepted point (used for persistence and tests)
    std::function<void(const BvpState&, struct BranchPoint&)> on_accept;
};

struct BranchPoint {
    double param = 0.0;
    double omega = 0.0;
    std::optional<double> mu0;
    double residual = 0.0;
    int newton_iters = 0;
    std::string snapshot_path;
};

/// Ordered record of accepted continuation points for one parameter.
struct Branch {
    ContinuationParam param = ContinuationParam::R1;
    std::vector<BranchPoint> points;
    bool fold_detected = false;
    std::string stop_reason;
};

/// Step size underflow; carries the branch computed so far.
struct ContinuationStall : std::runtime_error {
    ContinuationStall(const std::string& msg, Branch branch)
        : std::runtime_error(msg), branch(std::move(branch)) {}
    Branch branch;
};

/// Pseudo-arclength continuation of `state` in one parameter until `target`
/// (landed exactly), a fold, or step underflow. omega is always free; every
/// accepted point satisfies the Newton tolerance. The state is advanced to
/// the last accepted point.
Branch continue_in(ContinuationParam param, BvpState& state, double target,
                   const ContinuationConfig& config);

/// Continue the boundary homotopy lambda: 0 -> 1 and switch the state to
/// Dirichlet-core boundary conditions.
SpiralSolution homotopy_to_dirichlet(BvpState& state, const ContinuationConfig& config,
                                     Branch* branch_out = nullptr);

/// Continue r0 to exactly zero under Dirichlet-core conditions.
SpiralSolution close_core(BvpState& state, const ContinuationConfig& config,
                          Branch* branch_out = nullptr);

struct PipelineConfig {
    int n_modes = 60;
    int degree = 4;
    double radius_start = 5.0;
    double omega_guess = 0.3;
    double epsilon = 0.002;
    double r0_min = 0.01;
    double r1_max = 110.0;
    bool to_full_disk = true;
    WavetrainOptions wavetrain;
    ContinuationConfig cont;
    static PipelineConfig defaults_for(const ModelSpec& spec);
};

struct PipelineResult {
    WaveTrain wavetrain;
    SpiralSolution solution;
    std::vector<std::pair<std::string, Branch>> branches; // stage name, branch
};

/// Full staged computation: wavetrain start, thin annulus, shrink r0, grow
/// r1, boundary homotopy, close core. Stage failures are rethrown with the
/// stage label prefixed.
PipelineResult run_pipeline(const ModelSpec& spec, const PipelineConfig& config);

struct SweepPoint {
    double sigma = 0.0;
    double zeta = 0.0;
    double omega = 0.0;
    std::optional<double> mu0;
    bool stalled = false;
};

struct SweepTable {
    std::vector<SweepPoint> rows;
};

/// Continue the anchor solution across a grid of (outer, inner) parameter
/// values, landing on each grid point and recording (sigma, zeta, omega,
/// mu0). Stalled grid points are recorded and the sweep moves on.
SweepTable sweep_grid(const SpiralSolution& anchor, ContinuationParam outer,
                      std::span<const double> outer_values, ContinuationParam inner,
                      double inner_lo, double inner_hi, double inner_step,
                      const ContinuationConfig& config);

/// Fig.-6-style frequency map: rows of fixed sigma, sweeping zeta.
SweepTable sweep_frequency_map(const SpiralSolution& anchor, std::span<const double> sigmas,
                               double zeta_lo, double zeta_hi, double zeta_step,
                               const ContinuationConfig& config);

} // namespace spiral
