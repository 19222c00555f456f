#pragma once

#include "spiral/bvp.hpp"
#include "spiral/model.hpp"
#include "spiral/spectral.hpp"

namespace spiral {

/// Theta-periodic rotating-wave profile on the circle of radius R; the
/// starter solution for the thin-annulus BVP. gamma = R omega and L = 2 pi R
/// are the wavespeed and wavelength of the equivalent travelling wave.
struct WaveTrain {
    ModelSpec spec;
    double radius = 0.0;
    double omega = 0.0;
    SpectralProfile profile; // species 0
    double residual_rms = 0.0;

    double gamma() const { return radius * omega; }
    double wavelength() const { return 2.0 * std::numbers::pi * radius; }
};

struct WavetrainOptions {
    double dt = 0.02;            // IMEX step (diffusion/advection implicit)
    double relax_time = 400.0;
    double omega_gain = 0.2;     // relaxation rate of the mode-1 phase tracker
    double seed_amplitude = 0.5; // cos(theta) seeding relative to coexistence
    double noise_amplitude = 0.005;
    unsigned long seed = 1;
    double flat_tol = 1e-5;      // below this mode mass the state is uniform
    double newton_tol = 1e-12;
    int max_newton = 50;
};

/// Time-relax the symmetry-reduced field on the circle until steady in a
/// frame rotating at an adaptively estimated omega, then Newton-refine.
/// Throws NoWavetrainError if the relaxation lands on the uniform state,
/// UnsupportedError for cycles without a known travelling wave (Gamma1).
WaveTrain relax_to_wavetrain(const ModelSpec& spec, double radius, double omega_guess,
                             int n_modes, const WavetrainOptions& opts = {});

/// Newton solve of the thin-annulus algebraic system
///   f1_hat(k) - (k^2/R^2) a_hat(k) - i k omega a_hat(k) = 0,
/// pinned by Im(a_hat(1)) = 0, unknowns a_hat and omega.
WaveTrain refine_wavetrain(const ModelSpec& spec, double radius, const WaveTrain& guess,
                           const WavetrainOptions& opts = {});

/// Package a wavetrain as a thin-annulus BVP state: r0 = R - eps/2,
/// r1 = R + eps/2, radially constant coefficients, a_r = 0, Neumann BCs.
BvpState to_initial_bvp_state(const WaveTrain& wt, double epsilon, int mesh_intervals,
                              int degree = 4);

} // namespace spiral
