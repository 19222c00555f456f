#include "spiral/wavetrain.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "spiral/errors.hpp"

namespace spiral {

namespace {

// Packed residual of the thin-annulus system plus the pinning row:
//   G_k = f1_hat(k) - (k^2/R^2) a_hat(k) - i k omega a_hat(k),  G_pin = Im a_hat(1).
void wavetrain_residual(const NonlinearKernel& kernel, double radius,
                        std::span<const double> a, double omega, Eigen::VectorXd& res) {
    const int N = kernel.packed_size();
    const int h = N / 2;
    std::vector<double> f1(N);
    kernel.eval(a, f1);
    res.resize(N + 1);
    const double R2 = radius * radius;
    res[0] = f1[0];
    for (int k = 1; k < h; ++k) {
        const int re = 2 * k - 1, im = 2 * k;
        const double k2 = double(k) * k / R2;
        res[re] = f1[re] - k2 * a[re] + k * omega * a[im];
        res[im] = f1[im] - k2 * a[im] - k * omega * a[re];
    }
    res[N - 1] = f1[N - 1] - double(h) * h / R2 * a[N - 1];
    res[N] = a[2]; // Im a_hat(1)
}

double mode_mass(std::span<const double> a) {
    double s = 0.0;
    for (size_t i = 1; i < a.size(); ++i)
        s += a[i] * a[i];
    return std::sqrt(s);
}

} // namespace

WaveTrain relax_to_wavetrain(const ModelSpec& spec, double radius, double omega_guess,
                             int n_modes, const WavetrainOptions& opts) {
    if (!spec.spiral_supported())
        throw UnsupportedError("cycle " + cycle_name(spec.cycle) +
                               " has no known travelling wave; spiral construction unsupported");
    if (radius <= 0.0)
        throw InputError("relax_to_wavetrain: radius must be positive");
    const SymmetryPlan plan = SymmetryPlan::make(spec, n_modes);
    const NonlinearKernel kernel(spec, plan);
    const int N = n_modes;
    const int h = N / 2;

    // Coexistence plus a mode-1 bump plus small positive noise; stays inside
    // the positive cone where the kinetics is well behaved.
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double e = spec.coexistence_value();
    std::vector<double> samples(N);
    for (int i = 0; i < N; ++i) {
        const double th = 2.0 * std::numbers::pi * i / N;
        samples[i] = e * (1.0 + opts.seed_amplitude * std::cos(th)) + opts.noise_amplitude * uni(rng);
    }
    std::vector<double> a(N), f1(N);
    pack_profile(forward_dft(samples), a);

    double omega = omega_guess;
    double prev_arg = std::atan2(a[2], a[1]);
    const long steps = std::lround(opts.relax_time / opts.dt);
    const double R2 = radius * radius;
    for (long it = 0; it < steps; ++it) {
        kernel.eval(a, f1);
        // implicit diffusion + advection: (1 - dt L_k) a_new = a + dt f1_hat
        a[0] = a[0] + opts.dt * f1[0];
        for (int k = 1; k < h; ++k) {
            const int re = 2 * k - 1, im = 2 * k;
            const double dr = 1.0 + opts.dt * double(k) * k / R2;
            const double di = opts.dt * k * omega;
            const double xre = a[re] + opts.dt * f1[re];
            const double xim = a[im] + opts.dt * f1[im];
            const double den = dr * dr + di * di;
            a[re] = (xre * dr + xim * di) / den;
            a[im] = (xim * dr - xre * di) / den;
        }
        a[N - 1] = (a[N - 1] + opts.dt * f1[N - 1]) / (1.0 + opts.dt * double(h) * h / R2);
        if (!std::isfinite(a[0]) || !std::isfinite(a[1]))
            throw BlowUpError("relax_to_wavetrain: relaxation blew up (try smaller dt)", it);
        const double arg = std::atan2(a[2], a[1]);
        double d = arg - prev_arg;
        if (d > std::numbers::pi)
            d -= 2.0 * std::numbers::pi;
        if (d < -std::numbers::pi)
            d += 2.0 * std::numbers::pi;
        prev_arg = arg;
        omega += opts.omega_gain * d;
    }
    if (mode_mass(a) < opts.flat_tol)
        throw NoWavetrainError(
            "relaxation collapsed onto the uniform state (radius too small or parameters "
            "outside the existence region)");

    WaveTrain guess;
    guess.spec = spec;
    guess.radius = radius;
    guess.omega = omega;
    guess.profile = unpack_profile(N, a);
    return refine_wavetrain(spec, radius, guess, opts);
}

WaveTrain refine_wavetrain(const ModelSpec& spec, double radius, const WaveTrain& guess,
                           const WavetrainOptions& opts) {
    if (!spec.spiral_supported())
        throw UnsupportedError("cycle " + cycle_name(spec.cycle) +
                               " has no known travelling wave; spiral construction unsupported");
    const int N = guess.profile.n_samples;
    const int h = N / 2;
    const SymmetryPlan plan = SymmetryPlan::make(spec, N);
    const NonlinearKernel kernel(spec, plan);

    // Rotate the guess so the pinning condition Im a_hat(1) = 0 holds.
    SpectralProfile prof = guess.profile;
    const Complex c1 = prof.coeffs[1];
    if (std::abs(c1) < 1e-12)
        throw ConvergenceError("refine_wavetrain: mode-1 amplitude ~ 0, phase pinning singular",
                               std::abs(c1), 0);
    prof = rotate_profile(prof, -std::arg(c1));

    std::vector<double> a(N);
    pack_profile(prof, a);
    double omega = guess.omega;

    Eigen::VectorXd res;
    wavetrain_residual(kernel, radius, a, omega, res);
    double rms = res.norm() / std::sqrt(double(res.size()));
    Eigen::MatrixXd jac_kernel, J(N + 1, N + 1);
    std::vector<double> f1(N);
    const double R2 = radius * radius;
    for (int iter = 0; iter < opts.max_newton && rms >= opts.newton_tol; ++iter) {
        kernel.eval_with_jacobian(a, f1, jac_kernel);
        J.setZero();
        J.topLeftCorner(N, N) = jac_kernel;
        for (int k = 1; k < h; ++k) {
            const int re = 2 * k - 1, im = 2 * k;
            const double k2 = double(k) * k / R2;
            J(re, re) -= k2;
            J(im, im) -= k2;
            J(re, im) += k * omega;
            J(im, re) -= k * omega;
            J(re, N) = k * a[im];
            J(im, N) = -k * a[re];
        }
        J(N - 1, N - 1) -= double(h) * h / R2;
        J(N, 2) = 1.0;
        Eigen::VectorXd delta = Eigen::PartialPivLU<Eigen::MatrixXd>(J).solve(-res);
        double scale = 1.0;
        bool ok = false;
        const std::vector<double> a0 = a;
        const double w0 = omega;
        for (int bt = 0; bt <= 5; ++bt) {
            for (int i = 0; i < N; ++i)
                a[i] = a0[i] + scale * delta[i];
            omega = w0 + scale * delta[N];
            wavetrain_residual(kernel, radius, a, omega, res);
            const double nrms = res.norm() / std::sqrt(double(res.size()));
            if (std::isfinite(nrms) && nrms <= (1.0 - 1e-4 * scale) * rms) {
                rms = nrms;
                ok = true;
                break;
            }
            scale *= 0.5;
        }
        if (!ok)
            throw ConvergenceError("refine_wavetrain: Newton stalled", rms, iter + 1);
        if (iter + 1 == opts.max_newton && rms >= opts.newton_tol)
            throw ConvergenceError("refine_wavetrain: no convergence within iteration budget",
                                   rms, opts.max_newton);
    }
    if (mode_mass(a) < opts.flat_tol)
        throw NoWavetrainError("refinement converged to the uniform state");

    WaveTrain wt;
    wt.spec = spec;
    wt.radius = radius;
    wt.omega = omega;
    wt.profile = unpack_profile(N, a);
    wt.residual_rms = rms;
    return wt;
}

BvpState to_initial_bvp_state(const WaveTrain& wt, double epsilon, int mesh_intervals,
                              int degree) {
    if (epsilon <= 0.0)
        throw InputError("to_initial_bvp_state: epsilon must be positive");
    BvpState state;
    state.spec = wt.spec;
    state.n_modes = wt.profile.n_samples;
    state.degree = degree;
    state.fields = 1;
    state.mesh_tau = uniform_mesh(mesh_intervals);
    state.r0 = wt.radius - 0.5 * epsilon;
    state.r1 = wt.radius + 0.5 * epsilon;
    state.omega = wt.omega;
    state.lambda = 0.0;
    state.bc_kind = BcKind::Neumann;
    const int N = state.n_modes;
    Eigen::VectorXd col = Eigen::VectorXd::Zero(2 * N);
    std::vector<double> packed(N);
    pack_profile(wt.profile, packed);
    for (int i = 0; i < N; ++i)
        col[i] = packed[i];
    state.nodes = col.replicate(1, state.node_count());
    return state;
}

} // namespace spiral
