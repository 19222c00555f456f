#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spiral/model.hpp"

namespace spiral {

using Complex = std::complex<double>;

/// Fourier coefficients of one real theta-periodic field, modes k = 0..N/2,
/// forward normalization 1/N (project-wide convention). Modes 0 and N/2 are
/// real; the conjugate extension of modes N/2+1..N-1 is implicit.
struct SpectralProfile {
    int n_samples = 0;            // N, even positive
    std::vector<Complex> coeffs;  // size N/2 + 1

    int half() const { return n_samples / 2; }
    static SpectralProfile zero(int n_samples);
    void enforce_reality(); // project Im of modes 0 and N/2 to zero
    bool reality_ok(double tol = 1e-12) const;
};

/// Forward DFT with 1/N normalization: c_k = (1/N) sum_n u_n e^{-2 pi i k n / N}.
SpectralProfile forward_dft(std::span<const double> samples);

/// Inverse DFT: u_n = sum over the conjugate-extended modes of c_k e^{+2 pi i k n / N}.
std::vector<double> inverse_dft(const SpectralProfile& profile);

/// Coefficients of the pointwise product of the represented fields,
/// computed as FFT(IFFT(x) * IFFT(y)) on the N-point grid (no padding).
SpectralProfile convolve(const SpectralProfile& x, const SpectralProfile& y);

/// 3/2-rule dealiased variant of convolve; diagnostic only, not used by the
/// solvers (the production discretization is the unpadded grid product).
SpectralProfile convolve_padded(const SpectralProfile& x, const SpectralProfile& y);

/// Rotate the represented field by `angle`: a(theta) -> a(theta + angle).
/// Grid-exact for the trigonometric interpolant (Nyquist picks up cos(N/2 angle)).
SpectralProfile rotate_profile(const SpectralProfile& a, double angle);

/// Per-species spectral multipliers w_s(k) = e^{i k offset_s} and the
/// equivalent integer sample rotations. Requires N divisible by 2m so that the
/// shifts are exact on the grid and the Nyquist mode stays real.
struct SymmetryPlan {
    int n_samples = 0;
    int species = 0;
    std::vector<int> sample_shift;                 // per species, in samples
    std::vector<std::vector<Complex>> multipliers; // per species, k = 0..N/2

    static SymmetryPlan make(const ModelSpec& spec, int n_samples);
};

/// Coefficients of the shifted field a(theta + offset_s).
SpectralProfile apply_shift(const SpectralProfile& a, int species_index, const SymmetryPlan& plan);

/// Fourier coefficients of f_1 on the symmetry-reduced field:
///   m=3: f1_hat = a - a*a - (1+sigma+zeta) a*b - (1-zeta) a*c
///   m=5: f1_hat = a - a*a - (1+sigma+zeta) a*(b+p) - (1-zeta) a*(c+q)
/// with * the unpadded grid convolution and b,c,(p,q) the shifted copies of a.
SpectralProfile nonlinear_hat(const SpectralProfile& a, const ModelSpec& spec,
                              const SymmetryPlan& plan);

// ---------------------------------------------------------------------------
// Packed real coordinates. Layout (size N):
//   [Re c0, Re c1, Im c1, ..., Re c_{N/2-1}, Im c_{N/2-1}, Re c_{N/2}]
// ---------------------------------------------------------------------------

void pack_profile(const SpectralProfile& p, std::span<double> out);
SpectralProfile unpack_profile(int n_samples, std::span<const double> packed);

/// Dense packed matrix of the linear map a_hat -> coefficients of the grid
/// product w(theta) a(theta), for a fixed multiplier field w.
Eigen::MatrixXd packed_product_jacobian(const SpectralProfile& w);

/// Hot-path evaluator for f1_hat and its Jacobian in packed coordinates.
/// One instance owns scratch buffers and is not shareable across threads;
/// copies are cheap (FFT plans are shared).
class NonlinearKernel {
  public:
    NonlinearKernel(const ModelSpec& spec, const SymmetryPlan& plan);
    NonlinearKernel(const NonlinearKernel&);
    NonlinearKernel& operator=(const NonlinearKernel&) = delete;
    ~NonlinearKernel();

    int packed_size() const { return n_; }
    int n_samples() const { return n_; }
    const ModelSpec& spec() const { return spec_; }

    /// f = packed f1_hat(a). a and f have size N.
    void eval(std::span<const double> a_packed, std::span<double> f_packed) const;

    /// Same plus the dense packed Jacobian d f1_hat / d a (N x N).
    void eval_with_jacobian(std::span<const double> a_packed, std::span<double> f_packed,
                            Eigen::MatrixXd& jac) const;

    /// Physical samples of the reduced field (size N) for a packed profile.
    void samples(std::span<const double> a_packed, std::span<double> out) const;

  private:
    struct Impl;
    ModelSpec spec_;
    SymmetryPlan plan_;
    int n_;
    std::unique_ptr<Impl> impl_;
};

} // namespace spiral
