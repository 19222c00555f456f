#include "spiral/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <unordered_map>

namespace spiral {

namespace {

// One c2c plan pair per transform length. Plans are created once under a lock
// (fftw planning is not thread-safe) and executed via the new-array interface.
struct DftPlans {
    explicit DftPlans(int n) : n(n) {
        std::vector<Complex> a(n), b(n);
        auto* pa = reinterpret_cast<fftw_complex*>(a.data());
        auto* pb = reinterpret_cast<fftw_complex*>(b.data());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fwd = fftw_plan_dft_1d(n, pa, pb, FFTW_FORWARD, flags);
        bwd = fftw_plan_dft_1d(n, pa, pb, FFTW_BACKWARD, flags);
    }
    ~DftPlans() {
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
    void forward(const Complex* in, Complex* out) const {
        fftw_execute_dft(fwd, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                         reinterpret_cast<fftw_complex*>(out));
    }
    void backward(const Complex* in, Complex* out) const {
        fftw_execute_dft(bwd, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                         reinterpret_cast<fftw_complex*>(out));
    }
    int n;
    fftw_plan fwd;
    fftw_plan bwd;
};

std::shared_ptr<const DftPlans> plans_for(int n) {
    static std::mutex mtx;
    static std::unordered_map<int, std::shared_ptr<const DftPlans>> cache;
    std::lock_guard lock(mtx);
    auto& slot = cache[n];
    if (!slot)
        slot = std::make_shared<const DftPlans>(n);
    return slot;
}

void check_even_positive(int n) {
    if (n <= 0 || n % 2 != 0)
        throw InputError("sample count must be even and positive");
}

// Conjugate-symmetric extension of modes 0..N/2 to a full length-N spectrum.
void extend_full(const SpectralProfile& p, std::vector<Complex>& full) {
    const int n = p.n_samples;
    const int h = n / 2;
    full.resize(n);
    for (int k = 0; k <= h; ++k)
        full[k] = p.coeffs[k];
    full[0] = Complex(p.coeffs[0].real(), 0.0);
    full[h] = Complex(p.coeffs[h].real(), 0.0);
    for (int k = 1; k < h; ++k)
        full[n - k] = std::conj(p.coeffs[k]);
}

SpectralProfile reduce_half(int n, const std::vector<Complex>& full) {
    SpectralProfile p;
    p.n_samples = n;
    p.coeffs.assign(full.begin(), full.begin() + n / 2 + 1);
    p.enforce_reality();
    return p;
}

} // namespace

SpectralProfile SpectralProfile::zero(int n_samples) {
    check_even_positive(n_samples);
    SpectralProfile p;
    p.n_samples = n_samples;
    p.coeffs.assign(n_samples / 2 + 1, Complex(0.0, 0.0));
    return p;
}

void SpectralProfile::enforce_reality() {
    coeffs.front() = Complex(coeffs.front().real(), 0.0);
    coeffs.back() = Complex(coeffs.back().real(), 0.0);
}

bool SpectralProfile::reality_ok(double tol) const {
    return std::abs(coeffs.front().imag()) <= tol && std::abs(coeffs.back().imag()) <= tol;
}

SpectralProfile forward_dft(std::span<const double> samples) {
    const int n = static_cast<int>(samples.size());
    check_even_positive(n);
    auto plans = plans_for(n);
    std::vector<Complex> in(n), out(n);
    for (int i = 0; i < n; ++i)
        in[i] = samples[i];
    plans->forward(in.data(), out.data());
    const double inv = 1.0 / n;
    for (auto& c : out)
        c *= inv;
    return reduce_half(n, out);
}

std::vector<double> inverse_dft(const SpectralProfile& profile) {
    const int n = profile.n_samples;
    check_even_positive(n);
    if (static_cast<int>(profile.coeffs.size()) != n / 2 + 1)
        throw InputError("inverse_dft: coefficient count does not match n_samples");
    if (!profile.reality_ok())
        throw InputError("inverse_dft: modes 0 and N/2 must be real");
    auto plans = plans_for(n);
    std::vector<Complex> full, out(n);
    extend_full(profile, full);
    plans->backward(full.data(), out.data());
    std::vector<double> samples(n);
    for (int i = 0; i < n; ++i)
        samples[i] = out[i].real();
    return samples;
}

SpectralProfile convolve(const SpectralProfile& x, const SpectralProfile& y) {
    if (x.n_samples != y.n_samples)
        throw InputError("convolve: profiles have different sample counts");
    auto xs = inverse_dft(x);
    auto ys = inverse_dft(y);
    for (int i = 0; i < x.n_samples; ++i)
        xs[i] *= ys[i];
    return forward_dft(xs);
}

SpectralProfile convolve_padded(const SpectralProfile& x, const SpectralProfile& y) {
    if (x.n_samples != y.n_samples)
        throw InputError("convolve_padded: profiles have different sample counts");
    const int n = x.n_samples;
    const int h = n / 2;
    int np = (3 * n) / 2;
    if (np % 2 != 0)
        ++np;
    auto plans = plans_for(np);

    // Embed on the finer grid; the Nyquist coefficient splits evenly between
    // +N/2 and -N/2 so the trig interpolant is preserved.
    auto embed = [&](const SpectralProfile& p) {
        std::vector<Complex> full(np, Complex(0, 0));
        full[0] = p.coeffs[0].real();
        for (int k = 1; k < h; ++k) {
            full[k] = p.coeffs[k];
            full[np - k] = std::conj(p.coeffs[k]);
        }
        full[h] = 0.5 * p.coeffs[h].real();
        full[np - h] = 0.5 * p.coeffs[h].real();
        return full;
    };
    std::vector<Complex> xf = embed(x), yf = embed(y), xs(np), ys(np);
    plans->backward(xf.data(), xs.data());
    plans->backward(yf.data(), ys.data());
    for (int i = 0; i < np; ++i)
        xs[i] = Complex(xs[i].real() * ys[i].real(), 0.0);
    plans->forward(xs.data(), ys.data());
    SpectralProfile out = SpectralProfile::zero(n);
    const double inv = 1.0 / np;
    for (int k = 0; k < h; ++k)
        out.coeffs[k] = ys[k] * inv;
    out.coeffs[h] = 2.0 * ys[h].real() * inv;
    out.enforce_reality();
    return out;
}

SpectralProfile rotate_profile(const SpectralProfile& a, double angle) {
    SpectralProfile out = a;
    const int h = a.half();
    for (int k = 1; k < h; ++k)
        out.coeffs[k] *= std::polar(1.0, k * angle);
    // The Nyquist sine component vanishes on the grid; only cos survives.
    out.coeffs[h] = a.coeffs[h].real() * std::cos(h * angle);
    out.enforce_reality();
    return out;
}

SymmetryPlan SymmetryPlan::make(const ModelSpec& spec, int n_samples) {
    check_even_positive(n_samples);
    if (n_samples % (2 * spec.species) != 0)
        throw ConfigError("mode count N must be an integer multiple of 2m");
    SymmetryPlan plan;
    plan.n_samples = n_samples;
    plan.species = spec.species;
    const int h = n_samples / 2;
    for (int s = 0; s < spec.species; ++s) {
        const auto& frac = spec.phase_shifts[s];
        if ((static_cast<long>(n_samples) * frac.num) % frac.den != 0)
            throw ConfigError("phase shift is not an integer number of samples");
        plan.sample_shift.push_back(static_cast<int>(static_cast<long>(n_samples) * frac.num / frac.den));
        std::vector<Complex> w(h + 1);
        for (int k = 0; k <= h; ++k)
            w[k] = std::polar(1.0, k * frac.radians());
        plan.multipliers.push_back(std::move(w));
    }
    return plan;
}

SpectralProfile apply_shift(const SpectralProfile& a, int species_index, const SymmetryPlan& plan) {
    if (a.n_samples != plan.n_samples)
        throw InputError("apply_shift: profile and plan sample counts differ");
    if (species_index < 0 || species_index >= plan.species)
        throw InputError("apply_shift: species index out of range");
    SpectralProfile out = a;
    const auto& w = plan.multipliers[species_index];
    for (int k = 0; k <= a.half(); ++k)
        out.coeffs[k] *= w[k];
    out.enforce_reality();
    return out;
}

SpectralProfile nonlinear_hat(const SpectralProfile& a, const ModelSpec& spec,
                              const SymmetryPlan& plan) {
    if (plan.species != spec.species)
        throw InputError("nonlinear_hat: plan was built for a different species count");
    if (a.n_samples != plan.n_samples)
        throw InputError("nonlinear_hat: profile and plan sample counts differ");
    const int h = a.half();
    const double alpha = 1.0 + spec.sigma + spec.zeta;
    const double beta = 1.0 - spec.zeta;

    // Shifted copies grouped by interaction sign: m=3 pairs (b | c),
    // m=5 pairs (b+p | c+q).
    SpectralProfile minus = apply_shift(a, 1, plan);
    SpectralProfile plus = apply_shift(a, 2, plan);
    if (spec.species == 5) {
        const SpectralProfile p = apply_shift(a, 3, plan);
        const SpectralProfile q = apply_shift(a, 4, plan);
        for (int k = 0; k <= h; ++k) {
            minus.coeffs[k] += p.coeffs[k];
            plus.coeffs[k] += q.coeffs[k];
        }
    }
    const SpectralProfile aa = convolve(a, a);
    const SpectralProfile am = convolve(a, minus);
    const SpectralProfile ap = convolve(a, plus);
    SpectralProfile f = SpectralProfile::zero(a.n_samples);
    for (int k = 0; k <= h; ++k)
        f.coeffs[k] = a.coeffs[k] - aa.coeffs[k] - alpha * am.coeffs[k] - beta * ap.coeffs[k];
    f.enforce_reality();
    return f;
}

void pack_profile(const SpectralProfile& p, std::span<double> out) {
    const int n = p.n_samples;
    const int h = n / 2;
    if (static_cast<int>(out.size()) != n)
        throw InputError("pack_profile: output span has wrong size");
    out[0] = p.coeffs[0].real();
    for (int k = 1; k < h; ++k) {
        out[2 * k - 1] = p.coeffs[k].real();
        out[2 * k] = p.coeffs[k].imag();
    }
    out[n - 1] = p.coeffs[h].real();
}

SpectralProfile unpack_profile(int n_samples, std::span<const double> packed) {
    check_even_positive(n_samples);
    if (static_cast<int>(packed.size()) != n_samples)
        throw InputError("unpack_profile: span has wrong size");
    SpectralProfile p = SpectralProfile::zero(n_samples);
    const int h = n_samples / 2;
    p.coeffs[0] = packed[0];
    for (int k = 1; k < h; ++k)
        p.coeffs[k] = Complex(packed[2 * k - 1], packed[2 * k]);
    p.coeffs[h] = packed[n_samples - 1];
    return p;
}

Eigen::MatrixXd packed_product_jacobian(const SpectralProfile& w) {
    const int n = w.n_samples;
    const int h = n / 2;
    std::vector<Complex> wf;
    extend_full(w, wf);
    Eigen::MatrixXd out(n, n);
    std::vector<Complex> col(n);
    struct Delta {
        int j;
        Complex v;
    };
    Delta deltas[2];
    for (int d = 0; d < n; ++d) {
        int nd = 0;
        if (d == 0) {
            deltas[nd++] = {0, Complex(1, 0)};
        } else if (d == n - 1) {
            deltas[nd++] = {h, Complex(1, 0)};
        } else {
            const int k = (d + 1) / 2;
            const Complex v = (d % 2 == 1) ? Complex(1, 0) : Complex(0, 1);
            deltas[nd++] = {k, v};
            deltas[nd++] = {n - k, std::conj(v)};
        }
        std::fill(col.begin(), col.end(), Complex(0, 0));
        for (int t = 0; t < nd; ++t)
            for (int l = 0; l < n; ++l) {
                const int src = l - deltas[t].j >= 0 ? l - deltas[t].j : l - deltas[t].j + n;
                col[l] += wf[src] * deltas[t].v;
            }
        out(0, d) = col[0].real();
        for (int k = 1; k < h; ++k) {
            out(2 * k - 1, d) = col[k].real();
            out(2 * k, d) = col[k].imag();
        }
        out(n - 1, d) = col[h].real();
    }
    return out;
}

// ---------------------------------------------------------------------------
// NonlinearKernel
// ---------------------------------------------------------------------------

struct NonlinearKernel::Impl {
    std::shared_ptr<const DftPlans> plans;
    double alpha = 0.0, beta = 0.0;
    // Diagonal shift multipliers summed over the two interaction groups,
    // on the full spectrum (raw index j; valid because N is a multiple of 2m).
    std::vector<Complex> diag_minus, diag_plus;
    std::vector<int> shift_minus, shift_plus; // sample rotations per group
    // scratch
    mutable std::vector<Complex> a_full, work, f_full, g_minus, g_plus, col;
    mutable std::vector<double> a_s, sum_minus, sum_plus, f_s;
};

NonlinearKernel::NonlinearKernel(const ModelSpec& spec, const SymmetryPlan& plan)
    : spec_(spec), plan_(plan), n_(plan.n_samples), impl_(std::make_unique<Impl>()) {
    if (plan.species != spec.species)
        throw InputError("NonlinearKernel: plan/spec species mismatch");
    auto& im = *impl_;
    im.plans = plans_for(n_);
    im.alpha = 1.0 + spec.sigma + spec.zeta;
    im.beta = 1.0 - spec.zeta;
    im.diag_minus.assign(n_, Complex(0, 0));
    im.diag_plus.assign(n_, Complex(0, 0));
    std::vector<int> group_minus{1}, group_plus{2};
    if (spec.species == 5) {
        group_minus.push_back(3);
        group_plus.push_back(4);
    }
    auto add_group = [&](const std::vector<int>& members, std::vector<Complex>& diag,
                         std::vector<int>& shifts) {
        for (int s : members) {
            const double off = spec.phase_shifts[s].radians();
            for (int j = 0; j < n_; ++j)
                diag[j] += std::polar(1.0, j * off);
            shifts.push_back(((plan.sample_shift[s]) % n_ + n_) % n_);
        }
    };
    add_group(group_minus, im.diag_minus, im.shift_minus);
    add_group(group_plus, im.diag_plus, im.shift_plus);
    im.a_full.resize(n_);
    im.work.resize(n_);
    im.f_full.resize(n_);
    im.g_minus.resize(n_);
    im.g_plus.resize(n_);
    im.col.resize(n_);
    im.a_s.resize(n_);
    im.sum_minus.resize(n_);
    im.sum_plus.resize(n_);
    im.f_s.resize(n_);
}

NonlinearKernel::NonlinearKernel(const NonlinearKernel& other)
    : spec_(other.spec_), plan_(other.plan_), n_(other.n_),
      impl_(std::make_unique<Impl>(*other.impl_)) {}

NonlinearKernel::~NonlinearKernel() = default;

namespace {

inline void unpack_to_full(std::span<const double> packed, std::vector<Complex>& full) {
    const int n = static_cast<int>(packed.size());
    const int h = n / 2;
    full[0] = packed[0];
    for (int k = 1; k < h; ++k) {
        full[k] = Complex(packed[2 * k - 1], packed[2 * k]);
        full[n - k] = std::conj(full[k]);
    }
    full[h] = packed[n - 1];
}

inline void pack_from_full(const std::vector<Complex>& full, std::span<double> packed) {
    const int n = static_cast<int>(packed.size());
    const int h = n / 2;
    packed[0] = full[0].real();
    for (int k = 1; k < h; ++k) {
        packed[2 * k - 1] = full[k].real();
        packed[2 * k] = full[k].imag();
    }
    packed[n - 1] = full[h].real();
}

} // namespace

void NonlinearKernel::samples(std::span<const double> a_packed, std::span<double> out) const {
    auto& im = *impl_;
    unpack_to_full(a_packed, im.a_full);
    im.plans->backward(im.a_full.data(), im.work.data());
    for (int i = 0; i < n_; ++i)
        out[i] = im.work[i].real();
}

void NonlinearKernel::eval(std::span<const double> a_packed, std::span<double> f_packed) const {
    auto& im = *impl_;
    unpack_to_full(a_packed, im.a_full);
    im.plans->backward(im.a_full.data(), im.work.data());
    for (int i = 0; i < n_; ++i)
        im.a_s[i] = im.work[i].real();
    std::fill(im.sum_minus.begin(), im.sum_minus.end(), 0.0);
    std::fill(im.sum_plus.begin(), im.sum_plus.end(), 0.0);
    for (int sh : im.shift_minus)
        for (int i = 0; i < n_; ++i)
            im.sum_minus[i] += im.a_s[(i + sh) % n_];
    for (int sh : im.shift_plus)
        for (int i = 0; i < n_; ++i)
            im.sum_plus[i] += im.a_s[(i + sh) % n_];
    for (int i = 0; i < n_; ++i) {
        const double a = im.a_s[i];
        im.work[i] = a - a * a - im.alpha * a * im.sum_minus[i] - im.beta * a * im.sum_plus[i];
    }
    im.plans->forward(im.work.data(), im.f_full.data());
    const double inv = 1.0 / n_;
    for (auto& c : im.f_full)
        c *= inv;
    pack_from_full(im.f_full, f_packed);
}

void NonlinearKernel::eval_with_jacobian(std::span<const double> a_packed,
                                         std::span<double> f_packed, Eigen::MatrixXd& jac) const {
    eval(a_packed, f_packed);
    auto& im = *impl_;
    const int n = n_;
    const int h = n / 2;
    jac.resize(n, n);

    // g = diag-shift sums of a_full; the differential of
    //   f = a - a*a - alpha a*(D_m a) - beta a*(D_p a)
    // applied to a sparse direction e is
    //   e - 2 conv(a,e) - alpha [conv(g_m,e) + conv(a, D_m e)]
    //                   - beta  [conv(g_p,e) + conv(a, D_p e)].
    for (int j = 0; j < n; ++j) {
        im.g_minus[j] = im.diag_minus[j] * im.a_full[j];
        im.g_plus[j] = im.diag_plus[j] * im.a_full[j];
    }

    // One packed dof maps to one or two spectral deltas (j, v).
    struct Delta {
        int j;
        Complex v;
    };
    Delta deltas[2];
    for (int d = 0; d < n; ++d) {
        int ndelta = 0;
        if (d == 0) {
            deltas[ndelta++] = {0, Complex(1, 0)};
        } else if (d == n - 1) {
            deltas[ndelta++] = {h, Complex(1, 0)};
        } else {
            const int k = (d + 1) / 2;
            const bool is_re = (d % 2 == 1);
            const Complex v = is_re ? Complex(1, 0) : Complex(0, 1);
            deltas[ndelta++] = {k, v};
            deltas[ndelta++] = {n - k, std::conj(v)};
        }
        std::fill(im.col.begin(), im.col.end(), Complex(0, 0));
        for (int t = 0; t < ndelta; ++t) {
            const int j = deltas[t].j;
            const Complex v = deltas[t].v;
            const Complex vm = im.diag_minus[j] * v;
            const Complex vp = im.diag_plus[j] * v;
            im.col[j] += v;
            // conv(x, delta at j with value v)[l] = x[(l-j) mod n] * v
            for (int l = 0; l < n; ++l) {
                const int src = l - j >= 0 ? l - j : l - j + n;
                im.col[l] -= (2.0 * v + im.alpha * vm + im.beta * vp) * im.a_full[src];
                im.col[l] -= (im.alpha * im.g_minus[src] + im.beta * im.g_plus[src]) * v;
            }
        }
        // pack column d
        jac(0, d) = im.col[0].real();
        for (int k = 1; k < h; ++k) {
            jac(2 * k - 1, d) = im.col[k].real();
            jac(2 * k, d) = im.col[k].imag();
        }
        jac(n - 1, d) = im.col[h].real();
    }
}

} // namespace spiral
