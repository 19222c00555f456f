#include <doctest.h>

#include <numbers>
#include <random>

#include "spiral/spectral.hpp"

using namespace spiral;

namespace {

std::vector<double> random_samples(int n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    std::vector<double> s(n);
    for (auto& v : s)
        v = gauss(rng);
    return s;
}

SpectralProfile random_profile(int n, std::mt19937_64& rng, double scale = 1.0) {
    return forward_dft(random_samples(n, rng, scale));
}

double max_coeff_diff(const SpectralProfile& a, const SpectralProfile& b) {
    double m = 0.0;
    for (size_t k = 0; k < a.coeffs.size(); ++k)
        m = std::max(m, std::abs(a.coeffs[k] - b.coeffs[k]));
    return m;
}

} // namespace

TEST_CASE("constant field transforms to mode zero") {
    std::vector<double> samples(24, 3.25);
    const auto p = forward_dft(samples);
    CHECK(p.coeffs[0].real() == doctest::Approx(3.25).epsilon(1e-15));
    for (int k = 1; k <= p.half(); ++k)
        CHECK(std::abs(p.coeffs[k]) < 1e-14);
}

TEST_CASE("single harmonic lands in mode one with weight one half") {
    const int n = 32;
    std::vector<double> samples(n);
    for (int i = 0; i < n; ++i)
        samples[i] = std::cos(2.0 * std::numbers::pi * i / n);
    const auto p = forward_dft(samples);
    CHECK(p.coeffs[1].real() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(std::abs(p.coeffs[1].imag()) < 1e-14);
    CHECK(std::abs(p.coeffs[0]) < 1e-14);
    CHECK(std::abs(p.coeffs[2]) < 1e-14);
}

TEST_CASE("round trip is identity") {
    std::mt19937_64 rng(3);
    const auto samples = random_samples(60, rng);
    const auto back = inverse_dft(forward_dft(samples));
    for (int i = 0; i < 60; ++i)
        CHECK(back[i] == doctest::Approx(samples[i]).epsilon(1e-12));
}

TEST_CASE("odd sample counts are rejected") {
    std::vector<double> samples(33, 0.0);
    CHECK_THROWS_AS(forward_dft(samples), InputError);
}

TEST_CASE("inverse rejects violated reality invariant") {
    auto p = SpectralProfile::zero(16);
    p.coeffs[0] = Complex(1.0, 0.5);
    CHECK_THROWS_AS(inverse_dft(p), InputError);
}

TEST_CASE("convolution identity and constants") {
    std::mt19937_64 rng(5);
    const auto y = random_profile(30, rng);
    auto delta = SpectralProfile::zero(30);
    delta.coeffs[0] = 1.0;
    CHECK(max_coeff_diff(convolve(delta, y), y) < 1e-14);

    auto c1 = SpectralProfile::zero(30), c2 = SpectralProfile::zero(30);
    c1.coeffs[0] = 2.0;
    c2.coeffs[0] = -1.5;
    const auto prod = convolve(c1, c2);
    CHECK(prod.coeffs[0].real() == doctest::Approx(-3.0).epsilon(1e-14));
    for (int k = 1; k <= 15; ++k)
        CHECK(std::abs(prod.coeffs[k]) < 1e-14);
}

TEST_CASE("convolution equals the pointwise-product transform") {
    std::mt19937_64 rng(7);
    const int n = 60;
    const auto xs = random_samples(n, rng);
    const auto ys = random_samples(n, rng);
    std::vector<double> prod(n);
    for (int i = 0; i < n; ++i)
        prod[i] = xs[i] * ys[i];
    const auto direct = forward_dft(prod);
    const auto conv = convolve(forward_dft(xs), forward_dft(ys));
    CHECK(max_coeff_diff(direct, conv) < 1e-12);
}

TEST_CASE("convolution is commutative and bilinear") {
    std::mt19937_64 rng(9);
    const int n = 24;
    const auto x = random_profile(n, rng);
    const auto y = random_profile(n, rng);
    const auto z = random_profile(n, rng);
    CHECK(max_coeff_diff(convolve(x, y), convolve(y, x)) < 1e-13);

    // conv(x, 2y + 3z) = 2 conv(x,y) + 3 conv(x,z)
    SpectralProfile lin = SpectralProfile::zero(n);
    for (int k = 0; k <= n / 2; ++k)
        lin.coeffs[k] = 2.0 * y.coeffs[k] + 3.0 * z.coeffs[k];
    lin.enforce_reality();
    const auto lhs = convolve(x, lin);
    const auto cy = convolve(x, y), cz = convolve(x, z);
    double m = 0.0;
    for (int k = 0; k <= n / 2; ++k)
        m = std::max(m, std::abs(lhs.coeffs[k] - 2.0 * cy.coeffs[k] - 3.0 * cz.coeffs[k]));
    CHECK(m < 1e-12);
}

TEST_CASE("mismatched sizes rejected") {
    auto a = SpectralProfile::zero(16);
    auto b = SpectralProfile::zero(32);
    CHECK_THROWS_AS(convolve(a, b), InputError);
}

TEST_CASE("parseval with the 1/N forward normalization") {
    std::mt19937_64 rng(11);
    const int n = 48;
    const auto samples = random_samples(n, rng);
    const auto p = forward_dft(samples);
    double lhs = 0.0;
    for (double v : samples)
        lhs += v * v / n;
    double rhs = std::norm(p.coeffs[0]) + std::norm(p.coeffs[n / 2]);
    for (int k = 1; k < n / 2; ++k)
        rhs += 2.0 * std::norm(p.coeffs[k]);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("transform linearity") {
    std::mt19937_64 rng(13);
    const int n = 36;
    const auto a = random_samples(n, rng);
    const auto b = random_samples(n, rng);
    std::vector<double> combo(n);
    for (int i = 0; i < n; ++i)
        combo[i] = 1.7 * a[i] - 0.3 * b[i];
    const auto pc = forward_dft(combo);
    const auto pa = forward_dft(a);
    const auto pb = forward_dft(b);
    double m = 0.0;
    for (int k = 0; k <= n / 2; ++k)
        m = std::max(m, std::abs(pc.coeffs[k] - 1.7 * pa.coeffs[k] + 0.3 * pb.coeffs[k]));
    CHECK(m < 1e-12);
}

TEST_CASE("symmetry plan requires N divisible by 2m") {
    const auto spec = ModelSpec::make(Cycle::Rps3, 1.0, 1.0);
    CHECK_THROWS_AS(SymmetryPlan::make(spec, 40), ConfigError);
    CHECK_NOTHROW(SymmetryPlan::make(spec, 42));
    const auto spec5 = ModelSpec::make(Cycle::Gamma2, 1.0, 1.0);
    CHECK_THROWS_AS(SymmetryPlan::make(spec5, 36), ConfigError);
    CHECK_NOTHROW(SymmetryPlan::make(spec5, 40));
}

TEST_CASE("apply_shift: species zero is the identity") {
    std::mt19937_64 rng(15);
    const auto spec = ModelSpec::make(Cycle::Rps3, 2.0, 1.0);
    const auto plan = SymmetryPlan::make(spec, 30);
    const auto a = random_profile(30, rng);
    CHECK(max_coeff_diff(apply_shift(a, 0, plan), a) == 0.0);
}

TEST_CASE("apply_shift multiplier is unity when m divides k") {
    const auto spec = ModelSpec::make(Cycle::Rps3, 2.0, 1.0);
    const auto plan = SymmetryPlan::make(spec, 30);
    CHECK(std::abs(plan.multipliers[1][3] - Complex(1.0, 0.0)) < 1e-14);
    CHECK(std::abs(plan.multipliers[2][6] - Complex(1.0, 0.0)) < 1e-14);
}

TEST_CASE("apply_shift equals sample rotation") {
    std::mt19937_64 rng(17);
    for (auto cycle : {Cycle::Rps3, Cycle::Gamma2, Cycle::Gamma3}) {
        const auto spec = ModelSpec::make(cycle, 2.0, 1.0);
        const int n = spec.species == 3 ? 60 : 40;
        const auto plan = SymmetryPlan::make(spec, n);
        const auto a = random_profile(n, rng);
        const auto samples = inverse_dft(a);
        for (int s = 1; s < spec.species; ++s) {
            const auto shifted = inverse_dft(apply_shift(a, s, plan));
            const int sh = ((plan.sample_shift[s]) % n + n) % n;
            for (int i = 0; i < n; ++i)
                CHECK(shifted[i] == doctest::Approx(samples[(i + sh) % n]).epsilon(1e-12));
        }
    }
}

TEST_CASE("nonlinear_hat vanishes at coexistence and zero") {
    for (auto cycle : {Cycle::Rps3, Cycle::Gamma2}) {
        const auto spec = ModelSpec::make(cycle, 3.2, 0.8);
        const int n = spec.species == 3 ? 60 : 40;
        const auto plan = SymmetryPlan::make(spec, n);
        auto a = SpectralProfile::zero(n);
        a.coeffs[0] = spec.coexistence_value();
        auto f = nonlinear_hat(a, spec, plan);
        for (int k = 0; k <= n / 2; ++k)
            CHECK(std::abs(f.coeffs[k]) < 1e-14);
        auto z = SpectralProfile::zero(n);
        f = nonlinear_hat(z, spec, plan);
        for (int k = 0; k <= n / 2; ++k)
            CHECK(std::abs(f.coeffs[k]) == 0.0);
    }
}

TEST_CASE("nonlinear_hat matches the physical-space oracle") {
    std::mt19937_64 rng(19);
    for (auto cycle : {Cycle::Rps3, Cycle::Gamma2, Cycle::Gamma3}) {
        const auto spec = ModelSpec::make(cycle, 3.2, 0.8);
        const int n = spec.species == 3 ? 60 : 80;
        const auto plan = SymmetryPlan::make(spec, n);
        const auto a = random_profile(n, rng, 0.3);
        const auto f = nonlinear_hat(a, spec, plan);

        // oracle: rotate samples, apply kinetics_first pointwise, transform
        const auto samples = inverse_dft(a);
        std::vector<double> fs(n);
        std::vector<double> shifted(spec.species - 1);
        for (int i = 0; i < n; ++i) {
            for (int s = 1; s < spec.species; ++s) {
                const int sh = ((plan.sample_shift[s]) % n + n) % n;
                shifted[s - 1] = samples[(i + sh) % n];
            }
            fs[i] = kinetics_first(samples[i], shifted, spec);
        }
        const auto oracle = forward_dft(fs);
        CHECK(max_coeff_diff(f, oracle) < 1e-12);
    }
}

TEST_CASE("padded convolution agrees on alias-free content") {
    // products of band-limited fields with no energy above N/4 are alias-free,
    // so padded and unpadded convolutions coincide there
    const int n = 32;
    auto x = SpectralProfile::zero(n);
    auto y = SpectralProfile::zero(n);
    x.coeffs[2] = Complex(0.3, -0.1);
    x.coeffs[0] = 0.7;
    y.coeffs[3] = Complex(-0.2, 0.25);
    y.coeffs[1] = Complex(0.1, 0.05);
    const auto plain = convolve(x, y);
    const auto padded = convolve_padded(x, y);
    CHECK(max_coeff_diff(plain, padded) < 1e-13);
}

TEST_CASE("rotate_profile rotates samples") {
    std::mt19937_64 rng(23);
    const int n = 20;
    auto a = random_profile(n, rng);
    a.coeffs[n / 2] = 0.0; // integer-sample rotation is exact without Nyquist
    const auto rolled = inverse_dft(rotate_profile(a, 2.0 * std::numbers::pi * 3 / n));
    const auto base = inverse_dft(a);
    for (int i = 0; i < n; ++i)
        CHECK(rolled[i] == doctest::Approx(base[(i + 3) % n]).epsilon(1e-12));
}

TEST_CASE("packed coordinates round trip") {
    std::mt19937_64 rng(29);
    const int n = 26;
    const auto a = random_profile(n, rng);
    std::vector<double> packed(n);
    pack_profile(a, packed);
    const auto back = unpack_profile(n, packed);
    CHECK(max_coeff_diff(a, back) == 0.0);
}

TEST_CASE("kernel eval matches nonlinear_hat and its jacobian matches finite differences") {
    std::mt19937_64 rng(31);
    for (auto cycle : {Cycle::Rps3, Cycle::Gamma3}) {
        const auto spec = ModelSpec::make(cycle, 3.2, 0.8);
        const int n = spec.species == 3 ? 36 : 40;
        const auto plan = SymmetryPlan::make(spec, n);
        const NonlinearKernel kernel(spec, plan);
        const auto a = random_profile(n, rng, 0.4);
        std::vector<double> ap(n), fp(n);
        pack_profile(a, ap);
        Eigen::MatrixXd jac;
        kernel.eval_with_jacobian(ap, fp, jac);

        std::vector<double> expect(n);
        pack_profile(nonlinear_hat(a, spec, plan), expect);
        for (int i = 0; i < n; ++i)
            CHECK(fp[i] == doctest::Approx(expect[i]).epsilon(1e-12));

        const double step = 1e-6;
        std::vector<double> am(n), fm(n), fpl(n);
        for (int d = 0; d < n; ++d) {
            am = ap;
            am[d] += step;
            kernel.eval(am, fpl);
            am[d] -= 2.0 * step;
            kernel.eval(am, fm);
            for (int i = 0; i < n; ++i) {
                const double fd = (fpl[i] - fm[i]) / (2.0 * step);
                CHECK(jac(i, d) == doctest::Approx(fd).epsilon(5e-5));
            }
        }
    }
}

TEST_CASE("packed product jacobian represents multiplication") {
    std::mt19937_64 rng(37);
    const int n = 24;
    const auto w = random_profile(n, rng);
    const auto a = random_profile(n, rng);
    const auto ws = inverse_dft(w);
    const auto as = inverse_dft(a);
    std::vector<double> prod(n);
    for (int i = 0; i < n; ++i)
        prod[i] = ws[i] * as[i];
    std::vector<double> expect(n), ap(n);
    pack_profile(forward_dft(prod), expect);
    pack_profile(a, ap);
    const Eigen::MatrixXd mat = packed_product_jacobian(w);
    const Eigen::VectorXd got =
        mat * Eigen::Map<const Eigen::VectorXd>(ap.data(), n);
    for (int i = 0; i < n; ++i)
        CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}
