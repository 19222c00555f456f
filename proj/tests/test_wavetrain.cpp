#include <doctest.h>

#include <cmath>

#include "spiral/wavetrain.hpp"

using namespace spiral;

namespace {

WavetrainOptions fast_opts() {
    WavetrainOptions o;
    o.relax_time = 150.0;
    return o;
}

} // namespace

TEST_CASE("three-species wavetrain at R=5 reproduces the reference frequency") {
    const auto spec = ModelSpec::make(Cycle::Rps3, 3.2, 0.8);
    const WaveTrain wt = relax_to_wavetrain(spec, 5.0, 0.3, 60, fast_opts());
    CHECK(wt.omega == doctest::Approx(0.3346).epsilon(0.006)); // +- 0.002 absolute
    CHECK(std::abs(wt.omega - 0.3346) < 0.002);
    CHECK(wt.gamma() == doctest::Approx(5.0 * wt.omega));
    CHECK(std::abs(wt.gamma() - 1.673) < 0.01);
    CHECK(wt.wavelength() == doctest::Approx(2.0 * std::numbers::pi * 5.0));
    CHECK(wt.residual_rms < 1e-10);

    // discrete symmetry: rotating samples by N/3 reproduces species 1
    const auto plan = SymmetryPlan::make(spec, 60);
    const auto a = inverse_dft(wt.profile);
    const auto b = inverse_dft(apply_shift(wt.profile, 1, plan));
    const int sh = ((plan.sample_shift[1]) % 60 + 60) % 60;
    for (int i = 0; i < 60; ++i)
        CHECK(b[i] == doctest::Approx(a[(i + sh) % 60]).epsilon(1e-12));

    // profile stays inside the physical simplex neighborhood
    for (double v : a) {
        CHECK(v > -1e-6);
        CHECK(v < 1.0 + 1e-6);
    }
}

TEST_CASE("refinement is idempotent and rotation invariant") {
    const auto spec = ModelSpec::make(Cycle::Rps3, 3.2, 0.8);
    const WaveTrain wt = relax_to_wavetrain(spec, 5.0, 0.3, 60, fast_opts());
    const WaveTrain again = refine_wavetrain(spec, 5.0, wt);
    CHECK(again.omega == doctest::Approx(wt.omega).epsilon(1e-8));

    WaveTrain rotated = wt;
    rotated.profile = rotate_profile(wt.profile, 1.234);
    const WaveTrain back = refine_wavetrain(spec, 5.0, rotated);
    CHECK(back.omega == doctest::Approx(wt.omega).epsilon(1e-8));
}

TEST_CASE("doubling the mode count leaves omega fixed to spectral accuracy") {
    const auto spec = ModelSpec::make(Cycle::Rps3, 3.2, 0.8);
    const WaveTrain w60 = relax_to_wavetrain(spec, 5.0, 0.3, 60, fast_opts());
    // interpolate to N=120 by zero padding and refine
    WaveTrain guess;
    guess.spec = spec;
    guess.radius = 5.0;
    guess.omega = w60.omega;
    guess.profile = SpectralProfile::zero(120);
    for (int k = 0; k <= 30; ++k)
        guess.profile.coeffs[k] = w60.profile.coeffs[k];
    guess.profile.enforce_reality();
    const WaveTrain w120 = refine_wavetrain(spec, 5.0, guess);
    CHECK(std::abs(w120.omega - w60.omega) < 1e-6);
}

TEST_CASE("wavetrain approaches the heteroclinic cycle as R grows") {
    const auto spec = ModelSpec::make(Cycle::Rps3, 3.2, 0.8);
    double prev_min = 1.0;
    WaveTrain wt;
    for (double R : {5.0, 6.5, 8.0}) {
        wt = relax_to_wavetrain(spec, R, 0.3, 60, fast_opts());
        const auto a = inverse_dft(wt.profile);
        const double mn = *std::min_element(a.begin(), a.end());
        CHECK(mn < prev_min);
        prev_min = mn;
    }
    CHECK(prev_min < 0.02);
}

TEST_CASE("tiny radius has no wavetrain") {
    const auto spec = ModelSpec::make(Cycle::Rps3, 3.2, 0.8);
    CHECK_THROWS_AS(relax_to_wavetrain(spec, 0.5, 0.3, 12, fast_opts()), NoWavetrainError);
}

TEST_CASE("gamma1 spiral construction is rejected") {
    const auto g1 = ModelSpec::make(Cycle::Gamma1, 3.2, 0.8);
    CHECK_THROWS_AS(relax_to_wavetrain(g1, 8.0, 0.2, 40), UnsupportedError);
}

TEST_CASE("five-species wavetrains exist for both supported cycles") {
    WavetrainOptions opts = fast_opts();
    opts.dt = 0.005;
    opts.relax_time = 250.0;
    const auto g2 = ModelSpec::make(Cycle::Gamma2, 3.2, 0.8);
    const WaveTrain wt2 = relax_to_wavetrain(g2, 8.0, 0.2, 40, opts);
    CHECK(wt2.residual_rms < 1e-10);
    CHECK(wt2.omega > 0.05);

    const auto g3 = ModelSpec::make(Cycle::Gamma3, 3.2, 0.8);
    const WaveTrain wt3 = relax_to_wavetrain(g3, 8.0, 0.2, 40, opts);
    CHECK(wt3.residual_rms < 1e-10);
    CHECK(wt3.omega > 0.05);
    CHECK(wt3.omega != doctest::Approx(wt2.omega).epsilon(1e-3));
}

TEST_CASE("initial bvp state: epsilon limit and residual bound") {
    const auto spec = ModelSpec::make(Cycle::Rps3, 3.2, 0.8);
    const WaveTrain wt = relax_to_wavetrain(spec, 5.0, 0.3, 60, fast_opts());
    CHECK_THROWS_AS(to_initial_bvp_state(wt, 0.0, 4), InputError);
    auto problem = make_reduced_problem(spec, 60);
    double prev = 1e9;
    for (double eps : {0.02, 0.002, 0.0002}) {
        const BvpState st = to_initial_bvp_state(wt, eps, 4);
        const auto res = collocate(*problem, st);
        const double rms = res.norm() / std::sqrt(double(res.size()));
        CHECK(rms < prev);
        prev = rms;
    }
    CHECK(prev < 1e-9); // shrinking the annulus recovers the wavetrain residual
}
