#include "spiral/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace spiral {

namespace {

// Interaction sign pattern: f_s picks up coeff[j] * U_{s+j} inside the bracket,
// on top of the 1 - rho term. coeff[0] is unused (self term lives in rho).
std::vector<double> bracket_coeffs(int species, double sigma, double zeta) {
    std::vector<double> c(species, 0.0);
    if (species == 3) {
        c[1] = -(sigma + zeta);
        c[2] = zeta;
    } else {
        c[1] = -(sigma + zeta);
        c[3] = -(sigma + zeta);
        c[2] = zeta;
        c[4] = zeta;
    }
    return c;
}

// Permutation-invariant density sum: accumulate in ascending value order so
// cyclic relabelings of the species produce bit-identical results.
double density_sum(const double* u, int m) {
    double v[5];
    for (int i = 0; i < m; ++i)
        v[i] = u[i];
    std::sort(v, v + m);
    double rho = v[0];
    for (int i = 1; i < m; ++i)
        rho += v[i];
    return rho;
}

// Single evaluation path for one kinetics component; vals is species-local
// (vals[0] = U_s, vals[j] = U_{s+j}). Shared by kinetics and kinetics_first
// so the two agree bit-for-bit.
double component_value(const double* vals, int m, const std::vector<double>& coeff) {
    const double rho = density_sum(vals, m);
    double bracket = 1.0 - rho;
    for (int j = 1; j < m; ++j)
        bracket += coeff[j] * vals[j];
    return vals[0] * bracket;
}

std::vector<PhaseFraction> shifts_for(Cycle cycle) {
    switch (cycle) {
        case Cycle::Rps3:
            return {{0, 1}, {-1, 3}, {1, 3}};
        case Cycle::Gamma2:
            return {{0, 1}, {-2, 5}, {1, 5}, {-1, 5}, {2, 5}};
        case Cycle::Gamma1: // one-step permutation, same offsets as Gamma3
        case Cycle::Gamma3:
            return {{0, 1}, {-1, 5}, {-2, 5}, {2, 5}, {1, 5}};
    }
    throw InputError("unknown cycle");
}

} // namespace

std::string cycle_name(Cycle cycle) {
    switch (cycle) {
        case Cycle::Rps3: return "rps3";
        case Cycle::Gamma1: return "rpsls-gamma1";
        case Cycle::Gamma2: return "rpsls-gamma2";
        case Cycle::Gamma3: return "rpsls-gamma3";
    }
    return "?";
}

double PhaseFraction::radians() const {
    return 2.0 * std::numbers::pi * static_cast<double>(num) / static_cast<double>(den);
}

ModelSpec ModelSpec::make(Cycle cycle, double sigma, double zeta) {
    if (sigma < 0.0 || zeta < 0.0)
        throw InputError("rates sigma and zeta must be non-negative");
    ModelSpec spec;
    spec.cycle = cycle;
    spec.species = (cycle == Cycle::Rps3) ? 3 : 5;
    spec.sigma = sigma;
    spec.zeta = zeta;
    spec.phase_shifts = shifts_for(cycle);
    return spec;
}

double ModelSpec::coexistence_value() const {
    return species == 3 ? 1.0 / (3.0 + sigma) : 1.0 / (5.0 + 2.0 * sigma);
}

bool ModelSpec::spiral_supported() const {
    return cycle != Cycle::Gamma1;
}

EquilibriumSet equilibria(const ModelSpec& spec) {
    const int m = spec.species;
    EquilibriumSet set;
    set.coexistence = Eigen::VectorXd::Constant(m, spec.coexistence_value());
    for (int i = 0; i < m; ++i)
        set.single_survivor.push_back(Eigen::VectorXd::Unit(m, i));
    if (m == 5) {
        const double s = 1.0 / (3.0 + spec.sigma);
        for (int i = 1; i <= 5; ++i) {
            Eigen::VectorXd eta = Eigen::VectorXd::Zero(5);
            eta[(i + 3) % 5] = s; // i-1, i, i+1 survive (1-based, mod 5)
            eta[(i + 4) % 5] = s;
            eta[i % 5] = s;
            set.triple_survivor.push_back(eta);
        }
    }
    return set;
}

Eigen::VectorXd kinetics(const Eigen::VectorXd& u, const ModelSpec& spec) {
    const int m = spec.species;
    if (u.size() != m)
        throw InputError("kinetics: state dimension does not match species count");
    const auto coeff = bracket_coeffs(m, spec.sigma, spec.zeta);
    Eigen::VectorXd f(m);
    double local[5];
    for (int s = 0; s < m; ++s) {
        for (int j = 0; j < m; ++j)
            local[j] = u[(s + j) % m];
        f[s] = component_value(local, m, coeff);
    }
    return f;
}

double kinetics_first(double a0, std::span<const double> shifted, const ModelSpec& spec) {
    const int m = spec.species;
    if (static_cast<int>(shifted.size()) != m - 1)
        throw InputError("kinetics_first: expected m-1 shifted values");
    const auto coeff = bracket_coeffs(m, spec.sigma, spec.zeta);
    double all[5];
    all[0] = a0;
    for (int j = 1; j < m; ++j)
        all[j] = shifted[j - 1];
    return component_value(all, m, coeff);
}

Eigen::MatrixXd kinetics_jacobian(const Eigen::VectorXd& u, const ModelSpec& spec) {
    const int m = spec.species;
    if (u.size() != m)
        throw InputError("kinetics_jacobian: state dimension does not match species count");
    const auto coeff = bracket_coeffs(m, spec.sigma, spec.zeta);
    const double rho = density_sum(u.data(), m);
    Eigen::MatrixXd jac(m, m);
    for (int s = 0; s < m; ++s) {
        double bracket = 1.0 - rho;
        for (int j = 1; j < m; ++j)
            bracket += coeff[j] * u[(s + j) % m];
        for (int t = 0; t < m; ++t) {
            double d = -1.0; // d rho / d U_t
            const int j = (t - s + m) % m;
            if (j != 0)
                d += coeff[j];
            jac(s, t) = u[s] * d + (t == s ? bracket : 0.0);
        }
    }
    return jac;
}

double predicted_frequency(const ModelSpec& spec) {
    if (spec.species != 3)
        throw UnsupportedError("predicted_frequency is defined for the 3-species model only");
    return 0.5 * std::sqrt(3.0) * (2.0 / 3.0 * spec.sigma + 2.0 * spec.zeta) / (3.0 + spec.sigma);
}

} // namespace spiral
