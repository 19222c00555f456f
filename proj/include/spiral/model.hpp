#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "spiral/errors.hpp"

namespace spiral {

/// Heteroclinic cycle selecting the azimuthal phase relation between species.
/// Gamma1 is accepted by the model grammar but has no known travelling wave,
/// so spiral construction for it is rejected downstream.
enum class Cycle { Rps3, Gamma1, Gamma2, Gamma3 };

std::string cycle_name(Cycle cycle);

/// Azimuthal offset stored exactly as a fraction of the full circle:
/// offset = 2*pi*num/den. Kept rational so mode-divisibility logic is exact.
struct PhaseFraction {
    int num = 0;
    int den = 1;
    double radians() const;
};

/// Cyclic-competition model: species count, rates, cycle and per-species
/// azimuthal offsets (species 0 has offset 0).
struct ModelSpec {
    int species = 3;
    double sigma = 0.0; // removal rate
    double zeta = 0.0;  // replacement rate
    Cycle cycle = Cycle::Rps3;
    std::vector<PhaseFraction> phase_shifts;

    static ModelSpec make(Cycle cycle, double sigma, double zeta);

    double coexistence_value() const; // 1/(3+sigma) for m=3, 1/(5+2*sigma) for m=5
    bool spiral_supported() const;    // false for Gamma1
};

/// All named equilibria of the kinetics.
struct EquilibriumSet {
    Eigen::VectorXd coexistence;
    std::vector<Eigen::VectorXd> single_survivor; // xi_1..xi_m
    std::vector<Eigen::VectorXd> triple_survivor; // eta_1..eta_5, m=5 only
};

EquilibriumSet equilibria(const ModelSpec& spec);

/// Kinetics f(U). m=3:
///   f_s = U_s (1 - rho - (sigma+zeta) U_{s+1} + zeta U_{s+2}),
/// m=5:
///   f_s = U_s (1 - rho - (sigma+zeta)(U_{s+1}+U_{s+3}) + zeta (U_{s+2}+U_{s+4})),
/// with rho the density sum and indices mod m.
Eigen::VectorXd kinetics(const Eigen::VectorXd& u, const ModelSpec& spec);

/// First component of the kinetics evaluated on (a0, shifted...), where
/// `shifted` holds species 1..m-1 already phase-shifted to the reference frame.
double kinetics_first(double a0, std::span<const double> shifted, const ModelSpec& spec);

/// Analytic Jacobian of kinetics.
Eigen::MatrixXd kinetics_jacobian(const Eigen::VectorXd& u, const ModelSpec& spec);

/// Revised linear estimate of the spiral angular frequency (m=3 only):
///   omega ~ (1/2) sqrt(3) ((2/3) sigma + 2 zeta) / (3 + sigma).
double predicted_frequency(const ModelSpec& spec);

} // namespace spiral
