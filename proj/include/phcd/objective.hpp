#ifndef PHCD_OBJECTIVE_HPP
#define PHCD_OBJECTIVE_HPP

// Inversion cost functional J = L + beta_I * I - beta_V * V and its
// ingredients in the bulk-mode coefficient basis, with analytic derivatives.

#include "phcd/defect_model.hpp"

namespace phcd {

struct CostWeights {
    double beta_I = 0.0;
    double beta_V = 0.0;
};

struct ObjectiveGrams {
    Eigen::MatrixXcd S; // overlap <psi'|psi> over the evaluation domain
    Eigen::MatrixXcd P; // origin outer product H*(0) H(0), rank <= 1
    Eigen::MatrixXcd W; // Q proxy w w' / (q q'), Gamma rows penalized
    double domain_side = 0.0; // square evaluation domain side, units of a
};

struct GramOptions {
    double domain_side = 10.0;        // "at least as large as the crystal"
    double q_min = 1e-3 * 2.0 * 3.14159265358979323846; // Gamma cutoff
    double gamma_penalty = 1e6;       // W diagonal for excluded modes
};

/// Builds S, P, W for the basis.  S uses closed-form plane-wave overlaps on
/// the square domain; W penalizes modes with |q| < q_min on the diagonal.
ObjectiveGrams build_grams(const ModeBasis& modes, const GramOptions& opt = {});

/// V = a' S a / max_abs_sq where max_abs_sq = max_r |H_m(r)|^2 of the
/// synthesized field.
double mode_volume(const Eigen::VectorXcd& a, const Eigen::MatrixXcd& S,
                   double max_abs_sq);

/// Convenience overload that synthesizes the field on the evaluation domain
/// at the given resolution to obtain the max.
double mode_volume(const Eigen::VectorXcd& a, const ObjectiveGrams& grams,
                   const ModeBasis& modes, int resolution = 32);

double intensity_at_origin(const Eigen::VectorXcd& a,
                           const Eigen::MatrixXcd& P);

double q_proxy(const Eigen::VectorXcd& a, const Eigen::MatrixXcd& W);

/// J = L + beta_I I - beta_V V with the quadratic-form V (a' S a).
double cost(const Eigen::VectorXcd& a, const ObjectiveGrams& grams,
            const CostWeights& w);

/// Gradient 2 (W + beta_I P - beta_V S) a, real-linear convention over
/// complex coefficients.
Eigen::VectorXcd cost_gradient(const Eigen::VectorXcd& a,
                               const ObjectiveGrams& grams,
                               const CostWeights& w);

/// W + beta_I P - beta_V S.
Eigen::MatrixXcd cost_matrix(const ObjectiveGrams& grams,
                             const CostWeights& w);

} // namespace phcd

#endif
