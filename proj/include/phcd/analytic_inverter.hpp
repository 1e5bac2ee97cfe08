#ifndef PHCD_ANALYTIC_INVERTER_HPP
#define PHCD_ANALYTIC_INVERTER_HPP

// Variational solve for optimal cavity coefficients, numerical search over
// the cost weights, and extraction of the defect dielectric by inverting the
// Maxwell curl equation.

#include <functional>

#include "phcd/objective.hpp"

namespace phcd {

enum class EigenSelector { SmallestEigenvalue, MaxCost };

struct VariationalResult {
    CavityExpansion coefficients; // unit norm; omega filled by the pipeline
    double lagrange_eigenvalue = 0.0;
    double cost_value = 0.0;
    CostWeights weights;
};

/// Eigenpair of W + beta_I P - beta_V S.  The default selector takes the
/// smallest eigenvalue; MaxCost picks the eigenvector with the largest
/// evaluated cost.
VariationalResult solve_variational(const ObjectiveGrams& grams,
                                    const CostWeights& weights,
                                    EigenSelector selector =
                                        EigenSelector::SmallestEigenvalue);

using MeritFn = std::function<double(const CostWeights&)>;

struct PatternSearchResult {
    CostWeights weights;
    double merit = 0.0;
    int evaluations = 0;
};

/// Derivative-free pattern search over (log beta_I, log beta_V).  Moves only
/// on strict improvement, so a beta-independent merit returns the initial
/// weights unchanged.
PatternSearchResult pattern_search(const MeritFn& merit, CostWeights initial,
                                   int budget, double initial_step = 0.5);

struct WeightSearchResult {
    CostWeights weights;
    VariationalResult best;
    int evaluations = 0;
};

/// Nested weight optimization: each trial solves the variational problem at
/// the trial weights (Grams are fixed, only rescaled) and scores the
/// resulting coefficients with the fixed score weights (default: initial).
/// The merit uses the max-one-rescaled mode volume.
WeightSearchResult optimize_weights(const ObjectiveGrams& grams,
                                    const ModeBasis& modes,
                                    CostWeights initial, int budget,
                                    EigenSelector selector =
                                        EigenSelector::SmallestEigenvalue,
                                    int volume_resolution = 16);

/// Zero-extends coefficients defined on a truncated-band basis to the full
/// basis band count.
Eigen::VectorXcd zero_extend(const Eigen::VectorXcd& a, int bands_from,
                             const ModeBasis& full);

struct InversionSystem {
    Eigen::MatrixXcd D;    // rows: modes (n, q); columns: k-grid entries
    Eigen::VectorXcd rhs;  // a_{n,q} (w_m^2 - w_{n,q}^2) (2 pi)^2
    double omega_m = 0.0;
    DefectFourier grid;    // zero-valued template carrying the k layout
};

/// Assembles the defect-extraction linear system at cavity frequency
/// omega_m (must lie strictly inside the gap).
InversionSystem build_inversion_system(const CavityExpansion& expansion,
                                       const ModeBasis& modes, double omega_m,
                                       std::pair<double, double> gap);

/// Truncated-SVD least-squares solve followed by reality symmetrization
/// deta_k <- (deta_k + conj(deta_{-k})) / 2.
DefectFourier solve_defect(const InversionSystem& system,
                           double svd_rel_tol = 1e-8);

struct HoleFit {
    int site = 0;
    double center_x = 0.0, center_y = 0.0;
    double major = 0.0, minor = 0.0; // semi-axes from second moments
    double angle = 0.0;              // major-axis angle, radians
    double eta_mean = 0.0;           // mean eta over the hole interior
    int pixel_count = 0;
};

struct Reconstruction {
    FieldGrid2D eta; // real-valued reciprocal dielectric on the grid
    double eta_min = 0.0, eta_max = 0.0;
    double level = 0.0; // contour level (min+max)/2
    std::vector<HoleFit> holes;
};

/// Rasterizes eta(r) = eta_0(r) + delta_eta(r) and extracts hole geometry
/// from the half-level contour via connected components and second-moment
/// ellipse fits.  Holes are numbered by distance from the origin.
Reconstruction reconstruct_and_contour(const DefectFourier& defect,
                                       const FourierDielectric& eta0,
                                       const ReciprocalBasis& basis,
                                       double half_extent, int resolution);

/// Refractive index implied by a reciprocal-dielectric value.
inline double index_from_eta(double eta) {
    return eta > 0.0 ? 1.0 / std::sqrt(eta) : 0.0;
}

} // namespace phcd

#endif
