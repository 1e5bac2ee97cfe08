#ifndef PHCD_DEFECT_MODEL_HPP
#define PHCD_DEFECT_MODEL_HPP

// Defect perturbation delta-eta on the {q+G} wavevector grid, the
// defect-coupled eigenproblem over the bulk-mode basis, and real-space
// synthesis of cavity fields.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phcd/bulk_solver.hpp"
#include "phcd/lattice.hpp"

namespace phcd {

/// Bulk modes for every q of a BZ sampling, n_bands bands per q.
/// Flat ordering: index = qi * n_bands + band.
struct ModeBasis {
    ReciprocalBasis basis;
    BzSampling bz;
    Polarization pol = Polarization::TE;
    int n_bands = 0;
    std::vector<Eigen::MatrixXcd> h;    // [qi]: N_G x n_bands, unit columns
    std::vector<Eigen::VectorXd> omega; // [qi]: n_bands, a/lambda units

    int dim() const { return bz.size() * n_bands; }
    int flat(int qi, int band) const { return qi * n_bands + band; }
    /// View with fewer bands per q (shares no state, plain copy).
    ModeBasis truncated(int bands) const;
};

ModeBasis solve_mode_basis(const FourierDielectric& eta,
                           const ReciprocalBasis& basis, const BzSampling& bz,
                           Polarization pol, int n_bands);

/// Fourier coefficients of the defect perturbation on the grid
/// k = q + G, stored by exact integer coordinates (I, J):
/// k = (I*b1 + J*b2)/division.
struct DefectFourier {
    int division = 1;
    Vec2 b1, b2;
    std::vector<std::pair<int, int>> k_keys; // ordered qi-major, then G
    std::unordered_map<std::int64_t, complexd> coeff;
    double strict_radius = 0.0; // lookups below this |k| must be present

    Vec2 vector_of(int I, int J) const {
        return (static_cast<double>(I) * b1 + static_cast<double>(J) * b2) /
               division;
    }
    /// Coefficient at fine coordinates (I, J); zero beyond strict_radius,
    /// MissingCoefficientError if an in-range coefficient is absent.
    complexd at(int I, int J) const;
    void set(int I, int J, complexd v) { coeff[pack_index(I, J)] = v; }
    int size() const { return static_cast<int>(k_keys.size()); }
};

/// Zero-initialized defect grid over {q+G} for the given sampling/basis.
DefectFourier make_defect_grid(const ReciprocalBasis& basis,
                               const BzSampling& bz);

/// Adds a filled-disc perturbation of the given amplitude (value of
/// delta-eta inside the disc) centered at `center`, periodic over the
/// supercell implied by the sampling.
void add_disc(DefectFourier& defect, const Vec2& center, double radius,
              double amplitude);

/// D_{nq;n'q'} = sum_{G,G'} h*_{n,q+G} deta_{q+G-q'-G'} h_{n',q'+G'}
///               (q+G).(q'+G')  +  delta_{nn'} delta_{qq'} (2 pi w_{n,q})^2.
/// TM basis uses |q+G||q'+G'| in place of the dot product.
Eigen::MatrixXcd assemble_defect_operator(const ModeBasis& modes,
                                          const DefectFourier& defect);

/// Coefficients of one cavity mode over the bulk-mode basis.
struct CavityExpansion {
    Eigen::VectorXcd a;   // unit norm, length ModeBasis::dim()
    double omega = 0.0;   // a/lambda units
    int mode_index = 0;
};

/// Eigenpairs of the defect operator with frequency strictly inside the gap.
/// Empty when the defect is too weak to pull a mode into the gap.
std::vector<CavityExpansion>
solve_cavity_modes(const Eigen::MatrixXcd& D,
                   std::pair<double, double> gap);

struct FieldGrid2D {
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0; // extent, units of a
    int nx = 0, ny = 0;
    Eigen::MatrixXcd values; // nx rows (x index), ny cols (y index)
    double max_abs = 0.0;

    double x_of(int ix) const { return x0 + (x1 - x0) * ix / (nx - 1); }
    double y_of(int iy) const { return y0 + (y1 - y0) * iy / (ny - 1); }
    /// Max-one normalized copy.
    FieldGrid2D max_one() const;
    std::string to_ascii() const; // 3-line header + |value| matrix
    std::string to_csv() const;   // x, y, Re, Im, abs
};

/// H_m(r) = sum_{n,q} a_{n,q} H_{n,q}(r) sampled on a centered square grid
/// of half-width `half_extent`, `resolution` samples per unit length.
FieldGrid2D synthesize_field(const CavityExpansion& expansion,
                             const ModeBasis& modes, double half_extent,
                             int resolution);

/// Plane-wave amplitudes of the synthesized field on the {q+G} grid,
/// ordered like DefectFourier::k_keys.
Eigen::VectorXcd plane_wave_amplitudes(const CavityExpansion& expansion,
                                       const ModeBasis& modes);

/// In-plane E field from a TE (H out-of-plane) cavity mode:
/// E = i grad x H / (omega kappa), with kappa sampled from eta_grid.
/// Post-processing export only.
std::pair<FieldGrid2D, FieldGrid2D>
efield_from_h(const CavityExpansion& expansion, const ModeBasis& modes,
              const FieldGrid2D& eta_grid);

} // namespace phcd

#endif
