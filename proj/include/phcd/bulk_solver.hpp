#ifndef PHCD_BULK_SOLVER_HPP
#define PHCD_BULK_SOLVER_HPP

// Plane-wave-expansion eigensolver for bulk TE/TM Bloch modes and the
// band-structure / band-gap computation along the Gamma-X-J-Gamma path.
// (X and J are alternate labels for the points conventionally called M
// and K.)

#include <optional>
#include <string>
#include <vector>

#include "phcd/lattice.hpp"

namespace phcd {

enum class Polarization { TE, TM };

/// One Bloch eigenmode.
struct BulkMode {
    int band = 0;           // ascending by frequency, 0-based
    Vec2 q;                 // folded wavevector
    double omega = 0.0;     // a/lambda units
    Eigen::VectorXcd h;     // plane-wave coefficients, one per basis G
    Polarization pol = Polarization::TE;
};

/// Assembles the N_G x N_G plane-wave operator at wavevector q.
/// TE entries eta_{G-G'} (q+G).(q+G'), TM entries eta_{G-G'} |q+G||q+G'|.
Eigen::MatrixXcd assemble_operator(const FourierDielectric& eta,
                                   const ReciprocalBasis& basis, const Vec2& q,
                                   Polarization pol);

/// Lowest n_bands eigenpairs at q.  Eigenvectors are unit-normalized with a
/// deterministic phase; degenerate clusters are ordered by descending |h| of
/// the lowest-index G.
std::vector<BulkMode> solve_bands(const FourierDielectric& eta,
                                  const ReciprocalBasis& basis, const Vec2& q,
                                  Polarization pol, int n_bands);

struct BandStructure {
    std::vector<Vec2> path;              // q along Gamma-X-J-Gamma
    std::vector<double> path_coordinate; // cumulative arc length
    std::vector<std::string> labels;     // per-vertex labels at the vertices
    std::vector<std::vector<double>> bands; // bands[qi]: ascending frequencies
    std::optional<std::pair<double, double>> gap; // (omega_low, omega_high)
};

/// Bands along the high-symmetry path with path_resolution points per
/// segment.  A gap is reported for the lowest pair of consecutive bands
/// separated over the whole path.
BandStructure band_structure(const FourierDielectric& eta,
                             const ReciprocalBasis& basis, int path_resolution,
                             Polarization pol, int n_bands);

/// Gap between consecutive bands over an arbitrary set of band lists;
/// returns the lowest-index nonempty gap.
std::optional<std::pair<double, double>>
detect_gap(const std::vector<std::vector<double>>& bands);

/// Bloch field H_{n,q}(r) = sum_G h_{q+G} exp(i (q+G).r) at one point.
complexd mode_field(const BulkMode& mode, const ReciprocalBasis& basis,
                    const Vec2& r);

/// CSV export: path_coordinate, q_x, q_y, band_0, band_1, ...
std::string band_structure_csv(const BandStructure& bs);

} // namespace phcd

#endif
