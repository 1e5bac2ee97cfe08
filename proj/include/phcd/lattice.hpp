#ifndef PHCD_LATTICE_HPP
#define PHCD_LATTICE_HPP

// Real/reciprocal lattice geometry, Brillouin-zone sampling and the Fourier
// representation of the bulk reciprocal dielectric.
//
// Unit conventions used throughout the library:
//   - lengths in units of the lattice constant a (a = 1 internally),
//   - wavevectors in absolute radians, so |b1| = |b2| = 4*pi/sqrt(3) for the
//     hexagonal lattice,
//   - frequencies in a/lambda, i.e. omega_reduced = omega * a / (2*pi*c).
// The light line in these units is omega_reduced = |q| / (2*pi).

#include <complex>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "phcd/errors.hpp"

namespace phcd {

using complexd = std::complex<double>;
using Vec2 = Eigen::Vector2d;

enum class LatticeType { Hexagonal };

/// Bulk 2D crystal geometry and materials.
struct LatticeSpec {
    double lattice_constant = 1.0; // normalization unit, a = 1 internally
    double hole_radius = 0.3;      // r_h / a, in (0, 0.5)
    double bulk_index = 3.4;       // n_b >= 1
    double hole_index = 1.0;       // n_h >= 1
    LatticeType type = LatticeType::Hexagonal;

    double eta_bulk() const { return 1.0 / (bulk_index * bulk_index); }
    double eta_hole() const { return 1.0 / (hole_index * hole_index); }
    /// Hole area fraction of the unit cell.
    double fill_fraction() const;
    /// Throws ConfigError on invariant violation.
    void validate() const;
};

/// Integer coordinates of a reciprocal lattice vector in the (b1, b2) basis.
struct GIndex {
    int m1 = 0;
    int m2 = 0;
    friend bool operator==(const GIndex&, const GIndex&) = default;
};

/// Packs two small integers into a hashable key. Valid for |v| < 2^20.
inline std::int64_t pack_index(int a, int b) {
    return (static_cast<std::int64_t>(a + (1 << 20)) << 21) |
           static_cast<std::int64_t>(b + (1 << 20));
}

struct ReciprocalBasis {
    Vec2 b1, b2;
    std::vector<GIndex> g_index; // sorted by |G|, then lexicographic (m1, m2)
    std::vector<Vec2> g;         // cached vectors, same order
    double max_shell_norm = 0.0; // |G| of the outermost retained shell

    int size() const { return static_cast<int>(g_index.size()); }
    Vec2 vector_of(const GIndex& gi) const {
        return gi.m1 * b1 + gi.m2 * b2;
    }
    /// Position of a G index in the list, -1 if absent.
    int find(const GIndex& gi) const {
        auto it = lookup_.find(pack_index(gi.m1, gi.m2));
        return it == lookup_.end() ? -1 : it->second;
    }
    void rebuild_lookup();

private:
    std::unordered_map<std::int64_t, int> lookup_;
};

/// One Brillouin-zone sample.  The point is stored both as exact fractional
/// numerators of the Monkhorst-Pack grid and as the folded representative.
struct BzPoint {
    int i = 0, j = 0;   // pre-fold numerators, q_raw = (i*b1 + j*b2)/division
    int fi = 0, fj = 0; // folded numerators, q = (fi*b1 + fj*b2)/division
    Vec2 q;             // folded representative, minimal norm
    double weight = 0.0;
};

struct BzSampling {
    int division = 1; // Monkhorst-Pack division
    Vec2 b1, b2;
    std::vector<BzPoint> points;
    double bz_area = 0.0;

    /// residue (i mod division, j mod division) -> position in points
    std::unordered_map<std::int64_t, int> residue_lookup;

    int size() const { return static_cast<int>(points.size()); }
    /// Index of the grid point with residue (i mod division, j mod division),
    /// -1 if that residue is not part of the sampling.
    int index_of_residue(int i, int j) const;
};

/// The n_g shortest reciprocal vectors, rounded up to closed shells so the
/// list is closed under negation.
ReciprocalBasis build_reciprocal_basis(const LatticeSpec& spec, int n_g);

/// Fourier coefficients of the bulk reciprocal dielectric eta_0(r), computed
/// on the difference-closed set {G - G'} of the basis.
struct FourierDielectric {
    std::unordered_map<std::int64_t, complexd> coeff;
    Vec2 b1, b2;

    complexd at(const GIndex& gi) const {
        auto it = coeff.find(pack_index(gi.m1, gi.m2));
        if (it == coeff.end())
            throw MissingCoefficientError(
                "eta Fourier coefficient missing for G index (" +
                std::to_string(gi.m1) + ", " + std::to_string(gi.m2) + ")");
        return it->second;
    }
};

FourierDielectric eta_fourier(const LatticeSpec& spec,
                              const ReciprocalBasis& basis);

/// Minimal-norm representative of q modulo the reciprocal lattice, with
/// deterministic lexicographic tie-breaking on the zone boundary.
Vec2 fold_to_bz(const ReciprocalBasis& basis, const Vec2& q);

/// Same, returning the integer shift applied: q_folded = q + s1*b1 + s2*b2.
GIndex fold_shift(const ReciprocalBasis& basis, const Vec2& q);

/// Full division x division Monkhorst-Pack grid folded into the first BZ.
/// The grid contains Gamma and is closed under point differences modulo the
/// reciprocal lattice.
BzSampling monkhorst_pack(const ReciprocalBasis& basis, int division);

/// Exactly n_q distinct points: the n_q points of the smallest covering
/// Monkhorst-Pack grid closest to Gamma, in deterministic order.
BzSampling sample_brillouin_zone(const ReciprocalBasis& basis, int n_q);

/// True iff omega < c|q|, with omega in a/lambda units.
bool is_below_light_line(const Vec2& q, double omega);

} // namespace phcd

#endif
