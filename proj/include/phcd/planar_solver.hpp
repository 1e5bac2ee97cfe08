#ifndef PHCD_PLANAR_SOLVER_HPP
#define PHCD_PLANAR_SOLVER_HPP

// Finite-thickness slab electromagnetics: stationary fields under plane-wave
// illumination, reflection spectra, resonance Q extraction, and 3D mode
// volume.  Scalar (TE-like) Helmholtz model, solved slice by slice along the
// propagation axis: each slice of constant cross-section is diagonalized into
// transverse modes and propagated analytically; slices are joined with
// scattering matrices so evanescent modes never overflow.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phcd/lattice.hpp"

namespace phcd {

/// Per-site replacement of the nominal circular hole.  Sites are integer
/// lattice coordinates (m1, m2) over a1 = (1,0), a2 = (1/2, sqrt(3)/2).
/// major/minor are ellipse semi-axes along x/y; major = minor = 0 removes
/// the hole.
struct HoleOverride {
    int m1 = 0, m2 = 0;
    double center_x = 0.0, center_y = 0.0; // offsets from the lattice site
    double major = 0.0, minor = 0.0;
};

/// Decoded hole: axis-aligned ellipse cylinder through the slab.
struct Hole {
    double cx = 0.0, cy = 0.0;
    double major = 0.0, minor = 0.0;
};

struct SlabSpec {
    LatticeSpec lattice;
    double thickness = 0.75; // d/a
    int layers = 8;          // hexagonal rings of holes around the center
    std::vector<HoleOverride> holes; // per-site overrides
    int mesh = 12;           // cells per a, all axes
    double padding = 5.0;    // air above/below the slab, units of thickness

    void validate() const;
};

/// Hexagonal ring number of a site, 0 for the origin.
int hex_ring(int m1, int m2);
/// All sites with hex_ring <= layers, ordered by (ring, m1, m2).
std::vector<GIndex> lattice_sites(int layers);
Vec2 site_position(const GIndex& site);
/// Nominal holes plus overrides (zero-size overrides drop the site).
std::vector<Hole> decode_holes(const SlabSpec& spec);

enum class Incidence {
    Edge,    // plane wave along +x, periodic y, absorbing z strips
    Vertical // plane wave along +z, periodic x and y
};

struct FieldGrid3D {
    double x0 = 0, x1 = 0, y0 = 0, y1 = 0, z0 = 0, z1 = 0;
    int nx = 0, ny = 0, nz = 0;
    std::vector<complexd> values; // index ix + nx*(iy + ny*iz)
    double max_abs = 0.0;

    complexd& at(int ix, int iy, int iz) {
        return values[ix + static_cast<std::size_t>(nx) * (iy + static_cast<std::size_t>(ny) * iz)];
    }
    const complexd& at(int ix, int iy, int iz) const {
        return values[ix + static_cast<std::size_t>(nx) * (iy + static_cast<std::size_t>(ny) * iz)];
    }
    double x_of(int i) const { return x0 + (x1 - x0) * i / (nx - 1); }
    double y_of(int i) const { return y0 + (y1 - y0) * i / (ny - 1); }
    double z_of(int i) const { return z0 + (z1 - z0) * i / (nz - 1); }

    /// Little-endian binary: int64 dims[3], double extents[6], then
    /// nx*ny*nz (re, im) doubles in storage order.
    void write_binary(const std::string& path) const;
    std::string to_ascii() const;
};

struct SimulateOptions {
    Incidence incidence = Incidence::Edge;
    bool want_field = false;
    double margin = 1.0;            // air run-up along the propagation axis
    double absorber_strength = 3.0; // peak Im(n^2) of the graded absorber
};

struct SimResult {
    double reflectance = 0.0;
    double transmittance = 0.0;
    std::optional<FieldGrid3D> field;
};

/// Stationary response at one frequency (a/lambda units).
SimResult simulate(const SlabSpec& spec, double omega,
                   const SimulateOptions& opt = {});

struct ReflectionSpectrum {
    std::vector<double> frequency;    // ascending
    std::vector<double> reflectance;
    std::vector<double> transmittance;
    std::string to_csv() const; // omega, R, T
};

/// Uniform n_points grid over [range.first, range.second] plus three levels
/// of refinement around detected reflection dips.
ReflectionSpectrum scan_reflection(const SlabSpec& spec,
                                   std::pair<double, double> range,
                                   int n_points,
                                   const SimulateOptions& opt = {});

struct Resonance {
    double omega0 = 0.0;
    double q = 0.0;       // omega0 / fwhm
    double fwhm = 0.0;
    double depth = 0.0;   // dip depth below the baseline
    double baseline = 0.0;
};

/// All Lorentzian dip candidates with prominence above min_prominence,
/// each refined by a least-squares fit.
std::vector<Resonance> find_resonances(const ReflectionSpectrum& spectrum,
                                       double min_prominence = 0.02);

/// Exactly one resonance; throws SolverError on none or several.
Resonance extract_q(const ReflectionSpectrum& spectrum,
                    double min_prominence = 0.02);

/// Least-squares Lorentzian dip fit y = baseline - depth / (1 + (2(x-x0)/g)^2)
/// by Levenberg-Marquardt; returns (baseline, depth, x0, g).
std::array<double, 4> fit_lorentzian_dip(const std::vector<double>& x,
                                         const std::vector<double>& y,
                                         std::array<double, 4> initial);

/// Inclusive index box inside a FieldGrid3D.
struct Region3D {
    int ix0 = 0, ix1 = 0, iy0 = 0, iy1 = 0, iz0 = 0, iz1 = 0;
};

/// V = integral |E|^2 dV / max |E|^2 over the region, composite Simpson
/// quadrature per axis (3/8 tail when the interval count is odd).
double mode_volume_3d(const FieldGrid3D& field, const Region3D& interior);
/// Whole-grid overload.
double mode_volume_3d(const FieldGrid3D& field);

/// Simpson point weights for n samples spanning length L (n >= 2).
std::vector<double> simpson_weights(int n, double length);

} // namespace phcd

#endif
