#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "phcd/defect_model.hpp"
#include "phcd/linalg.hpp"

using namespace phcd;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

LatticeSpec crystal() {
    LatticeSpec s;
    s.hole_radius = 0.3;
    s.bulk_index = 3.4;
    s.hole_index = 1.0;
    return s;
}

LatticeSpec soft_crystal() {
    LatticeSpec s;
    s.hole_radius = 0.3;
    s.bulk_index = 2.0;
    s.hole_index = 1.0;
    return s;
}

// Rasterized DFT of a periodic filled disc over the div x div supercell,
// evaluated at k = (I b1 + J b2)/div.  Independent of the closed form.
complexd disc_dft(const DefectFourier& d, const Vec2& center, double radius,
                  double amplitude, int I, int J, int n) {
    const Vec2 a1(1.0, 0.0), a2(0.5, std::sqrt(3.0) / 2.0);
    const int div = d.division;
    const double cu = d.b1.dot(center) / kTwoPi;
    const double cv = d.b2.dot(center) / kTwoPi;
    complexd acc(0.0, 0.0);
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) {
            const double u = div * (p + 0.5) / n;
            const double v = div * (q + 0.5) / n;
            bool inside = false;
            for (int s1 = -1; s1 <= 1 && !inside; ++s1)
                for (int s2 = -1; s2 <= 1 && !inside; ++s2) {
                    const Vec2 r = (u - cu + s1 * div) * a1 +
                                   (v - cv + s2 * div) * a2;
                    inside = r.norm() <= radius;
                }
            if (!inside)
                continue;
            const double phase =
                -kTwoPi * (I * (p + 0.5) + J * (q + 0.5)) / n;
            acc += complexd(std::cos(phase), std::sin(phase));
        }
    return amplitude * acc / static_cast<double>(n) / static_cast<double>(n);
}

// Brute-force supercell plane-wave assembly over the flattened {q+G} basis.
// Couplings: bulk eta on exact lattice differences (same q), the defect
// perturbation on every grid difference.  Shares only DefectFourier::at and
// the bulk Fourier table with the implementation under test.
Eigen::MatrixXcd supercell_plane_wave_operator(const FourierDielectric& eta,
                                               const ModeBasis& modes,
                                               const DefectFourier& defect) {
    const int ng = modes.basis.size();
    const int nq = modes.bz.size();
    const int dim = nq * ng;
    const int div = defect.division;
    const bool te = modes.pol == Polarization::TE;
    Eigen::MatrixXcd A(dim, dim);
    for (int qa = 0; qa < nq; ++qa)
        for (int ga = 0; ga < ng; ++ga) {
            const BzPoint& pa = modes.bz.points[qa];
            const GIndex& gia = modes.basis.g_index[ga];
            const Vec2 ka = pa.q + modes.basis.g[ga];
            const int Ia = pa.fi + div * gia.m1;
            const int Ja = pa.fj + div * gia.m2;
            for (int qc = 0; qc < nq; ++qc)
                for (int gc = 0; gc < ng; ++gc) {
                    const BzPoint& pc = modes.bz.points[qc];
                    const GIndex& gic = modes.basis.g_index[gc];
                    const Vec2 kc = pc.q + modes.basis.g[gc];
                    const int Ic = pc.fi + div * gic.m1;
                    const int Jc = pc.fj + div * gic.m2;
                    complexd coeff = defect.at(Ia - Ic, Ja - Jc);
                    if (qa == qc)
                        coeff += eta.at({gia.m1 - gic.m1, gia.m2 - gic.m2});
                    const double geom =
                        te ? ka.dot(kc) : ka.norm() * kc.norm();
                    A(qa * ng + ga, qc * ng + gc) = coeff * geom;
                }
        }
    return A;
}

// Real-space finite-difference oracle: -div(eta grad H) = (2 pi w)^2 H with
// periodic boundaries over the div x div supercell, discretized in lattice
// coordinates (flux form on the diagonal metric terms, centered differences
// on the cross terms; the result is symmetric).  Returns the lowest `count`
// frequencies.
std::vector<double> fd_supercell_frequencies(const LatticeSpec& spec,
                                             const Vec2& defect_center,
                                             double defect_radius,
                                             double defect_amplitude,
                                             int division, int res,
                                             int count) {
    const int n = division * res;
    const double h = 1.0 / res; // step in lattice coordinates
    const Vec2 a1(1.0, 0.0), a2(0.5, std::sqrt(3.0) / 2.0);
    const Vec2 b1 = kTwoPi * Vec2(1.0, -1.0 / std::sqrt(3.0));
    const Vec2 b2 = kTwoPi * Vec2(0.0, 2.0 / std::sqrt(3.0));
    const double m11 = b1.dot(b1) / (kTwoPi * kTwoPi);
    const double m12 = b1.dot(b2) / (kTwoPi * kTwoPi);
    const double m22 = b2.dot(b2) / (kTwoPi * kTwoPi);
    const double dcu = b1.dot(defect_center) / kTwoPi;
    const double dcv = b2.dot(defect_center) / kTwoPi;

    auto eta_sample = [&](double u, double v) {
        double best = 1e9;
        const double iu = std::round(u), iv = std::round(v);
        for (int d1 = -1; d1 <= 1; ++d1)
            for (int d2 = -1; d2 <= 1; ++d2) {
                const Vec2 r = (u - iu - d1) * a1 + (v - iv - d2) * a2;
                best = std::min(best, r.norm());
            }
        double e = best <= spec.hole_radius ? spec.eta_hole()
                                            : spec.eta_bulk();
        for (int s1 = -1; s1 <= 1; ++s1)
            for (int s2 = -1; s2 <= 1; ++s2) {
                const Vec2 r = (u - dcu + s1 * division) * a1 +
                               (v - dcv + s2 * division) * a2;
                if (r.norm() <= defect_radius) {
                    e += defect_amplitude;
                    s1 = s2 = 2;
                }
            }
        return e;
    };
    // 3x3 subpixel average tames the staircase on material boundaries
    auto eta_point = [&](double u, double v) {
        double acc = 0.0;
        for (int su = -1; su <= 1; ++su)
            for (int sv = -1; sv <= 1; ++sv)
                acc += eta_sample(u + su * h / 3.0, v + sv * h / 3.0);
        return acc / 9.0;
    };

    Eigen::MatrixXd node(n, n), mid_u(n, n), mid_v(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            node(i, j) = eta_point(i * h, j * h);
            mid_u(i, j) = eta_point((i + 0.5) * h, j * h);
            mid_v(i, j) = eta_point(i * h, (j + 0.5) * h);
        }

    const int dim = n * n;
    auto id = [&](int i, int j) {
        return ((i % n + n) % n) * n + ((j % n + n) % n);
    };
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
    const double inv_h2 = 1.0 / (h * h);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int p = id(i, j);
            const int pu = id(i + 1, j), pv = id(i, j + 1);
            const double cu = m11 * mid_u(i, j) * inv_h2;
            A(p, p) += cu;
            A(pu, pu) += cu;
            A(p, pu) -= cu;
            A(pu, p) -= cu;
            const double cv = m22 * mid_v(i, j) * inv_h2;
            A(p, p) += cv;
            A(pv, pv) += cv;
            A(p, pv) -= cv;
            A(pv, p) -= cv;
            auto wrap = [&](int k) { return (k % n + n) % n; };
            for (int su = -1; su <= 1; su += 2)
                for (int sv = -1; sv <= 1; sv += 2)
                    A(p, id(i + su, j + sv)) -=
                        m12 * su * sv *
                        (node(wrap(i + su), j) + node(i, wrap(j + sv))) *
                        0.25 * inv_h2;
        }

    const auto eig = linalg::eigh(A.cast<complexd>());
    std::vector<double> out;
    for (int i = 0; i < count; ++i)
        out.push_back(std::sqrt(std::max(0.0, eig.values[i])) / kTwoPi);
    return out;
}

std::vector<double> frequencies_of(const Eigen::VectorXd& lambda, int count) {
    std::vector<double> out;
    for (int i = 0; i < count; ++i)
        out.push_back(std::sqrt(std::max(0.0, lambda[i])) / kTwoPi);
    return out;
}

} // namespace

TEST_CASE("mode basis dimensions, normalization and truncation") {
    const LatticeSpec spec = crystal();
    const ReciprocalBasis basis = build_reciprocal_basis(spec, 13);
    const FourierDielectric eta = eta_fourier(spec, basis);
    const BzSampling bz = monkhorst_pack(basis, 3);
    const ModeBasis modes = solve_mode_basis(eta, basis, bz, Polarization::TE, 5);
    CHECK(modes.dim() == 9 * 5);
    REQUIRE(modes.h.size() == 9);
    for (int qi = 0; qi < 9; ++qi) {
        CHECK(modes.h[qi].rows() == 13);
        CHECK(modes.h[qi].cols() == 5);
        for (int b = 0; b < 5; ++b) {
            CHECK(modes.h[qi].col(b).norm() == doctest::Approx(1.0));
            if (b > 0)
                CHECK(modes.omega[qi][b] >= modes.omega[qi][b - 1] - 1e-12);
        }
    }
    const ModeBasis cut = modes.truncated(2);
    CHECK(cut.n_bands == 2);
    CHECK(cut.dim() == 18);
    for (int qi = 0; qi < 9; ++qi) {
        CHECK((cut.h[qi] - modes.h[qi].leftCols(2)).norm() == 0.0);
        CHECK((cut.omega[qi] - modes.omega[qi].head(2)).norm() == 0.0);
    }
    CHECK_THROWS_AS(modes.truncated(6), ConfigError);
    CHECK_THROWS_AS(modes.truncated(0), ConfigError);
}

TEST_CASE("defect grid covers {q+G}, zero-filled, with strict lookups") {
    const LatticeSpec spec = crystal();
    const ReciprocalBasis basis = build_reciprocal_basis(spec, 13);
    const BzSampling bz = monkhorst_pack(basis, 3);
    DefectFourier d = make_defect_grid(basis, bz);
    CHECK(d.size() == 9 * 13);
    CHECK(d.division == 3);
    CHECK(d.strict_radius > 0.0);
    for (const auto& [I, J] : d.k_keys)
        CHECK(std::abs(d.at(I, J)) == 0.0);
    // far outside the resolved range: silently zero
    CHECK(std::abs(d.at(3000, -3000)) == 0.0);
    // a missing coefficient inside the resolved range is an error
    d.coeff.erase(pack_index(1, 0));
    REQUIRE(d.vector_of(1, 0).norm() < d.strict_radius);
    CHECK_THROWS_AS((void)d.at(1, 0), MissingCoefficientError);
}

TEST_CASE("disc perturbation coefficients match a rasterized DFT oracle") {
    const LatticeSpec spec = crystal();
    const ReciprocalBasis basis = build_reciprocal_basis(spec, 13);
    const BzSampling bz = monkhorst_pack(basis, 3);
    DefectFourier d = make_defect_grid(basis, bz);
    const Vec2 center(0.12, -0.07);
    const double radius = 0.25, amplitude = 0.8;
    add_disc(d, center, radius, amplitude);
    const std::vector<std::pair<int, int>> probes = {
        {0, 0}, {1, 0}, {-1, 2}, {3, 1}, {-4, -2}, {6, 0}};
    for (const auto& [I, J] : probes) {
        const complexd oracle =
            disc_dft(d, center, radius, amplitude, I, J, 540);
        CHECK(std::abs(d.at(I, J) - oracle) < 1e-3);
        // real perturbation: Hermitian coefficient symmetry
        CHECK(std::abs(d.at(-I, -J) - std::conj(d.at(I, J))) < 1e-14);
    }
}

TEST_CASE("zero defect leaves the operator diagonal with bulk frequencies") {
    const LatticeSpec spec = crystal();
    const ReciprocalBasis basis = build_reciprocal_basis(spec, 13);
    const FourierDielectric eta = eta_fourier(spec, basis);
    const BzSampling bz = monkhorst_pack(basis, 3);
    const ModeBasis modes =
        solve_mode_basis(eta, basis, bz, Polarization::TE, 4);
    const DefectFourier d = make_defect_grid(basis, bz);
    const Eigen::MatrixXcd D = assemble_defect_operator(modes, d);
    for (int a = 0; a < modes.dim(); ++a)
        for (int b = 0; b < modes.dim(); ++b) {
            if (a == b) {
                const double w = modes.omega[a / 4][a % 4];
                CHECK(D(a, a).real() ==
                      doctest::Approx(kTwoPi * w * kTwoPi * w));
                CHECK(std::abs(D(a, a).imag()) < 1e-14);
            } else {
                CHECK(std::abs(D(a, b)) < 1e-14);
            }
        }
    // and no spurious state appears between the sampled bands 0 and 1
    double lo = 0.0, hi = 1e9;
    for (int qi = 0; qi < bz.size(); ++qi) {
        lo = std::max(lo, modes.omega[qi][0]);
        hi = std::min(hi, modes.omega[qi][1]);
    }
    REQUIRE(lo < hi);
    CHECK(solve_cavity_modes(D, {lo + 1e-9, hi - 1e-9}).empty());
}

TEST_CASE("single-mode constant perturbation matches the hand-evaluated sum") {
    const LatticeSpec spec = crystal();
    const ReciprocalBasis basis = build_reciprocal_basis(spec, 7);
    const FourierDielectric eta = eta_fourier(spec, basis);
    const BzSampling bz = sample_brillouin_zone(basis, 1); // Gamma only
    const ModeBasis modes =
        solve_mode_basis(eta, basis, bz, Polarization::TE, 1);
    DefectFourier d = make_defect_grid(basis, bz);
    const double c0 = 0.37;
    d.set(0, 0, c0);
    const Eigen::MatrixXcd D = assemble_defect_operator(modes, d);
    REQUIRE(D.rows() == 1);
    double sum = 0.0;
    for (int gi = 0; gi < basis.size(); ++gi)
        sum += std::norm(modes.h[0](gi, 0)) * basis.g[gi].squaredNorm();
    const double w = modes.omega[0][0];
    CHECK(D(0, 0).real() ==
          doctest::Approx(c0 * sum + kTwoPi * w * kTwoPi * w).epsilon(1e-12));
}

TEST_CASE("operator is Hermitian for a real defect; division must match") {
    const LatticeSpec spec = crystal();
    const ReciprocalBasis basis = build_reciprocal_basis(spec, 19);
    const FourierDielectric eta = eta_fourier(spec, basis);
    const BzSampling bz = monkhorst_pack(basis, 4);
    const ModeBasis modes =
        solve_mode_basis(eta, basis, bz, Polarization::TE, 3);
    DefectFourier d = make_defect_grid(basis, bz);
    add_disc(d, Vec2(0.2, 0.1), 0.3, -0.5);
    const Eigen::MatrixXcd D = assemble_defect_operator(modes, d);
    const double scale = D.cwiseAbs().maxCoeff();
    CHECK((D - D.adjoint()).cwiseAbs().maxCoeff() < 1e-10 * scale);

    const BzSampling other = monkhorst_pack(basis, 5);
    const DefectFourier mismatched = make_defect_grid(basis, other);
    CHECK_THROWS_AS(assemble_defect_operator(modes, mismatched), ConfigError);
}

TEST_CASE("full-band operator spectrum equals a direct supercell assembly") {
    const LatticeSpec spec = crystal();
    const ReciprocalBasis basis = build_reciprocal_basis(spec, 13);
    const FourierDielectric eta = eta_fourier(spec, basis);
    const BzSampling bz = monkhorst_pack(basis, 3);
    for (Polarization pol : {Polarization::TE, Polarization::TM}) {
        const ModeBasis modes =
            solve_mode_basis(eta, basis, bz, pol, basis.size());
        DefectFourier d = make_defect_grid(basis, bz);
        add_disc(d, Vec2(0.0, 0.0), 0.3, spec.eta_bulk() - spec.eta_hole());
        add_disc(d, Vec2(0.3, 0.2), 0.15, 0.4);
        const Eigen::MatrixXcd D = assemble_defect_operator(modes, d);
        const Eigen::MatrixXcd A =
            supercell_plane_wave_operator(eta, modes, d);
        const auto ed = linalg::eigh(D);
        const auto ea = linalg::eigh(0.5 * (A + A.adjoint()));
        REQUIRE(ed.values.size() == ea.values.size());
        const double scale = ea.values.cwiseAbs().maxCoeff();
        for (int i = 0; i < ed.values.size(); ++i)
            CHECK(std::abs(ed.values[i] - ea.values[i]) < 1e-8 * scale);
    }
}

TEST_CASE("spectrum agrees with a real-space finite-difference supercell") {
    const LatticeSpec spec = soft_crystal();
    const Vec2 center(0.0, 0.0);
    const double radius = 0.3;
    const double amp = spec.eta_bulk() - spec.eta_hole(); // fill the hole
    const int division = 2, count = 7;

    const ReciprocalBasis basis = build_reciprocal_basis(spec, 37);
    const FourierDielectric eta = eta_fourier(spec, basis);
    const BzSampling bz = monkhorst_pack(basis, division);
    const ModeBasis modes =
        solve_mode_basis(eta, basis, bz, Polarization::TE, basis.size());
    DefectFourier d = make_defect_grid(basis, bz);
    add_disc(d, center, radius, amp);
    const auto eig = linalg::eigh(assemble_defect_operator(modes, d));
    const std::vector<double> model = frequencies_of(eig.values, count);

    // first-order Richardson in the grid step absorbs the staircase error
    const auto coarse =
        fd_supercell_frequencies(spec, center, radius, amp, division, 12, count);
    const auto fine =
        fd_supercell_frequencies(spec, center, radius, amp, division, 24, count);
    for (int i = 1; i < count; ++i) {
        const double oracle = 2.0 * fine[i] - coarse[i];
        CHECK(std::abs(model[i] - oracle) < 0.02 * oracle);
    }
    CHECK(model[0] < 0.02); // near-uniform mode stays near zero
}

TEST_CASE("filling the central hole pulls a localized mode into the gap") {
    const LatticeSpec spec = crystal();
    const ReciprocalBasis basis = build_reciprocal_basis(spec, 37);
    const FourierDielectric eta = eta_fourier(spec, basis);
    const BandStructure bs = band_structure(eta, basis, 8, Polarization::TE, 4);
    REQUIRE(bs.gap.has_value());

    const BzSampling bz = monkhorst_pack(basis, 5);
    const ModeBasis modes =
        solve_mode_basis(eta, basis, bz, Polarization::TE, basis.size());
    DefectFourier d = make_defect_grid(basis, bz);
    add_disc(d, Vec2(0.0, 0.0), spec.hole_radius,
             spec.eta_bulk() - spec.eta_hole());
    const Eigen::MatrixXcd D = assemble_defect_operator(modes, d);
    const auto cavity = solve_cavity_modes(D, *bs.gap);
    REQUIRE(!cavity.empty());
    for (const CavityExpansion& m : cavity) {
        CHECK(m.a.norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.omega > bs.gap->first);
        CHECK(m.omega < bs.gap->second);
        const double lambda = kTwoPi * m.omega * kTwoPi * m.omega;
        CHECK((D * m.a - lambda * m.a).norm() < 1e-8 * lambda);
    }
}

TEST_CASE("solve_cavity_modes rejects a non-Hermitian operator") {
    Eigen::MatrixXcd D(2, 2);
    D << 1.0, complexd(0.0, 1.0), 0.0, 2.0;
    CHECK_THROWS_AS(solve_cavity_modes(D, {0.0, 1.0}), ConfigError);
}

TEST_CASE("field synthesis: plane-wave sum, linearity, normalization") {
    const LatticeSpec spec = crystal();
    const ReciprocalBasis basis = build_reciprocal_basis(spec, 13);
    const FourierDielectric eta = eta_fourier(spec, basis);
    const BzSampling bz = monkhorst_pack(basis, 3);
    const ModeBasis modes =
        solve_mode_basis(eta, basis, bz, Polarization::TE, 2);

    CavityExpansion single;
    single.a = Eigen::VectorXcd::Zero(modes.dim());
    single.a[modes.flat(4, 1)] = 1.0;
    single.omega = modes.omega[4][1];
    const FieldGrid2D grid = synthesize_field(single, modes, 1.5, 8);
    CHECK(grid.nx == 25); // 2 * 1.5 * 8 + 1 samples across the extent
    // direct Bloch sum at a few grid nodes
    const BzPoint& p = modes.bz.points[4];
    const std::vector<std::pair<int, int>> nodes = {{0, 0}, {7, 3}, {12, 20}};
    for (const auto& [ix, iy] : nodes) {
        const Vec2 r(grid.x_of(ix), grid.y_of(iy));
        complexd direct(0.0, 0.0);
        for (int gi = 0; gi < basis.size(); ++gi) {
            const Vec2 k = p.q + basis.g[gi];
            direct += modes.h[4](gi, 1) *
                      std::exp(complexd(0.0, k.dot(r)));
        }
        CHECK(std::abs(grid.values(ix, iy) - direct) < 1e-12);
    }

    // linearity before max-one normalization
    CavityExpansion other = single;
    other.a = Eigen::VectorXcd::Random(modes.dim());
    CavityExpansion mix = single;
    const complexd alpha(0.3, -0.7), beta(1.1, 0.2);
    mix.a = alpha * single.a + beta * other.a;
    const FieldGrid2D fs = synthesize_field(single, modes, 1.0, 6);
    const FieldGrid2D fo = synthesize_field(other, modes, 1.0, 6);
    const FieldGrid2D fm = synthesize_field(mix, modes, 1.0, 6);
    CHECK((fm.values - alpha * fs.values - beta * fo.values).cwiseAbs().maxCoeff() <
          1e-10 * fm.max_abs);

    const FieldGrid2D unit = fm.max_one();
    CHECK(unit.max_abs == doctest::Approx(1.0));
    CHECK(unit.values.cwiseAbs().maxCoeff() == doctest::Approx(1.0));

    // plane-wave amplitudes line up with the defect grid ordering
    const Eigen::VectorXcd c = plane_wave_amplitudes(single, modes);
    const DefectFourier d = make_defect_grid(basis, bz);
    REQUIRE(c.size() == d.size());
    const Vec2 r(0.21, -0.4);
    complexd via_keys(0.0, 0.0);
    for (int i = 0; i < d.size(); ++i)
        via_keys += c[i] * std::exp(complexd(
                        0.0, d.vector_of(d.k_keys[i].first,
                                         d.k_keys[i].second).dot(r)));
    complexd direct(0.0, 0.0);
    for (int gi = 0; gi < basis.size(); ++gi)
        direct += modes.h[4](gi, 1) *
                  std::exp(complexd(0.0, (p.q + basis.g[gi]).dot(r)));
    CHECK(std::abs(via_keys - direct) < 1e-12);
}

TEST_CASE("field grid exports carry a 3-line header and csv columns") {
    FieldGrid2D g;
    g.x0 = g.y0 = -1.0;
    g.x1 = g.y1 = 1.0;
    g.nx = g.ny = 3;
    g.values = Eigen::MatrixXcd::Constant(3, 3, complexd(0.5, -0.25));
    g.max_abs = std::abs(complexd(0.5, -0.25));
    const std::string ascii = g.to_ascii();
    CHECK(ascii.rfind("# extent ", 0) == 0);
    CHECK(ascii.find("# resolution 3 3\n") != std::string::npos);
    CHECK(ascii.find("# max_abs ") != std::string::npos);
    const std::string csv = g.to_csv();
    CHECK(csv.rfind("x,y,re,im,abs\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 9);
}

TEST_CASE("derived E field matches the direct spectral sum") {
    const LatticeSpec spec = crystal();
    const ReciprocalBasis basis = build_reciprocal_basis(spec, 13);
    const FourierDielectric eta = eta_fourier(spec, basis);
    const BzSampling bz = monkhorst_pack(basis, 3);
    const ModeBasis modes =
        solve_mode_basis(eta, basis, bz, Polarization::TE, 2);
    CavityExpansion one;
    one.a = Eigen::VectorXcd::Zero(modes.dim());
    one.a[modes.flat(2, 1)] = 1.0;
    one.omega = modes.omega[2][1];

    FieldGrid2D eta_grid;
    eta_grid.x0 = eta_grid.y0 = -0.5;
    eta_grid.x1 = eta_grid.y1 = 0.5;
    eta_grid.nx = eta_grid.ny = 5;
    eta_grid.values = Eigen::MatrixXcd::Constant(5, 5, 0.31);
    eta_grid.max_abs = 0.31;

    const auto [ex, ey] = efield_from_h(one, modes, eta_grid);
    const BzPoint& p = modes.bz.points[2];
    const std::vector<std::pair<int, int>> nodes = {{1, 2}, {3, 4}};
    for (const auto& [ix, iy] : nodes) {
        const Vec2 r(eta_grid.x_of(ix), eta_grid.y_of(iy));
        complexd dx(0.0, 0.0), dy(0.0, 0.0);
        for (int gi = 0; gi < basis.size(); ++gi) {
            const Vec2 k = p.q + basis.g[gi];
            const complexd wave =
                modes.h[2](gi, 1) * std::exp(complexd(0.0, k.dot(r)));
            dx += complexd(0.0, k.x()) * wave;
            dy += complexd(0.0, k.y()) * wave;
        }
        const complexd i_unit(0.0, 1.0);
        const double w = kTwoPi * one.omega;
        CHECK(std::abs(ex.values(ix, iy) - i_unit / w * 0.31 * dy) < 1e-12);
        CHECK(std::abs(ey.values(ix, iy) + i_unit / w * 0.31 * dx) < 1e-12);
    }
}
