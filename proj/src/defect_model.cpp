#include "phcd/defect_model.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "phcd/linalg.hpp"

namespace phcd {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double disc_shape(double x) {
    return x < 1e-8 ? 1.0 - x * x / 8.0 : 2.0 * std::cyl_bessel_j(1, x) / x;
}
} // namespace

ModeBasis ModeBasis::truncated(int bands) const {
    if (bands < 1 || bands > n_bands)
        throw ConfigError("truncated band count out of range");
    ModeBasis out;
    out.basis = basis;
    out.bz = bz;
    out.pol = pol;
    out.n_bands = bands;
    out.h.reserve(h.size());
    out.omega.reserve(omega.size());
    for (std::size_t qi = 0; qi < h.size(); ++qi) {
        out.h.push_back(h[qi].leftCols(bands));
        out.omega.push_back(omega[qi].head(bands));
    }
    return out;
}

ModeBasis solve_mode_basis(const FourierDielectric& eta,
                           const ReciprocalBasis& basis, const BzSampling& bz,
                           Polarization pol, int n_bands) {
    ModeBasis mb;
    mb.basis = basis;
    mb.bz = bz;
    mb.pol = pol;
    mb.n_bands = n_bands;
    const int ng = basis.size();
    mb.h.reserve(bz.size());
    mb.omega.reserve(bz.size());
    for (const BzPoint& p : bz.points) {
        std::vector<BulkMode> modes = solve_bands(eta, basis, p.q, pol, n_bands);
        Eigen::MatrixXcd hq(ng, n_bands);
        Eigen::VectorXd wq(n_bands);
        for (int b = 0; b < n_bands; ++b) {
            hq.col(b) = modes[b].h;
            wq(b) = modes[b].omega;
        }
        mb.h.push_back(std::move(hq));
        mb.omega.push_back(std::move(wq));
    }
    return mb;
}

complexd DefectFourier::at(int I, int J) const {
    auto it = coeff.find(pack_index(I, J));
    if (it != coeff.end())
        return it->second;
    if (vector_of(I, J).norm() < strict_radius)
        throw MissingCoefficientError(
            "defect Fourier coefficient missing inside the resolved range at "
            "fine coordinates (" +
            std::to_string(I) + ", " + std::to_string(J) + ")");
    return 0.0;
}

DefectFourier make_defect_grid(const ReciprocalBasis& basis,
                               const BzSampling& bz) {
    DefectFourier d;
    d.division = bz.division;
    d.b1 = basis.b1;
    d.b2 = basis.b2;
    double q_max = 0.0;
    for (const BzPoint& p : bz.points)
        q_max = std::max(q_max, p.q.norm());
    d.strict_radius = std::max(0.0, basis.max_shell_norm - q_max - 1e-9);
    d.k_keys.reserve(static_cast<std::size_t>(bz.size()) * basis.size());
    for (const BzPoint& p : bz.points)
        for (const GIndex& g : basis.g_index) {
            const int I = p.fi + d.division * g.m1;
            const int J = p.fj + d.division * g.m2;
            d.k_keys.emplace_back(I, J);
            d.coeff.emplace(pack_index(I, J), 0.0);
            // keep the stored set closed under negation so that real
            // perturbations stay conjugate-symmetric (even divisions fold
            // +k and -k onto different fine coordinates)
            d.coeff.emplace(pack_index(-I, -J), 0.0);
        }
    return d;
}

void add_disc(DefectFourier& defect, const Vec2& center, double radius,
              double amplitude) {
    const double cell_area = std::sqrt(3.0) / 2.0;
    const double supercell_area =
        cell_area * defect.division * defect.division;
    const double base = amplitude * std::numbers::pi * radius * radius /
                        supercell_area;
    for (auto& [key, value] : defect.coeff) {
        const int I = static_cast<int>(key >> 21) - (1 << 20);
        const int J = static_cast<int>(key & ((1 << 21) - 1)) - (1 << 20);
        const Vec2 k = defect.vector_of(I, J);
        const complexd phase = std::exp(complexd(0.0, -k.dot(center)));
        value += base * disc_shape(k.norm() * radius) * phase;
    }
}

Eigen::MatrixXcd assemble_defect_operator(const ModeBasis& modes,
                                          const DefectFourier& defect) {
    const int ng = modes.basis.size();
    const int nq = modes.bz.size();
    const int nb = modes.n_bands;
    const int dim = modes.dim();
    if (defect.division != modes.bz.division)
        throw ConfigError("defect grid division does not match the sampling");

    // Per-q fine coordinates of q+G and component-weighted h matrices.
    std::vector<std::vector<std::pair<int, int>>> keys(nq);
    std::vector<Eigen::MatrixXcd> wx(nq), wy(nq); // TE: k_x h, k_y h
    std::vector<Eigen::MatrixXcd> wn(nq);         // TM: |k| h
    const bool te = modes.pol == Polarization::TE;
    for (int qi = 0; qi < nq; ++qi) {
        const BzPoint& p = modes.bz.points[qi];
        keys[qi].resize(ng);
        if (te) {
            wx[qi].resize(ng, nb);
            wy[qi].resize(ng, nb);
        } else {
            wn[qi].resize(ng, nb);
        }
        for (int gi = 0; gi < ng; ++gi) {
            const GIndex& g = modes.basis.g_index[gi];
            keys[qi][gi] = {p.fi + defect.division * g.m1,
                            p.fj + defect.division * g.m2};
            const Vec2 k = p.q + modes.basis.g[gi];
            if (te) {
                wx[qi].row(gi) = modes.h[qi].row(gi) * k.x();
                wy[qi].row(gi) = modes.h[qi].row(gi) * k.y();
            } else {
                wn[qi].row(gi) = modes.h[qi].row(gi) * k.norm();
            }
        }
    }

    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::MatrixXcd delta(ng, ng);
    for (int qa = 0; qa < nq; ++qa)
        for (int qb = 0; qb < nq; ++qb) {
            for (int ga = 0; ga < ng; ++ga)
                for (int gb = 0; gb < ng; ++gb)
                    delta(ga, gb) = defect.at(keys[qa][ga].first - keys[qb][gb].first,
                                              keys[qa][ga].second - keys[qb][gb].second);
            Eigen::MatrixXcd block;
            if (te)
                block = wx[qa].adjoint() * delta * wx[qb] +
                        wy[qa].adjoint() * delta * wy[qb];
            else
                block = wn[qa].adjoint() * delta * wn[qb];
            D.block(qa * nb, qb * nb, nb, nb) = block;
        }

    for (int qi = 0; qi < nq; ++qi)
        for (int b = 0; b < nb; ++b) {
            const double w = kTwoPi * modes.omega[qi](b);
            D(qi * nb + b, qi * nb + b) += w * w;
        }
    return D;
}

std::vector<CavityExpansion>
solve_cavity_modes(const Eigen::MatrixXcd& D, std::pair<double, double> gap) {
    const double scale = std::max(1.0, D.cwiseAbs().maxCoeff());
    const double herm_dev = (D - D.adjoint()).cwiseAbs().maxCoeff();
    if (herm_dev > 1e-8 * scale)
        throw ConfigError("defect operator is not Hermitian (deviation " +
                          std::to_string(herm_dev) + ")");
    const Eigen::MatrixXcd H = 0.5 * (D + D.adjoint());
    linalg::EighResult es = linalg::eigh(H);

    std::vector<CavityExpansion> out;
    for (int i = 0; i < es.values.size(); ++i) {
        const double lam = std::max(0.0, es.values(i));
        const double w = std::sqrt(lam) / kTwoPi;
        if (w > gap.first + 1e-12 && w < gap.second - 1e-12) {
            CavityExpansion m;
            m.a = es.vectors.col(i);
            m.omega = w;
            m.mode_index = static_cast<int>(out.size());
            out.push_back(std::move(m));
        }
    }
    return out;
}

Eigen::VectorXcd plane_wave_amplitudes(const CavityExpansion& expansion,
                                       const ModeBasis& modes) {
    const int ng = modes.basis.size();
    const int nb = modes.n_bands;
    const int nq = modes.bz.size();
    Eigen::VectorXcd c(static_cast<Eigen::Index>(nq) * ng);
    for (int qi = 0; qi < nq; ++qi)
        c.segment(static_cast<Eigen::Index>(qi) * ng, ng) =
            modes.h[qi] * expansion.a.segment(qi * nb, nb);
    return c;
}

FieldGrid2D synthesize_field(const CavityExpansion& expansion,
                             const ModeBasis& modes, double half_extent,
                             int resolution) {
    FieldGrid2D grid;
    grid.x0 = grid.y0 = -half_extent;
    grid.x1 = grid.y1 = half_extent;
    grid.nx = grid.ny =
        static_cast<int>(std::lround(2.0 * half_extent * resolution)) + 1;

    const Eigen::VectorXcd c = plane_wave_amplitudes(expansion, modes);
    const int nk = static_cast<int>(c.size());
    const int ng = modes.basis.size();

    Eigen::MatrixXcd px(nk, grid.nx), py(nk, grid.ny);
    for (int qi = 0; qi < modes.bz.size(); ++qi) {
        const BzPoint& p = modes.bz.points[qi];
        for (int gi = 0; gi < ng; ++gi) {
            const Vec2 k = p.q + modes.basis.g[gi];
            const int row = qi * ng + gi;
            for (int ix = 0; ix < grid.nx; ++ix)
                px(row, ix) = std::exp(complexd(0.0, k.x() * grid.x_of(ix)));
            for (int iy = 0; iy < grid.ny; ++iy)
                py(row, iy) = std::exp(complexd(0.0, k.y() * grid.y_of(iy)));
        }
    }
    const Eigen::MatrixXcd weighted =
        (px.array().colwise() * c.array()).matrix();
    grid.values = weighted.transpose() * py;
    grid.max_abs = grid.values.cwiseAbs().maxCoeff();
    return grid;
}

FieldGrid2D FieldGrid2D::max_one() const {
    FieldGrid2D out = *this;
    if (max_abs <= 0.0)
        throw SolverError("cannot max-one normalize a zero field");
    out.values /= max_abs;
    out.max_abs = 1.0;
    return out;
}

std::string FieldGrid2D::to_ascii() const {
    char buf[160];
    std::string out;
    std::snprintf(buf, sizeof(buf), "# extent %.17g %.17g %.17g %.17g\n", x0,
                  x1, y0, y1);
    out += buf;
    std::snprintf(buf, sizeof(buf), "# resolution %d %d\n", nx, ny);
    out += buf;
    std::snprintf(buf, sizeof(buf), "# max_abs %.17g\n", max_abs);
    out += buf;
    for (int ix = 0; ix < nx; ++ix) {
        for (int iy = 0; iy < ny; ++iy) {
            std::snprintf(buf, sizeof(buf), iy ? " %.17g" : "%.17g",
                          std::abs(values(ix, iy)));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

std::string FieldGrid2D::to_csv() const {
    std::string out = "x,y,re,im,abs\n";
    char buf[160];
    for (int ix = 0; ix < nx; ++ix)
        for (int iy = 0; iy < ny; ++iy) {
            const complexd v = values(ix, iy);
            std::snprintf(buf, sizeof(buf),
                          "%.17g,%.17g,%.17g,%.17g,%.17g\n", x_of(ix),
                          y_of(iy), v.real(), v.imag(), std::abs(v));
            out += buf;
        }
    return out;
}

std::pair<FieldGrid2D, FieldGrid2D>
efield_from_h(const CavityExpansion& expansion, const ModeBasis& modes,
              const FieldGrid2D& eta_grid) {
    // Derivative fields from the plane-wave representation, sampled on the
    // same grid as eta_grid.
    const Eigen::VectorXcd c = plane_wave_amplitudes(expansion, modes);
    const int ng = modes.basis.size();
    const int nk = static_cast<int>(c.size());
    FieldGrid2D ex = eta_grid, ey = eta_grid;

    Eigen::MatrixXcd px(nk, eta_grid.nx), py(nk, eta_grid.ny);
    Eigen::VectorXcd cx(nk), cy(nk);
    for (int qi = 0; qi < modes.bz.size(); ++qi)
        for (int gi = 0; gi < ng; ++gi) {
            const Vec2 k = modes.bz.points[qi].q + modes.basis.g[gi];
            const int row = qi * ng + gi;
            cx(row) = complexd(0.0, k.x()) * c(row);
            cy(row) = complexd(0.0, k.y()) * c(row);
            for (int ix = 0; ix < eta_grid.nx; ++ix)
                px(row, ix) =
                    std::exp(complexd(0.0, k.x() * eta_grid.x_of(ix)));
            for (int iy = 0; iy < eta_grid.ny; ++iy)
                py(row, iy) =
                    std::exp(complexd(0.0, k.y() * eta_grid.y_of(iy)));
        }
    const Eigen::MatrixXcd dx =
        ((px.array().colwise() * cx.array()).matrix().transpose() * py);
    const Eigen::MatrixXcd dy =
        ((px.array().colwise() * cy.array()).matrix().transpose() * py);

    // E = i (curl H) eta / omega for TE (H out of plane): curl = (dy, -dx).
    const double w_abs = kTwoPi * expansion.omega;
    const complexd i_unit(0.0, 1.0);
    ex.values = (i_unit / w_abs) *
                (dy.array() * eta_grid.values.array().real()).matrix();
    ey.values = (-i_unit / w_abs) *
                (dx.array() * eta_grid.values.array().real()).matrix();
    ex.max_abs = ex.values.cwiseAbs().maxCoeff();
    ey.max_abs = ey.values.cwiseAbs().maxCoeff();
    return {ex, ey};
}

} // namespace phcd
