#include "phcd/analytic_inverter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

#include "phcd/linalg.hpp"

namespace phcd {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

VariationalResult solve_variational(const ObjectiveGrams& grams,
                                    const CostWeights& weights,
                                    EigenSelector selector) {
    const Eigen::MatrixXcd A = cost_matrix(grams, weights);
    linalg::EighResult es = linalg::eigh(0.5 * (A + A.adjoint()));

    int pick = 0;
    if (selector == EigenSelector::MaxCost) {
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < es.values.size(); ++i) {
            const double c = cost(es.vectors.col(i), grams, weights);
            if (c > best) {
                best = c;
                pick = i;
            }
        }
    }

    VariationalResult out;
    out.coefficients.a = es.vectors.col(pick);
    out.lagrange_eigenvalue = es.values(pick);
    out.cost_value = cost(out.coefficients.a, grams, weights);
    out.weights = weights;
    return out;
}

PatternSearchResult pattern_search(const MeritFn& merit, CostWeights initial,
                                   int budget, double initial_step) {
    if (budget < 1)
        throw ConfigError("pattern search budget must be >= 1");

    PatternSearchResult out;
    out.weights = initial;
    out.merit = merit(initial);
    out.evaluations = 1;

    // Search in log10 space; zero weights get a small floor only for the
    // purposes of proposing moves, the incumbent stays exact.
    auto log_of = [](double b) { return std::log10(std::max(b, 1e-12)); };
    std::array<double, 2> x = {log_of(initial.beta_I), log_of(initial.beta_V)};
    double step = initial_step;

    while (out.evaluations < budget && step > 1e-3) {
        bool improved = false;
        for (int dim = 0; dim < 2 && out.evaluations < budget; ++dim) {
            for (double sign : {+1.0, -1.0}) {
                if (out.evaluations >= budget)
                    break;
                std::array<double, 2> trial = x;
                trial[dim] += sign * step;
                CostWeights w{std::pow(10.0, trial[0]),
                              std::pow(10.0, trial[1])};
                const double m = merit(w);
                ++out.evaluations;
                if (m > out.merit + 1e-14 * std::abs(out.merit)) {
                    out.merit = m;
                    out.weights = w;
                    x = trial;
                    improved = true;
                    break;
                }
            }
        }
        if (!improved)
            step *= 0.5;
    }
    return out;
}

WeightSearchResult optimize_weights(const ObjectiveGrams& grams,
                                    const ModeBasis& modes,
                                    CostWeights initial, int budget,
                                    EigenSelector selector,
                                    int volume_resolution) {
    const CostWeights score = initial;
    MeritFn merit = [&](const CostWeights& w) {
        VariationalResult vr = solve_variational(grams, w, selector);
        const Eigen::VectorXcd& a = vr.coefficients.a;
        const double L = q_proxy(a, grams.W);
        const double I = intensity_at_origin(a, grams.P);
        const double V = mode_volume(a, grams, modes, volume_resolution);
        return L + score.beta_I * I - score.beta_V * V;
    };

    PatternSearchResult ps = pattern_search(merit, initial, budget);
    WeightSearchResult out;
    out.weights = ps.weights;
    out.evaluations = ps.evaluations;
    out.best = solve_variational(grams, ps.weights, selector);
    return out;
}

Eigen::VectorXcd zero_extend(const Eigen::VectorXcd& a, int bands_from,
                             const ModeBasis& full) {
    const int nq = full.bz.size();
    if (a.size() != static_cast<Eigen::Index>(nq) * bands_from)
        throw ConfigError("coefficient vector does not match the band count");
    Eigen::VectorXcd out =
        Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(nq) * full.n_bands);
    for (int qi = 0; qi < nq; ++qi)
        out.segment(qi * full.n_bands, bands_from) =
            a.segment(qi * bands_from, bands_from);
    return out;
}

InversionSystem build_inversion_system(const CavityExpansion& expansion,
                                       const ModeBasis& modes, double omega_m,
                                       std::pair<double, double> gap) {
    if (!(omega_m > gap.first && omega_m < gap.second))
        throw ConfigError("omega_m must lie strictly inside the band gap");
    const int ng = modes.basis.size();
    const int nq = modes.bz.size();
    const int nb = modes.n_bands;
    if (expansion.a.size() != modes.dim())
        throw ConfigError("expansion does not span the full mode basis");

    InversionSystem sys;
    sys.omega_m = omega_m;
    sys.grid = make_defect_grid(modes.basis, modes.bz);
    const int div = sys.grid.division;
    const bool te = modes.pol == Polarization::TE;

    // B_{q'}(G') = sum_n a_{n,q'} h_{n,q'+G'}.
    std::vector<Eigen::VectorXcd> bvec(nq);
    for (int qi = 0; qi < nq; ++qi)
        bvec[qi] = modes.h[qi] * expansion.a.segment(qi * nb, nb);

    // Fine coordinates of q+G per (q, G).
    std::vector<std::vector<std::pair<int, int>>> keys(nq);
    for (int qi = 0; qi < nq; ++qi) {
        keys[qi].resize(ng);
        const BzPoint& p = modes.bz.points[qi];
        for (int gi = 0; gi < ng; ++gi)
            keys[qi][gi] = {p.fi + div * modes.basis.g_index[gi].m1,
                            p.fj + div * modes.basis.g_index[gi].m2};
    }

    const Eigen::Index rows = static_cast<Eigen::Index>(nq) * nb;
    const Eigen::Index cols = static_cast<Eigen::Index>(nq) * ng;
    sys.D.resize(rows, cols);
    Eigen::MatrixXcd u(ng, ng);
    for (int qa = 0; qa < nq; ++qa) {
        const BzPoint& pa = modes.bz.points[qa];
        for (int qc = 0; qc < nq; ++qc) {
            // q' is the residue class of q_a - k, constant over the block.
            const int qp =
                modes.bz.index_of_residue(pa.i - modes.bz.points[qc].i,
                                          pa.j - modes.bz.points[qc].j);
            const BzPoint& pp = modes.bz.points[qp];
            for (int gc = 0; gc < ng; ++gc) {
                const auto& kk = keys[qc][gc];
                const Vec2 kvec = sys.grid.vector_of(kk.first, kk.second);
                for (int ga = 0; ga < ng; ++ga) {
                    const auto& ka = keys[qa][ga];
                    const int vi = ka.first - kk.first;
                    const int vj = ka.second - kk.second;
                    // Coefficient index G' of mode q': v = q' + G'.
                    const GIndex gp{(vi - pp.fi) / div, (vj - pp.fj) / div};
                    const int gidx = modes.basis.find(gp);
                    if (gidx < 0) {
                        u(ga, gc) = 0.0;
                        continue;
                    }
                    const Vec2 kavec = pa.q + modes.basis.g[ga];
                    const Vec2 vvec = kavec - kvec;
                    const double geom =
                        te ? kavec.dot(vvec) : kavec.norm() * vvec.norm();
                    u(ga, gc) = geom * bvec[qp](gidx);
                }
            }
            sys.D.block(static_cast<Eigen::Index>(qa) * nb,
                        static_cast<Eigen::Index>(qc) * ng, nb, ng) =
                modes.h[qa].adjoint() * u;
        }
    }

    sys.rhs.resize(rows);
    const double wm2 = std::pow(kTwoPi * omega_m, 2);
    for (int qi = 0; qi < nq; ++qi)
        for (int b = 0; b < nb; ++b) {
            const double wb = kTwoPi * modes.omega[qi](b);
            sys.rhs(qi * nb + b) =
                expansion.a(qi * nb + b) * (wm2 - wb * wb);
        }
    return sys;
}

DefectFourier solve_defect(const InversionSystem& system, double svd_rel_tol) {
    linalg::SvdSolveResult sol =
        linalg::svd_least_squares(system.D, system.rhs, svd_rel_tol);

    DefectFourier out = system.grid;
    // Reality symmetrization over negation pairs, from a snapshot so both
    // members of a pair see the raw solution.  Keys whose negation was not
    // part of the solve get their mirror filled in by conjugation.
    std::unordered_map<std::int64_t, complexd> solved;
    for (int i = 0; i < out.size(); ++i)
        solved[pack_index(out.k_keys[i].first, out.k_keys[i].second)] =
            sol.x(i);
    for (int i = 0; i < out.size(); ++i) {
        const auto [I, J] = out.k_keys[i];
        const complexd v = sol.x(i);
        auto partner = solved.find(pack_index(-I, -J));
        if (partner != solved.end()) {
            out.coeff[pack_index(I, J)] = 0.5 * (v + std::conj(partner->second));
        } else {
            out.coeff[pack_index(I, J)] = v;
            out.coeff[pack_index(-I, -J)] = std::conj(v);
        }
    }
    return out;
}

Reconstruction reconstruct_and_contour(const DefectFourier& defect,
                                       const FourierDielectric& eta0,
                                       const ReciprocalBasis& basis,
                                       double half_extent, int resolution) {
    Reconstruction rec;
    FieldGrid2D& grid = rec.eta;
    grid.x0 = grid.y0 = -half_extent;
    grid.x1 = grid.y1 = half_extent;
    grid.nx = grid.ny =
        static_cast<int>(std::lround(2.0 * half_extent * resolution)) + 1;
    grid.values = Eigen::MatrixXcd::Zero(grid.nx, grid.ny);

    // Separable-phase evaluation of both Fourier series.
    struct Wave {
        Vec2 k;
        complexd c;
    };
    std::vector<Wave> waves;
    waves.reserve(eta0.coeff.size() + defect.coeff.size());
    for (const GIndex& gi : basis.g_index)
        waves.push_back({basis.vector_of(gi), eta0.at(gi)});
    for (const auto& [I, J] : defect.k_keys)
        waves.push_back({defect.vector_of(I, J),
                         defect.coeff.at(pack_index(I, J))});

    const int nk = static_cast<int>(waves.size());
    Eigen::MatrixXcd px(nk, grid.nx), py(nk, grid.ny);
    Eigen::VectorXcd c(nk);
    for (int w = 0; w < nk; ++w) {
        c(w) = waves[w].c;
        for (int ix = 0; ix < grid.nx; ++ix)
            px(w, ix) = std::exp(complexd(0.0, waves[w].k.x() * grid.x_of(ix)));
        for (int iy = 0; iy < grid.ny; ++iy)
            py(w, iy) = std::exp(complexd(0.0, waves[w].k.y() * grid.y_of(iy)));
    }
    grid.values = (px.array().colwise() * c.array()).matrix().transpose() * py;
    grid.max_abs = grid.values.cwiseAbs().maxCoeff();

    Eigen::MatrixXd eta = grid.values.real();
    rec.eta_min = eta.minCoeff();
    rec.eta_max = eta.maxCoeff();
    rec.level = 0.5 * (rec.eta_min + rec.eta_max);

    // Connected components of the above-level region (holes have high eta).
    Eigen::MatrixXi label = Eigen::MatrixXi::Constant(grid.nx, grid.ny, -1);
    int n_components = 0;
    const double dx = (grid.x1 - grid.x0) / (grid.nx - 1);
    const double dy = (grid.y1 - grid.y0) / (grid.ny - 1);
    for (int ix = 0; ix < grid.nx; ++ix)
        for (int iy = 0; iy < grid.ny; ++iy) {
            if (eta(ix, iy) <= rec.level || label(ix, iy) >= 0)
                continue;
            const int id = n_components++;
            std::queue<std::pair<int, int>> frontier;
            frontier.push({ix, iy});
            label(ix, iy) = id;
            HoleFit fit;
            double sx = 0, sy = 0, seta = 0;
            std::vector<std::pair<int, int>> pixels;
            while (!frontier.empty()) {
                auto [cx, cy] = frontier.front();
                frontier.pop();
                pixels.push_back({cx, cy});
                sx += grid.x_of(cx);
                sy += grid.y_of(cy);
                seta += eta(cx, cy);
                const int nbr[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
                for (const auto& d : nbr) {
                    const int nx2 = cx + d[0], ny2 = cy + d[1];
                    if (nx2 < 0 || ny2 < 0 || nx2 >= grid.nx || ny2 >= grid.ny)
                        continue;
                    if (label(nx2, ny2) < 0 && eta(nx2, ny2) > rec.level) {
                        label(nx2, ny2) = id;
                        frontier.push({nx2, ny2});
                    }
                }
            }
            const double n = static_cast<double>(pixels.size());
            fit.pixel_count = static_cast<int>(pixels.size());
            fit.center_x = sx / n;
            fit.center_y = sy / n;
            fit.eta_mean = seta / n;
            // Second-moment ellipse; the pixel self-covariance keeps
            // single-pixel components finite.
            double cxx = dx * dx / 12.0, cyy = dy * dy / 12.0, cxy = 0.0;
            for (const auto& [ix2, iy2] : pixels) {
                const double rx = grid.x_of(ix2) - fit.center_x;
                const double ry = grid.y_of(iy2) - fit.center_y;
                cxx += rx * rx / n;
                cyy += ry * ry / n;
                cxy += rx * ry / n;
            }
            const double tr = cxx + cyy;
            const double det = cxx * cyy - cxy * cxy;
            const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
            const double l1 = tr / 2.0 + disc, l2 = tr / 2.0 - disc;
            fit.major = 2.0 * std::sqrt(std::max(0.0, l1));
            fit.minor = 2.0 * std::sqrt(std::max(0.0, l2));
            fit.angle = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
            rec.holes.push_back(fit);
        }

    std::sort(rec.holes.begin(), rec.holes.end(),
              [](const HoleFit& a, const HoleFit& b) {
                  const double ra = std::hypot(a.center_x, a.center_y);
                  const double rb = std::hypot(b.center_x, b.center_y);
                  if (std::abs(ra - rb) > 1e-9)
                      return ra < rb;
                  const double ta = std::atan2(a.center_y, a.center_x);
                  const double tb = std::atan2(b.center_y, b.center_x);
                  return ta < tb;
              });
    for (std::size_t i = 0; i < rec.holes.size(); ++i)
        rec.holes[i].site = static_cast<int>(i);
    return rec;
}

} // namespace phcd
