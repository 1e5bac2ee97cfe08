#include "phcd/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace phcd {

namespace {

constexpr double kPi = std::numbers::pi;

void hexagonal_reciprocal_vectors(Vec2& b1, Vec2& b2) {
    const double s3 = std::sqrt(3.0);
    b1 = 2.0 * kPi * Vec2(1.0, -1.0 / s3);
    b2 = 2.0 * kPi * Vec2(0.0, 2.0 / s3);
}

double hexagonal_cell_area() { return std::sqrt(3.0) / 2.0; }

} // namespace

double LatticeSpec::fill_fraction() const {
    return kPi * hole_radius * hole_radius / hexagonal_cell_area();
}

void LatticeSpec::validate() const {
    if (type != LatticeType::Hexagonal)
        throw ConfigError("unsupported lattice_type");
    if (lattice_constant <= 0.0)
        throw ConfigError("lattice_constant must be positive");
    if (!(hole_radius > 0.0 && hole_radius < 0.5))
        throw ConfigError("hole_radius r_h/a must lie in (0, 0.5)");
    if (bulk_index < 1.0 || hole_index < 1.0)
        throw ConfigError("refractive indices must be >= 1");
}

void ReciprocalBasis::rebuild_lookup() {
    lookup_.clear();
    lookup_.reserve(g_index.size());
    for (int i = 0; i < size(); ++i)
        lookup_.emplace(pack_index(g_index[i].m1, g_index[i].m2), i);
}

ReciprocalBasis build_reciprocal_basis(const LatticeSpec& spec, int n_g) {
    spec.validate();
    if (n_g < 1)
        throw ConfigError("n_g must be >= 1");

    ReciprocalBasis basis;
    hexagonal_reciprocal_vectors(basis.b1, basis.b2);

    struct Entry {
        double norm;
        GIndex gi;
    };
    const int reach = static_cast<int>(2.0 + std::sqrt(static_cast<double>(n_g)));
    std::vector<Entry> entries;
    entries.reserve((2 * reach + 1) * (2 * reach + 1));
    for (int m1 = -reach; m1 <= reach; ++m1)
        for (int m2 = -reach; m2 <= reach; ++m2) {
            const Vec2 v = m1 * basis.b1 + m2 * basis.b2;
            entries.push_back({v.norm(), {m1, m2}});
        }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.norm != b.norm)
            return a.norm < b.norm;
        if (a.gi.m1 != b.gi.m1)
            return a.gi.m1 < b.gi.m1;
        return a.gi.m2 < b.gi.m2;
    });

    // Round the cut up to the end of the current |G| shell.
    std::size_t count = static_cast<std::size_t>(n_g);
    if (count > entries.size())
        throw ConfigError("n_g exceeds the enumerated reciprocal lattice range");
    const double shell_tol = 1e-9 * (1.0 + basis.b1.norm());
    while (count < entries.size() &&
           entries[count].norm - entries[count - 1].norm < shell_tol)
        ++count;

    basis.g_index.reserve(count);
    basis.g.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        basis.g_index.push_back(entries[i].gi);
        basis.g.push_back(basis.vector_of(entries[i].gi));
    }
    basis.max_shell_norm = entries[count - 1].norm;
    basis.rebuild_lookup();
    return basis;
}

FourierDielectric eta_fourier(const LatticeSpec& spec,
                              const ReciprocalBasis& basis) {
    spec.validate();
    const double eta_b = spec.eta_bulk();
    const double eta_h = spec.eta_hole();
    const double f = spec.fill_fraction();

    FourierDielectric eta;
    eta.b1 = basis.b1;
    eta.b2 = basis.b2;
    // Coefficients are needed for every difference G - G' of basis vectors.
    for (const GIndex& ga : basis.g_index)
        for (const GIndex& gb : basis.g_index) {
            const GIndex d{ga.m1 - gb.m1, ga.m2 - gb.m2};
            const std::int64_t key = pack_index(d.m1, d.m2);
            if (eta.coeff.count(key))
                continue;
            if (d.m1 == 0 && d.m2 == 0) {
                eta.coeff.emplace(key, eta_b + f * (eta_h - eta_b));
            } else {
                const double x = basis.vector_of(d).norm() * spec.hole_radius;
                // 2 J1(x)/x, with the small-argument limit 1.
                const double shape =
                    x < 1e-8 ? 1.0 - x * x / 8.0
                             : 2.0 * std::cyl_bessel_j(1, x) / x;
                eta.coeff.emplace(key, (eta_h - eta_b) * f * shape);
            }
        }
    return eta;
}

GIndex fold_shift(const ReciprocalBasis& basis, const Vec2& q) {
    Eigen::Matrix2d B;
    B.col(0) = basis.b1;
    B.col(1) = basis.b2;
    const Vec2 frac = B.inverse() * q;
    const int n1 = static_cast<int>(std::lround(frac.x()));
    const int n2 = static_cast<int>(std::lround(frac.y()));

    GIndex best{-n1, -n2};
    Vec2 best_q = q + best.m1 * basis.b1 + best.m2 * basis.b2;
    double best_norm = best_q.norm();
    const double tol = 1e-9 * (1.0 + basis.b1.norm());
    for (int s1 = -2; s1 <= 2; ++s1)
        for (int s2 = -2; s2 <= 2; ++s2) {
            const GIndex cand{-n1 + s1, -n2 + s2};
            const Vec2 cq = q + cand.m1 * basis.b1 + cand.m2 * basis.b2;
            const double cn = cq.norm();
            if (cn < best_norm - tol) {
                best = cand;
                best_q = cq;
                best_norm = cn;
            } else if (cn < best_norm + tol) {
                // Boundary tie: lexicographically smallest representative.
                if (cq.x() < best_q.x() - 1e-12 ||
                    (std::abs(cq.x() - best_q.x()) <= 1e-12 &&
                     cq.y() < best_q.y() - 1e-12)) {
                    best = cand;
                    best_q = cq;
                    best_norm = cn;
                }
            }
        }
    return best;
}

Vec2 fold_to_bz(const ReciprocalBasis& basis, const Vec2& q) {
    const GIndex s = fold_shift(basis, q);
    return q + s.m1 * basis.b1 + s.m2 * basis.b2;
}

int BzSampling::index_of_residue(int i, int j) const {
    const int ri = ((i % division) + division) % division;
    const int rj = ((j % division) + division) % division;
    auto it = residue_lookup.find(pack_index(ri, rj));
    return it == residue_lookup.end() ? -1 : it->second;
}

BzSampling monkhorst_pack(const ReciprocalBasis& basis, int division) {
    if (division < 1)
        throw ConfigError("Monkhorst-Pack division must be >= 1");
    BzSampling bz;
    bz.division = division;
    bz.b1 = basis.b1;
    bz.b2 = basis.b2;
    bz.bz_area = std::abs(basis.b1.x() * basis.b2.y() -
                          basis.b1.y() * basis.b2.x());
    const double w = bz.bz_area / (division * division);
    bz.points.reserve(division * division);
    for (int i = 0; i < division; ++i)
        for (int j = 0; j < division; ++j) {
            BzPoint p;
            p.i = i;
            p.j = j;
            const Vec2 raw = (i * basis.b1 + j * basis.b2) / division;
            const GIndex s = fold_shift(basis, raw);
            p.fi = i + division * s.m1;
            p.fj = j + division * s.m2;
            p.q = (p.fi * basis.b1 + p.fj * basis.b2) / division;
            p.weight = w;
            bz.residue_lookup.emplace(pack_index(i, j),
                                      static_cast<int>(bz.points.size()));
            bz.points.push_back(p);
        }
    // Negation-consistent representatives: the residue class of -q gets the
    // representative -q_folded, so the {q+G} grid is closed under negation
    // (exact for odd divisions, where no residue class is self-paired).
    for (int idx = 0; idx < bz.size(); ++idx) {
        BzPoint& p = bz.points[idx];
        const int pi = (division - p.i) % division;
        const int pj = (division - p.j) % division;
        const int partner = bz.index_of_residue(pi, pj);
        if (partner > idx) {
            BzPoint& pp = bz.points[partner];
            pp.fi = -p.fi;
            pp.fj = -p.fj;
            pp.q = -p.q;
        }
    }
    return bz;
}

BzSampling sample_brillouin_zone(const ReciprocalBasis& basis, int n_q) {
    if (n_q < 1)
        throw ConfigError("n_q must be >= 1");
    int division = 1;
    while (division * division < n_q)
        ++division;
    BzSampling grid = monkhorst_pack(basis, division);
    std::sort(grid.points.begin(), grid.points.end(),
              [](const BzPoint& a, const BzPoint& b) {
                  const double na = a.q.norm(), nb = b.q.norm();
                  if (std::abs(na - nb) > 1e-12)
                      return na < nb;
                  if (std::abs(a.q.x() - b.q.x()) > 1e-12)
                      return a.q.x() < b.q.x();
                  return a.q.y() < b.q.y();
              });
    grid.points.resize(n_q);
    grid.residue_lookup.clear();
    for (int idx = 0; idx < grid.size(); ++idx) {
        BzPoint& p = grid.points[idx];
        p.weight = grid.bz_area / n_q;
        grid.residue_lookup.emplace(pack_index(p.i, p.j), idx);
    }
    return grid;
}

bool is_below_light_line(const Vec2& q, double omega) {
    return omega * 2.0 * kPi < q.norm();
}

} // namespace phcd
