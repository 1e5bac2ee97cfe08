#include "phcd/bulk_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "phcd/linalg.hpp"

namespace phcd {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

Eigen::MatrixXcd assemble_operator(const FourierDielectric& eta,
                                   const ReciprocalBasis& basis, const Vec2& q,
                                   Polarization pol) {
    const int n = basis.size();
    Eigen::MatrixXcd A(n, n);
    std::vector<Vec2> k(n);
    std::vector<double> knorm(n);
    for (int i = 0; i < n; ++i) {
        k[i] = q + basis.g[i];
        knorm[i] = k[i].norm();
    }
    for (int col = 0; col < n; ++col) {
        const GIndex& gc = basis.g_index[col];
        for (int row = 0; row < n; ++row) {
            const GIndex& gr = basis.g_index[row];
            const complexd e = eta.at({gr.m1 - gc.m1, gr.m2 - gc.m2});
            const double geom = pol == Polarization::TE
                                    ? k[row].dot(k[col])
                                    : knorm[row] * knorm[col];
            A(row, col) = e * geom;
        }
    }
    // Exact Hermitian symmetrization of assembly roundoff.
    A = 0.5 * (A + A.adjoint()).eval();
    return A;
}

std::vector<BulkMode> solve_bands(const FourierDielectric& eta,
                                  const ReciprocalBasis& basis, const Vec2& q,
                                  Polarization pol, int n_bands) {
    const int n = basis.size();
    if (n_bands < 1 || n_bands > n)
        throw ConfigError("n_bands must lie in [1, N_G]");

    const Eigen::MatrixXcd A = assemble_operator(eta, basis, q, pol);
    linalg::EighResult es = linalg::eigh(A);

    const double lam_max = std::max(1.0, std::abs(es.values(n - 1)));
    for (int i = 0; i < n; ++i) {
        if (es.values(i) < -1e-10 * lam_max)
            throw SolverError("negative eigenvalue beyond roundoff clamp: " +
                              std::to_string(es.values(i)));
        if (es.values(i) < 0.0)
            es.values(i) = 0.0;
    }

    // Deterministic ordering inside degenerate clusters: descending |h| of
    // the lowest-index G.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i)
        order[i] = i;
    int start = 0;
    while (start < n) {
        int end = start + 1;
        while (end < n && es.values(end) - es.values(end - 1) <
                              1e-8 * std::max(1.0, std::abs(es.values(end))))
            ++end;
        std::stable_sort(order.begin() + start, order.begin() + end,
                         [&](int a, int b) {
                             return std::abs(es.vectors(0, a)) >
                                    std::abs(es.vectors(0, b));
                         });
        start = end;
    }

    std::vector<BulkMode> modes;
    modes.reserve(n_bands);
    for (int b = 0; b < n_bands; ++b) {
        BulkMode m;
        m.band = b;
        m.q = q;
        m.pol = pol;
        m.omega = std::sqrt(es.values(b)) / kTwoPi;
        m.h = es.vectors.col(order[b]);
        m.h.normalize();
        // Deterministic phase: largest-magnitude coefficient real positive.
        int imax = 0;
        double amax = 0.0;
        for (int i = 0; i < n; ++i)
            if (std::abs(m.h(i)) > amax + 1e-12) {
                amax = std::abs(m.h(i));
                imax = i;
            }
        if (amax > 0.0)
            m.h *= std::conj(m.h(imax)) / amax;
        modes.push_back(std::move(m));
    }
    return modes;
}

std::optional<std::pair<double, double>>
detect_gap(const std::vector<std::vector<double>>& bands) {
    if (bands.empty())
        return std::nullopt;
    const std::size_t nb = bands.front().size();
    for (std::size_t i = 0; i + 1 < nb; ++i) {
        double lo = 0.0, hi = std::numeric_limits<double>::infinity();
        for (const auto& bq : bands) {
            lo = std::max(lo, bq[i]);
            hi = std::min(hi, bq[i + 1]);
        }
        if (hi > lo + 1e-12)
            return std::make_pair(lo, hi);
    }
    return std::nullopt;
}

BandStructure band_structure(const FourierDielectric& eta,
                             const ReciprocalBasis& basis, int path_resolution,
                             Polarization pol, int n_bands) {
    if (path_resolution < 1)
        throw ConfigError("path_resolution must be >= 1");

    // Paper labels: X is the edge midpoint (conventional M), J the zone
    // corner (conventional K).
    const Vec2 gamma(0.0, 0.0);
    const Vec2 x_point = 0.5 * (basis.b1 + basis.b2);
    const Vec2 j_point = (2.0 * basis.b1 + basis.b2) / 3.0;
    const std::vector<Vec2> vertices = {gamma, x_point, j_point, gamma};

    BandStructure bs;
    bs.labels = {"Gamma", "X", "J", "Gamma"};
    double arc = 0.0;
    for (std::size_t seg = 0; seg + 1 < vertices.size(); ++seg) {
        const Vec2 a = vertices[seg], b = vertices[seg + 1];
        const int steps = path_resolution;
        const int first = seg == 0 ? 0 : 1;
        for (int s = first; s <= steps; ++s) {
            const double t = static_cast<double>(s) / steps;
            const Vec2 q = a + t * (b - a);
            if (!bs.path.empty())
                arc += (q - bs.path.back()).norm();
            bs.path.push_back(q);
            bs.path_coordinate.push_back(arc);
            std::vector<BulkMode> modes = solve_bands(eta, basis, q, pol, n_bands);
            std::vector<double> freqs(modes.size());
            for (std::size_t i = 0; i < modes.size(); ++i)
                freqs[i] = modes[i].omega;
            bs.bands.push_back(std::move(freqs));
        }
    }
    bs.gap = detect_gap(bs.bands);
    return bs;
}

complexd mode_field(const BulkMode& mode, const ReciprocalBasis& basis,
                    const Vec2& r) {
    complexd sum = 0.0;
    for (int i = 0; i < basis.size(); ++i) {
        const Vec2 k = mode.q + basis.g[i];
        sum += mode.h(i) * std::exp(complexd(0.0, k.dot(r)));
    }
    return sum;
}

std::string band_structure_csv(const BandStructure& bs) {
    std::string out = "path_coordinate,q_x,q_y";
    const std::size_t nb = bs.bands.empty() ? 0 : bs.bands.front().size();
    char buf[64];
    for (std::size_t b = 0; b < nb; ++b) {
        std::snprintf(buf, sizeof(buf), ",band_%zu", b);
        out += buf;
    }
    out += "\n";
    for (std::size_t i = 0; i < bs.path.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", bs.path_coordinate[i]);
        out += buf;
        std::snprintf(buf, sizeof(buf), ",%.17g", bs.path[i].x());
        out += buf;
        std::snprintf(buf, sizeof(buf), ",%.17g", bs.path[i].y());
        out += buf;
        for (double w : bs.bands[i]) {
            std::snprintf(buf, sizeof(buf), ",%.17g", w);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

} // namespace phcd
