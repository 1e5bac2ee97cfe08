#include "phcd/planar_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <unordered_map>

#include "phcd/linalg.hpp"

namespace phcd {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec2 real_a1() { return {1.0, 0.0}; }
Vec2 real_a2() { return {0.5, std::sqrt(3.0) / 2.0}; }

} // namespace

int hex_ring(int m1, int m2) {
    return (std::abs(m1) + std::abs(m2) + std::abs(m1 + m2)) / 2;
}

std::vector<GIndex> lattice_sites(int layers) {
    std::vector<GIndex> sites;
    for (int m1 = -layers; m1 <= layers; ++m1)
        for (int m2 = -layers; m2 <= layers; ++m2)
            if (hex_ring(m1, m2) <= layers)
                sites.push_back({m1, m2});
    std::sort(sites.begin(), sites.end(), [](const GIndex& a, const GIndex& b) {
        const int ra = hex_ring(a.m1, a.m2), rb = hex_ring(b.m1, b.m2);
        if (ra != rb)
            return ra < rb;
        if (a.m1 != b.m1)
            return a.m1 < b.m1;
        return a.m2 < b.m2;
    });
    return sites;
}

Vec2 site_position(const GIndex& site) {
    return site.m1 * real_a1() + site.m2 * real_a2();
}

std::vector<Hole> decode_holes(const SlabSpec& spec) {
    std::vector<Hole> holes;
    if (spec.layers < 0)
        return holes;
    for (const GIndex& s : lattice_sites(spec.layers)) {
        const Vec2 p = site_position(s);
        Hole h{p.x(), p.y(), spec.lattice.hole_radius, spec.lattice.hole_radius};
        for (const HoleOverride& o : spec.holes)
            if (o.m1 == s.m1 && o.m2 == s.m2) {
                h.cx = p.x() + o.center_x;
                h.cy = p.y() + o.center_y;
                h.major = o.major;
                h.minor = o.minor;
            }
        if (h.major > 0.0 && h.minor > 0.0)
            holes.push_back(h);
    }
    return holes;
}

void SlabSpec::validate() const {
    lattice.validate();
    if (thickness <= 0.0)
        throw ConfigError("slab thickness d/a must be positive");
    if (mesh < 8)
        throw ConfigError("mesh must be >= 8 cells per lattice constant");
    if (padding < 1.0)
        throw ConfigError("vertical padding must be >= 1 slab thickness");
}

void FieldGrid3D::write_binary(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw SolverError("cannot open " + path + " for writing");
    const std::int64_t dims[3] = {nx, ny, nz};
    const double ext[6] = {x0, x1, y0, y1, z0, z1};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    out.write(reinterpret_cast<const char*>(ext), sizeof ext);
    for (const complexd& v : values) {
        const double re = v.real(), im = v.imag();
        out.write(reinterpret_cast<const char*>(&re), sizeof re);
        out.write(reinterpret_cast<const char*>(&im), sizeof im);
    }
    if (!out)
        throw SolverError("short write to " + path);
}

std::string FieldGrid3D::to_ascii() const {
    char buf[160];
    std::string s;
    std::snprintf(buf, sizeof buf, "dims %d %d %d\n", nx, ny, nz);
    s += buf;
    std::snprintf(buf, sizeof buf,
                  "extent %.17g %.17g %.17g %.17g %.17g %.17g\n", x0, x1, y0,
                  y1, z0, z1);
    s += buf;
    for (const complexd& v : values) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.real(), v.imag());
        s += buf;
    }
    return s;
}

// ----------------------------------------------------- slice-modal machinery

namespace {

struct Smat {
    Eigen::MatrixXcd tf, rf, tb, rb;
};

Smat star(const Smat& A, const Smat& B) {
    const Eigen::MatrixXcd I =
        Eigen::MatrixXcd::Identity(A.tf.rows(), A.tf.cols());
    const Eigen::MatrixXcd m1 = (I - A.rb * B.rf).lu().solve(A.tf);
    const Eigen::MatrixXcd m2 = (I - B.rf * A.rb).lu().solve(B.tb);
    Smat S;
    S.tf = B.tf * m1;
    S.rf = A.rf + A.tb * B.rf * m1;
    S.tb = A.tb * m2;
    S.rb = B.rb + B.tf * A.rb * m2;
    return S;
}

struct SliceModes {
    Eigen::MatrixXcd phi;
    Eigen::VectorXcd beta; // Im >= 0 branch, magnitude floored
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu; // of phi
};

Smat interface_smat(const SliceModes& a, const SliceModes& b) {
    const Eigen::MatrixXcd X = b.lu.solve(a.phi);
    Eigen::MatrixXcd Q = X;
    for (int c = 0; c < Q.cols(); ++c)
        Q.col(c) *= a.beta(c);
    Q = b.beta.cwiseInverse().asDiagonal() * Q;
    const Eigen::MatrixXcd M1 = 0.5 * (X + Q);
    const Eigen::MatrixXcd M2 = 0.5 * (X - Q);
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu1(M1);
    Smat S;
    S.tb = lu1.inverse();
    S.rf = -lu1.solve(M2);
    S.rb = M2 * S.tb;
    S.tf = M1 + M2 * S.rf;
    return S;
}

Smat phase_smat(const SliceModes& m, double h) {
    const Eigen::Index n = m.beta.size();
    Smat S;
    S.tf = (complexd(0.0, 1.0) * h * m.beta.array())
               .exp()
               .matrix()
               .asDiagonal();
    S.tb = S.tf;
    S.rf = Eigen::MatrixXcd::Zero(n, n);
    S.rb = S.rf;
    return S;
}

double flux(const SliceModes& m, const Eigen::VectorXcd& amps,
            double cell_area) {
    const Eigen::VectorXcd E = m.phi * amps;
    const Eigen::VectorXcd dE =
        m.phi *
        (complexd(0.0, 1.0) * m.beta.array() * amps.array()).matrix();
    return cell_area * (E.conjugate().array() * dE.array()).imag().sum();
}

struct Slice {
    int profile = 0;
    double h = 0.0;
};

/// Geometry only; modes are solved per frequency.
struct Stack {
    int nu = 0, nv = 0;        // transverse samples (u fast, v slow)
    double du = 0.0, dv = 0.0;
    double u0 = 0.0, v0 = 0.0; // first sample coordinates
    double prop0 = 0.0;        // propagation-axis start
    std::vector<Slice> slices; // first and last are zero-thickness ports
    std::vector<Eigen::VectorXcd> profiles; // n^2 per transverse point
    Eigen::MatrixXd laplacian;

    double prop_length() const {
        double L = 0.0;
        for (const Slice& s : slices)
            L += s.h;
        return L;
    }

    int add_profile(Eigen::VectorXcd n2) {
        for (int i = 0; i < static_cast<int>(profiles.size()); ++i)
            if (profiles[i] == n2)
                return i;
        profiles.push_back(std::move(n2));
        return static_cast<int>(profiles.size()) - 1;
    }
};

void add_laplacian_1d(Eigen::MatrixXd& L, int n_this, int n_other,
                      double step, bool wrap, bool fast_axis) {
    const double inv = 1.0 / (step * step);
    auto index = [&](int i, int j) {
        return fast_axis ? i + n_this * j : j + n_other * i;
    };
    for (int j = 0; j < n_other; ++j)
        for (int i = 0; i < n_this; ++i) {
            const int p = index(i, j);
            L(p, p) -= 2.0 * inv;
            for (int s : {-1, +1}) {
                int q = i + s;
                if (wrap)
                    q = (q + n_this) % n_this;
                else if (q < 0 || q >= n_this)
                    continue; // Dirichlet wall
                L(p, index(q, j)) += inv;
            }
        }
}

bool inside_any_hole(const std::vector<Hole>& holes, double x, double y,
                     double wrap_y) {
    for (const Hole& h : holes) {
        const double dx = x - h.cx;
        double dy = y - h.cy;
        if (wrap_y > 0.0)
            dy -= wrap_y * std::round(dy / wrap_y);
        const double ex = dx / h.major, ey = dy / h.minor;
        if (ex * ex + ey * ey <= 1.0)
            return true;
    }
    return false;
}

// Plane wave along +x; transverse (y, z) with periodic y, Dirichlet z walls
// behind graded absorbing strips over the outer half of each vertical pad.
Stack build_edge_stack(const SlabSpec& spec, const SimulateOptions& opt) {
    const std::vector<Hole> holes = decode_holes(spec);
    const double eps_b = spec.lattice.bulk_index * spec.lattice.bulk_index;
    const double eps_h = spec.lattice.hole_index * spec.lattice.hole_index;

    double xmin = -0.5, xmax = 0.5, ymax = 0.5;
    for (const Hole& h : holes) {
        xmin = std::min(xmin, h.cx - h.major);
        xmax = std::max(xmax, h.cx + h.major);
        ymax = std::max(ymax, std::abs(h.cy) + h.minor);
    }
    const double hx = 1.0 / spec.mesh;

    Stack st;
    const double ly = 2.0 * (ymax + opt.margin);
    st.nu = std::max(2, static_cast<int>(std::ceil(ly * spec.mesh)));
    st.du = ly / st.nu;
    st.u0 = -0.5 * ly + 0.5 * st.du;
    const double lz = spec.thickness * (1.0 + 2.0 * spec.padding);
    st.nv = std::max(4, static_cast<int>(std::ceil(lz * spec.mesh)));
    st.dv = lz / st.nv;
    st.v0 = -0.5 * lz + 0.5 * st.dv;

    const int n = st.nu * st.nv;
    st.laplacian = Eigen::MatrixXd::Zero(n, n);
    add_laplacian_1d(st.laplacian, st.nu, st.nv, st.du, true, true);
    add_laplacian_1d(st.laplacian, st.nv, st.nu, st.dv, false, false);

    const double absorb_depth = 0.5 * spec.padding * spec.thickness;
    const double absorb_from = 0.5 * lz - absorb_depth;
    auto profile_at = [&](double xc) {
        Eigen::VectorXcd n2(n);
        for (int iv = 0; iv < st.nv; ++iv) {
            const double z = st.v0 + iv * st.dv;
            const bool in_slab = std::abs(z) < 0.5 * spec.thickness;
            complexd sigma(0.0, 0.0);
            const double t = (std::abs(z) - absorb_from) / absorb_depth;
            if (t > 0.0)
                sigma = complexd(0.0, opt.absorber_strength * t * t);
            for (int iu = 0; iu < st.nu; ++iu) {
                const double y = st.u0 + iu * st.du;
                double eps = 1.0;
                if (in_slab)
                    eps = inside_any_hole(holes, xc, y, ly) ? eps_h : eps_b;
                n2(iu + st.nu * iv) = eps + sigma;
            }
        }
        return n2;
    };

    st.prop0 = xmin - opt.margin;
    const double prop1 = xmax + opt.margin;
    const int nslices =
        std::max(1, static_cast<int>(std::lround((prop1 - st.prop0) / hx)));

    const int port = st.add_profile(profile_at(st.prop0 - 1.0));
    st.slices.push_back({port, 0.0});
    for (int i = 0; i < nslices; ++i) {
        const double xc = st.prop0 + (i + 0.5) * hx;
        const int id = st.add_profile(profile_at(xc));
        if (st.slices.back().profile == id && st.slices.back().h > 0.0)
            st.slices.back().h += hx;
        else
            st.slices.push_back({id, hx});
    }
    st.slices.push_back({port, 0.0});
    return st;
}

// Plane wave along +z; laterally periodic cell enclosing every hole.
Stack build_vertical_stack(const SlabSpec& spec, const SimulateOptions&) {
    const std::vector<Hole> holes = decode_holes(spec);
    const double eps_b = spec.lattice.bulk_index * spec.lattice.bulk_index;
    const double eps_h = spec.lattice.hole_index * spec.lattice.hole_index;

    double lx = 1.0, ly = std::sqrt(3.0);
    for (const Hole& h : holes) {
        lx = std::max(lx, 2.0 * (std::abs(h.cx) + h.major) + 0.5);
        ly = std::max(ly, 2.0 * (std::abs(h.cy) + h.minor) + 0.5);
    }

    Stack st;
    st.nu = std::max(2, static_cast<int>(std::ceil(lx * spec.mesh)));
    st.du = lx / st.nu;
    st.u0 = -0.5 * lx + 0.5 * st.du;
    st.nv = std::max(2, static_cast<int>(std::ceil(ly * spec.mesh)));
    st.dv = ly / st.nv;
    st.v0 = -0.5 * ly + 0.5 * st.dv;

    const int n = st.nu * st.nv;
    st.laplacian = Eigen::MatrixXd::Zero(n, n);
    add_laplacian_1d(st.laplacian, st.nu, st.nv, st.du, true, true);
    add_laplacian_1d(st.laplacian, st.nv, st.nu, st.dv, true, false);

    Eigen::VectorXcd slab(n);
    for (int iv = 0; iv < st.nv; ++iv)
        for (int iu = 0; iu < st.nu; ++iu) {
            const double x = st.u0 + iu * st.du;
            const double y = st.v0 + iv * st.dv;
            slab(iu + st.nu * iv) =
                inside_any_hole(holes, x, y, ly) ? eps_h : eps_b;
        }

    const int air_id = st.add_profile(Eigen::VectorXcd::Constant(n, 1.0));
    const int slab_id = st.add_profile(std::move(slab));
    const double pad = spec.padding * spec.thickness;
    st.prop0 = -0.5 * spec.thickness - pad;
    st.slices.push_back({air_id, 0.0});
    st.slices.push_back({air_id, pad});
    st.slices.push_back({slab_id, spec.thickness});
    st.slices.push_back({air_id, pad});
    st.slices.push_back({air_id, 0.0});
    return st;
}

/// Eigenbasis of a transverse Laplacian, cached because it is geometry-only
/// (shared by every uniform slice and every frequency of a scan).
struct TransverseBasis {
    Eigen::MatrixXd laplacian;
    Eigen::MatrixXcd vectors;
    Eigen::VectorXd values;
};

const TransverseBasis& laplacian_modes(const Eigen::MatrixXd& L) {
    static std::vector<std::unique_ptr<TransverseBasis>> cache;
    for (const auto& e : cache)
        if (e->laplacian.rows() == L.rows() &&
            e->laplacian.cwiseEqual(L).all())
            return *e;
    auto tb = std::make_unique<TransverseBasis>();
    tb->laplacian = L;
    linalg::EighResult es = linalg::eigh(L.cast<complexd>());
    tb->vectors = std::move(es.vectors);
    tb->values = std::move(es.values);
    if (cache.size() >= 4)
        cache.erase(cache.begin());
    cache.push_back(std::move(tb));
    return *cache.back();
}

SliceModes solve_slice(const Eigen::MatrixXd& laplacian,
                       const Eigen::VectorXcd& n2, double k0) {
    SliceModes m;
    Eigen::VectorXcd lambda;
    const complexd c0 = n2(0);
    if ((n2.array() == c0).all()) {
        // uniform slice: transverse modes are Laplacian modes
        const TransverseBasis& tb = laplacian_modes(laplacian);
        m.phi = tb.vectors;
        lambda = tb.values.cast<complexd>();
        lambda.array() += (k0 * k0) * c0;
    } else if (n2.imag().isZero(0.0)) {
        // lossless slice: Hermitian eigenproblem
        Eigen::MatrixXcd A = laplacian.cast<complexd>();
        A.diagonal() += (k0 * k0) * n2;
        linalg::EighResult es = linalg::eigh(A);
        m.phi = std::move(es.vectors);
        lambda = es.values.cast<complexd>();
    } else {
        Eigen::MatrixXcd A = laplacian.cast<complexd>();
        A.diagonal() += (k0 * k0) * n2;
        linalg::EigResult er = linalg::eig(A);
        m.phi = std::move(er.vectors);
        lambda = std::move(er.values);
    }
    m.beta.resize(lambda.size());
    const double floor = 1e-9 * std::max(k0, 1.0);
    for (int i = 0; i < lambda.size(); ++i) {
        complexd b = std::sqrt(lambda(i));
        if (b.imag() < 0.0)
            b = -b;
        if (std::abs(b) < floor)
            b = complexd(floor, 0.0);
        m.beta(i) = b;
    }
    m.lu.compute(m.phi);
    return m;
}

} // namespace

SimResult simulate(const SlabSpec& spec, double omega,
                   const SimulateOptions& opt) {
    spec.validate();
    if (omega <= 0.0)
        throw ConfigError("omega must be positive");
    const double n_max =
        std::max(spec.lattice.bulk_index, spec.lattice.hole_index);
    if (spec.mesh < 4.0 * omega * n_max)
        throw SolverError("mesh too coarse: fewer than 4 cells per "
                          "wavelength in the densest medium");

    const Stack st = opt.incidence == Incidence::Edge
                         ? build_edge_stack(spec, opt)
                         : build_vertical_stack(spec, opt);
    const double k0 = kTwoPi * omega;
    std::vector<SliceModes> modes;
    modes.reserve(st.profiles.size());
    for (const Eigen::VectorXcd& n2 : st.profiles)
        modes.push_back(solve_slice(st.laplacian, n2, k0));

    const int m = static_cast<int>(st.slices.size());
    const int n = st.nu * st.nv;
    auto slice_modes = [&](int j) -> const SliceModes& {
        return modes[st.slices[j].profile];
    };
    std::vector<Smat> iface(m - 1);
    for (int j = 0; j < m - 1; ++j)
        iface[j] = interface_smat(slice_modes(j), slice_modes(j + 1));
    auto step = [&](int j) {
        return st.slices[j].h > 0.0
                   ? star(phase_smat(slice_modes(j), st.slices[j].h), iface[j])
                   : iface[j];
    };

    // Backward pass: R[j] maps forward amplitudes at the left edge of slice
    // j to backward amplitudes at the same plane.
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
    std::vector<Eigen::MatrixXcd> R(m);
    R[m - 1] = Eigen::MatrixXcd::Zero(n, n);
    for (int j = m - 2; j >= 0; --j) {
        const Smat S = step(j);
        const Eigen::MatrixXcd G = (I - S.rb * R[j + 1]).lu().solve(S.tf);
        R[j] = S.rf + S.tb * (R[j + 1] * G);
    }

    // Forward pass: uniform unit-amplitude illumination at the input port.
    std::vector<Eigen::VectorXcd> a(m);
    a[0] = slice_modes(0).lu.solve(Eigen::VectorXcd::Ones(n));
    for (int j = 0; j < m - 1; ++j) {
        const Smat S = step(j);
        a[j + 1] = (I - S.rb * R[j + 1]).lu().solve(S.tf * a[j]);
    }

    const double area = st.du * st.dv;
    const double f_in = flux(slice_modes(0), a[0], area);
    if (!(f_in > 0.0))
        throw SolverError("source carries no forward power");
    const Eigen::VectorXcd b0 = R[0] * a[0];
    // flux() measures power along an amplitude set's own travel direction,
    // so the backward amplitudes already yield a positive reflected power
    double refl = flux(slice_modes(0), b0, area) / f_in;
    double trans = flux(slice_modes(m - 1), a[m - 1], area) / f_in;
    if (refl > 1.0 + 1e-3 || trans > 1.0 + 1e-3 || refl < -1e-3 ||
        trans < -1e-3)
        throw SolverError("numerical instability: power balance violated "
                          "(R=" + std::to_string(refl) +
                          ", T=" + std::to_string(trans) + ")");
    refl = std::clamp(refl, 0.0, 1.0);
    trans = std::clamp(trans, 0.0, 1.0);

    SimResult out;
    out.reflectance = refl;
    out.transmittance = trans;
    if (!opt.want_field) {
        return out;
    }

    // Backward amplitudes at the right edge of each interior slice.
    std::vector<Eigen::VectorXcd> br(m);
    br[m - 1] = Eigen::VectorXcd::Zero(n);
    for (int j = 0; j < m - 1; ++j) {
        Eigen::VectorXcd ar = a[j];
        if (st.slices[j].h > 0.0)
            ar = (complexd(0.0, 1.0) * st.slices[j].h *
                  slice_modes(j).beta.array())
                     .exp()
                     .matrix()
                     .cwiseProduct(a[j]);
        br[j] = iface[j].rf * ar + iface[j].tb * (R[j + 1] * a[j + 1]);
    }

    const double hp = 1.0 / spec.mesh;
    const int np =
        static_cast<int>(std::lround(st.prop_length() / hp)) + 1;
    FieldGrid3D grid;
    if (opt.incidence == Incidence::Edge) {
        grid.nx = np;
        grid.ny = st.nu;
        grid.nz = st.nv;
        grid.x0 = st.prop0;
        grid.x1 = st.prop0 + st.prop_length();
        grid.y0 = st.u0;
        grid.y1 = st.u0 + (st.nu - 1) * st.du;
        grid.z0 = st.v0;
        grid.z1 = st.v0 + (st.nv - 1) * st.dv;
    } else {
        grid.nx = st.nu;
        grid.ny = st.nv;
        grid.nz = np;
        grid.x0 = st.u0;
        grid.x1 = st.u0 + (st.nu - 1) * st.du;
        grid.y0 = st.v0;
        grid.y1 = st.v0 + (st.nv - 1) * st.dv;
        grid.z0 = st.prop0;
        grid.z1 = st.prop0 + st.prop_length();
    }
    grid.values.assign(static_cast<std::size_t>(grid.nx) * grid.ny * grid.nz,
                       complexd(0.0, 0.0));

    int slice_j = 1; // skip the zero-thickness input port
    double left = 0.0;
    for (int ip = 0; ip < np; ++ip) {
        const double x = std::min(ip * hp, st.prop_length());
        while (slice_j < m - 1 && x > left + st.slices[slice_j].h + 1e-12) {
            left += st.slices[slice_j].h;
            ++slice_j;
        }
        const SliceModes& sm = slice_modes(slice_j);
        const double xi = x - left;
        const double rest = std::max(0.0, st.slices[slice_j].h - xi);
        const Eigen::ArrayXcd ib = complexd(0.0, 1.0) * sm.beta.array();
        const Eigen::VectorXcd amp =
            (ib * xi).exp().matrix().cwiseProduct(a[slice_j]) +
            (ib * rest).exp().matrix().cwiseProduct(br[slice_j]);
        const Eigen::VectorXcd E = sm.phi * amp;
        for (int iv = 0; iv < st.nv; ++iv)
            for (int iu = 0; iu < st.nu; ++iu) {
                const complexd v = E(iu + st.nu * iv);
                if (opt.incidence == Incidence::Edge)
                    grid.at(ip, iu, iv) = v;
                else
                    grid.at(iu, iv, ip) = v;
            }
    }
    grid.max_abs = 0.0;
    for (const complexd& v : grid.values)
        grid.max_abs = std::max(grid.max_abs, std::abs(v));
    out.field = std::move(grid);
    return out;
}

// ------------------------------------------------------------------- scans

std::string ReflectionSpectrum::to_csv() const {
    std::string s = "omega,R,T\n";
    char buf[96];
    for (std::size_t i = 0; i < frequency.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", frequency[i],
                      reflectance[i], transmittance[i]);
        s += buf;
    }
    return s;
}

ReflectionSpectrum scan_reflection(const SlabSpec& spec,
                                   std::pair<double, double> range,
                                   int n_points, const SimulateOptions& opt) {
    if (!(range.second > range.first) || range.first <= 0.0)
        throw ConfigError("scan range must be positive and increasing");
    if (n_points < 2)
        throw ConfigError("scan needs at least 2 points");

    std::map<double, std::pair<double, double>> pts;
    auto eval = [&](double f) {
        if (pts.count(f))
            return;
        const SimResult r = simulate(spec, f, opt);
        pts[f] = {r.reflectance, r.transmittance};
    };
    for (int i = 0; i < n_points; ++i)
        eval(range.first +
             (range.second - range.first) * i / (n_points - 1));

    for (int level = 0; level < 3; ++level) {
        std::vector<double> fs;
        std::vector<double> rs;
        for (const auto& [f, rt] : pts) {
            fs.push_back(f);
            rs.push_back(rt.first);
        }
        std::vector<double> fresh;
        for (std::size_t i = 1; i + 1 < fs.size(); ++i) {
            const double prom =
                std::min(rs[i - 1], rs[i + 1]) - rs[i];
            if (rs[i] <= rs[i - 1] && rs[i] <= rs[i + 1] && prom > 1e-4) {
                fresh.push_back(0.5 * (fs[i - 1] + fs[i]));
                fresh.push_back(0.5 * (fs[i] + fs[i + 1]));
            }
        }
        for (double f : fresh)
            eval(f);
        if (fresh.empty())
            break;
    }

    ReflectionSpectrum sp;
    for (const auto& [f, rt] : pts) {
        sp.frequency.push_back(f);
        sp.reflectance.push_back(rt.first);
        sp.transmittance.push_back(rt.second);
    }
    return sp;
}

// --------------------------------------------------------------- Q fitting

std::array<double, 4> fit_lorentzian_dip(const std::vector<double>& x,
                                         const std::vector<double>& y,
                                         std::array<double, 4> p) {
    if (x.size() != y.size() || x.size() < 5)
        throw ConfigError("lorentzian fit needs >= 5 samples");
    const int n = static_cast<int>(x.size());

    auto cost_of = [&](const std::array<double, 4>& q, Eigen::VectorXd* res) {
        double c = 0.0;
        for (int i = 0; i < n; ++i) {
            const double u = 2.0 * (x[i] - q[2]) / q[3];
            const double r = q[0] - q[1] / (1.0 + u * u) - y[i];
            if (res)
                (*res)(i) = r;
            c += r * r;
        }
        return c;
    };

    Eigen::VectorXd r(n);
    Eigen::MatrixXd J(n, 4);
    double lambda = 1e-3;
    double cost = cost_of(p, &r);
    for (int iter = 0; iter < 200; ++iter) {
        for (int i = 0; i < n; ++i) {
            const double u = 2.0 * (x[i] - p[2]) / p[3];
            const double d = 1.0 + u * u;
            J(i, 0) = 1.0;
            J(i, 1) = -1.0 / d;
            J(i, 2) = -4.0 * p[1] * u / (p[3] * d * d);
            J(i, 3) = -2.0 * p[1] * u * u / (p[3] * d * d);
        }
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        bool accepted = false;
        for (int tries = 0; tries < 40; ++tries) {
            Eigen::MatrixXd A = JtJ;
            A.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-12);
            const Eigen::VectorXd delta = A.ldlt().solve(-g);
            std::array<double, 4> q = p;
            for (int k = 0; k < 4; ++k)
                q[k] += delta(k);
            if (q[3] == 0.0)
                q[3] = p[3];
            const double c = cost_of(q, nullptr);
            if (c < cost) {
                p = q;
                cost = cost_of(p, &r);
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (delta.norm() < 1e-14 * (1.0 + std::abs(p[2])))
                    return p;
                break;
            }
            lambda *= 5.0;
        }
        if (!accepted)
            break;
    }
    return p;
}

std::vector<Resonance> find_resonances(const ReflectionSpectrum& sp,
                                       double min_prominence) {
    const std::vector<double>& f = sp.frequency;
    const std::vector<double>& R = sp.reflectance;
    std::vector<Resonance> out;
    if (f.size() < 5)
        return out;
    const int n = static_cast<int>(f.size());

    for (int i = 1; i + 1 < n; ++i) {
        if (!(R[i] < R[i - 1] && R[i] <= R[i + 1]))
            continue;
        // Shoulder peaks bracketing the dip.
        int il = i;
        double peak_l = R[i];
        for (int j = i - 1; j >= 0 && R[j] >= R[j + 1]; --j) {
            il = j;
            peak_l = R[j];
        }
        int ir = i;
        double peak_r = R[i];
        for (int j = i + 1; j < n && R[j] >= R[j - 1]; ++j) {
            ir = j;
            peak_r = R[j];
        }
        if (std::min(peak_l, peak_r) - R[i] < min_prominence)
            continue;

        std::vector<double> wx(f.begin() + il, f.begin() + ir + 1);
        std::vector<double> wy(R.begin() + il, R.begin() + ir + 1);
        if (wx.size() < 5)
            continue;
        const double base = std::min(peak_l, peak_r);
        const double depth = base - R[i];
        // Half-depth crossings for the initial width.
        const double half = base - 0.5 * depth;
        double xl = f[il], xr = f[ir];
        for (int j = i; j > il; --j)
            if (R[j - 1] >= half && R[j] < half) {
                const double t = (half - R[j]) / (R[j - 1] - R[j]);
                xl = f[j] + t * (f[j - 1] - f[j]);
                break;
            }
        for (int j = i; j < ir; ++j)
            if (R[j + 1] >= half && R[j] < half) {
                const double t = (half - R[j]) / (R[j + 1] - R[j]);
                xr = f[j] + t * (f[j + 1] - f[j]);
                break;
            }
        double g0 = xr - xl;
        if (g0 <= 0.0)
            g0 = 0.25 * (f[ir] - f[il]);

        const std::array<double, 4> fit =
            fit_lorentzian_dip(wx, wy, {base, depth, f[i], g0});
        const double gamma = std::abs(fit[3]);
        if (fit[2] <= wx.front() || fit[2] >= wx.back() || gamma <= 0.0)
            continue;
        Resonance res;
        res.omega0 = fit[2];
        res.fwhm = gamma;
        res.q = fit[2] / gamma;
        res.depth = fit[1];
        res.baseline = fit[0];
        out.push_back(res);
    }
    return out;
}

Resonance extract_q(const ReflectionSpectrum& spectrum, double min_prominence) {
    const std::vector<Resonance> all =
        find_resonances(spectrum, min_prominence);
    if (all.empty())
        throw SolverError("no resonance feature found in the spectrum");
    if (all.size() > 1)
        throw SolverError("ambiguous spectrum: " + std::to_string(all.size()) +
                          " resonance candidates");
    return all.front();
}

// ----------------------------------------------------------- mode volume

std::vector<double> simpson_weights(int n, double length) {
    if (n < 2)
        throw ConfigError("quadrature needs at least 2 samples per axis");
    const double h = length / (n - 1);
    std::vector<double> w(n, 0.0);
    if (n == 2) {
        w[0] = w[1] = 0.5 * h;
        return w;
    }
    auto simpson = [&](int first, int last) { // even interval count
        w[first] += h / 3.0;
        w[last] += h / 3.0;
        for (int i = first + 1; i < last; ++i)
            w[i] += ((i - first) % 2 == 1 ? 4.0 : 2.0) * h / 3.0;
    };
    if ((n - 1) % 2 == 0) {
        simpson(0, n - 1);
    } else if (n == 4) {
        w[0] = w[3] = 3.0 * h / 8.0;
        w[1] = w[2] = 9.0 * h / 8.0;
    } else {
        simpson(0, n - 4);
        w[n - 4] += 3.0 * h / 8.0;
        w[n - 3] += 9.0 * h / 8.0;
        w[n - 2] += 9.0 * h / 8.0;
        w[n - 1] += 3.0 * h / 8.0;
    }
    return w;
}

double mode_volume_3d(const FieldGrid3D& field, const Region3D& r) {
    if (r.ix0 < 0 || r.iy0 < 0 || r.iz0 < 0 || r.ix1 >= field.nx ||
        r.iy1 >= field.ny || r.iz1 >= field.nz || r.ix1 <= r.ix0 ||
        r.iy1 <= r.iy0 || r.iz1 <= r.iz0)
        throw ConfigError("invalid interior region");

    const std::vector<double> wx = simpson_weights(
        r.ix1 - r.ix0 + 1, field.x_of(r.ix1) - field.x_of(r.ix0));
    const std::vector<double> wy = simpson_weights(
        r.iy1 - r.iy0 + 1, field.y_of(r.iy1) - field.y_of(r.iy0));
    const std::vector<double> wz = simpson_weights(
        r.iz1 - r.iz0 + 1, field.z_of(r.iz1) - field.z_of(r.iz0));

    double integral = 0.0, peak = 0.0;
    for (int iz = r.iz0; iz <= r.iz1; ++iz)
        for (int iy = r.iy0; iy <= r.iy1; ++iy)
            for (int ix = r.ix0; ix <= r.ix1; ++ix) {
                const double a2 = std::norm(field.at(ix, iy, iz));
                peak = std::max(peak, a2);
                integral +=
                    wx[ix - r.ix0] * wy[iy - r.iy0] * wz[iz - r.iz0] * a2;
            }
    if (peak <= 0.0)
        throw SolverError("mode volume of a zero field");
    return integral / peak;
}

double mode_volume_3d(const FieldGrid3D& field) {
    return mode_volume_3d(
        field, {0, field.nx - 1, 0, field.ny - 1, 0, field.nz - 1});
}

} // namespace phcd
