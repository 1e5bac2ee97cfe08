#include "phcd/objective.hpp"

#include <cmath>
#include <numbers>

namespace phcd {

namespace {

double sinc(double x) {
    return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
}

/// Integral of exp(i d.r) over the centered square of side L.
double box_integral(const Vec2& d, double side) {
    return side * side * sinc(0.5 * d.x() * side) * sinc(0.5 * d.y() * side);
}

double quadratic_form(const Eigen::VectorXcd& a, const Eigen::MatrixXcd& M) {
    const complexd v = a.dot(M * a);
    if (std::abs(v.imag()) > 1e-12 * std::max(1.0, std::abs(v.real())))
        throw SolverError("quadratic form has non-negligible imaginary part " +
                          std::to_string(v.imag()));
    return v.real();
}

} // namespace

ObjectiveGrams build_grams(const ModeBasis& modes, const GramOptions& opt) {
    const int ng = modes.basis.size();
    const int nq = modes.bz.size();
    const int nb = modes.n_bands;
    const int dim = modes.dim();

    ObjectiveGrams grams;
    grams.domain_side = opt.domain_side;
    grams.S.resize(dim, dim);
    Eigen::MatrixXd box(ng, ng);
    for (int qa = 0; qa < nq; ++qa) {
        for (int qb = qa; qb < nq; ++qb) {
            for (int ga = 0; ga < ng; ++ga)
                for (int gb = 0; gb < ng; ++gb) {
                    const Vec2 d = (modes.bz.points[qa].q + modes.basis.g[ga]) -
                                   (modes.bz.points[qb].q + modes.basis.g[gb]);
                    box(ga, gb) = box_integral(d, opt.domain_side);
                }
            const Eigen::MatrixXcd block =
                modes.h[qa].adjoint() * box * modes.h[qb];
            grams.S.block(qa * nb, qb * nb, nb, nb) = block;
            if (qb != qa)
                grams.S.block(qb * nb, qa * nb, nb, nb) = block.adjoint();
        }
    }
    grams.S = 0.5 * (grams.S + grams.S.adjoint()).eval();

    // Origin outer product: H_{n,q}(0) = sum_G h.
    Eigen::VectorXcd field0(dim);
    for (int qi = 0; qi < nq; ++qi)
        field0.segment(qi * nb, nb) = modes.h[qi].colwise().sum();
    grams.P = field0.conjugate() * field0.transpose();

    // Q proxy: w_i = omega_abs / |q|, with Gamma-region modes penalized.
    Eigen::VectorXd ratio = Eigen::VectorXd::Zero(dim);
    std::vector<bool> excluded(dim, false);
    for (int qi = 0; qi < nq; ++qi) {
        const double qn = modes.bz.points[qi].q.norm();
        for (int b = 0; b < nb; ++b) {
            const int i = modes.flat(qi, b);
            if (qn < opt.q_min)
                excluded[i] = true;
            else
                ratio(i) = 2.0 * std::numbers::pi * modes.omega[qi](b) / qn;
        }
    }
    Eigen::MatrixXd W = ratio * ratio.transpose();
    for (int i = 0; i < dim; ++i)
        if (excluded[i]) {
            W.row(i).setZero();
            W.col(i).setZero();
            W(i, i) = opt.gamma_penalty;
        }
    grams.W = W.cast<complexd>();
    return grams;
}

double mode_volume(const Eigen::VectorXcd& a, const Eigen::MatrixXcd& S,
                   double max_abs_sq) {
    if (max_abs_sq <= 0.0)
        throw SolverError("mode_volume: zero field");
    return quadratic_form(a, S) / max_abs_sq;
}

double mode_volume(const Eigen::VectorXcd& a, const ObjectiveGrams& grams,
                   const ModeBasis& modes, int resolution) {
    CavityExpansion tmp;
    tmp.a = a;
    const FieldGrid2D grid =
        synthesize_field(tmp, modes, 0.5 * grams.domain_side, resolution);
    return mode_volume(a, grams.S, grid.max_abs * grid.max_abs);
}

double intensity_at_origin(const Eigen::VectorXcd& a,
                           const Eigen::MatrixXcd& P) {
    return quadratic_form(a, P);
}

double q_proxy(const Eigen::VectorXcd& a, const Eigen::MatrixXcd& W) {
    return quadratic_form(a, W);
}

Eigen::MatrixXcd cost_matrix(const ObjectiveGrams& grams,
                             const CostWeights& w) {
    return grams.W + w.beta_I * grams.P - w.beta_V * grams.S;
}

double cost(const Eigen::VectorXcd& a, const ObjectiveGrams& grams,
            const CostWeights& w) {
    return quadratic_form(a, cost_matrix(grams, w));
}

Eigen::VectorXcd cost_gradient(const Eigen::VectorXcd& a,
                               const ObjectiveGrams& grams,
                               const CostWeights& w) {
    return 2.0 * (cost_matrix(grams, w) * a);
}

} // namespace phcd
