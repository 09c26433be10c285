#pragma once

/*
 * Transfer (Ruelle) operator of a tower potential, represented exactly on
 * cylinder functions of a fixed working depth m:
 *
 *   (L f)(x) = sum over one-step preimages y = j x of e^{phi(y)} f(y).
 *
 * Matrix convention: rows and columns are indexed by the sorted admissible
 * depth-m words; row w (output), column v (input) carries e^{phi(v_0 w)} when
 * v = prefix_m(v_0 w) and v_0 w is admissible, else 0. For a depth-2 Markov
 * potential at m = 1 this is the transpose of the weight matrix.
 *
 * With m >= depth - 1 every quantity below is exact: the leading eigenvector
 * h of a depth-r tower is itself depth-(r-1) locally constant, and cylinder
 * masses follow from the identities
 *   nu[w_0...w_n]  = rho^{-n} < L_w 1, nu >,
 *   mu[w_0...w_n]  = rho^{-n} < L_w h, nu >,
 * evaluated by finite sums over the depth-m words extending w_n.
 */

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "factorgibbs/potential.hpp"
#include "factorgibbs/sft.hpp"

namespace factorgibbs {

// Values over the admissible words of one depth, in WordIndex rank order.
struct CylinderFunction {
    int depth = 0;
    Eigen::VectorXd values;
};

struct CylinderMeasure {
    int depth = 0;
    Eigen::VectorXd weights; // nonnegative
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Smallest depth at which a tower's transfer matrix is exact.
inline int working_depth(const Potential& phi) { return std::max(phi.max_depth() - 1, 1); }

struct EigenData {
    int depth = 0;
    double rho = 0;      // spectral radius of the depth-m matrix
    double pressure = 0; // log rho
    Eigen::VectorXd h;   // right eigenvector, scaled so <h, nu> = 1
    Eigen::VectorXd nu;  // left eigenvector, scaled so sum(nu) = 1
    double residual_h = 0, residual_nu = 0; // max-norm eigen residuals
    int iterations_h = 0, iterations_nu = 0;
};

class TransferOperator {
public:
    TransferOperator(const Potential& phi, int depth)
        : phi_(phi), depth_(depth), words_(phi.sft(), depth) {
        if (depth < working_depth(phi))
            throw std::invalid_argument("TransferOperator: depth below the exact working depth");
        const Sft& x = phi_.sft();
        const int w = words_.size();
        mat_.setZero(w, w);
        Word full;
        for (int r = 0; r < w; ++r) {
            const Word& out = words_.word(r);
            for (int j = 0; j < x.alphabet_size(); ++j) {
                if (!x.edge(j, out[0])) continue;
                full.clear();
                full.push_back(j);
                full.insert(full.end(), out.begin(), out.end());
                int c = words_.rank_prefix(full);
                mat_(r, c) = std::exp(phi_.evaluate_unchecked(full, 0));
            }
        }
    }

    const Potential& potential() const { return phi_; }
    int depth() const { return depth_; }
    const WordIndex& words() const { return words_; }
    const Eigen::MatrixXd& matrix() const { return mat_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& f) const {
        if (f.size() != mat_.rows())
            throw std::invalid_argument("TransferOperator::apply: size mismatch");
        return mat_ * f;
    }

    // Deterministic power iteration (all-ones start, max-norm scaling,
    // Rayleigh estimates) on the matrix and its transpose.
    EigenData eigendata(double tol = 1e-12, int max_iter = 100000) const {
        EigenData e;
        e.depth = depth_;
        auto lead = [&](const Eigen::MatrixXd& m, double& lam, double& resid, int& iters) {
            Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows());
            double prev = 0;
            for (int it = 1; it <= max_iter; ++it) {
                Eigen::VectorXd w = m * v;
                lam = v.dot(w) / v.dot(v);
                resid = (w - lam * v).cwiseAbs().maxCoeff();
                double scale = w.cwiseAbs().maxCoeff();
                if (scale <= 0) throw NumericError("eigendata: iteration collapsed to zero");
                v = w / scale;
                iters = it;
                if (std::abs(lam - prev) <= tol * std::max(1.0, std::abs(lam)) &&
                    resid <= tol * std::max(1.0, std::abs(lam)))
                    return v;
                prev = lam;
            }
            throw NumericError("eigendata: power iteration did not converge");
        };
        double lam_h = 0, lam_nu = 0;
        e.h = lead(mat_, lam_h, e.residual_h, e.iterations_h);
        Eigen::MatrixXd mt = mat_.transpose();
        e.nu = lead(mt, lam_nu, e.residual_nu, e.iterations_nu);
        e.rho = lam_h;
        e.pressure = std::log(e.rho);
        e.nu /= e.nu.sum();
        e.h /= e.h.dot(e.nu);
        return e;
    }

    // Exact cylinder mass of the eigenmeasure nu (weight = 1) or the Gibbs
    // measure mu = h nu (weight = h): sum over depth-m continuations z of
    //   e^{S_{l-1} phi(w_{0..l-2} z)} h(w_{0..l-2} z) nu(z),
    // scaled by rho^{-(l-1)}. The eigenfunction is read off the head of the
    // concatenated word, the eigenmeasure off the continuation.
    double cylinder_mass(const EigenData& e, const Word& w, bool gibbs) const {
        const Sft& x = phi_.sft();
        if (!is_admissible(x, w))
            throw std::invalid_argument("cylinder_mass: inadmissible word");
        const int ell = static_cast<int>(w.size());
        Word full(w.begin(), w.end() - 1);
        const std::size_t head = full.size();
        double total = 0;
        for (int v = 0; v < words_.size(); ++v) {
            const Word& tail = words_.word(v);
            if (tail[0] != w[static_cast<std::size_t>(ell - 1)]) continue;
            full.resize(head);
            full.insert(full.end(), tail.begin(), tail.end());
            double s = 0;
            for (int i = 0; i < ell - 1; ++i) s += phi_.evaluate_unchecked(full, i);
            double weight = gibbs ? e.h(words_.rank_prefix(full)) : 1.0;
            total += std::exp(s) * weight * e.nu(v);
        }
        return std::pow(e.rho, -(ell - 1)) * total;
    }

private:
    Potential phi_;
    int depth_;
    WordIndex words_;
    Eigen::MatrixXd mat_;
};

inline CylinderFunction ruelle_apply(const TransferOperator& op, const CylinderFunction& f) {
    if (f.depth != op.depth())
        throw std::invalid_argument("ruelle_apply: depth mismatch");
    return {f.depth, op.apply(f.values)};
}

inline EigenData eigendata(const TransferOperator& op, double tol = 1e-12, int max_iter = 100000) {
    return op.eigendata(tol, max_iter);
}

// Pressure-normalized potential: appends a constant depth-1 layer -pressure,
// so the normalized transfer operator has spectral radius 1. Variations and
// the envelope are unchanged.
inline Potential normalize(const Potential& phi, const EigenData& e) {
    std::vector<PotentialLayer> layers = phi.layers();
    layers.push_back(PotentialLayer{
        1, std::vector<double>(static_cast<std::size_t>(phi.sft().alphabet_size()), -e.pressure)});
    return Potential(phi.sft(), std::move(layers));
}

inline double gibbs_cylinder(const TransferOperator& op, const EigenData& e, const Word& w) {
    return op.cylinder_mass(e, w, true);
}

inline double eigenmeasure_cylinder(const TransferOperator& op, const EigenData& e, const Word& w) {
    return op.cylinder_mass(e, w, false);
}

struct GibbsBounds {
    double constant = 1;    // max(ratio, 1/ratio) over all probed cylinders
    double min_ratio = 1, max_ratio = 1;
    Word worst;             // cylinder attaining the constant
};

// Measured two-sided Gibbs constant: ratio mu[w] / e^{S_n phi(w) - n P} over
// all admissible words of length <= n_max, with S_n phi evaluated at the
// lexicographic representative of the cylinder.
inline GibbsBounds gibbs_bounds_check(const TransferOperator& op, const EigenData& e, int n_max) {
    if (n_max < 1) throw std::invalid_argument("gibbs_bounds_check: n_max must be >= 1");
    GibbsBounds out;
    out.min_ratio = std::numeric_limits<double>::infinity();
    out.max_ratio = 0;
    for (int n = 1; n <= n_max; ++n) {
        for (const Word& w : enumerate_words(op.potential().sft(), n)) {
            double mu = gibbs_cylinder(op, e, w);
            double s = op.potential().birkhoff_sum(w, n) - n * e.pressure;
            double ratio = mu / std::exp(s);
            double c = std::max(ratio, 1.0 / ratio);
            if (c > out.constant) {
                out.constant = c;
                out.worst = w;
            }
            out.min_ratio = std::min(out.min_ratio, ratio);
            out.max_ratio = std::max(out.max_ratio, ratio);
        }
    }
    return out;
}

// ── Markov chains: stationary vectors and the pressure identity ────────────

// Solves nu S = nu, sum nu = 1 by linear least squares (independent of the
// power iteration used elsewhere). Requires an irreducible nonnegative matrix.
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& s) {
    const int n = static_cast<int>(s.rows());
    if (s.cols() != n) throw std::invalid_argument("stationary_distribution: matrix not square");
    std::vector<std::uint8_t> reach(static_cast<std::size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (s(i, j) < 0) throw std::invalid_argument("stationary_distribution: negative entry");
            reach[static_cast<std::size_t>(i) * n + j] = (i == j || s(i, j) > 0) ? 1 : 0;
        }
    for (int k = 0; k < n; ++k) // Warshall closure
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (reach[static_cast<std::size_t>(i) * n + k] &&
                    reach[static_cast<std::size_t>(k) * n + j])
                    reach[static_cast<std::size_t>(i) * n + j] = 1;
    for (std::uint8_t r : reach)
        if (!r) throw std::invalid_argument("stationary_distribution: matrix is reducible");

    Eigen::MatrixXd a(n + 1, n);
    a.topRows(n) = s.transpose() - Eigen::MatrixXd::Identity(n, n);
    a.bottomRows(1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
    b(n) = 1;
    Eigen::VectorXd nu = a.colPivHouseholderQr().solve(b);
    double resid = (a * nu - b).cwiseAbs().maxCoeff();
    if (resid > 1e-10) throw NumericError("stationary_distribution: solve residual too large");
    return nu;
}

struct PressureIdentity {
    double entropy = 0;      // -sum_i nu_i sum_j S_ij log S_ij
    double integral = 0;     // sum over two-symbol cylinders of mass * log-weight
    double identity_gap = 0; // entropy + integral; zero for a stochastic matrix
    Eigen::VectorXd stationary;
};

// For a stochastic S the Gibbs measure of phi = log S_{x_0 x_1} is the Markov
// chain of S, its pressure is 0, and entropy + integral(phi) = 0. The two
// terms are computed by separate routes (conditional row entropies vs the
// two-symbol marginal) so the gap is a real consistency check.
inline PressureIdentity markov_pressure_identity(const Eigen::MatrixXd& s) {
    const int n = static_cast<int>(s.rows());
    if (s.cols() != n) throw std::invalid_argument("markov_pressure_identity: matrix not square");
    for (int i = 0; i < n; ++i) {
        double row = 0;
        for (int j = 0; j < n; ++j) {
            if (s(i, j) < 0)
                throw std::invalid_argument("markov_pressure_identity: negative entry");
            row += s(i, j);
        }
        if (std::abs(row - 1.0) > 1e-12)
            throw std::invalid_argument("markov_pressure_identity: rows must sum to 1");
    }
    PressureIdentity out;
    out.stationary = stationary_distribution(s);
    for (int i = 0; i < n; ++i) {
        double hrow = 0;
        for (int j = 0; j < n; ++j)
            if (s(i, j) > 0) hrow += s(i, j) * std::log(s(i, j));
        out.entropy -= out.stationary(i) * hrow;
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (s(i, j) > 0) {
                double mass2 = out.stationary(i) * s(i, j); // chain mass of cylinder ij
                out.integral += mass2 * std::log(s(i, j));
            }
    out.identity_gap = out.entropy + out.integral;
    return out;
}

} // namespace factorgibbs
