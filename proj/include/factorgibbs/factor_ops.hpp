#pragma once

/*
 * Operator calculus of a one-block factor map pi on top of a transfer
 * operator. The depth-m matrix of L splits into sub-operators
 *
 *   L_ij f(x) = e^{phi(jx)} f(jx) 1_{[i]}(x)   (j the earlier symbol),
 *
 * i.e. the matrix restricted to output words starting with i and input words
 * starting with j. Summing over fibers gives block operators
 *
 *   Lb_{b b'} = sum over pi(i) = b, pi(j) = b' of L_ij
 *
 * with b the output (later) fiber and b' the input (earlier) fiber, so an
 * image word ybar = y_0 ... y_n acts by the right-to-left product
 * Lb_{y_n y_{n-1}} ... Lb_{y_1 y_0}. Pairing such products against the left
 * eigenvector nu yields pushforward cylinder masses:
 *
 *   pi_* nu[ybar] = rho^{-n} < Lb_ybar 1, nu >,
 *   pi_* mu[ybar] = rho^{-n} < Lb_ybar h, nu >,
 *
 * and the one-sided conditional quotients
 *
 *   f_m(y) = log( pi_* eta[y_0...y_m] / pi_* eta[y_1...y_m] )
 *
 * converge to the limiting potential psi of the pushforward measure.
 * Long products run through ScaledVector (running log scale) so nothing
 * underflows.
 */

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "factorgibbs/sft.hpp"
#include "factorgibbs/potential.hpp"
#include "factorgibbs/transfer.hpp"

namespace factorgibbs {

struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Output fiber first: mat realizes the image step from_label -> to_label.
struct BlockOperator {
    int to_label = -1;
    int from_label = -1;
    bool admissible = false; // false <=> the matrix is identically zero
    Eigen::MatrixXd mat;
};

struct SubOperator {
    int to_symbol = -1;   // i: output words start with i
    int from_symbol = -1; // j: input words start with j, needs edge j -> i
    bool admissible = false;
    Eigen::MatrixXd mat;
};

// Vector with a running log scale, kept near unit max-norm across long
// nonnegative matrix products.
struct ScaledVector {
    Eigen::VectorXd v;
    double log_scale = 0;

    explicit ScaledVector(Eigen::VectorXd vec) : v(std::move(vec)) { rescale(); }

    void rescale() {
        double m = v.cwiseAbs().maxCoeff();
        if (m > 0) {
            v /= m;
            log_scale += std::log(m);
        }
    }

    void apply(const Eigen::MatrixXd& m) {
        v = m * v;
        rescale();
    }

    bool zero() const { return v.cwiseAbs().maxCoeff() == 0; }

    // log <v, weights>; requires a strictly positive pairing on the support.
    double pair_log(const Eigen::VectorXd& weights) const {
        double d = v.dot(weights);
        if (d <= 0) return -std::numeric_limits<double>::infinity();
        return std::log(d) + log_scale;
    }
};

class FactorSystem {
public:
    FactorSystem(Potential phi, FactorMap fmap, int depth = -1, double eig_tol = 1e-12)
        : phi_(std::move(phi)),
          fmap_(std::move(fmap)),
          op_(phi_, depth < 0 ? working_depth(phi_) : depth),
          eig_(op_.eigendata(eig_tol)) {
        if (fmap_.domain_alphabet_size() != phi_.sft().alphabet_size())
            throw std::invalid_argument("FactorSystem: factor map does not match the alphabet");
        const WordIndex& ix = op_.words();
        fiber_of_word_.resize(static_cast<std::size_t>(ix.size()));
        for (int r = 0; r < ix.size(); ++r)
            fiber_of_word_[static_cast<std::size_t>(r)] = fmap_(ix.word(r)[0]);
    }

    const Sft& sft() const { return phi_.sft(); }
    const FactorMap& fmap() const { return fmap_; }
    const Potential& potential() const { return phi_; }
    const TransferOperator& op() const { return op_; }
    const EigenData& eig() const { return eig_; }
    int depth() const { return op_.depth(); }

    int word_fiber(int rank) const { return fiber_of_word_[static_cast<std::size_t>(rank)]; }

    SubOperator sub_operator(int i, int j) const {
        const Sft& x = sft();
        if (i < 0 || j < 0 || i >= x.alphabet_size() || j >= x.alphabet_size())
            throw std::invalid_argument("sub_operator: symbol out of range");
        SubOperator s;
        s.to_symbol = i;
        s.from_symbol = j;
        s.admissible = x.edge(j, i);
        const WordIndex& ix = op_.words();
        s.mat.setZero(ix.size(), ix.size());
        if (s.admissible)
            for (int r = 0; r < ix.size(); ++r) {
                if (ix.word(r)[0] != i) continue;
                for (int c = 0; c < ix.size(); ++c)
                    if (ix.word(c)[0] == j) s.mat(r, c) = op_.matrix()(r, c);
            }
        return s;
    }

    const BlockOperator& block_operator(int b_to, int b_from) const {
        if (b_to < 0 || b_from < 0 || b_to >= fmap_.image_alphabet_size() ||
            b_from >= fmap_.image_alphabet_size())
            throw std::invalid_argument("block_operator: image symbol out of range");
        auto key = std::make_pair(b_to, b_from);
        auto it = blocks_.find(key);
        if (it != blocks_.end()) return it->second;
        BlockOperator blk;
        blk.to_label = b_to;
        blk.from_label = b_from;
        const WordIndex& ix = op_.words();
        blk.mat.setZero(ix.size(), ix.size());
        for (int r = 0; r < ix.size(); ++r) {
            if (word_fiber(r) != b_to) continue;
            for (int c = 0; c < ix.size(); ++c)
                if (word_fiber(c) == b_from && op_.matrix()(r, c) != 0) {
                    blk.mat(r, c) = op_.matrix()(r, c);
                    blk.admissible = true;
                }
        }
        return blocks_.emplace(key, std::move(blk)).first->second;
    }

    // Zero out the entries of v outside the depth-m words of image fiber b.
    Eigen::VectorXd mask_to_fiber(const Eigen::VectorXd& v, int b) const {
        Eigen::VectorXd out = v;
        for (int r = 0; r < out.size(); ++r)
            if (word_fiber(r) != b) out(r) = 0;
        return out;
    }

    // Least fiber-mixing exponent (cached); capacity error if none <= n_max.
    int fiber_exponent(int n_max = 12) const {
        if (fiber_exp_ < 0) {
            FiberMixingResult r = fiber_mixing_exponent(sft(), fmap_, n_max);
            if (!r.found)
                throw CapacityError("fiber_exponent: no exponent found up to the probe cap");
            fiber_exp_ = r.exponent;
        }
        return fiber_exp_;
    }

private:
    Potential phi_;
    FactorMap fmap_;
    TransferOperator op_;
    EigenData eig_;
    std::vector<int> fiber_of_word_;
    mutable std::map<std::pair<int, int>, BlockOperator> blocks_;
    mutable int fiber_exp_ = -1;
};

// Right-to-left product over a domain word: L_{w_n w_{n-1}} ... L_{w_1 w_0}.
// An inadmissible word yields the zero matrix with admissible = false.
inline SubOperator word_operator(const FactorSystem& sys, const Word& w) {
    if (w.size() < 2) throw std::invalid_argument("word_operator: need length >= 2");
    check_symbols(sys.sft(), w);
    SubOperator out;
    out.to_symbol = w.back();
    out.from_symbol = w.front();
    out.admissible = is_admissible(sys.sft(), w);
    const int n = static_cast<int>(sys.op().words().size());
    if (!out.admissible) {
        out.mat.setZero(n, n);
        return out;
    }
    out.mat = sys.sub_operator(w[1], w[0]).mat;
    for (std::size_t t = 1; t + 1 < w.size(); ++t)
        out.mat = (sys.sub_operator(w[t + 1], w[t]).mat * out.mat).eval();
    return out;
}

// Right-to-left product over an image word: Lb_{y_n y_{n-1}} ... Lb_{y_1 y_0}.
inline BlockOperator block_word_operator(const FactorSystem& sys, const Word& ybar) {
    if (ybar.size() < 2) throw std::invalid_argument("block_word_operator: need length >= 2");
    BlockOperator out;
    out.to_label = ybar.back();
    out.from_label = ybar.front();
    out.mat = sys.block_operator(ybar[1], ybar[0]).mat;
    for (std::size_t t = 1; t + 1 < ybar.size(); ++t)
        out.mat = (sys.block_operator(ybar[t + 1], ybar[t]).mat * out.mat).eval();
    out.admissible = out.mat.cwiseAbs().maxCoeff() > 0;
    return out;
}

enum class Reference { Eigenmeasure, Gibbs };

struct PushValue {
    double value = 0;
    bool admissible = false; // false: the image word has no lift, value = 0
};

// Pushforward mass of an image cylinder via the block-operator product.
inline PushValue pushforward_operator(const FactorSystem& sys, const Word& ybar, Reference ref) {
    if (ybar.empty()) throw std::invalid_argument("pushforward_operator: empty word");
    for (int c : ybar)
        if (c < 0 || c >= sys.fmap().image_alphabet_size())
            throw std::invalid_argument("pushforward_operator: image symbol out of range");
    const EigenData& e = sys.eig();
    Eigen::VectorXd start = (ref == Reference::Gibbs)
                                ? e.h
                                : Eigen::VectorXd::Ones(e.h.size()).eval();
    ScaledVector v(sys.mask_to_fiber(start, ybar[0]));
    for (std::size_t t = 0; t + 1 < ybar.size(); ++t) {
        if (v.zero()) return {0.0, false};
        v.apply(sys.block_operator(ybar[t + 1], ybar[t]).mat);
    }
    if (v.zero()) return {0.0, false};
    double log_val = v.pair_log(e.nu) -
                     (static_cast<double>(ybar.size()) - 1) * e.pressure;
    return {std::exp(log_val), true};
}

// Independent path: enumerate the lifts and add their cylinder masses.
inline PushValue pushforward_liftsum(const FactorSystem& sys, const Word& ybar, Reference ref) {
    if (ybar.empty()) throw std::invalid_argument("pushforward_liftsum: empty word");
    std::vector<Word> lifts = lift_words(sys.sft(), sys.fmap(), ybar);
    if (lifts.empty()) return {0.0, false};
    double total = 0;
    for (const Word& w : lifts)
        total += sys.op().cylinder_mass(sys.eig(), w, ref == Reference::Gibbs);
    return {total, true};
}

// Contract entry point; the lift-sum path is the cross-checking oracle.
inline PushValue pushforward_cylinder(const FactorSystem& sys, const Word& ybar, Reference ref) {
    return pushforward_operator(sys, ybar, ref);
}

// ── conditional quotients f_m ──────────────────────────────────────────────

struct PsiOptions {
    Reference ref = Reference::Eigenmeasure;   // reference measure eta
    const Eigen::VectorXd* pairing = nullptr;  // functional replacing nu (optional)
};

// f_k(ybar) = log( pi_* eta[y_0...y_k] / pi_* eta[y_1...y_k] ) for
// k = 1..|ybar|-1, computed in one sweep: both products grow by the same
// left factor Lb_{y_k y_{k-1}}, the numerator chain starting one step early.
inline std::vector<double> f_sequence(const FactorSystem& sys, const Word& ybar,
                                      const PsiOptions& opt = {}) {
    if (ybar.size() < 2) throw std::invalid_argument("f_sequence: need length >= 2");
    if (!is_image_admissible(sys.sft(), sys.fmap(), ybar))
        throw std::domain_error("f_sequence: image word has no lift");
    const EigenData& e = sys.eig();
    const Eigen::VectorXd& eta = opt.pairing ? *opt.pairing : e.nu;
    Eigen::VectorXd start = (opt.ref == Reference::Gibbs)
                                ? e.h
                                : Eigen::VectorXd::Ones(e.h.size()).eval();
    ScaledVector num(sys.mask_to_fiber(start, ybar[0]));
    ScaledVector den(sys.mask_to_fiber(start, ybar[1]));
    std::vector<double> out;
    out.reserve(ybar.size() - 1);
    for (std::size_t t = 1; t < ybar.size(); ++t) {
        num.apply(sys.block_operator(ybar[t], ybar[t - 1]).mat);
        if (t >= 2) den.apply(sys.block_operator(ybar[t], ybar[t - 1]).mat);
        double ln = num.pair_log(eta), ld = den.pair_log(eta);
        if (!std::isfinite(ln) || !std::isfinite(ld))
            throw std::domain_error("f_sequence: pairing vanished along the word");
        out.push_back(ln - ld - e.pressure);
    }
    return out;
}

inline double f_m(const FactorSystem& sys, const Word& ybar, const PsiOptions& opt = {}) {
    return f_sequence(sys, ybar, opt).back();
}

} // namespace factorgibbs
