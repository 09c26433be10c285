#pragma once

/*
 * Certified evaluation of the induced potential psi of a pushforward measure.
 *
 * The conditional quotients f_m stabilize at the schedule rate: once
 * m >= threshold(k) = 1 + n_1 + ... + n_k, every further refinement moves the
 * value by at most gamma^{k-1} D. estimate_psi picks the least k whose bound
 * meets the requested tolerance, extends the image word as needed, and
 * returns the value with its certificate.
 *
 * Birkhoff sums of psi estimates come in two algebraically independent forms,
 *   sum of quotient terms  f(y_t y_{t+1} ...)  for t < n, and
 *   log( push[y_0..y_L] / push[y_n..y_L] ) - n P,
 * which must agree to rounding; both are exposed for cross-checking.
 *
 * verify_gibbs_equivalence checks the defining two-sided bound: with K the
 * Bowen constant of phi and C1, C2 the extreme ratios of sup-cylinder weights
 * against Gibbs masses over domain words,
 *
 *   e^{-K} C1 <= e^{S_n psi(y)} / pi_* mu[y_0 .. y_{n-1}] <= C2
 *
 * for every admissible image word, up to the certified estimation slack.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "factorgibbs/factor_ops.hpp"
#include "factorgibbs/schedule.hpp"

namespace factorgibbs {

namespace detail {

// log pi_* eta[w] - (|w|-1) pressure for an image word (log scale throughout).
inline double log_pushforward(const FactorSystem& sys, const Word& w, const PsiOptions& opt) {
    if (w.empty()) throw std::invalid_argument("log_pushforward: empty word");
    const EigenData& e = sys.eig();
    const Eigen::VectorXd& eta = opt.pairing ? *opt.pairing : e.nu;
    Eigen::VectorXd start =
        (opt.ref == Reference::Gibbs) ? e.h : Eigen::VectorXd::Ones(e.h.size()).eval();
    ScaledVector v(sys.mask_to_fiber(start, w[0]));
    for (std::size_t t = 0; t + 1 < w.size(); ++t) {
        if (v.zero()) throw std::domain_error("log_pushforward: image word has no lift");
        v.apply(sys.block_operator(w[t + 1], w[t]).mat);
    }
    if (v.zero()) throw std::domain_error("log_pushforward: image word has no lift");
    double lp = v.pair_log(eta);
    if (!std::isfinite(lp)) throw std::domain_error("log_pushforward: pairing vanished");
    return lp - (static_cast<double>(w.size()) - 1) * sys.eig().pressure;
}

} // namespace detail

struct PsiEstimate {
    double value = 0;
    double certified_error = std::numeric_limits<double>::infinity();
    int m_used = 0;          // quotient index: value = f_{m_used}
    int k_used = 0;          // contraction steps backing the certificate
    bool met_target = false; // certified_error <= requested eps
    Word word;               // evaluated word (input, extended if it was shorter)
    std::vector<double> f_seq;
};

namespace detail {

inline PsiEstimate estimate_psi_at(const FactorSystem& sys, const ConeSchedule& s,
                                   const Word& ybar, int k, double eps, const PsiOptions& opt) {
    const int m_star = s.threshold(k);
    PsiEstimate out;
    out.word = ybar;
    if (static_cast<int>(out.word.size()) < m_star + 1)
        out.word = extend_image_word(sys.sft(), sys.fmap(), out.word, m_star + 1);
    out.f_seq = f_sequence(sys, out.word, opt);
    out.m_used = static_cast<int>(out.word.size()) - 1;
    out.k_used = s.coverage(out.m_used);
    out.certified_error = s.certified(out.k_used);
    out.met_target = out.certified_error <= eps;
    out.value = out.f_seq.back();
    return out;
}

inline int least_certified_k(const ConeSchedule& s, double eps) {
    for (int c = 1; c <= s.j_max; ++c)
        if (s.certified(c) <= eps) return c;
    return 0;
}

} // namespace detail

// Evaluates psi at the cylinder of ybar to within eps, certified by the
// schedule. Throws CapacityError when the schedule depth cannot reach eps.
inline PsiEstimate estimate_psi(const FactorSystem& sys, const ConeSchedule& s, const Word& ybar,
                                double eps, const PsiOptions& opt = {}) {
    if (ybar.empty()) throw std::invalid_argument("estimate_psi: empty word");
    if (eps <= 0) throw std::invalid_argument("estimate_psi: eps must be positive");
    if (!s.has_contraction())
        throw std::invalid_argument("estimate_psi: attach diameter constants first");
    int k = detail::least_certified_k(s, eps);
    if (k == 0)
        throw CapacityError("estimate_psi: certified(" + std::to_string(s.j_max) + ") = " +
                            std::to_string(s.certified(s.j_max)) + " > eps = " +
                            std::to_string(eps) + "; deepen the schedule");
    return detail::estimate_psi_at(sys, s, ybar, k, eps, opt);
}

// Depth-capped variant: when the schedule cannot certify eps, evaluates at
// the deepest certified threshold and reports met_target = false instead of
// throwing. The certificate still covers the constructed range.
inline PsiEstimate estimate_psi_best(const FactorSystem& sys, const ConeSchedule& s,
                                     const Word& ybar, double eps, const PsiOptions& opt = {}) {
    if (ybar.empty()) throw std::invalid_argument("estimate_psi_best: empty word");
    if (eps <= 0) throw std::invalid_argument("estimate_psi_best: eps must be positive");
    if (!s.has_contraction())
        throw std::invalid_argument("estimate_psi_best: attach diameter constants first");
    int k = detail::least_certified_k(s, eps);
    return detail::estimate_psi_at(sys, s, ybar, k == 0 ? s.j_max : k, eps, opt);
}

struct BirkhoffPsi {
    int n = 0;
    int m = 0;               // context depth: words of length m + 1 are used
    double via_terms = 0;    // sum of n conditional-quotient evaluations
    double via_quotient = 0; // single pushforward quotient
    double mismatch = 0;     // |via_terms - via_quotient|, rounding only
    double certified_error = std::numeric_limits<double>::infinity();
    bool covered = false;    // every term reached threshold(1)
};

// S_n psi estimated at context depth m (the word is extended to length m + 1
// if shorter, truncated if longer; m = -1 means use the word as given).
inline BirkhoffPsi birkhoff_sum_psi(const FactorSystem& sys, const ConeSchedule& s,
                                    const Word& ybar_in, int n, int m = -1,
                                    const PsiOptions& opt = {}) {
    if (n < 1) throw std::invalid_argument("birkhoff_sum_psi: n must be >= 1");
    Word ybar = ybar_in;
    if (m < 0) m = static_cast<int>(ybar.size()) - 1;
    if (m < n + 1) throw std::invalid_argument("birkhoff_sum_psi: need m >= n + 1");
    if (static_cast<int>(ybar.size()) < m + 1)
        ybar = extend_image_word(sys.sft(), sys.fmap(), ybar, m + 1);
    else
        ybar.resize(m + 1);
    const int len = m + 1;
    BirkhoffPsi out;
    out.n = n;
    out.m = m;
    double terms = 0;
    double slack = 0;
    bool covered = true;
    for (int t = 0; t < n; ++t) {
        Word suffix(ybar.begin() + t, ybar.end());
        terms += f_sequence(sys, suffix, opt).back();
        int k = s.coverage(len - 1 - t);
        if (k >= 1 && s.has_contraction())
            slack += s.certified(k);
        else
            covered = false;
    }
    out.via_terms = terms;
    Word head(ybar.begin(), ybar.end());
    Word tail(ybar.begin() + n, ybar.end());
    // each log_pushforward already carries its own pressure correction, and
    // the two corrections differ by exactly n P
    out.via_quotient =
        detail::log_pushforward(sys, head, opt) - detail::log_pushforward(sys, tail, opt);
    out.mismatch = std::abs(out.via_terms - out.via_quotient);
    out.covered = covered;
    if (covered) out.certified_error = slack;
    return out;
}

// ── variation tables ───────────────────────────────────────────────────────

struct PsiVariationRow {
    int n = 0, j = 0;
    double measured = 0; // oscillation of the finite estimate over (n+j)-groups
    double uncertainty = std::numeric_limits<double>::infinity(); // estimate vs psi
    // contraction envelope keyed on the agreement surplus j alone: the
    // per-point modulus certified(coverage(j)), infinite when j is below the
    // first threshold
    double theory_bound = std::numeric_limits<double>::infinity();
    int groups = 0;
    bool covered = false;   // uncertainty is finite
    bool covered_j = false; // theory_bound is finite

    double upper() const { return measured + 2 * uncertainty; }
};

// Oscillations var_{n+j}(S_n psi) of the finite estimates, sharing one word
// enumeration across all requested (n, j) pairs. Words have length len_cap;
// the estimate of S_n psi(y) conditions on the full word.
inline std::vector<PsiVariationRow> psi_variations(const FactorSystem& sys, const ConeSchedule& s,
                                                   const std::vector<int>& n_list,
                                                   const std::vector<int>& j_list, int len_cap,
                                                   const PsiOptions& opt = {}) {
    for (int n : n_list)
        if (n < 1) throw std::invalid_argument("psi_variations: n must be >= 1");
    for (int j : j_list)
        if (j < 0) throw std::invalid_argument("psi_variations: j must be >= 0");
    int n_hi = *std::max_element(n_list.begin(), n_list.end());
    int j_hi = *std::max_element(j_list.begin(), j_list.end());
    if (len_cap < n_hi + j_hi + 1 || len_cap < n_hi + 2)
        throw std::invalid_argument("psi_variations: len_cap too short for the requested table");

    std::vector<Word> words = image_words(sys.sft(), sys.fmap(), len_cap); // lex order
    std::vector<std::vector<double>> sums(n_list.size(),
                                          std::vector<double>(words.size(), 0.0));
    for (std::size_t w = 0; w < words.size(); ++w) {
        double full = detail::log_pushforward(sys, words[w], opt);
        for (std::size_t a = 0; a < n_list.size(); ++a) {
            Word tail(words[w].begin() + n_list[a], words[w].end());
            sums[a][w] = full - detail::log_pushforward(sys, tail, opt);
        }
    }

    // per-term certificate: the estimate of psi at shift t conditions on
    // len_cap - t - 1 further symbols
    auto term_uncertainty = [&](int n) {
        double u = 0;
        for (int t = 0; t < n; ++t) {
            int k = s.coverage(len_cap - 1 - t);
            if (k < 1 || !s.has_contraction()) return std::numeric_limits<double>::infinity();
            u += s.certified(k);
        }
        return u;
    };

    std::vector<PsiVariationRow> out;
    for (std::size_t a = 0; a < n_list.size(); ++a) {
        double unc = term_uncertainty(n_list[a]);
        for (int j : j_list) {
            PsiVariationRow row;
            row.n = n_list[a];
            row.j = j;
            row.uncertainty = unc;
            row.covered = std::isfinite(unc);
            if (s.has_contraction()) {
                int kj = s.coverage(j);
                if (kj >= 1) {
                    row.theory_bound = s.certified(kj);
                    row.covered_j = true;
                }
            }
            const int plen = row.n + j;
            std::size_t g = 0;
            while (g < words.size()) {
                std::size_t h = g;
                double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                while (h < words.size() &&
                       std::equal(words[g].begin(), words[g].begin() + plen, words[h].begin())) {
                    lo = std::min(lo, sums[a][h]);
                    hi = std::max(hi, sums[a][h]);
                    ++h;
                }
                row.measured = std::max(row.measured, hi - lo);
                ++row.groups;
                g = h;
            }
            out.push_back(row);
        }
    }
    return out;
}

inline PsiVariationRow psi_variation(const FactorSystem& sys, const ConeSchedule& s, int n, int j,
                                     int len_cap, const PsiOptions& opt = {}) {
    return psi_variations(sys, s, {n}, {j}, len_cap, opt).front();
}

// ── normalization of the induced family ────────────────────────────────────

// Sum of e^{f(b . w)} over image symbols b extending w backward admissibly.
// With the Gibbs reference the pushforward is shift invariant and the sum is
// exactly 1. The eigenmeasure reference yields a cohomologous representative
// of the induced potential (the two limits differ by the coboundary of the
// reference density), so its sum converges to a positive limit that is not 1
// in general; the two references agree on shift-fixed words, where the
// coboundary cancels.
inline double psi_exp_sum(const FactorSystem& sys, const Word& w, const PsiOptions& opt = {}) {
    if (w.empty()) throw std::invalid_argument("psi_exp_sum: empty word");
    double total = 0;
    bool any = false;
    for (int b = 0; b < sys.fmap().image_alphabet_size(); ++b) {
        Word bw;
        bw.reserve(w.size() + 1);
        bw.push_back(b);
        bw.insert(bw.end(), w.begin(), w.end());
        if (!is_image_admissible(sys.sft(), sys.fmap(), bw)) continue;
        total += std::exp(f_sequence(sys, bw, opt).back());
        any = true;
    }
    if (!any) throw std::domain_error("psi_exp_sum: word has no admissible predecessor");
    return total;
}

// ── Gibbs property of the pushforward ──────────────────────────────────────

struct GibbsEquivalence {
    double bowen_k = 0;
    double c1 = 0, c2 = 0;  // extreme cylinder ratios in the domain
    double lo = 0, hi = 0;  // resulting two-sided bounds e^{-K} c1 and c2
    double min_ratio = 0, max_ratio = 0;
    double slack = 0;       // certified estimation slack folded into the check
    int words_checked = 0;
    bool pass = false;        // within the slack-padded bounds
    bool strict_pass = false; // within the unpadded bounds
    Word worst_low, worst_high;
};

// Checks e^{-K} c1 <= e^{S_n psi} / pi_* mu[ybar] <= c2 over all admissible
// image words of length 1..n_max, with S_n psi estimated from tail extra
// symbols of context.
inline GibbsEquivalence verify_gibbs_equivalence(const FactorSystem& sys, const ConeSchedule& s,
                                                 int n_max, int tail,
                                                 const PsiOptions& opt = {}) {
    if (n_max < 1) throw std::invalid_argument("verify_gibbs_equivalence: n_max must be >= 1");
    if (tail < 2) throw std::invalid_argument("verify_gibbs_equivalence: tail must be >= 2");
    const Potential& phi = sys.potential();
    const Sft& x = sys.sft();
    const int r = phi.max_depth();
    GibbsEquivalence out;
    out.bowen_k = bowen_constant(phi).K;

    // extreme ratios sup_z e^{S_n phi(I z) - n P} / mu[I] over domain words I
    out.c1 = std::numeric_limits<double>::infinity();
    out.c2 = 0;
    for (int n = 1; n <= n_max; ++n) {
        const int ext = std::max(n + r - 1, n);
        std::vector<Word> words = enumerate_words(x, ext); // lex order
        std::size_t g = 0;
        while (g < words.size()) {
            std::size_t h = g;
            double sup_s = -std::numeric_limits<double>::infinity();
            while (h < words.size() &&
                   std::equal(words[g].begin(), words[g].begin() + n, words[h].begin())) {
                sup_s = std::max(sup_s, phi.birkhoff_sum(words[h], n));
                ++h;
            }
            Word head(words[g].begin(), words[g].begin() + n);
            double mass = gibbs_cylinder(sys.op(), sys.eig(), head);
            double ratio = std::exp(sup_s - n * sys.eig().pressure) / mass;
            out.c1 = std::min(out.c1, ratio);
            out.c2 = std::max(out.c2, ratio);
            g = h;
        }
    }
    out.lo = std::exp(-out.bowen_k) * out.c1;
    out.hi = out.c2;

    out.min_ratio = std::numeric_limits<double>::infinity();
    out.max_ratio = 0;
    double worst_slack = 0;
    for (int n = 1; n <= n_max; ++n) {
        for (const Word& y : image_words(x, sys.fmap(), n)) {
            PushValue pm = pushforward_cylinder(sys, y, Reference::Gibbs);
            if (!pm.admissible) continue;
            Word yext = extend_image_word(x, sys.fmap(), y, n + tail);
            Word ytail(yext.begin() + n, yext.end());
            double sn = detail::log_pushforward(sys, yext, opt) -
                        detail::log_pushforward(sys, ytail, opt);
            double slack = 0;
            for (int t = 0; t < n; ++t) {
                int k = s.coverage(static_cast<int>(yext.size()) - 1 - t);
                slack = (k >= 1 && s.has_contraction())
                            ? slack + s.certified(k)
                            : std::numeric_limits<double>::infinity();
            }
            worst_slack = std::max(worst_slack, slack);
            double ratio = std::exp(sn) / pm.value;
            ++out.words_checked;
            if (ratio < out.min_ratio) {
                out.min_ratio = ratio;
                out.worst_low = y;
            }
            if (ratio > out.max_ratio) {
                out.max_ratio = ratio;
                out.worst_high = y;
            }
        }
    }
    out.slack = worst_slack;
    const double pad = std::isfinite(worst_slack) ? std::exp(worst_slack) : 1.0;
    out.pass = std::isfinite(worst_slack) &&
               out.min_ratio >= out.lo / pad * (1 - 1e-9) &&
               out.max_ratio <= out.hi * pad * (1 + 1e-9);
    out.strict_pass = out.min_ratio >= out.lo * (1 - 1e-9) &&
                      out.max_ratio <= out.hi * (1 + 1e-9);
    return out;
}

} // namespace factorgibbs
