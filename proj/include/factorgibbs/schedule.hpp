#pragma once

/*
 * Cone schedules: block lengths n_1, n_2, ... and metric tables d_j that turn
 * variation data of a potential into a certified contraction scheme.
 *
 * With alpha(0,k) a regularity sequence of phi and
 * alpha(m,k) = var_{m+k}(S_m phi) for m >= 1, the block lengths are chosen
 * minimally such that for every j and all rows i < j
 *
 *   alpha(n_i, n_{i+1} + ... + n_{j-1} + n_j) <= (sigma/2)^{j-i},
 *
 * then raised to the fiber-mixing exponent. The tables
 *
 *   d_{j,k} = sum_{i=0}^{j} alpha(n_i, n_{i+1} + ... + n_j + k) / sigma^{j-i+1}
 *
 * (n_0 = 0) satisfy the exact recurrence
 *
 *   sigma d_{j+1,k} = alpha(n_{j+1}, k) + d_{j, n_{j+1}+k}
 *
 * by construction, and are uniformly bounded by B = (2 + K)/sigma with K the
 * Bowen constant. A geometric alpha(m,k) = c theta^{m+k} with theta < sigma
 * admits the stationary closed form d_{j,k} = c theta^{k+1}/(sigma - theta),
 * which is the exact fixed point of the recurrence with n_j = 1.
 *
 * Diameter constants: with N the fiber-mixing exponent,
 *   C = N log||L 1||_inf + B + N ||phi||_inf,
 *   D = 2 log((1+sigma)/(1-sigma)) + 2C,   gamma = tanh(D/4),
 * the certified contraction factor per schedule step.
 */

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "factorgibbs/cones.hpp"
#include "factorgibbs/factor_ops.hpp"
#include "factorgibbs/potential.hpp"

namespace factorgibbs {

enum class AlphaKind { BowenVariation, WaltersSup, HolderClosedForm };

struct AlphaSource {
    AlphaKind kind = AlphaKind::BowenVariation;
    int walters_n_sup = 4;          // finite sup horizon for WaltersSup
    double theta = 0, coeff = 0;    // HolderClosedForm: alpha(m,k) = coeff * theta^{m+k}

    static AlphaSource bowen() { return {}; }
    static AlphaSource walters(int n_sup = 4) {
        AlphaSource a;
        a.kind = AlphaKind::WaltersSup;
        a.walters_n_sup = n_sup;
        return a;
    }
    static AlphaSource holder(double theta, double coeff) {
        AlphaSource a;
        a.kind = AlphaKind::HolderClosedForm;
        a.theta = theta;
        a.coeff = coeff;
        return a;
    }
};

struct ConeSchedule {
    double sigma = 0;
    double K = 0;        // Bowen constant of the alpha source
    double B = 0;        // uniform bound (2 + K) / sigma on the tables
    int n_fiber = 1;     // floor imposed on every n_j
    int j_max = 0, k_max = 0;
    std::vector<int> n;                      // n[0] = 0 sentinel, then n_1..n_{j_max}
    std::vector<std::vector<double>> d;      // d[j][k], k stored past k_max for the recurrence
    std::vector<std::vector<double>> alpha;  // alpha[i][l] = alpha(n_i, l)
    AlphaSource source;

    // contraction data, attached by diameter_constants
    double C = std::numeric_limits<double>::quiet_NaN();
    double D = std::numeric_limits<double>::quiet_NaN();
    double gamma = std::numeric_limits<double>::quiet_NaN();
    int fiber_exponent_used = 0;
    double op_log_norm = 0, phi_sup = 0;

    bool has_contraction() const { return std::isfinite(gamma); }

    // Tail length certifying k contraction steps: 1 + n_1 + ... + n_k.
    int threshold(int k) const {
        if (k < 1 || k > j_max) throw std::invalid_argument("ConeSchedule::threshold: bad k");
        int t = 1;
        for (int i = 1; i <= k; ++i) t += n[static_cast<std::size_t>(i)];
        return t;
    }

    // Largest k with threshold(k) <= m (0 when uncovered).
    int coverage(int m) const {
        int t = 1, k = 0;
        for (int i = 1; i <= j_max; ++i) {
            t += n[static_cast<std::size_t>(i)];
            if (t <= m) k = i; else break;
        }
        return k;
    }

    // Certified bound gamma^{k-1} D on |f_n - f_m| for n, m >= threshold(k).
    double certified(int k) const {
        if (!has_contraction())
            throw std::invalid_argument("ConeSchedule::certified: contraction data not attached");
        if (k < 1) throw std::invalid_argument("ConeSchedule::certified: bad k");
        return std::pow(gamma, k - 1) * D;
    }
};

namespace detail {

inline double alpha_eval(const Potential* phi, const AlphaSource& src, int m, int l, int len_cap) {
    if (src.kind == AlphaKind::HolderClosedForm)
        return src.coeff * std::pow(src.theta, m + l);
    if (m == 0) {
        if (src.kind == AlphaKind::BowenVariation) return variation(*phi, l);
        double s = 0;
        for (int nn = 1; nn <= src.walters_n_sup; ++nn)
            s = std::max(s, variation_birkhoff(*phi, nn, l, len_cap));
        return s;
    }
    return variation_birkhoff(*phi, m, l, len_cap);
}

} // namespace detail

// Minimal block lengths per the row inequalities, raised to n_fiber, and the
// exact finite-sum tables. The alpha rows used are stored on the schedule so
// later verification replays the same data.
inline ConeSchedule build_schedule(const Potential& phi, const AlphaSource& src, double sigma,
                                   int j_max, int k_max, int n_fiber = 1, int n_cap = 64,
                                   int len_cap = 40) {
    if (sigma <= 0 || sigma >= 1) throw std::invalid_argument("build_schedule: sigma in (0,1)");
    if (j_max < 1 || k_max < 0) throw std::invalid_argument("build_schedule: bad j_max/k_max");
    if (n_fiber < 1) throw std::invalid_argument("build_schedule: n_fiber must be >= 1");
    ConeSchedule s;
    s.sigma = sigma;
    s.j_max = j_max;
    s.k_max = k_max;
    s.n_fiber = n_fiber;
    s.source = src;
    if (src.kind == AlphaKind::HolderClosedForm) {
        if (src.theta <= 0 || src.theta >= 1)
            throw std::invalid_argument("build_schedule: theta in (0,1)");
        s.K = src.coeff * src.theta / (1 - src.theta);
    } else {
        s.K = bowen_constant(phi, 0, len_cap).K;
    }
    s.B = (2 + s.K) / sigma;

    auto alpha = [&](int m, int l) { return detail::alpha_eval(&phi, src, m, l, len_cap); };

    s.n.assign(1, 0);
    for (int j = 1; j <= j_max; ++j) {
        int found = -1;
        int worst_row = 0;
        for (int cand = 1; cand <= n_cap && found < 0; ++cand) {
            bool ok = true;
            int tail = 0; // n_{i+1} + ... + n_{j-1}, built from the top row down
            for (int i = j - 1; i >= 0 && ok; --i) {
                double bound = std::pow(sigma / 2, j - i);
                if (alpha(s.n[static_cast<std::size_t>(i)], tail + cand) > bound) {
                    ok = false;
                    worst_row = i;
                }
                tail += s.n[static_cast<std::size_t>(i)];
            }
            if (ok) found = cand;
        }
        if (found < 0)
            throw CapacityError("build_schedule: no n_" + std::to_string(j) + " <= " +
                                std::to_string(n_cap) + " satisfies row " +
                                std::to_string(worst_row));
        s.n.push_back(std::max(found, n_fiber));
    }

    int max_n = 1;
    for (int j = 1; j <= j_max; ++j) max_n = std::max(max_n, s.n[static_cast<std::size_t>(j)]);
    const int k_store = k_max + max_n;

    // alpha rows out to the largest argument the tables and recurrence touch
    for (int i = 0; i <= j_max; ++i) {
        int tail_to_end = 0;
        for (int t = i + 1; t <= j_max; ++t) tail_to_end += s.n[static_cast<std::size_t>(t)];
        std::vector<double> row(static_cast<std::size_t>(tail_to_end + k_store + 1));
        for (int l = 0; l < static_cast<int>(row.size()); ++l)
            row[static_cast<std::size_t>(l)] = alpha(s.n[static_cast<std::size_t>(i)], l);
        s.alpha.push_back(std::move(row));
    }

    for (int j = 0; j <= j_max; ++j) {
        std::vector<double> row(static_cast<std::size_t>(k_store) + 1, 0.0);
        for (int k = 0; k <= k_store; ++k) {
            double acc = 0;
            int tail = 0; // n_{i+1} + ... + n_j
            for (int i = j; i >= 0; --i) {
                acc += s.alpha[static_cast<std::size_t>(i)][static_cast<std::size_t>(tail + k)] /
                       std::pow(sigma, j - i + 1);
                tail += s.n[static_cast<std::size_t>(i)];
            }
            row[static_cast<std::size_t>(k)] = acc;
            if (acc > s.B + 1e-9)
                throw NumericError("build_schedule: table exceeds the uniform bound");
        }
        s.d.push_back(std::move(row));
    }
    return s;
}

// Stationary schedule of a geometric regularity sequence: n_j = 1 and
// d_{j,k} = coeff theta^{k+1} / (sigma - theta), constant in j. Requires
// theta < sigma; the recurrence residual is zero in exact arithmetic.
inline ConeSchedule holder_schedule(double theta, double coeff, double sigma, int j_max,
                                    int k_max) {
    if (theta <= 0 || theta >= 1 || sigma <= 0 || sigma >= 1)
        throw std::invalid_argument("holder_schedule: theta, sigma in (0,1)");
    if (sigma <= theta) throw std::invalid_argument("holder_schedule: requires sigma > theta");
    if (j_max < 1 || k_max < 0) throw std::invalid_argument("holder_schedule: bad j_max/k_max");
    ConeSchedule s;
    s.sigma = sigma;
    s.j_max = j_max;
    s.k_max = k_max;
    s.n_fiber = 1;
    s.source = AlphaSource::holder(theta, coeff);
    s.K = coeff * theta / (1 - theta);
    s.B = (2 + s.K) / sigma;
    s.n.assign(static_cast<std::size_t>(j_max) + 1, 1);
    s.n[0] = 0;
    const int k_store = k_max + 1;
    for (int i = 0; i <= j_max; ++i) {
        int m = s.n[static_cast<std::size_t>(i)];
        std::vector<double> row(static_cast<std::size_t>(j_max - i + k_store) + 1);
        for (int l = 0; l < static_cast<int>(row.size()); ++l)
            row[static_cast<std::size_t>(l)] = coeff * std::pow(theta, m + l);
        s.alpha.push_back(std::move(row));
    }
    std::vector<double> table(static_cast<std::size_t>(k_store) + 1);
    for (int k = 0; k <= k_store; ++k)
        table[static_cast<std::size_t>(k)] = coeff * std::pow(theta, k + 1) / (sigma - theta);
    s.d.assign(static_cast<std::size_t>(j_max) + 1, table);
    return s;
}

// Max residual |sigma d_{j+1,k} - alpha(n_{j+1},k) - d_{j,n_{j+1}+k}| over the
// stored tables, j < j_max, k <= k_max.
inline double verify_recurrence(const ConeSchedule& s) {
    double worst = 0;
    for (int j = 0; j < s.j_max; ++j) {
        int nj1 = s.n[static_cast<std::size_t>(j + 1)];
        for (int k = 0; k <= s.k_max; ++k) {
            if (nj1 + k >= static_cast<int>(s.d[static_cast<std::size_t>(j)].size()))
                throw std::invalid_argument("verify_recurrence: stored table too short");
            double lhs = s.sigma * s.d[static_cast<std::size_t>(j + 1)][static_cast<std::size_t>(k)];
            double rhs = s.alpha[static_cast<std::size_t>(j + 1)][static_cast<std::size_t>(k)] +
                         s.d[static_cast<std::size_t>(j)][static_cast<std::size_t>(nj1 + k)];
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    return worst;
}

struct BoundCheck {
    double max_entry = 0;
    double bound = 0;
    bool pass = false;
};

inline BoundCheck uniform_bound_check(const ConeSchedule& s) {
    BoundCheck out;
    out.bound = s.B;
    for (const auto& row : s.d)
        for (double v : row) out.max_entry = std::max(out.max_entry, v);
    out.pass = out.max_entry <= out.bound + 1e-12;
    return out;
}

struct DiameterConstants {
    double C = 0, D = 0, gamma = 0;
    int fiber_exponent = 0;
    double op_log_norm = 0; // log ||L 1||_inf
    double phi_sup = 0;     // ||phi||_inf
};

// Computes the contraction constants for a fibered system and writes them
// onto the schedule.
inline DiameterConstants attach_diameter_constants(ConeSchedule& s, const FactorSystem& sys,
                                                   int fiber_probe_cap = 12) {
    DiameterConstants dc;
    dc.fiber_exponent = sys.fiber_exponent(fiber_probe_cap);
    if (dc.fiber_exponent > s.n_fiber)
        throw std::invalid_argument(
            "attach_diameter_constants: schedule built with n_fiber below the fiber exponent");
    double row_max = sys.op().matrix().rowwise().sum().maxCoeff();
    dc.op_log_norm = std::log(row_max);
    dc.phi_sup = sys.potential().sup_norm();
    dc.C = dc.fiber_exponent * dc.op_log_norm + s.B + dc.fiber_exponent * dc.phi_sup;
    dc.D = 2 * std::log((1 + s.sigma) / (1 - s.sigma)) + 2 * dc.C;
    dc.gamma = std::tanh(dc.D / 4);
    s.C = dc.C;
    s.D = dc.D;
    s.gamma = dc.gamma;
    s.fiber_exponent_used = dc.fiber_exponent;
    s.op_log_norm = dc.op_log_norm;
    s.phi_sup = dc.phi_sup;
    return dc;
}

// Same constants without touching the schedule.
inline DiameterConstants diameter_constants(const FactorSystem& sys, const ConeSchedule& s,
                                            int fiber_probe_cap = 12) {
    ConeSchedule copy = s;
    return attach_diameter_constants(copy, sys, fiber_probe_cap);
}

// ── sampled cone checks ────────────────────────────────────────────────────

namespace detail {

inline std::vector<double> metric_row(const ConeSchedule& s, int j, int depth, double scale) {
    const auto& row = s.d[static_cast<std::size_t>(j)];
    if (static_cast<int>(row.size()) < depth)
        throw std::invalid_argument("schedule: d table shorter than the system depth");
    std::vector<double> out(row.begin(), row.begin() + depth);
    for (double& v : out) v *= scale;
    return out;
}

// Direct sum of metric cones over the fibers whose column (or row) block of
// the product matrix is nonzero.
inline ConeSpec product_cone(const FactorSystem& sys, const Eigen::MatrixXd& prod, bool input,
                             const std::vector<double>& metric) {
    std::vector<ConeSpec> parts;
    for (int a = 0; a < sys.sft().alphabet_size(); ++a) {
        bool nz = false;
        for (int r = 0; r < prod.rows() && !nz; ++r)
            for (int c = 0; c < prod.cols() && !nz; ++c) {
                if (prod(r, c) == 0) continue;
                int word_rank = input ? c : r;
                if (sys.op().words().word(word_rank)[0] == a) nz = true;
            }
        if (nz) parts.push_back(ConeSpec::metric_cone(a, MetricTable(metric)));
    }
    return ConeSpec::direct_sum(std::move(parts));
}

} // namespace detail

struct MappingCheck {
    int samples = 0;
    int violations = 0;
    double worst_excess = 0;
    Word image_word;
};

// Samples the domain cone of the image word (metrics d_j) and checks that the
// block product lands in the sigma-contracted cone of index j+1.
inline MappingCheck cone_mapping_check(const FactorSystem& sys, const ConeSchedule& s, int j,
                                       const Word& ybar, int samples, std::uint64_t seed) {
    if (j < 0 || j >= s.j_max) throw std::invalid_argument("cone_mapping_check: bad j");
    if (static_cast<int>(ybar.size()) != s.n[static_cast<std::size_t>(j + 1)] + 1)
        throw std::invalid_argument("cone_mapping_check: word length must be n_{j+1} + 1");
    BlockOperator prod = block_word_operator(sys, ybar);
    if (!prod.admissible)
        throw std::invalid_argument("cone_mapping_check: image word has no lift");
    const WordIndex& ix = sys.op().words();
    const int m = sys.depth();
    ConeSpec in = detail::product_cone(sys, prod.mat, true, detail::metric_row(s, j, m, 1.0));
    ConeSpec out =
        detail::product_cone(sys, prod.mat, false, detail::metric_row(s, j + 1, m, s.sigma));
    Rng rng(seed);
    MappingCheck rep;
    rep.image_word = ybar;
    for (int t = 0; t < samples; ++t) {
        Eigen::VectorXd f = sample_cone(in, ix, rng);
        MembershipReport mem = cone_membership(prod.mat * f, out, ix);
        ++rep.samples;
        if (!mem.member) {
            ++rep.violations;
            rep.worst_excess = std::max(rep.worst_excess, mem.excess);
        }
    }
    return rep;
}

struct ContractionCheck {
    int samples = 0;
    int violations = 0;
    double gamma_pow = 0;  // certified gamma^k
    double max_ratio = 0;  // measured max Theta_out / Theta_in
    double max_theta_in = 0, max_theta_out = 0;
};

// Runs pairs through k schedule blocks of the image word (with the masking
// restriction between blocks) and compares endpoint Hilbert distances against
// the certified gamma^k.
inline ContractionCheck empirical_contraction(const FactorSystem& sys, const ConeSchedule& s,
                                              const Word& ybar, int j, int k, int samples,
                                              std::uint64_t seed) {
    if (!s.has_contraction())
        throw std::invalid_argument("empirical_contraction: attach diameter constants first");
    if (j < 0 || k < 1 || j + k > s.j_max)
        throw std::invalid_argument("empirical_contraction: need j >= 0, k >= 1, j + k <= j_max");
    int need = 1;
    for (int t = 1; t <= k; ++t) need += s.n[static_cast<std::size_t>(j + t)];
    if (static_cast<int>(ybar.size()) != need)
        throw std::invalid_argument("empirical_contraction: word length must be 1 + sum n_{j+t}");

    const WordIndex& ix = sys.op().words();
    const int m = sys.depth();
    std::vector<BlockOperator> blocks;
    std::vector<ConeSpec> step_in; // input cone of each block
    int pos = 0;
    for (int t = 1; t <= k; ++t) {
        int len = s.n[static_cast<std::size_t>(j + t)];
        Word piece(ybar.begin() + pos, ybar.begin() + pos + len + 1);
        blocks.push_back(block_word_operator(sys, piece));
        if (!blocks.back().admissible)
            throw std::invalid_argument("empirical_contraction: image word has no lift");
        step_in.push_back(detail::product_cone(sys, blocks.back().mat, true,
                                               detail::metric_row(s, j + t - 1, m, 1.0)));
        pos += len;
    }
    ConeSpec out_cone = detail::product_cone(sys, blocks.back().mat, false,
                                             detail::metric_row(s, j + k, m, 1.0));

    auto push = [&](Eigen::VectorXd v) {
        for (int t = 0; t < k; ++t) {
            if (t > 0) { // restriction: drop components the next block ignores
                Eigen::VectorXd masked = Eigen::VectorXd::Zero(v.size());
                for (const ConeSpec& part : step_in[static_cast<std::size_t>(t)].parts)
                    for (int r = 0; r < v.size(); ++r)
                        if (ix.word(r)[0] == part.cylinder) masked(r) = v(r);
                v = masked;
            }
            v = blocks[static_cast<std::size_t>(t)].mat * v;
        }
        return v;
    };

    Rng rng(seed);
    ContractionCheck rep;
    rep.gamma_pow = std::pow(s.gamma, k);
    for (int t = 0; t < samples; ++t) {
        Eigen::VectorXd f = sample_cone(step_in[0], ix, rng);
        Eigen::VectorXd g = sample_cone(step_in[0], ix, rng);
        DirectSumDistance din = direct_sum_distance(g, f, step_in[0], ix);
        Eigen::VectorXd lf = push(f), lg = push(g);
        DirectSumDistance dout = direct_sum_distance(lg, lf, out_cone, ix);
        if (!din.comparable || !dout.comparable) {
            ++rep.violations;
            continue;
        }
        ++rep.samples;
        rep.max_theta_in = std::max(rep.max_theta_in, din.value);
        rep.max_theta_out = std::max(rep.max_theta_out, dout.value);
        if (dout.value > rep.gamma_pow * din.value + kConeSlack) ++rep.violations;
        if (din.value > 0) rep.max_ratio = std::max(rep.max_ratio, dout.value / din.value);
    }
    return rep;
}

} // namespace factorgibbs
