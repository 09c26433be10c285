#pragma once

/*
 * Hilbert projective metric on convex cones of depth-m cylinder functions.
 *
 * Supported cones:
 *   Nonneg       : componentwise nonnegative functions;
 *   Metric       : f supported on a one-symbol cylinder [a] with
 *                  f(u) <= e^{d_k} f(v) for all pairs u, v in [a] whose first
 *                  disagreement is at position k (d a nonincreasing table);
 *   BoundedRatio : same with the constant table d_k = B;
 *   DirectSum    : componentwise membership over disjoint cylinders.
 *
 * For cylinder cones both extremes of g against f come from one quotient set:
 *   Q = { g(x)/f(x) } u { (e^{d_k} g(v) - g(u)) / (e^{d_k} f(v) - f(u)) },
 * with m(g/f) = min Q, M(g/f) = max Q and Theta = log(M/m). Pairs whose
 * denominator vanishes are boundary-degenerate: the constraint is vacuous
 * when the numerator also vanishes and infinite otherwise. Distances on a
 * direct sum combine as Theta = log(sup_i M_i / inf_i m_i).
 *
 * Birkhoff's theorem bounds any positive linear map by
 *   Theta(Lf, Lg) <= tanh(Delta/4) Theta(f, g),
 * Delta the projective diameter of the image; on the nonnegative cone Delta
 * is exactly the pairwise distance maximum over matrix columns.
 */

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "factorgibbs/rng.hpp"
#include "factorgibbs/sft.hpp"

namespace factorgibbs {

inline constexpr double kConeSlack = 1e-10;   // additive tolerance on log-ratio constraints
inline constexpr double kDegenerate = 1e-12;  // relative threshold for vanishing denominators

struct MetricTable {
    std::vector<double> d; // d[k] >= 0, nonincreasing; k = agreement length

    explicit MetricTable(std::vector<double> values) : d(std::move(values)) {
        if (d.empty()) throw std::invalid_argument("MetricTable: empty");
        for (std::size_t k = 0; k < d.size(); ++k) {
            if (d[k] < 0) throw std::invalid_argument("MetricTable: negative entry");
            if (k > 0 && d[k] > d[k - 1] + 1e-15)
                throw std::invalid_argument("MetricTable: entries must be nonincreasing");
        }
    }

    static MetricTable constant(double b, int len) {
        return MetricTable(std::vector<double>(static_cast<std::size_t>(len), b));
    }

    double at(int k) const {
        if (k < 0 || k >= static_cast<int>(d.size()))
            throw std::invalid_argument("MetricTable: index out of stored range");
        return d[static_cast<std::size_t>(k)];
    }

    int size() const { return static_cast<int>(d.size()); }
};

struct ConeSpec {
    enum class Kind { Nonneg, Metric, BoundedRatio, DirectSum };
    Kind kind = Kind::Nonneg;
    int cylinder = -1;                        // Metric / BoundedRatio
    std::vector<double> metric;               // d_k by agreement length k
    double ratio_bound = 0;                   // BoundedRatio
    std::vector<ConeSpec> parts;              // DirectSum

    static ConeSpec nonneg() { return {}; }

    static ConeSpec metric_cone(int a, const MetricTable& t) {
        ConeSpec c;
        c.kind = Kind::Metric;
        c.cylinder = a;
        c.metric = t.d;
        return c;
    }

    static ConeSpec bounded_ratio(int a, double b, int table_len) {
        ConeSpec c;
        c.kind = Kind::BoundedRatio;
        c.cylinder = a;
        c.ratio_bound = b;
        c.metric.assign(static_cast<std::size_t>(table_len), b);
        return c;
    }

    static ConeSpec direct_sum(std::vector<ConeSpec> ps) {
        ConeSpec c;
        c.kind = Kind::DirectSum;
        c.parts = std::move(ps);
        return c;
    }
};

namespace detail {

inline int first_disagreement(const Word& u, const Word& v) {
    int k = 0;
    while (k < static_cast<int>(u.size()) && u[static_cast<std::size_t>(k)] == v[static_cast<std::size_t>(k)])
        ++k;
    return k;
}

inline std::vector<int> cylinder_ranks(const WordIndex& ix, int a) {
    std::vector<int> out;
    for (int r = 0; r < ix.size(); ++r)
        if (ix.word(r)[0] == a) out.push_back(r);
    return out;
}

} // namespace detail

// ── membership ─────────────────────────────────────────────────────────────

struct MembershipReport {
    bool member = true;
    double excess = 0; // largest violated amount (log scale for ratio constraints)
    int u = -1, v = -1;
};

inline MembershipReport cone_membership(const Eigen::VectorXd& f, const ConeSpec& c,
                                        const WordIndex& ix, double tol = kConeSlack) {
    MembershipReport rep;
    const double scale = f.cwiseAbs().maxCoeff();
    auto fail = [&](double excess, int u, int v) {
        if (!rep.member && excess <= rep.excess) return;
        rep.member = false;
        rep.excess = excess;
        rep.u = u;
        rep.v = v;
    };
    switch (c.kind) {
        case ConeSpec::Kind::Nonneg:
            for (int r = 0; r < f.size(); ++r)
                if (f(r) < -tol * scale) fail(-f(r), r, -1);
            return rep;
        case ConeSpec::Kind::Metric:
        case ConeSpec::Kind::BoundedRatio: {
            std::vector<int> in = detail::cylinder_ranks(ix, c.cylinder);
            if (static_cast<int>(c.metric.size()) < ix.length())
                throw std::invalid_argument("cone_membership: metric table shorter than depth");
            for (int r = 0; r < f.size(); ++r)
                if (ix.word(r)[0] != c.cylinder && std::abs(f(r)) > tol * scale)
                    fail(std::abs(f(r)), r, -1);
            double inner_max = 0;
            for (int r : in) {
                if (f(r) < -tol * scale) fail(-f(r), r, -1);
                inner_max = std::max(inner_max, f(r));
            }
            if (inner_max <= tol * scale) return rep; // the zero element
            for (int r : in)
                if (f(r) <= tol * scale && inner_max > tol * scale)
                    fail(inner_max, r, -1); // zero against positive: infinite ratio
            if (!rep.member) return rep;
            for (int iu : in)
                for (int iv : in) {
                    if (iu == iv) continue;
                    int k = detail::first_disagreement(ix.word(iu), ix.word(iv));
                    double lhs = std::log(f(iu)) - std::log(f(iv));
                    double bound = c.metric[static_cast<std::size_t>(k)];
                    if (lhs > bound + tol) fail(lhs - bound, iu, iv);
                }
            return rep;
        }
        case ConeSpec::Kind::DirectSum: {
            std::vector<bool> covered(static_cast<std::size_t>(f.size()), false);
            for (const ConeSpec& part : c.parts) {
                Eigen::VectorXd g = Eigen::VectorXd::Zero(f.size());
                for (int r = 0; r < f.size(); ++r)
                    if (ix.word(r)[0] == part.cylinder) {
                        g(r) = f(r);
                        covered[static_cast<std::size_t>(r)] = true;
                    }
                MembershipReport sub = cone_membership(g, part, ix, tol);
                if (!sub.member) fail(sub.excess, sub.u, sub.v);
            }
            for (int r = 0; r < f.size(); ++r)
                if (!covered[static_cast<std::size_t>(r)] && std::abs(f(r)) > tol * scale)
                    fail(std::abs(f(r)), r, -1);
            return rep;
        }
    }
    return rep;
}

// ── Hilbert distances ──────────────────────────────────────────────────────

struct HilbertResult {
    double value = 0;
    bool comparable = true;
};

// Nonnegative cone: Theta = log(max x/y / min x/y) over the common support;
// mismatched supports are incomparable (infinite distance).
inline HilbertResult hilbert_nonneg(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) throw std::invalid_argument("hilbert_nonneg: size mismatch");
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    bool any = false;
    for (int r = 0; r < x.size(); ++r) {
        bool zx = x(r) == 0, zy = y(r) == 0;
        if (zx != zy) return {std::numeric_limits<double>::infinity(), false};
        if (zx) continue;
        if (x(r) < 0 || y(r) < 0) return {std::numeric_limits<double>::infinity(), false};
        double q = x(r) / y(r);
        lo = std::min(lo, q);
        hi = std::max(hi, q);
        any = true;
    }
    if (!any) return {0.0, true}; // both zero: same ray by convention
    return {std::log(hi / lo), true};
}

struct MAndM {
    double m = 0, M = 0;
    bool comparable = true;
};

// Extremes of g against f inside a cylinder cone; both are read off the
// quotient set Q described in the header comment. Pre: f, g are members,
// positive on the cylinder.
inline MAndM m_and_M(const Eigen::VectorXd& g, const Eigen::VectorXd& f, const ConeSpec& c,
                     const WordIndex& ix) {
    if (c.kind != ConeSpec::Kind::Metric && c.kind != ConeSpec::Kind::BoundedRatio)
        throw std::invalid_argument("m_and_M: expects a cylinder cone");
    std::vector<int> in = detail::cylinder_ranks(ix, c.cylinder);
    MAndM out;
    out.m = std::numeric_limits<double>::infinity();
    out.M = 0;
    for (int r : in) {
        if (f(r) <= 0 || g(r) <= 0) return {0, 0, false};
        double q = g(r) / f(r);
        out.m = std::min(out.m, q);
        out.M = std::max(out.M, q);
    }
    for (int iu : in)
        for (int iv : in) {
            if (iu == iv) continue;
            int k = detail::first_disagreement(ix.word(iu), ix.word(iv));
            double e = std::exp(c.metric[static_cast<std::size_t>(k)]);
            double den = e * f(iv) - f(iu);
            double num = e * g(iv) - g(iu);
            double fref = e * f(iv) + f(iu), gref = e * g(iv) + g(iu);
            if (den <= kDegenerate * fref) {
                // boundary direction of f: vacuous if g is also degenerate there
                if (num <= kDegenerate * gref) continue;
                return {0, 0, false};
            }
            double q = num / den;
            out.m = std::min(out.m, q);
            out.M = std::max(out.M, q);
        }
    if (out.m <= 0) out.comparable = false;
    return out;
}

struct ComponentDistance {
    int cylinder = -1;
    double m = 0, M = 0;
    bool active = false; // both functions nonzero on this part
};

struct DirectSumDistance {
    double value = 0;
    bool comparable = true;
    std::vector<ComponentDistance> components;
};

// Theta on a direct sum: log(sup_i M_i / inf_i m_i) over the active parts.
// A part where exactly one of the functions vanishes makes them incomparable.
inline DirectSumDistance direct_sum_distance(const Eigen::VectorXd& g, const Eigen::VectorXd& f,
                                             const ConeSpec& c, const WordIndex& ix) {
    if (c.kind != ConeSpec::Kind::DirectSum)
        throw std::invalid_argument("direct_sum_distance: expects a direct sum");
    DirectSumDistance out;
    double inf_m = std::numeric_limits<double>::infinity(), sup_M = 0;
    bool any = false;
    for (const ConeSpec& part : c.parts) {
        ComponentDistance comp;
        comp.cylinder = part.cylinder;
        std::vector<int> in = detail::cylinder_ranks(ix, part.cylinder);
        double fs = 0, gs = 0;
        for (int r : in) {
            fs = std::max(fs, std::abs(f(r)));
            gs = std::max(gs, std::abs(g(r)));
        }
        if (fs == 0 && gs == 0) {
            out.components.push_back(comp);
            continue;
        }
        if ((fs == 0) != (gs == 0)) {
            out.comparable = false;
            out.value = std::numeric_limits<double>::infinity();
            out.components.push_back(comp);
            continue;
        }
        MAndM mm;
        if (part.kind == ConeSpec::Kind::Nonneg) {
            mm.m = std::numeric_limits<double>::infinity();
            mm.M = 0;
            for (int r : in) {
                if (f(r) <= 0 || g(r) <= 0) { mm.comparable = false; break; }
                double q = g(r) / f(r);
                mm.m = std::min(mm.m, q);
                mm.M = std::max(mm.M, q);
            }
        } else {
            mm = m_and_M(g, f, part, ix);
        }
        if (!mm.comparable) {
            out.comparable = false;
            out.value = std::numeric_limits<double>::infinity();
            out.components.push_back(comp);
            continue;
        }
        comp.active = true;
        comp.m = mm.m;
        comp.M = mm.M;
        inf_m = std::min(inf_m, mm.m);
        sup_M = std::max(sup_M, mm.M);
        any = true;
        out.components.push_back(comp);
    }
    if (!out.comparable) return out;
    out.value = any ? std::log(sup_M / inf_m) : 0.0;
    return out;
}

inline HilbertResult hilbert_distance(const Eigen::VectorXd& g, const Eigen::VectorXd& f,
                                      const ConeSpec& c, const WordIndex& ix) {
    switch (c.kind) {
        case ConeSpec::Kind::Nonneg:
            return hilbert_nonneg(g, f);
        case ConeSpec::Kind::Metric:
        case ConeSpec::Kind::BoundedRatio: {
            MAndM mm = m_and_M(g, f, c, ix);
            if (!mm.comparable) return {std::numeric_limits<double>::infinity(), false};
            return {std::log(mm.M / mm.m), true};
        }
        case ConeSpec::Kind::DirectSum: {
            DirectSumDistance d = direct_sum_distance(g, f, c, ix);
            return {d.value, d.comparable};
        }
    }
    return {0, false};
}

// ── sampling ───────────────────────────────────────────────────────────────

// Member of C([a], d) at the index depth: log f(u) is a sum of independent
// increments attached to the prefixes of u, the increment at agreement
// length k drawn uniformly from (-(d_k - d_{k+1})/2, +...), the deepest from
// (-d_{m-1}/2, +d_{m-1}/2). Log-ratios over agreement k then telescope to at
// most d_k, so membership holds by construction (and is verified by tests).
inline Eigen::VectorXd sample_metric_cone(const WordIndex& ix, int a,
                                          const std::vector<double>& d, Rng& rng,
                                          double spread = 1.0) {
    const int m = ix.length();
    if (static_cast<int>(d.size()) < m)
        throw std::invalid_argument("sample_metric_cone: metric table shorter than depth");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(ix.size());
    std::vector<double> eps(static_cast<std::size_t>(m), 0.0); // eps[t]: prefix of length t+1
    auto amp = [&](int t) {
        return (t + 1 < m) ? (d[static_cast<std::size_t>(t)] - d[static_cast<std::size_t>(t + 1)]) / 2
                           : d[static_cast<std::size_t>(t)] / 2;
    };
    double base = rng.uniform(-spread, spread);
    const Word* prev = nullptr;
    for (int r = 0; r < ix.size(); ++r) {
        const Word& w = ix.word(r);
        if (w[0] != a) continue;
        int from = 1;
        if (prev) from = detail::first_disagreement(*prev, w);
        for (int t = from; t < m; ++t) eps[static_cast<std::size_t>(t)] = rng.uniform(-amp(t), amp(t));
        double lg = base;
        for (int t = 1; t < m; ++t) lg += eps[static_cast<std::size_t>(t)];
        out(r) = std::exp(lg);
        prev = &w;
    }
    return out;
}

inline Eigen::VectorXd sample_cone(const ConeSpec& c, const WordIndex& ix, Rng& rng,
                                   double spread = 1.0) {
    switch (c.kind) {
        case ConeSpec::Kind::Nonneg: {
            Eigen::VectorXd out(ix.size());
            for (int r = 0; r < ix.size(); ++r) out(r) = std::exp(rng.uniform(-spread, spread));
            return out;
        }
        case ConeSpec::Kind::Metric:
        case ConeSpec::Kind::BoundedRatio:
            return sample_metric_cone(ix, c.cylinder, c.metric, rng, spread);
        case ConeSpec::Kind::DirectSum: {
            Eigen::VectorXd out = Eigen::VectorXd::Zero(ix.size());
            for (const ConeSpec& part : c.parts) out += sample_cone(part, ix, rng, spread);
            return out;
        }
    }
    return Eigen::VectorXd::Zero(ix.size());
}

// ── Birkhoff contraction check ─────────────────────────────────────────────

struct BirkhoffReport {
    int samples = 0;
    int mapping_violations = 0;   // images leaving the target cone
    int bound_violations = 0;     // pairs with Theta_out > tanh(Delta/4) Theta_in + slack
    double delta = 0;             // projective diameter used in the bound
    bool delta_exact = false;     // true when delta is the exact column diameter
    double tanh_bound = 1;
    double max_ratio = 0;         // worst measured Theta_out / Theta_in
    double max_theta_out = 0;
};

// Exact projective diameter of mat applied to the nonnegative cone: the
// pairwise Hilbert distance maximum over nonzero columns (extreme rays).
inline double nonneg_image_diameter(const Eigen::MatrixXd& mat) {
    double d = 0;
    for (int i = 0; i < mat.cols(); ++i) {
        if (mat.col(i).cwiseAbs().maxCoeff() == 0) continue;
        for (int j = i + 1; j < mat.cols(); ++j) {
            if (mat.col(j).cwiseAbs().maxCoeff() == 0) continue;
            HilbertResult h = hilbert_nonneg(mat.col(i), mat.col(j));
            if (!h.comparable) return std::numeric_limits<double>::infinity();
            d = std::max(d, h.value);
        }
    }
    return d;
}

inline BirkhoffReport birkhoff_check(const Eigen::MatrixXd& mat, const ConeSpec& cone_in,
                                     const ConeSpec& cone_out, const WordIndex& ix, int pairs,
                                     std::uint64_t seed, double delta = -1) {
    if (pairs < 1) throw std::invalid_argument("birkhoff_check: need pairs >= 1");
    Rng rng(seed);
    BirkhoffReport rep;
    std::vector<std::pair<double, double>> thetas;
    for (int s = 0; s < pairs; ++s) {
        Eigen::VectorXd f = sample_cone(cone_in, ix, rng);
        Eigen::VectorXd g = sample_cone(cone_in, ix, rng);
        HilbertResult tin = hilbert_distance(g, f, cone_in, ix);
        Eigen::VectorXd lf = mat * f, lg = mat * g;
        if (!cone_membership(lf, cone_out, ix).member ||
            !cone_membership(lg, cone_out, ix).member)
            ++rep.mapping_violations;
        HilbertResult tout = hilbert_distance(lg, lf, cone_out, ix);
        if (!tin.comparable || !tout.comparable) {
            ++rep.mapping_violations;
            continue;
        }
        thetas.emplace_back(tin.value, tout.value);
        rep.max_theta_out = std::max(rep.max_theta_out, tout.value);
        ++rep.samples;
    }
    if (delta >= 0) {
        rep.delta = delta;
        rep.delta_exact = true; // caller-supplied (e.g. lemma constant)
    } else if (cone_in.kind == ConeSpec::Kind::Nonneg) {
        rep.delta = nonneg_image_diameter(mat);
        rep.delta_exact = true;
    } else {
        rep.delta = rep.max_theta_out; // sampled lower estimate of the diameter
        rep.delta_exact = false;
    }
    rep.tanh_bound = std::isinf(rep.delta) ? 1.0 : std::tanh(rep.delta / 4);
    for (auto [tin, tout] : thetas) {
        if (tout > rep.tanh_bound * tin + kConeSlack) ++rep.bound_violations;
        if (tin > 0) rep.max_ratio = std::max(rep.max_ratio, tout / tin);
    }
    return rep;
}

// ── regularity-cone comparison ─────────────────────────────────────────────

struct RegularityBound {
    double lhs = 0;   // Theta in the direct sum of C([a], d) cones
    double rhs = 0;   // 2 log((1+sigma)/(1-sigma)) + Theta in the nonneg sum
    double theta_plus = 0;
    double slack = 0;
    bool pass = false;
};

// For f, g in the sigma-contracted cones C([a], sigma d), the distance in the
// full cones is controlled by the nonnegative-cone distance plus a constant
// depending only on sigma.
inline RegularityBound regularity_cone_bound(const Eigen::VectorXd& g, const Eigen::VectorXd& f,
                                             double sigma, const ConeSpec& sum,
                                             const WordIndex& ix) {
    if (sum.kind != ConeSpec::Kind::DirectSum)
        throw std::invalid_argument("regularity_cone_bound: expects a direct sum");
    if (sigma <= 0 || sigma >= 1)
        throw std::invalid_argument("regularity_cone_bound: sigma must be in (0,1)");
    ConeSpec scaled = sum;
    for (ConeSpec& part : scaled.parts)
        for (double& dk : part.metric) dk *= sigma;
    if (!cone_membership(f, scaled, ix).member || !cone_membership(g, scaled, ix).member)
        throw std::invalid_argument("regularity_cone_bound: inputs not in the contracted cones");

    RegularityBound out;
    out.lhs = direct_sum_distance(g, f, sum, ix).value;
    ConeSpec plus = sum;
    for (ConeSpec& part : plus.parts) {
        part.kind = ConeSpec::Kind::Nonneg;
        part.metric.clear();
    }
    out.theta_plus = direct_sum_distance(g, f, plus, ix).value;
    out.rhs = 2 * std::log((1 + sigma) / (1 - sigma)) + out.theta_plus;
    out.slack = out.rhs - out.lhs;
    out.pass = out.lhs <= out.rhs + kConeSlack;
    return out;
}

} // namespace factorgibbs
