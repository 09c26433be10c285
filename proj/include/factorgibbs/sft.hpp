#pragma once

/*
 * Shifts of finite type over a finite alphabet {0, ..., n-1}, described by a
 * 0/1 transition matrix A. Convention used throughout the library:
 *
 *     A[i][j] = 1  <=>  the two-letter word "ij" is admissible
 *                 <=>  j may immediately follow i.
 *
 * One-block factor maps send each symbol to an image symbol; the image of the
 * shift is the set of symbolwise projections of admissible words (a sofic
 * shift in general, so image admissibility is decided with follower sets, not
 * with a transition matrix).
 */

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace factorgibbs {

// A finite word w_0 ... w_{n-1} of symbols. Always nonempty in valid use.
using Word = std::vector<int>;

struct WordHash {
    std::size_t operator()(const Word& w) const {
        std::uint64_t h = 1469598103934665603ull; // FNV-1a
        for (int s : w) {
            h ^= static_cast<std::uint64_t>(s) + 0x9e3779b97f4a7c15ull;
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

class Sft {
public:
    // rows[i][j] must be 0 or 1; every symbol needs at least one successor and
    // one predecessor (no stranded symbols), so every word extends both ways.
    explicit Sft(std::vector<std::vector<int>> rows) {
        n_ = static_cast<int>(rows.size());
        if (n_ < 1) throw std::invalid_argument("Sft: empty alphabet");
        adj_.assign(static_cast<std::size_t>(n_) * n_, 0);
        for (int i = 0; i < n_; ++i) {
            if (static_cast<int>(rows[i].size()) != n_)
                throw std::invalid_argument("Sft: transition matrix is not square");
            for (int j = 0; j < n_; ++j) {
                if (rows[i][j] != 0 && rows[i][j] != 1)
                    throw std::invalid_argument("Sft: transition entries must be 0 or 1");
                adj_[static_cast<std::size_t>(i) * n_ + j] = static_cast<std::uint8_t>(rows[i][j]);
            }
        }
        for (int i = 0; i < n_; ++i) {
            bool out = false, in = false;
            for (int j = 0; j < n_; ++j) {
                out = out || edge(i, j);
                in = in || edge(j, i);
            }
            if (!out || !in)
                throw std::invalid_argument("Sft: symbol " + std::to_string(i) +
                                            " has no successor or no predecessor");
        }
    }

    static Sft full_shift(int n) {
        return Sft(std::vector<std::vector<int>>(n, std::vector<int>(n, 1)));
    }

    int alphabet_size() const { return n_; }

    bool edge(int i, int j) const {
        return adj_[static_cast<std::size_t>(i) * n_ + j] != 0;
    }

    // Smallest successor of i; exists by the no-stranded-symbol invariant.
    int min_successor(int i) const {
        for (int j = 0; j < n_; ++j)
            if (edge(i, j)) return j;
        return -1; // unreachable
    }

private:
    int n_;
    std::vector<std::uint8_t> adj_;
};

inline void check_symbols(const Sft& x, const Word& w) {
    if (w.empty()) throw std::invalid_argument("word: empty");
    for (int s : w)
        if (s < 0 || s >= x.alphabet_size())
            throw std::invalid_argument("word: symbol out of range");
}

inline bool is_admissible(const Sft& x, const Word& w) {
    check_symbols(x, w);
    for (std::size_t t = 0; t + 1 < w.size(); ++t)
        if (!x.edge(w[t], w[t + 1])) return false;
    return true;
}

// All admissible words of length n, in lexicographic order.
inline std::vector<Word> enumerate_words(const Sft& x, int n) {
    if (n < 1) throw std::invalid_argument("enumerate_words: length must be >= 1");
    std::vector<Word> out;
    Word w;
    w.reserve(n);
    auto dfs = [&](auto&& self, int depth) -> void {
        if (depth == n) {
            out.push_back(w);
            return;
        }
        for (int s = 0; s < x.alphabet_size(); ++s) {
            if (depth > 0 && !x.edge(w.back(), s)) continue;
            w.push_back(s);
            self(self, depth + 1);
            w.pop_back();
        }
    };
    dfs(dfs, 0);
    return out;
}

// Lexicographically sorted admissible words of one length with O(1) rank lookup.
class WordIndex {
public:
    WordIndex(const Sft& x, int len) : len_(len), words_(enumerate_words(x, len)) {
        rank_.reserve(words_.size());
        for (std::size_t r = 0; r < words_.size(); ++r)
            rank_.emplace(words_[r], static_cast<int>(r));
    }

    int length() const { return len_; }
    int size() const { return static_cast<int>(words_.size()); }
    const Word& word(int r) const { return words_[static_cast<std::size_t>(r)]; }
    const std::vector<Word>& words() const { return words_; }

    // Rank of w, or -1 if w is not an admissible word of this length.
    int rank(const Word& w) const {
        auto it = rank_.find(w);
        return it == rank_.end() ? -1 : it->second;
    }

    // Rank of the first len_ symbols of w (|w| >= len_).
    int rank_prefix(const Word& w) const {
        scratch_.assign(w.begin(), w.begin() + len_);
        return rank(scratch_);
    }

private:
    int len_;
    std::vector<Word> words_;
    std::unordered_map<Word, int, WordHash> rank_;
    mutable Word scratch_;
};

struct MixingResult {
    bool mixing = false;
    int exponent = 0; // least p with A^p strictly positive; 0 when not mixing
};

// Primitivity test via boolean powers up to the Wielandt bound (n-1)^2 + 1.
inline MixingResult is_topologically_mixing(const Sft& x) {
    const int n = x.alphabet_size();
    const int cap = (n - 1) * (n - 1) + 1;
    std::vector<std::uint8_t> p(static_cast<std::size_t>(n) * n), a(p.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a[static_cast<std::size_t>(i) * n + j] = p[static_cast<std::size_t>(i) * n + j] =
                x.edge(i, j) ? 1 : 0;
    for (int pow = 1; pow <= cap; ++pow) {
        bool all = true;
        for (std::uint8_t v : p) all = all && v != 0;
        if (all) return {true, pow};
        std::vector<std::uint8_t> q(p.size(), 0);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                if (!p[static_cast<std::size_t>(i) * n + k]) continue;
                for (int j = 0; j < n; ++j)
                    if (a[static_cast<std::size_t>(k) * n + j])
                        q[static_cast<std::size_t>(i) * n + j] = 1;
            }
        p.swap(q);
    }
    return {false, 0};
}

// ── one-block factor maps ──────────────────────────────────────────────────

class FactorMap {
public:
    // symbol_map[i] = image symbol of i; must be onto {0, ..., image_n-1}.
    FactorMap(std::vector<int> symbol_map, int image_n)
        : map_(std::move(symbol_map)), image_n_(image_n) {
        if (image_n_ < 1) throw std::invalid_argument("FactorMap: empty image alphabet");
        std::vector<bool> hit(static_cast<std::size_t>(image_n_), false);
        for (int v : map_) {
            if (v < 0 || v >= image_n_)
                throw std::invalid_argument("FactorMap: image symbol out of range");
            hit[static_cast<std::size_t>(v)] = true;
        }
        for (bool h : hit)
            if (!h) throw std::invalid_argument("FactorMap: map is not onto the image alphabet");
    }

    static FactorMap identity(int n) {
        std::vector<int> m(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = i;
        return FactorMap(std::move(m), n);
    }

    int operator()(int s) const { return map_[static_cast<std::size_t>(s)]; }
    int domain_alphabet_size() const { return static_cast<int>(map_.size()); }
    int image_alphabet_size() const { return image_n_; }

private:
    std::vector<int> map_;
    int image_n_;
};

inline Word project_word(const FactorMap& f, const Word& w) {
    Word out;
    out.reserve(w.size());
    for (int s : w) out.push_back(f(s));
    return out;
}

// Symbols that can end an admissible lift of the image word wbar; empty iff
// wbar has no lift (i.e. is not in the image language). Follower-set walk.
inline std::vector<int> lift_end_symbols(const Sft& x, const FactorMap& f, const Word& wbar) {
    if (wbar.empty()) throw std::invalid_argument("lift_end_symbols: empty word");
    const int n = x.alphabet_size();
    std::vector<bool> cur(static_cast<std::size_t>(n), false);
    for (int s = 0; s < n; ++s) cur[static_cast<std::size_t>(s)] = (f(s) == wbar[0]);
    for (std::size_t t = 1; t < wbar.size(); ++t) {
        std::vector<bool> nxt(static_cast<std::size_t>(n), false);
        for (int s = 0; s < n; ++s) {
            if (!cur[static_cast<std::size_t>(s)]) continue;
            for (int u = 0; u < n; ++u)
                if (x.edge(s, u) && f(u) == wbar[t]) nxt[static_cast<std::size_t>(u)] = true;
        }
        cur.swap(nxt);
    }
    std::vector<int> out;
    for (int s = 0; s < n; ++s)
        if (cur[static_cast<std::size_t>(s)]) out.push_back(s);
    return out;
}

inline bool is_image_admissible(const Sft& x, const FactorMap& f, const Word& wbar) {
    return !lift_end_symbols(x, f, wbar).empty();
}

// All admissible lifts of wbar, in lexicographic order.
inline std::vector<Word> lift_words(const Sft& x, const FactorMap& f, const Word& wbar) {
    if (wbar.empty()) throw std::invalid_argument("lift_words: empty word");
    std::vector<Word> out;
    Word w;
    w.reserve(wbar.size());
    auto dfs = [&](auto&& self, std::size_t t) -> void {
        if (t == wbar.size()) {
            out.push_back(w);
            return;
        }
        for (int s = 0; s < x.alphabet_size(); ++s) {
            if (f(s) != wbar[t]) continue;
            if (t > 0 && !x.edge(w.back(), s)) continue;
            w.push_back(s);
            self(self, t + 1);
            w.pop_back();
        }
    };
    dfs(dfs, 0);
    return out;
}

// Admissible image words of length n, in lexicographic order. Enumerated
// directly with follower sets so the cost scales with the image language,
// not with the number of lifts.
inline std::vector<Word> image_words(const Sft& x, const FactorMap& f, int n) {
    if (n < 1) throw std::invalid_argument("image_words: length must be >= 1");
    const int dn = x.alphabet_size();
    std::vector<Word> out;
    Word w;
    std::vector<std::vector<bool>> stack; // follower set per written position
    stack.emplace_back(static_cast<std::size_t>(dn), true);
    auto dfs = [&](auto&& self) -> void {
        if (static_cast<int>(w.size()) == n) {
            out.push_back(w);
            return;
        }
        // by value: deeper recursion grows the stack and may reallocate it
        const std::vector<bool> cur = stack.back();
        for (int c = 0; c < f.image_alphabet_size(); ++c) {
            std::vector<bool> nxt(static_cast<std::size_t>(dn), false);
            bool any = false;
            for (int u = 0; u < dn; ++u) {
                if (f(u) != c) continue;
                bool reach = false;
                if (w.empty()) {
                    reach = cur[static_cast<std::size_t>(u)];
                } else {
                    for (int s = 0; s < dn && !reach; ++s)
                        reach = cur[static_cast<std::size_t>(s)] && x.edge(s, u);
                }
                if (reach) { nxt[static_cast<std::size_t>(u)] = true; any = true; }
            }
            if (!any) continue;
            w.push_back(c);
            stack.push_back(std::move(nxt));
            self(self);
            stack.pop_back();
            w.pop_back();
        }
    };
    dfs(dfs);
    return out;
}

// Deterministic admissible continuation of an image word: repeatedly append
// the smallest image symbol reachable from the current follower set.
inline Word extend_image_word(const Sft& x, const FactorMap& f, Word wbar, int target_len) {
    std::vector<int> ends = lift_end_symbols(x, f, wbar);
    if (ends.empty()) throw std::invalid_argument("extend_image_word: word has no lift");
    const int dn = x.alphabet_size();
    std::vector<bool> cur(static_cast<std::size_t>(dn), false);
    for (int s : ends) cur[static_cast<std::size_t>(s)] = true;
    while (static_cast<int>(wbar.size()) < target_len) {
        int best = -1;
        std::vector<bool> bestSet;
        for (int c = 0; c < f.image_alphabet_size() && best < 0; ++c) {
            std::vector<bool> nxt(static_cast<std::size_t>(dn), false);
            bool any = false;
            for (int u = 0; u < dn; ++u) {
                if (f(u) != c) continue;
                for (int s = 0; s < dn; ++s)
                    if (cur[static_cast<std::size_t>(s)] && x.edge(s, u)) {
                        nxt[static_cast<std::size_t>(u)] = true;
                        any = true;
                        break;
                    }
            }
            if (any) { best = c; bestSet = std::move(nxt); }
        }
        wbar.push_back(best);
        cur = std::move(bestSet);
    }
    return wbar;
}

// ── fiber-wise mixing of a factor map ──────────────────────────────────────

// Failure certificate: the image word has a lift starting at start_symbol and
// a lift ending at end_symbol, but none doing both.
struct FiberWitness {
    int level = 0; // the N at which the condition failed
    Word image_word;
    int start_symbol = -1;
    int end_symbol = -1;
};

struct FiberMixingResult {
    bool found = false;
    int exponent = 0;                    // least N passing the condition
    std::vector<FiberWitness> failures;  // one witness per failed level < exponent
};

namespace detail {

// Boolean product certificate for one image word b_0 ... b_N:
// M(b) = A^{(b_0,b_1)} ... A^{(b_{N-1},b_N)} with A^{(c,c')}[i][j] =
// A[i][j] [pi(i)=c] [pi(j)=c']. M(b)[i][j] != 0 iff some lift of b runs from
// i to j. The condition at level N: every (nonzero row, nonzero column) pair
// is itself nonzero.
inline bool fiber_word_ok(const Sft& x, const FactorMap& f, const Word& b, FiberWitness* wit) {
    const int n = x.alphabet_size();
    std::vector<std::uint8_t> m(static_cast<std::size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i)
        if (f(i) == b[0]) m[static_cast<std::size_t>(i) * n + i] = 1;
    for (std::size_t t = 0; t + 1 < b.size(); ++t) {
        std::vector<std::uint8_t> q(m.size(), 0);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                if (!m[static_cast<std::size_t>(i) * n + k] || f(k) != b[t]) continue;
                for (int j = 0; j < n; ++j)
                    if (x.edge(k, j) && f(j) == b[t + 1])
                        q[static_cast<std::size_t>(i) * n + j] = 1;
            }
        m.swap(q);
    }
    for (int i = 0; i < n; ++i) {
        bool row = false;
        for (int j = 0; j < n; ++j) row = row || m[static_cast<std::size_t>(i) * n + j];
        if (!row) continue;
        for (int j = 0; j < n; ++j) {
            bool col = false;
            for (int k = 0; k < n; ++k) col = col || m[static_cast<std::size_t>(k) * n + j];
            if (col && !m[static_cast<std::size_t>(i) * n + j]) {
                if (wit) *wit = {static_cast<int>(b.size()) - 1, b, i, j};
                return false;
            }
        }
    }
    return true;
}

} // namespace detail

// Least N <= n_max such that for every admissible image word of length N+1
// and every pair of its lifts u, w there is a lift a with a_0 = u_0 and
// a_N = w_N. Witnesses record the first failing word per level below N.
inline FiberMixingResult fiber_mixing_exponent(const Sft& x, const FactorMap& f, int n_max = 12) {
    if (n_max < 1) throw std::invalid_argument("fiber_mixing_exponent: n_max must be >= 1");
    FiberMixingResult res;
    for (int bigN = 1; bigN <= n_max; ++bigN) {
        bool ok = true;
        FiberWitness wit;
        for (const Word& b : image_words(x, f, bigN + 1)) {
            if (!detail::fiber_word_ok(x, f, b, &wit)) {
                ok = false;
                break;
            }
        }
        if (ok) {
            res.found = true;
            res.exponent = bigN;
            return res;
        }
        res.failures.push_back(wit);
    }
    return res;
}

// Independent oracle for one level: enumerate the lifts of every image word
// of length N+1 and check the (start, end) pairs directly.
inline bool fiber_mixing_check_exhaustive(const Sft& x, const FactorMap& f, int bigN) {
    for (const Word& b : image_words(x, f, bigN + 1)) {
        std::vector<Word> lifts = lift_words(x, f, b);
        std::vector<bool> starts(static_cast<std::size_t>(x.alphabet_size()), false);
        std::vector<bool> ends(starts), pair;
        pair.assign(starts.size() * starts.size(), false);
        for (const Word& u : lifts) {
            starts[static_cast<std::size_t>(u.front())] = true;
            ends[static_cast<std::size_t>(u.back())] = true;
            pair[static_cast<std::size_t>(u.front()) * starts.size() + u.back()] = true;
        }
        for (std::size_t i = 0; i < starts.size(); ++i)
            for (std::size_t j = 0; j < ends.size(); ++j)
                if (starts[i] && ends[j] && !pair[i * starts.size() + j]) return false;
    }
    return true;
}

} // namespace factorgibbs
