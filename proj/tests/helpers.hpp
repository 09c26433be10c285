// Shared fixtures for the unit suites: the worked three-state chain with its
// two-letter relabeling, the golden-mean collapse, and envelope towers.
#pragma once

#include <factorgibbs/factor_ops.hpp>
#include <factorgibbs/potential.hpp>
#include <factorgibbs/sft.hpp>

#include <cmath>
#include <vector>

namespace testfix {

using namespace factorgibbs;

// Row-stochastic matrix of the worked example; state 1 cannot follow itself.
inline std::vector<std::vector<double>> example_rows() {
    return {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {1.0 / 3, 0.0, 2.0 / 3}, {1.0 / 6, 1.0 / 6, 2.0 / 3}};
}

// Chain on the support shift (transition 1->1 excluded) with phi = log S.
inline MarkovSystem example_chain() { return make_markov_system(example_rows()); }

// Relabeling 0,1 -> r(=0) and 2 -> b(=1).
inline FactorMap example_relabel() { return FactorMap({0, 0, 1}, 2); }

inline FactorSystem example_system() { return FactorSystem(example_chain().phi, example_relabel()); }

// Same labeling read on the full 3-shift (no transition removed).
inline Sft full3() { return Sft::full_shift(3); }

// Golden-mean shift with both states sent to one letter.
inline Sft golden_mean() { return Sft({{1, 1}, {1, 0}}); }
inline FactorMap collapse2() { return FactorMap({0, 0}, 1); }

// Golden-mean chain with S = [[1/2, 1/2], [1, 0]].
inline MarkovSystem golden_chain() { return make_markov_system({{0.5, 0.5}, {1.0, 0.0}}); }

// Uniform Bernoulli potential on the full 3-shift.
inline Potential bernoulli3() {
    double v = std::log(1.0 / 3);
    return Potential(full3(), {PotentialLayer{1, {v, v, v}}});
}

// Envelope tower on the full 3-shift: var_k phi = v[k] with v = 2, 1/k^2.
inline Potential tower3() {
    return saturating_tower(full3(), {2.0, 1.0, 0.25, 1.0 / 9, 1.0 / 16});
}

// Stationary distribution of the example chain, as exact rationals.
inline std::vector<double> example_stationary() { return {4.0 / 17, 3.0 / 17, 10.0 / 17}; }

} // namespace testfix
