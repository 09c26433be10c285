#include "helpers.hpp"

#include <factorgibbs/transfer.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

using namespace factorgibbs;
using testfix::example_chain;
using testfix::example_rows;
using testfix::example_stationary;

namespace {

Eigen::MatrixXd example_matrix() {
    auto rows = example_rows();
    Eigen::MatrixXd s(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return s;
}

} // namespace

TEST_CASE("transfer matrix at depth one is the transposed weight matrix") {
    MarkovSystem m = example_chain();
    TransferOperator op(m.phi, 1);
    Eigen::MatrixXd expect = example_matrix().transpose();
    // the excluded transition contributes a zero entry
    CHECK((op.matrix() - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("eigendata of a stochastic chain") {
    MarkovSystem m = example_chain();
    TransferOperator op(m.phi, working_depth(m.phi));
    EigenData e = eigendata(op);
    CHECK(e.rho == Catch::Approx(1.0).margin(1e-12));
    CHECK(std::abs(e.pressure) < 1e-12);
    CHECK(e.residual_h < 1e-12);
    CHECK(e.residual_nu < 1e-12);
    // the dual eigenvector is uniform on one-cylinders
    for (int i = 0; i < 3; ++i) CHECK(e.nu(i) == Catch::Approx(1.0 / 3).margin(1e-12));
    // h nu recovers the stationary distribution
    std::vector<double> pi = example_stationary();
    for (int i = 0; i < 3; ++i)
        CHECK(e.h(i) * e.nu(i) == Catch::Approx(pi[static_cast<std::size_t>(i)]).margin(1e-12));
}

TEST_CASE("stationary distribution solve matches the exact rationals") {
    Eigen::VectorXd pi = stationary_distribution(example_matrix());
    std::vector<double> expect = example_stationary();
    for (int i = 0; i < 3; ++i)
        CHECK(pi(i) == Catch::Approx(expect[static_cast<std::size_t>(i)]).margin(1e-13));
}

TEST_CASE("gibbs cylinder masses of the markov chain are products") {
    MarkovSystem m = example_chain();
    TransferOperator op(m.phi, working_depth(m.phi));
    EigenData e = eigendata(op);
    auto s = example_rows();
    std::vector<double> pi = example_stationary();
    // mu[w] = pi_{w0} prod S_{w_t w_{t+1}}
    CHECK(gibbs_cylinder(op, e, {0}) == Catch::Approx(pi[0]).margin(1e-13));
    CHECK(gibbs_cylinder(op, e, {0, 1}) == Catch::Approx(pi[0] * s[0][1]).margin(1e-13));
    CHECK(gibbs_cylinder(op, e, {2, 1, 2}) ==
          Catch::Approx(pi[2] * s[2][1] * s[1][2]).margin(1e-13));
    // the eigenmeasure weights the tail uniformly instead
    CHECK(eigenmeasure_cylinder(op, e, {2, 1}) == Catch::Approx(s[2][1] / 3).margin(1e-13));
}

TEST_CASE("cylinder masses are additive under right extension") {
    MarkovSystem m = example_chain();
    TransferOperator op(m.phi, working_depth(m.phi));
    EigenData e = eigendata(op);
    for (const Word& w : enumerate_words(m.sft, 2)) {
        double whole_g = gibbs_cylinder(op, e, w);
        double whole_n = eigenmeasure_cylinder(op, e, w);
        double sum_g = 0, sum_n = 0;
        for (int b = 0; b < 3; ++b) {
            if (!m.sft.edge(w.back(), b)) continue;
            Word wb = w;
            wb.push_back(b);
            sum_g += gibbs_cylinder(op, e, wb);
            sum_n += eigenmeasure_cylinder(op, e, wb);
        }
        CHECK(sum_g == Catch::Approx(whole_g).margin(1e-13));
        CHECK(sum_n == Catch::Approx(whole_n).margin(1e-13));
    }
}

TEST_CASE("gibbs masses are shift invariant under left extension") {
    MarkovSystem m = example_chain();
    TransferOperator op(m.phi, working_depth(m.phi));
    EigenData e = eigendata(op);
    for (const Word& w : enumerate_words(m.sft, 3)) {
        double whole = gibbs_cylinder(op, e, w);
        double sum = 0;
        for (int b = 0; b < 3; ++b) {
            if (!m.sft.edge(b, w.front())) continue;
            Word bw{b};
            bw.insert(bw.end(), w.begin(), w.end());
            sum += gibbs_cylinder(op, e, bw);
        }
        CHECK(sum == Catch::Approx(whole).margin(1e-13));
    }
}

TEST_CASE("normalization removes the pressure and nothing else") {
    MarkovSystem m = example_chain();
    // scale the weights so the pressure is log 2 before normalizing
    auto rows = example_rows();
    for (auto& r : rows)
        for (double& v : r) v *= 2;
    MarkovSystem scaled = make_markov_system(rows);
    TransferOperator op(scaled.phi, working_depth(scaled.phi));
    EigenData e = eigendata(op);
    CHECK(e.pressure == Catch::Approx(std::log(2.0)).margin(1e-12));

    Potential phin = normalize(scaled.phi, e);
    TransferOperator opn(phin, working_depth(phin));
    EigenData en = eigendata(opn);
    CHECK(std::abs(en.pressure) < 1e-12);
    // eigenvectors are untouched by the constant shift
    for (int i = 0; i < 3; ++i) {
        CHECK(en.nu(i) == Catch::Approx(e.nu(i)).margin(1e-11));
        CHECK(en.h(i) == Catch::Approx(e.h(i)).margin(1e-11));
    }
    // variations are unchanged
    CHECK(variation(phin, 1) == Catch::Approx(variation(scaled.phi, 1)).margin(1e-13));
}

TEST_CASE("pressure identity of the markov equilibrium") {
    PressureIdentity p = markov_pressure_identity(example_matrix());
    CHECK(std::abs(p.identity_gap) < 1e-12);
    CHECK(p.entropy > 0);
}

TEST_CASE("measured gibbs constant of the markov chain") {
    MarkovSystem m = example_chain();
    TransferOperator op(m.phi, working_depth(m.phi));
    EigenData e = eigendata(op);
    GibbsBounds g = gibbs_bounds_check(op, e, 5);
    // S_n phi reads one symbol past the cylinder (lex representative), so
    // mu[w]/e^{S_n phi} = pi_{w0} / S_{w_{n-1}, 0}: extremes at w0 = 2
    // (10/17 over 1/6) and w0 = 1 (3/17 over 1/3)
    CHECK(g.constant == Catch::Approx(60.0 / 17).margin(1e-10));
    CHECK(g.min_ratio == Catch::Approx(9.0 / 17).margin(1e-12));
    CHECK(g.max_ratio == Catch::Approx(60.0 / 17).margin(1e-12));
}

TEST_CASE("operator depth below the working depth is rejected") {
    MarkovSystem m = example_chain();
    CHECK_THROWS_AS(TransferOperator(m.phi, 0), std::invalid_argument);
}
