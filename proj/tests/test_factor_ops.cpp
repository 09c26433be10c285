#include "helpers.hpp"

#include <factorgibbs/factor_ops.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

using namespace factorgibbs;
using testfix::example_chain;
using testfix::example_relabel;
using testfix::example_rows;
using testfix::example_system;
using Catch::Approx;

namespace {

Eigen::MatrixXd from_rows(const std::vector<std::vector<double>>& rows) {
    Eigen::MatrixXd m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    return m;
}

} // namespace

TEST_CASE("factor system defaults to the working depth of its potential") {
    FactorSystem sys = example_system();
    CHECK(sys.depth() == 1);
    CHECK(sys.op().words().size() == 3);
    CHECK(sys.fmap().image_alphabet_size() == 2);
    // the word fibers at depth one are the symbol labels themselves
    CHECK(sys.word_fiber(0) == 0);
    CHECK(sys.word_fiber(1) == 0);
    CHECK(sys.word_fiber(2) == 1);
}

TEST_CASE("block operators are the label-masked weight matrices") {
    FactorSystem sys = example_system();
    // Masks of S with rows = earlier symbol, columns = later symbol; the
    // block operator acts on the transposed index order, so compare against
    // block(to, from).mat.transpose().
    const double t = 1.0 / 3, s = 2.0 / 3, u = 1.0 / 6;
    Eigen::MatrixXd rr = from_rows({{t, t, 0}, {t, 0, 0}, {0, 0, 0}});
    Eigen::MatrixXd rb = from_rows({{0, 0, t}, {0, 0, s}, {0, 0, 0}});
    Eigen::MatrixXd br = from_rows({{0, 0, 0}, {0, 0, 0}, {u, u, 0}});
    Eigen::MatrixXd bb = from_rows({{0, 0, 0}, {0, 0, 0}, {0, 0, s}});
    struct Row {
        int from, to;
        Eigen::MatrixXd want;
    };
    for (const Row& c : {Row{0, 0, rr}, Row{0, 1, rb}, Row{1, 0, br}, Row{1, 1, bb}}) {
        const BlockOperator& blk = sys.block_operator(c.to, c.from);
        CHECK(blk.admissible);
        CHECK((Eigen::MatrixXd(blk.mat.transpose()) - c.want).cwiseAbs().maxCoeff() < 1e-15);
    }
    CHECK_THROWS_AS(sys.block_operator(2, 0), std::invalid_argument);
    CHECK_THROWS_AS(sys.block_operator(0, -1), std::invalid_argument);
}

TEST_CASE("block operators tile the transfer matrix exactly") {
    FactorSystem sys = example_system();
    const int k = sys.fmap().image_alphabet_size();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 3);
    for (int b = 0; b < k; ++b)
        for (int bp = 0; bp < k; ++bp) sum += sys.block_operator(b, bp).mat;
    CHECK((sum - sys.op().matrix()).cwiseAbs().maxCoeff() == 0.0);

    // sub-operators tile each block the same way
    Eigen::MatrixXd sub_sum = Eigen::MatrixXd::Zero(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) sub_sum += sys.sub_operator(i, j).mat;
    CHECK((sub_sum - sys.op().matrix()).cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(sys.sub_operator(1, 1).admissible);
    CHECK(sys.sub_operator(1, 1).mat.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("word operators multiply right to left and vanish off the shift") {
    FactorSystem sys = example_system();
    SubOperator prod = word_operator(sys, {0, 2, 1});
    Eigen::MatrixXd manual = sys.sub_operator(1, 2).mat * sys.sub_operator(2, 0).mat;
    CHECK((prod.mat - manual).cwiseAbs().maxCoeff() == 0.0);
    CHECK(prod.admissible);
    CHECK(prod.from_symbol == 0);
    CHECK(prod.to_symbol == 1);

    SubOperator dead = word_operator(sys, {1, 1, 0});
    CHECK_FALSE(dead.admissible);
    CHECK(dead.mat.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(word_operator(sys, {0}), std::invalid_argument);

    BlockOperator img = block_word_operator(sys, {0, 0, 1, 0});
    // associate right to left, exactly as the product is accumulated
    Eigen::MatrixXd by_hand = sys.block_operator(0, 1).mat *
                              (sys.block_operator(1, 0).mat *
                               sys.block_operator(0, 0).mat).eval();
    CHECK((img.mat - by_hand).cwiseAbs().maxCoeff() == 0.0);
    CHECK(img.admissible);
}

TEST_CASE("pushforward masses of the relabeled chain match hand values") {
    FactorSystem sys = example_system();
    struct Row {
        Word ybar;
        double want;
    };
    // exact rational masses of the image cylinders under the invariant measure
    const std::vector<Row> rows = {
        {{0}, 7.0 / 17},          // r
        {{0, 0}, 11.0 / 51},      // rr
        {{0, 0, 1, 0}, 5.0 / 153} // rrbr
    };
    for (const Row& r : rows) {
        PushValue a = pushforward_operator(sys, r.ybar, Reference::Gibbs);
        PushValue b = pushforward_liftsum(sys, r.ybar, Reference::Gibbs);
        PushValue c = pushforward_cylinder(sys, r.ybar, Reference::Gibbs);
        CHECK(a.admissible);
        // the hand values are exact; the computed ones carry the iterative
        // eigensolver tolerance
        CHECK(a.value == Approx(r.want).epsilon(1e-11));
        CHECK(b.value == Approx(r.want).epsilon(1e-11));
        CHECK(c.value == a.value);
    }
    // eigenmeasure masses: uniform nu gives pi_* nu[r] = 2/3, pi_* nu[rr] = 1/3
    CHECK(pushforward_operator(sys, {0}, Reference::Eigenmeasure).value ==
          Approx(2.0 / 3).epsilon(1e-13));
    CHECK(pushforward_operator(sys, {0, 0}, Reference::Eigenmeasure).value ==
          Approx(1.0 / 3).epsilon(1e-13));
    CHECK_THROWS_AS(pushforward_operator(sys, {}, Reference::Gibbs), std::invalid_argument);
    CHECK_THROWS_AS(pushforward_operator(sys, {2}, Reference::Gibbs), std::invalid_argument);
}

TEST_CASE("operator and lift-sum routes agree on every image word") {
    FactorSystem sys = example_system();
    int checked = 0;
    for (int n = 1; n <= 8; ++n) {
        for (const Word& y : image_words(sys.sft(), sys.fmap(), n)) {
            for (Reference ref : {Reference::Eigenmeasure, Reference::Gibbs}) {
                PushValue a = pushforward_operator(sys, y, ref);
                PushValue b = pushforward_liftsum(sys, y, ref);
                REQUIRE(a.admissible == b.admissible);
                REQUIRE(std::abs(a.value - b.value) <= 1e-12 * std::max(a.value, b.value));
            }
            ++checked;
        }
    }
    CHECK(checked > 250); // every admissible image word through length 8
}

TEST_CASE("image words with no lift are flagged rather than mis-valued") {
    // golden-mean shift with the identity labeling: the image word 11 keeps
    // its inadmissibility
    MarkovSystem chain = testfix::golden_chain();
    FactorSystem sys(chain.phi, FactorMap({0, 1}, 2));
    PushValue a = pushforward_operator(sys, {1, 1}, Reference::Gibbs);
    PushValue b = pushforward_liftsum(sys, {1, 1}, Reference::Gibbs);
    CHECK_FALSE(a.admissible);
    CHECK(a.value == 0.0);
    CHECK_FALSE(b.admissible);
    CHECK(b.value == 0.0);
    CHECK_THROWS_AS(f_sequence(sys, {1, 1}), std::domain_error);
}

TEST_CASE("conditional quotients match two-cylinder ratios") {
    FactorSystem sys = example_system();
    PsiOptions gibbs{Reference::Gibbs, nullptr};
    // f_1(rr) = log(mu[rr]/mu[r]) = log((11/51)/(7/17)) = log(11/21)
    CHECK(f_m(sys, {0, 0}, gibbs) == Approx(std::log(11.0 / 21)).margin(1e-13));
    // along rrbr the later quotients are exactly log(1/2):
    //   mu[rrb]/mu[rb] = (5/51)/(10/51), mu[rrbr]/mu[rbr] = (5/153)/(10/153)
    std::vector<double> f = f_sequence(sys, {0, 0, 1, 0}, gibbs);
    REQUIRE(f.size() == 3);
    CHECK(f[0] == Approx(std::log(11.0 / 21)).margin(1e-13));
    CHECK(f[1] == Approx(std::log(0.5)).margin(1e-13));
    CHECK(f[2] == Approx(std::log(0.5)).margin(1e-13));
    CHECK_THROWS_AS(f_sequence(sys, {0}), std::invalid_argument);
}

TEST_CASE("identity relabeling reproduces the cylinder masses") {
    MarkovSystem chain = example_chain();
    FactorSystem sys(chain.phi, FactorMap({0, 1, 2}, 3));
    const WordIndex& ix = sys.op().words();
    for (int n = 1; n <= 4; ++n) {
        WordIndex deep(sys.sft(), n);
        for (int r = 0; r < deep.size(); ++r) {
            const Word& w = deep.word(r);
            for (Reference ref : {Reference::Eigenmeasure, Reference::Gibbs}) {
                double direct = sys.op().cylinder_mass(sys.eig(), w, ref == Reference::Gibbs);
                PushValue via = pushforward_operator(sys, w, ref);
                REQUIRE(via.admissible);
                REQUIRE(via.value == Approx(direct).epsilon(1e-13));
            }
        }
    }
    CHECK(ix.size() == 3);
}

TEST_CASE("running log scale keeps long products finite") {
    // direct check of the scaled vector: two thousand halvings leave the
    // pairing log exact even though the plain value underflows
    ScaledVector v{(Eigen::VectorXd(2) << 3.0, 4.0).finished()};
    Eigen::MatrixXd half = 0.5 * Eigen::MatrixXd::Identity(2, 2);
    for (int k = 0; k < 2000; ++k) v.apply(half);
    CHECK_FALSE(v.zero());
    double got = v.pair_log(Eigen::VectorXd::Ones(2));
    double want = std::log(7.0) + 2000.0 * std::log(0.5);
    CHECK(got == Approx(want).margin(1e-9));
    CHECK(std::exp(got) == 0.0); // below the double range without the scale

    ScaledVector z{Eigen::VectorXd::Zero(2)};
    CHECK(z.zero());
    CHECK(z.pair_log(Eigen::VectorXd::Ones(2)) ==
          -std::numeric_limits<double>::infinity());

    // through the chain API: quotients along three hundred r's settle on the
    // dominant eigenvalue of the r-restricted weight block, (1 + sqrt 5)/6
    FactorSystem sys = example_system();
    Word ybar(301, 0);
    std::vector<double> f = f_sequence(sys, ybar, PsiOptions{Reference::Gibbs, nullptr});
    double limit = std::log((1.0 + std::sqrt(5.0)) / 6.0);
    CHECK(std::abs(f.back() - limit) < 1e-13);
}

TEST_CASE("fiber exponents through the factor system") {
    CHECK(example_system().fiber_exponent() == 2);

    FactorSystem free_sys(testfix::bernoulli3(), example_relabel());
    CHECK(free_sys.fiber_exponent() == 1);

    // the two-cycle collapsed to one letter realizes only half of the
    // start/end pairs at every order, so no exponent exists
    MarkovSystem cyc = make_markov_system({{0.0, 1.0}, {1.0, 0.0}});
    FactorSystem stuck(cyc.phi, testfix::collapse2());
    CHECK_THROWS_AS(stuck.fiber_exponent(8), CapacityError);

    // a factor map over the wrong alphabet is rejected outright
    CHECK_THROWS_AS(FactorSystem(example_chain().phi, testfix::collapse2()),
                    std::invalid_argument);
}
