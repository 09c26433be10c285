#include "helpers.hpp"

#include <factorgibbs/schedule.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

using namespace factorgibbs;
using testfix::example_chain;
using testfix::example_system;
using Catch::Approx;

namespace {

ConeSchedule example_schedule(double sigma = 0.5, int j_max = 6, int k_max = 8) {
    MarkovSystem chain = example_chain();
    return build_schedule(chain.phi, AlphaSource::bowen(), sigma, j_max, k_max,
                          /*n_fiber=*/2);
}

} // namespace

TEST_CASE("schedule of the worked chain uses blocks of two") {
    ConeSchedule s = example_schedule();
    const double l4 = std::log(4.0);
    CHECK(s.K == Approx(l4));
    CHECK(s.B == Approx(2 * (2 + l4)));
    REQUIRE(s.n.size() == 7);
    CHECK(s.n[0] == 0);
    for (int j = 1; j <= 6; ++j) CHECK(s.n[static_cast<std::size_t>(j)] == 2);

    // tables: d_{0,k} = 2 var_k, and every later row is 2 log 4, 0, 0, ...
    CHECK(s.d[0][0] == Approx(2 * l4));
    CHECK(s.d[0][1] == Approx(2 * l4));
    CHECK(s.d[0][2] == 0.0);
    for (int j = 1; j <= 6; ++j) {
        CHECK(s.d[static_cast<std::size_t>(j)][0] == Approx(2 * l4));
        CHECK(s.d[static_cast<std::size_t>(j)][1] == 0.0);
    }

    CHECK(verify_recurrence(s) < 1e-13);
    BoundCheck bc = uniform_bound_check(s);
    CHECK(bc.pass);
    CHECK(bc.max_entry == Approx(2 * l4));
    CHECK(bc.bound == Approx(s.B));

    // thresholds 3, 5, 7, ... and their inverse
    CHECK(s.threshold(1) == 3);
    CHECK(s.threshold(3) == 7);
    CHECK(s.coverage(2) == 0);
    CHECK(s.coverage(3) == 1);
    CHECK(s.coverage(10) == 4);
    CHECK_THROWS_AS(s.threshold(0), std::invalid_argument);
    CHECK_THROWS_AS(s.threshold(7), std::invalid_argument);
    CHECK_THROWS_AS(s.certified(1), std::invalid_argument); // constants not attached
}

TEST_CASE("contraction constants of the relabeled chain") {
    ConeSchedule s = example_schedule();
    FactorSystem sys = example_system();
    DiameterConstants dc = attach_diameter_constants(s, sys);

    // hand values: fiber exponent 2, log ||L 1||_inf = log(5/3) from the
    // largest column sum of S, ||phi||_inf = log 6 from the smallest weight
    CHECK(dc.fiber_exponent == 2);
    CHECK(dc.op_log_norm == Approx(std::log(5.0 / 3)));
    CHECK(dc.phi_sup == Approx(std::log(6.0)));
    double want_C = 2 * std::log(5.0 / 3) + 2 * (2 + std::log(4.0)) + 2 * std::log(6.0);
    double want_D = 2 * std::log(3.0) + 2 * want_C;
    CHECK(dc.C == Approx(want_C).margin(1e-12));
    CHECK(dc.C == Approx(11.3777589082278725).margin(1e-10));
    CHECK(dc.D == Approx(want_D).margin(1e-12));
    CHECK(dc.D == Approx(24.9527423937919650).margin(1e-10));
    CHECK(dc.gamma == Approx(std::tanh(want_D / 4)).margin(1e-14));
    CHECK(dc.gamma < 1.0);
    CHECK(s.has_contraction());
    CHECK(s.gamma == dc.gamma);

    // certified bounds decay geometrically from D
    CHECK(s.certified(1) == Approx(dc.D));
    CHECK(s.certified(2) == Approx(dc.gamma * dc.D));
    CHECK(s.certified(2) < s.certified(1));
    CHECK_THROWS_AS(s.certified(0), std::invalid_argument);

    // a schedule whose floor ignores the fiber exponent is rejected
    MarkovSystem chain = example_chain();
    ConeSchedule low = build_schedule(chain.phi, AlphaSource::bowen(), 0.5, 4, 8,
                                      /*n_fiber=*/1);
    CHECK_THROWS_AS(attach_diameter_constants(low, sys), std::invalid_argument);
}

TEST_CASE("holder schedule is the exact stationary closed form") {
    ConeSchedule s = holder_schedule(0.5, 1.0, 0.75, 6, 10);
    CHECK(s.K == Approx(1.0));
    CHECK(s.B == Approx(4.0));
    for (int j = 0; j <= 6; ++j)
        for (int k = 0; k <= 10; ++k)
            CHECK(s.d[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] ==
                  std::pow(2.0, 1 - k)); // (1/2)^{k+1} / (3/4 - 1/2), exactly
    CHECK(verify_recurrence(s) <= 1e-15);
    CHECK(uniform_bound_check(s).pass);
    for (int j = 1; j <= 6; ++j) CHECK(s.n[static_cast<std::size_t>(j)] == 1);

    CHECK_THROWS_AS(holder_schedule(0.75, 1.0, 0.5, 4, 8), std::invalid_argument);
    CHECK_THROWS_AS(holder_schedule(0.0, 1.0, 0.5, 4, 8), std::invalid_argument);
    CHECK_THROWS_AS(holder_schedule(0.25, 1.0, 0.75, 0, 8), std::invalid_argument);
}

TEST_CASE("built schedule converges to the stationary form for geometric data") {
    // theta = 1/4 < sigma/2, so the row inequalities admit unit blocks and the
    // finite-row tables approach the fixed point like (theta/sigma)^j
    const double theta = 0.25, sigma = 0.75;
    MarkovSystem chain = example_chain(); // carrier only; the source is closed-form
    ConeSchedule built = build_schedule(chain.phi, AlphaSource::holder(theta, 1.0), sigma,
                                        20, 8);
    ConeSchedule fixed = holder_schedule(theta, 1.0, sigma, 20, 8);
    for (int j = 1; j <= 20; ++j) CHECK(built.n[static_cast<std::size_t>(j)] == 1);
    double worst_at_top = 0, worst_mid = 0;
    for (int k = 0; k <= 8; ++k) {
        worst_at_top = std::max(worst_at_top, std::abs(built.d[20][static_cast<std::size_t>(k)] -
                                                       fixed.d[20][static_cast<std::size_t>(k)]));
        worst_mid = std::max(worst_mid, std::abs(built.d[10][static_cast<std::size_t>(k)] -
                                                 fixed.d[10][static_cast<std::size_t>(k)]));
    }
    CHECK(worst_at_top <= 1e-8);
    CHECK(worst_at_top < worst_mid); // the gap shrinks with the row index
    CHECK(verify_recurrence(built) < 1e-13);
}

TEST_CASE("envelope tower schedules stay exact out to deep tables") {
    // two-symbol tower with variations 2, 1, 1/4, ..., 1/49
    std::vector<double> v = {2.0, 1.0};
    for (int k = 2; k <= 7; ++k) v.push_back(1.0 / (k * k));
    Potential tower = saturating_tower(Sft::full_shift(2), v);
    ConeSchedule s = build_schedule(tower, AlphaSource::bowen(), 0.5, 6, 32);

    // the tower attains alpha(m, l) = v_{l+1} + ... + v_{min(l+m, 7)}; chasing
    // the row inequalities by hand with that formula gives these block lengths
    std::vector<int> want_n = {0, 2, 2, 4, 2, 3, 2};
    REQUIRE(s.n.size() == want_n.size());
    for (std::size_t i = 0; i < want_n.size(); ++i) CHECK(s.n[i] == want_n[i]);

    // replay the defining rule independently: every stored block length is the
    // least candidate whose rows all satisfy the (sigma/2)-power inequalities
    auto alpha = [&](int m, int l) {
        double t = 0;
        for (int u = l + 1; u <= std::min(l + m, 7); ++u) t += v[static_cast<std::size_t>(u)];
        return m == 0 ? (l <= 7 ? v[static_cast<std::size_t>(l)] : 0.0) : t;
    };
    for (int j = 1; j <= 6; ++j) {
        int minimal = -1;
        for (int cand = 1; cand <= 16 && minimal < 0; ++cand) {
            bool ok = true;
            int tail = 0;
            for (int i = j - 1; i >= 0 && ok; --i) {
                if (alpha(s.n[static_cast<std::size_t>(i)], tail + cand) >
                    std::pow(0.25, j - i))
                    ok = false;
                tail += s.n[static_cast<std::size_t>(i)];
            }
            if (ok) minimal = cand;
        }
        REQUIRE(s.n[static_cast<std::size_t>(j)] == minimal);
    }

    CHECK(verify_recurrence(s) < 1e-10);
    CHECK(uniform_bound_check(s).pass);

    // the sup-based source on the three-symbol tower also closes its recurrence
    ConeSchedule w = build_schedule(testfix::tower3(), AlphaSource::walters(4), 0.5, 3, 8);
    CHECK(verify_recurrence(w) < 1e-10);
    CHECK(uniform_bound_check(w).pass);
}

TEST_CASE("schedule construction rejects impossible parameters") {
    MarkovSystem chain = example_chain();
    CHECK_THROWS_AS(build_schedule(chain.phi, AlphaSource::bowen(), 0.0, 4, 8),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(chain.phi, AlphaSource::bowen(), 1.0, 4, 8),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(chain.phi, AlphaSource::bowen(), 0.5, 0, 8),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(chain.phi, AlphaSource::holder(1.5, 1.0), 0.5, 4, 8),
                    std::invalid_argument);
    // slow geometric decay cannot satisfy the first row within a small cap
    CHECK_THROWS_AS(build_schedule(chain.phi, AlphaSource::holder(0.9, 1.0), 0.1, 1, 4, 1,
                                   /*n_cap=*/8),
                    CapacityError);
}

TEST_CASE("block products map schedule cones into their contracted successors") {
    FactorSystem sys = example_system();
    ConeSchedule s = example_schedule();
    attach_diameter_constants(s, sys);

    for (int j = 0; j < 2; ++j) {
        // word length n_{j+1} + 1 = 3; any two-letter pattern lifts
        for (Word ybar : {Word{0, 0, 1}, Word{1, 0, 0}, Word{0, 1, 1}}) {
            MappingCheck mc = cone_mapping_check(sys, s, j, ybar, 50,
                                                 1000 + static_cast<std::uint64_t>(j));
            CHECK(mc.samples == 50);
            CHECK(mc.violations == 0);
        }
    }
    CHECK_THROWS_AS(cone_mapping_check(sys, s, 6, {0, 0, 1}, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(cone_mapping_check(sys, s, 0, {0, 1}, 10, 1), std::invalid_argument);
}

TEST_CASE("measured contraction stays under the certified factor") {
    FactorSystem sys = example_system();
    ConeSchedule s = example_schedule();

    // constants must be attached before the check runs
    CHECK_THROWS_AS(empirical_contraction(sys, s, {0, 0, 1, 0, 0}, 0, 2, 5, 1),
                    std::invalid_argument);
    attach_diameter_constants(s, sys);

    ContractionCheck cc = empirical_contraction(sys, s, {0, 0, 1, 0, 0}, 0, 2, 20, 11);
    CHECK(cc.samples == 20);
    CHECK(cc.violations == 0);
    CHECK(cc.gamma_pow == Approx(s.gamma * s.gamma));
    CHECK(cc.max_ratio <= cc.gamma_pow + 1e-9);
    CHECK(cc.max_theta_out <= cc.gamma_pow * cc.max_theta_in + 1e-9);

    CHECK_THROWS_AS(empirical_contraction(sys, s, {0, 0, 1, 0}, 0, 2, 5, 1),
                    std::invalid_argument); // wrong word length
    CHECK_THROWS_AS(empirical_contraction(sys, s, {0, 0, 1}, 5, 2, 5, 1),
                    std::invalid_argument); // j + k beyond the schedule
}
