#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "co2occ/baseline.hpp"
#include "co2occ/evalio.hpp"
#include "co2occ/experiment.hpp"
#include "co2occ/simulator.hpp"
#include "oracles.hpp"

using namespace co2occ;

namespace {

SimpleHmm random_simple_hmm(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> um(0.0, 10.0);
    std::uniform_real_distribution<double> us(0.5, 3.0);
    SimpleHmm m;
    for (std::size_t i = 0; i < n; ++i) {
        m.mean.push_back(um(rng));
        m.sd.push_back(us(rng));
    }
    m.trans = oracle::random_stochastic(n, n, rng);
    m.init = oracle::random_distribution(n, rng);
    return m;
}

Matrix ref_simple_table(const SimpleHmm& m, const ObservationSeries& s) {
    Matrix out(s.steps(), m.num_states());
    for (std::size_t t = 0; t < s.steps(); ++t) {
        for (std::size_t i = 0; i < m.num_states(); ++i) {
            out(t, i) = oracle::ref_log_normal(s[t + 1], m.mean[i], m.sd[i]);
        }
    }
    return out;
}

}  // namespace

TEST(SimpleHmm, RecoversTwoSeparatedClusters) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> noise(0.0, 3.0);
    std::vector<double> y;
    for (int block = 0; block < 20; ++block) {
        const double level = block % 2 == 0 ? 100.0 : 300.0;
        for (int t = 0; t < 50; ++t) y.push_back(level + noise(rng));
    }
    const SimpleHmmFit fit = fit_simple_hmm(ObservationSeries::uniform(1.0, y), 2);
    ASSERT_EQ(fit.model.num_states(), 2u);
    EXPECT_NEAR(fit.model.mean[0], 100.0, 5.0);
    EXPECT_NEAR(fit.model.mean[1], 300.0, 15.0);
    EXPECT_TRUE(fit.converged);
}

TEST(SimpleHmm, SingleStateIsSampleMoments) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(40.0, 5.0);
    std::vector<double> y(200);
    for (double& v : y) v = noise(rng);
    const SimpleHmmFit fit = fit_simple_hmm(ObservationSeries::uniform(1.0, y), 1);
    // emissions cover y_1..y_T
    const double n = static_cast<double>(y.size() - 1);
    const double mean = std::accumulate(y.begin() + 1, y.end(), 0.0) / n;
    double var = 0.0;
    for (auto it = y.begin() + 1; it != y.end(); ++it) var += (*it - mean) * (*it - mean);
    EXPECT_NEAR(fit.model.mean[0], mean, 1e-10);
    EXPECT_NEAR(fit.model.sd[0], std::sqrt(var / n), 1e-10);
}

TEST(SimpleHmm, StatesSortedByMean) {
    ExperimentConfig cfg;
    const TrialResult t = run_trial(cfg, 4);
    const auto& mean = t.baseline.model.mean;
    EXPECT_TRUE(std::is_sorted(mean.begin(), mean.end()));
    EXPECT_EQ(decode_simple_hmm(t.baseline.model, t.trace.series).occupancy,
              t.baseline.path.occupancy);
}

TEST(SimpleHmm, LikelihoodTraceIsNonDecreasing) {
    ExperimentConfig cfg;
    for (int seed = 1; seed <= 5; ++seed) {
        const auto& tr = run_trial(cfg, static_cast<std::uint64_t>(seed)).baseline.loglik_trace;
        for (std::size_t k = 1; k < tr.size(); ++k) EXPECT_GE(tr[k], tr[k - 1] - 1e-9);
    }
}

TEST(SimpleHmm, ConstantSeriesAtLowestMeanDecodesToZero) {
    SimpleHmm m{{5.0, 50.0}, {2.0, 2.0}, Matrix(2, 2, 0.5), {0.5, 0.5}};
    const DecodedPath p = decode_simple_hmm(m, ObservationSeries::uniform(1.0, std::vector(20, 5.0)));
    for (int o : p.occupancy) EXPECT_EQ(o, 0);
    for (int r : p.regime) EXPECT_EQ(r, 0);
}

TEST(SimpleHmm, LagsStepChangeUnderSlowVentilation) {
    PhysicsConfig p;
    p.regimes = {100.0};
    p.max_occupancy = 1;
    const auto trace = simulate(p, Schedule{{{400.0, 0, 0}, {400.0, 1, 0}}}, 0.0, 0.0, 1);
    const double steady = 100.0 * p.person_rate;
    Matrix trans(2, 2);
    trans(0, 0) = trans(1, 1) = 0.99;
    trans(0, 1) = trans(1, 0) = 0.01;
    const SimpleHmm m{{0.0, steady}, {50.0, 50.0}, trans, {0.5, 0.5}};
    const DecodedPath path = decode_simple_hmm(m, trace.series);
    const MetricsReport r = score(path, trace.truth, 1);
    EXPECT_EQ(r.change_points, 1u);
    EXPECT_GE(r.mean_detection_delay, 1.0);
}

class SimpleHmmBruteForce : public ::testing::TestWithParam<int> {};

TEST_P(SimpleHmmBruteForce, ViterbiMatchesExhaustiveSearch) {
    std::mt19937_64 rng(500 + static_cast<std::uint64_t>(GetParam()));
    const SimpleHmm m = random_simple_hmm(3, rng);
    const auto s = oracle::random_series(8, rng);
    const auto bf = oracle::brute_force(ref_simple_table(m, s), m.trans, m.init);
    const DecodedPath p = decode_simple_hmm(m, s);
    EXPECT_EQ(p.states, bf.best);
    EXPECT_NEAR(simple_path_loglikelihood(m, s, p), bf.best_logp, 1e-9 * std::abs(bf.best_logp));
}

INSTANTIATE_TEST_SUITE_P(RandomModels, SimpleHmmBruteForce, ::testing::Range(0, 10));

TEST(SimpleHmm, RejectsInvalidModels) {
    SimpleHmm m{{1.0, 2.0}, {1.0}, Matrix(2, 2, 0.5), {0.5, 0.5}};
    EXPECT_THROW(m.validate(), ValidationError);
    m.sd = {1.0, 0.0};
    EXPECT_THROW(m.validate(), ValidationError);
    m.sd = {1.0, 1.0};
    m.init = {0.9, 0.2};
    EXPECT_THROW(m.validate(), ValidationError);
    EXPECT_THROW(fit_simple_hmm(ObservationSeries::uniform(1.0, {1.0, 2.0, 3.0}), 0),
                 ValidationError);
}

TEST(SimpleHmm, SyntheticDayAccuracyBand) {
    // Same synthetic setting as the switching-model comparison.
    ExperimentConfig cfg;
    double total = 0.0;
    const int seeds = 10;
    for (int seed = 1; seed <= seeds; ++seed) {
        total += run_trial(cfg, static_cast<std::uint64_t>(seed)).hmm.accuracy;
    }
    const double mean = total / seeds;
    EXPECT_LE(mean, 0.80);
    EXPECT_GE(mean, 0.55);
}
