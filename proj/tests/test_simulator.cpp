#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "co2occ/estimation.hpp"
#include "co2occ/simulator.hpp"

using namespace co2occ;

namespace {

PhysicsConfig room(std::vector<double> taus = {100.0}, int max_occ = 4) {
    PhysicsConfig p;
    p.regimes = std::move(taus);
    p.max_occupancy = max_occ;
    return p;
}

}  // namespace

TEST(Simulate, PureDecay) {
    const auto trace = simulate(room(), Schedule{{{200.0, 0, 0}}}, 100.0, 0.0, 1);
    ASSERT_EQ(trace.series.size(), 201u);
    for (std::size_t t = 0; t <= 200; ++t) {
        EXPECT_NEAR(trace.series[t], 100.0 * std::exp(-static_cast<double>(t) / 100.0), 1e-9);
    }
    EXPECT_EQ(trace.clamp_count, 0u);
}

TEST(Simulate, ConstantOccupancyReachesFixedPoint) {
    const PhysicsConfig p = room({70.0});
    const auto trace = simulate(p, Schedule{{{5 * 70.0, 2, 0}}}, 0.0, 0.0, 1);
    const double y_inf = 70.0 * p.person_rate * 2.0;
    EXPECT_NEAR(trace.series.y().back(), y_inf, 0.01 * y_inf);
    // y approaches from below and never overshoots
    for (double v : trace.series.y()) EXPECT_LE(v, y_inf + 1e-9);
}

TEST(Simulate, LabelsFollowSchedule) {
    const Schedule s{{{3.0, 1, 0}, {2.0, 3, 1}}};
    const auto trace = simulate(room({70.0, 100.0}), s, 0.0, 0.0, 1);
    ASSERT_EQ(trace.truth.size(), 5u);
    EXPECT_EQ(trace.truth[2], (StateLabel{1, 0}));
    EXPECT_EQ(trace.truth[3], (StateLabel{3, 1}));
}

TEST(Simulate, NoiseFreeTraceIsNonNegative) {
    const PhysicsConfig p = room({70.0, 100.0});
    const Schedule s = random_schedule(p, 1440.0, 30.0, 180.0, 9);
    const auto trace = simulate(p, s, 0.0, 0.0, 9);
    for (double v : trace.series.y()) EXPECT_GE(v, 0.0);
    EXPECT_EQ(trace.clamp_count, 0u);
}

TEST(Simulate, NoisyTraceClampsAtZero) {
    const auto trace = simulate(room(), Schedule{{{500.0, 0, 0}}}, 0.0, 5.0, 4);
    EXPECT_GT(trace.clamp_count, 0u);
    for (double v : trace.series.y()) EXPECT_GE(v, 0.0);
}

TEST(Simulate, DeterministicInSeed) {
    const PhysicsConfig p = room({70.0, 100.0});
    const Schedule s = random_schedule(p, 600.0, 30.0, 180.0, 5);
    const auto a = simulate(p, s, 10.0, 2.0, 42);
    const auto b = simulate(p, s, 10.0, 2.0, 42);
    const auto c = simulate(p, s, 10.0, 2.0, 43);
    EXPECT_TRUE(std::equal(a.series.y().begin(), a.series.y().end(), b.series.y().begin()));
    EXPECT_FALSE(std::equal(a.series.y().begin(), a.series.y().end(), c.series.y().begin()));
}

TEST(Simulate, NoiseFreeSegmentRecoversCoefficients) {
    const PhysicsConfig p = room({70.0});
    const auto trace = simulate(p, Schedule{{{120.0, 3, 0}}}, 40.0, 0.0, 1);
    const ArCoefficients est = estimate_ar_single(trace.series.y());
    EXPECT_NEAR(est.c, p.decay(0), 1e-10);
    EXPECT_NEAR(est.mu, p.drift(3, 0), 1e-10);
}

TEST(Simulate, RejectsBadInput) {
    EXPECT_THROW(simulate(room(), Schedule{{{10.0, 5, 0}}}, 0.0, 0.0, 1), ValidationError);
    EXPECT_THROW(simulate(room(), Schedule{{{10.0, 1, 1}}}, 0.0, 0.0, 1), ValidationError);
    EXPECT_THROW(simulate(room(), Schedule{{{0.0, 1, 0}}}, 0.0, 0.0, 1), ValidationError);
    EXPECT_THROW(simulate(room(), Schedule{{{10.0, 1, 0}}}, -1.0, 0.0, 1), ValidationError);
    EXPECT_THROW(simulate(room(), Schedule{{{10.0, 1, 0}}}, 0.0, -1.0, 1), ValidationError);
}

TEST(RandomSchedule, CoversRequestedDuration) {
    const Schedule s = random_schedule(room({70.0, 100.0}), 1440.0, 30.0, 180.0, 3);
    EXPECT_NEAR(s.total_minutes(), 1440.0, 1e-9);
    EXPECT_NO_THROW(s.validate(room({70.0, 100.0})));
}

TEST(RandomSchedule, SegmentCountNearExpectation) {
    // Geometric dwell with mean 30 over 1440 minutes: about 48 occupancy
    // segments. Regime switches add a few more boundaries; merged identical
    // neighbours remove some. Averaged over seeds the count sits near 48.
    const PhysicsConfig p = room();
    double total = 0.0;
    const int seeds = 200;
    for (int s = 0; s < seeds; ++s) {
        total += static_cast<double>(random_schedule(p, 1440.0, 30.0, 1e9, s).steps.size());
    }
    EXPECT_NEAR(total / seeds, 48.0, 4.0);
}

TEST(RandomSchedule, EmptyRoomOnlyHasZeroOccupancy) {
    const Schedule s = random_schedule(room({100.0}, 0), 1440.0, 30.0, 180.0, 8);
    for (const auto& step : s.steps) EXPECT_EQ(step.occupancy, 0);
}

TEST(RandomSchedule, DeterministicInSeed) {
    const PhysicsConfig p = room({70.0, 100.0});
    EXPECT_EQ(random_schedule(p, 1440.0, 30.0, 180.0, 77), random_schedule(p, 1440.0, 30.0, 180.0, 77));
}

TEST(RandomSchedule, PrefersSingleStepMoves) {
    const PhysicsConfig p = room();
    int unit = 0;
    int total = 0;
    for (int seed = 0; seed < 50; ++seed) {
        const Schedule s = random_schedule(p, 1440.0, 30.0, 1e9, seed);
        for (std::size_t i = 1; i < s.steps.size(); ++i) {
            const int d = std::abs(s.steps[i].occupancy - s.steps[i - 1].occupancy);
            if (d == 0) continue;
            ++total;
            unit += d == 1;
        }
    }
    ASSERT_GT(total, 0);
    EXPECT_GT(static_cast<double>(unit) / total, 0.75);
}

TEST(RandomSchedule, RegimesSwitchEveryFewHours) {
    const PhysicsConfig p = room({70.0, 100.0});
    int switches = 0;
    for (int seed = 0; seed < 50; ++seed) {
        const Schedule s = random_schedule(p, 1440.0, 30.0, 180.0, seed);
        for (std::size_t i = 1; i < s.steps.size(); ++i) {
            switches += s.steps[i].regime != s.steps[i - 1].regime;
        }
    }
    // about 1440/180 = 8 per day
    EXPECT_NEAR(switches / 50.0, 8.0, 2.5);
}

TEST(RandomSchedule, RejectsBadArguments) {
    EXPECT_THROW(random_schedule(room(), 10.0, 30.0, 180.0, 1), ValidationError);
    EXPECT_THROW(random_schedule(room(), 100.0, 0.0, 180.0, 1), ValidationError);
    EXPECT_THROW(random_schedule(room(), 100.0, 10.0, 0.0, 1), ValidationError);
}

TEST(TraceCsv, HeaderAndRows) {
    const auto trace = simulate(room(), Schedule{{{3.0, 1, 0}}}, 0.0, 0.0, 1);
    std::ostringstream os;
    write_trace_csv(os, trace, 400.0);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "timestamp_min,co2_ppm,occupancy,regime");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 4);
}
