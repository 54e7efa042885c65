#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "co2occ/evalio.hpp"
#include "co2occ/simulator.hpp"
#include "oracles.hpp"

using namespace co2occ;

namespace {

LoadedTrace parse(const std::string& text, double ambient = 400.0) {
    std::istringstream in(text);
    return read_series(in, ambient, "trace.csv");
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

DecodedPath occupancy_only(const std::vector<int>& occ) {
    DecodedPath p;
    for (int o : occ) {
        p.states.push_back(static_cast<std::size_t>(o));
        p.occupancy.push_back(o);
        p.regime.push_back(0);
    }
    return p;
}

std::vector<int> occupancies(const std::vector<StateLabel>& labels) {
    std::vector<int> out;
    for (const auto& l : labels) out.push_back(l.occupancy);
    return out;
}

}  // namespace

// =============================================================================
// Trace ingestion
// =============================================================================

TEST(ReadSeries, WellFormedThreeRows) {
    const LoadedTrace t = parse("timestamp_min,co2_ppm\n0,450\n1,460\n2,470\n");
    EXPECT_EQ(t.series.size(), 3u);
    EXPECT_FALSE(t.truth.has_value());
    EXPECT_EQ(t.series.dt(), 1.0);
}

TEST(ReadSeries, SubtractsAmbient) {
    const LoadedTrace t = parse("timestamp_min,co2_ppm\n0,650\n1,640\n");
    EXPECT_EQ(t.series[0], 250.0);
}

TEST(ReadSeries, ClampsBelowAmbient) {
    const LoadedTrace t = parse("timestamp_min,co2_ppm\n0,390\n1,410\n2,380\n");
    EXPECT_EQ(t.clamped, 2u);
    EXPECT_EQ(t.series[0], 0.0);
    EXPECT_EQ(t.series[1], 10.0);
}

TEST(ReadSeries, LabelsDropLastRow) {
    const LoadedTrace t =
        parse("timestamp_min,co2_ppm,occupancy,regime\n0,400,1,0\n1,405,2,1\n2,410,2,1\n");
    ASSERT_TRUE(t.truth.has_value());
    ASSERT_EQ(t.truth->size(), 2u);
    EXPECT_EQ((*t.truth)[1], (StateLabel{2, 1}));
}

TEST(ReadSeries, DuplicateTimestampNamesLine) {
    const std::string msg = error_of("timestamp_min,co2_ppm\n0,450\n1,460\n1,470\n");
    EXPECT_NE(msg.find("trace.csv:4"), std::string::npos) << msg;
}

TEST(ReadSeries, MalformedInputIsRejected) {
    EXPECT_NE(error_of("time,co2\n0,1\n1,2\n").find("trace.csv:1"), std::string::npos);
    EXPECT_NE(error_of("timestamp_min,co2_ppm\n0,450\n1\n").find("trace.csv:3"), std::string::npos);
    EXPECT_NE(error_of("timestamp_min,co2_ppm\n0,450\n1,abc\n").find("trace.csv:3"),
              std::string::npos);
    EXPECT_NE(error_of("timestamp_min,co2_ppm\n0,450\n1,460\n3,470\n").find("trace.csv:4"),
              std::string::npos);
    EXPECT_NE(error_of("timestamp_min,co2_ppm\n2,450\n1,460\n").find("trace.csv:3"),
              std::string::npos);
    EXPECT_NE(error_of("timestamp_min,co2_ppm,occupancy\n0,450,-1\n1,460,0\n").find("trace.csv:2"),
              std::string::npos);
    EXPECT_FALSE(error_of("timestamp_min,co2_ppm\n0,450\n").empty());
    EXPECT_FALSE(error_of("").empty());
}

TEST(ReadSeries, ToleratesSmallJitterAndRegularizes) {
    const LoadedTrace t = parse("timestamp_min,co2_ppm\n0,450\n1.004,460\n2,470\n");
    EXPECT_DOUBLE_EQ(t.series.dt(), 1.0);
}

TEST(ReadSeries, MissingFileIsIoError) {
    EXPECT_THROW(load_series("/nonexistent/trace.csv", 400.0), IoError);
}

TEST(ReadSeries, SimulatedTraceRoundTrips) {
    PhysicsConfig p;
    p.regimes = {70.0, 100.0};
    const auto trace = simulate(p, random_schedule(p, 300.0, 30.0, 100.0, 2), 5.0, 2.0, 2);
    std::stringstream buf;
    write_trace_csv(buf, trace, p.ambient_co2);
    const LoadedTrace back = read_series(buf, p.ambient_co2);
    ASSERT_EQ(back.series.size(), trace.series.size());
    for (std::size_t t = 0; t < trace.series.size(); ++t) {
        EXPECT_NEAR(back.series[t], trace.series[t], 1e-9);
    }
    EXPECT_EQ(back.truth, trace.truth);
}

TEST(DecodedCsv, RoundTrips) {
    const auto series = ObservationSeries::uniform(1.0, {1.0, 2.0, 3.0, 4.0}, 10.0);
    const StateSpace space(2, 2);
    const DecodedPath path = make_path(space, {0, 3, 5});
    const auto file = std::filesystem::temp_directory_path() / "co2occ_decoded_roundtrip.csv";
    save_decoded_csv(file.string(), path, series, {0.5, 0.75, 1.0});
    const auto rows = load_decoded_csv(file.string());
    std::filesystem::remove(file);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1].timestamp, 11.0);
    EXPECT_EQ(rows[1].state, 3u);
    EXPECT_EQ(rows[1].occupancy, 1);
    EXPECT_EQ(rows[1].regime, 1);
    EXPECT_EQ(rows[1].posterior_max, 0.75);
}

// =============================================================================
// Metrics
// =============================================================================

TEST(Score, PerfectPath) {
    const auto truth = oracle::labels_from_runs({{10, 0, 0}, {5, 2, 0}, {7, 1, 0}});
    const MetricsReport r = score(occupancy_only(occupancies(truth)), truth, 2);
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.mean_detection_delay, 0.0);
    EXPECT_EQ(r.change_points, 2u);
    EXPECT_EQ(r.confusion[2][2], 5);
}

TEST(Score, TwoStepLagEverywhere) {
    std::vector<oracle::Run> runs;
    const std::size_t len = 1440 / 11;
    for (int k = 0; k < 11; ++k) runs.push_back({k < 10 ? len : 1440 - 10 * len, k % 3, 0});
    const auto truth = oracle::labels_from_runs(runs);
    ASSERT_EQ(truth.size(), 1440u);
    std::vector<int> pred = occupancies(truth);
    for (std::size_t t = pred.size() - 1; t >= 2; --t) pred[t] = pred[t - 2];
    const MetricsReport r = score(occupancy_only(pred), truth, 2);
    EXPECT_EQ(r.change_points, 10u);
    EXPECT_DOUBLE_EQ(r.mean_detection_delay, 2.0);
    EXPECT_DOUBLE_EQ(r.accuracy, 1.0 - 20.0 / 1440.0);
}

TEST(Score, AllZerosAgainstHalfOccupied) {
    const auto truth = oracle::labels_from_runs({{50, 0, 0}, {50, 3, 0}});
    const MetricsReport r = score(occupancy_only(std::vector<int>(100, 0)), truth, 4);
    EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
    // never detected: capped at the end of the trace
    EXPECT_DOUBLE_EQ(r.mean_detection_delay, 50.0);
}

TEST(Score, DelayScalesWithSamplingInterval) {
    const auto truth = oracle::labels_from_runs({{10, 0, 0}, {10, 1, 0}});
    std::vector<int> pred = occupancies(truth);
    pred[10] = pred[11] = pred[12] = 0;
    EXPECT_DOUBLE_EQ(score(occupancy_only(pred), truth, 1, 5.0).mean_detection_delay, 15.0);
}

TEST(Score, RegimeAccuracy) {
    const auto truth = oracle::labels_from_runs({{4, 1, 0}, {4, 1, 1}});
    DecodedPath p = occupancy_only(std::vector<int>(8, 1));
    EXPECT_FALSE(score(p, truth, 1).regime_accuracy.has_value());
    EXPECT_DOUBLE_EQ(*score(p, truth, 1, 1.0, true).regime_accuracy, 0.5);
}

TEST(Score, RejectsInconsistentInput) {
    const auto truth = oracle::labels_from_runs({{4, 1, 0}});
    EXPECT_THROW(score(occupancy_only({1, 1, 1}), truth, 1), ValidationError);
    EXPECT_THROW(score(occupancy_only({1, 1, 1, 5}), truth, 1), ValidationError);
}

TEST(Score, JsonCarriesEveryField) {
    const auto truth = oracle::labels_from_runs({{3, 0, 0}, {3, 1, 0}});
    const auto j = nlohmann::json::parse(metrics_to_json(score(occupancy_only({0, 0, 0, 0, 1, 1}), truth, 1)));
    EXPECT_NEAR(j["accuracy"].get<double>(), 5.0 / 6.0, 1e-15);
    EXPECT_EQ(j["confusion"][1][0].get<long>(), 1);
    EXPECT_EQ(j["change_points"].get<int>(), 1);
    EXPECT_TRUE(j["regime_accuracy"].is_null());
}

TEST(Spearman, KnownValues) {
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
    // ties take average ranks: x ranks 1,2,3.5,3.5; y ranks 1,2,3,4
    const double r = spearman({1, 2, 5, 5}, {1, 2, 3, 4});
    EXPECT_NEAR(r, 4.5 / std::sqrt(4.5 * 5.0), 1e-12);
    EXPECT_THROW(spearman({1.0}, {1.0}), ValidationError);
}
