#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "co2occ/evalio.hpp"
#include "co2occ/experiment.hpp"
#include "co2occ/model_io.hpp"

namespace fs = std::filesystem;
using namespace co2occ;

namespace {

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("co2occ_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    int run(const std::vector<std::string>& args) {
        out_.str("");
        log_.str("");
        return cli::run(args, out_, log_);
    }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream(path(name)) << text;
    }

    static std::string slurp(const std::string& file) {
        std::ifstream in(file);
        return {std::istreambuf_iterator<char>(in), {}};
    }

    fs::path dir_;
    std::ostringstream out_;
    std::ostringstream log_;
};

}  // namespace

TEST_F(CliTest, SimulateMinimalConfig) {
    write("min.cfg", "[simulation]\ntotal_minutes = 60\nmean_dwell = 10\n");
    ASSERT_EQ(run({"simulate", "--config", path("min.cfg"), "--out", path("t.csv")}), cli::kOk)
        << log_.str();
    std::ifstream in(path("t.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "timestamp_min,co2_ppm,occupancy,regime");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3);
    }
    EXPECT_GE(rows, 2);
    EXPECT_TRUE(fs::exists(path("t.csv.config")));
}

TEST_F(CliTest, SimulateSameSeedIdenticalFiles) {
    ASSERT_EQ(run({"simulate", "--out", path("a.csv"), "--seed", "5"}), cli::kOk);
    ASSERT_EQ(run({"simulate", "--out", path("b.csv"), "--seed", "5"}), cli::kOk);
    ASSERT_EQ(run({"simulate", "--out", path("c.csv"), "--seed", "6"}), cli::kOk);
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
    EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(CliTest, NonPositiveTauIsValidationError) {
    write("bad.cfg", "[physics]\nregimes = 70, -1\n");
    EXPECT_EQ(run({"simulate", "--config", path("bad.cfg"), "--out", path("t.csv")}),
              cli::kValidation);
    EXPECT_NE(log_.str().find("physics.regimes"), std::string::npos) << log_.str();
}

TEST_F(CliTest, MissingInputIsIoError) {
    EXPECT_EQ(run({"fit", "--trace", path("none.csv"), "--out", path("m.txt")}), cli::kIo);
    EXPECT_EQ(run({"simulate", "--config", path("none.cfg"), "--out", path("t.csv")}), cli::kIo);
}

TEST_F(CliTest, BadUsageIsValidationError) {
    EXPECT_EQ(run({}), cli::kValidation);
    EXPECT_EQ(run({"fit", "--trace", path("t.csv")}), cli::kValidation);
    EXPECT_EQ(run({"frobnicate"}), cli::kValidation);
}

TEST_F(CliTest, FitConvergesAndRefitIsFixedPoint) {
    ASSERT_EQ(run({"simulate", "--out", path("t.csv"), "--seed", "3"}), cli::kOk);
    ASSERT_EQ(run({"fit", "--trace", path("t.csv"), "--out", path("m.txt"), "--json-report",
                   path("r.json"), "--loglik", path("ll.csv"), "--report", path("r.txt")}),
              cli::kOk)
        << log_.str();
    EXPECT_NE(log_.str().find("converged"), std::string::npos);
    EXPECT_NE(slurp(path("r.json")).find("\"converged\": true"), std::string::npos);
    EXPECT_EQ(slurp(path("ll.csv")).rfind("iteration,loglik\n", 0), 0u);

    ASSERT_EQ(run({"fit", "--trace", path("t.csv"), "--init", path("m.txt"), "--out",
                   path("m2.txt"), "--json-report", path("r2.json")}),
              cli::kOk)
        << log_.str();
    EXPECT_NE(slurp(path("r2.json")).find("\"iterations\": 1,"), std::string::npos)
        << slurp(path("r2.json"));
}

TEST_F(CliTest, DecodeWithTrueModelOnNoiseFreeTrace) {
    write("nf.cfg", "[simulation]\nnoise_sd = 0\ny0 = 30\n");
    ASSERT_EQ(run({"simulate", "--config", path("nf.cfg"), "--out", path("t.csv")}), cli::kOk);
    const ExperimentConfig cfg = ExperimentConfig::load(path("nf.cfg"));
    save_model(path("true.txt"),
               init_from_physics(cfg.physics, build_state_space(cfg.physics), 0.5));
    ASSERT_EQ(run({"decode", "--model", path("true.txt"), "--trace", path("t.csv"), "--out",
                   path("d.csv")}),
              cli::kOk)
        << log_.str();
    ASSERT_EQ(run({"score", "--decoded", path("d.csv"), "--trace", path("t.csv"), "--json-report",
                   path("s.json")}),
              cli::kOk)
        << log_.str();
    const auto rows = load_decoded_csv(path("d.csv"));
    const LoadedTrace trace = load_series(path("t.csv"), cfg.physics.ambient_co2);
    DecodedPath p;
    for (const auto& r : rows) {
        p.states.push_back(r.state);
        p.occupancy.push_back(r.occupancy);
        p.regime.push_back(r.regime);
        EXPECT_GT(r.posterior_max, 0.0);
        EXPECT_LE(r.posterior_max, 1.0 + 1e-12);
    }
    const MetricsReport m = score(p, *trace.truth, 4, 1.0, true);
    EXPECT_GE(m.accuracy, 0.95);
    // the CLI's score output agrees with scoring in process
    EXPECT_EQ(slurp(path("s.json")), metrics_to_json(m) + "\n");
}

TEST_F(CliTest, DecodeRejectsLabelsOutsideModel) {
    ASSERT_EQ(run({"simulate", "--out", path("t.csv"), "--seed", "1"}), cli::kOk);
    PhysicsConfig small;
    small.max_occupancy = 1;
    small.regimes = {70.0};
    save_model(path("small.txt"), init_from_physics(small, build_state_space(small), 2.0));
    EXPECT_EQ(run({"decode", "--model", path("small.txt"), "--trace", path("t.csv"), "--out",
                   path("d.csv")}),
              cli::kValidation);
    EXPECT_NE(log_.str().find("state space"), std::string::npos) << log_.str();
}

TEST_F(CliTest, SweepTables) {
    ASSERT_EQ(run({"sweep", "--out", path("s.csv"), "--trials", "1"}), cli::kOk) << log_.str();
    std::istringstream in(slurp(path("s.csv")));
    std::string line;
    int rows = -1;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 7);

    write("one.cfg", "[sweep]\ntaus = 40\ntrials = 1\n");
    ASSERT_EQ(run({"sweep", "--config", path("one.cfg"), "--out", path("a.csv")}), cli::kOk);
    ASSERT_EQ(run({"sweep", "--config", path("one.cfg"), "--out", path("b.csv")}), cli::kOk);
    const std::string a = slurp(path("a.csv"));
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 2);
    EXPECT_EQ(a, slurp(path("b.csv")));
}
