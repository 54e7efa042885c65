#include "co2occ/simulator.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <random>

#include "co2occ/keyvalue.hpp"

namespace co2occ {

double Schedule::total_minutes() const {
    double total = 0.0;
    for (const auto& s : steps) total += s.duration;
    return total;
}

void Schedule::validate(const PhysicsConfig& physics) const {
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& s = steps[i];
        const std::string where = "schedule step " + std::to_string(i);
        if (!(s.duration > 0.0) || !std::isfinite(s.duration)) {
            throw ValidationError(where + ": duration must be > 0");
        }
        if (s.occupancy < 0 || s.occupancy > physics.max_occupancy) {
            throw ValidationError(where + ": occupancy " + std::to_string(s.occupancy) +
                                  " outside [0, " + std::to_string(physics.max_occupancy) + "]");
        }
        if (s.regime < 0 || static_cast<std::size_t>(s.regime) >= physics.num_regimes()) {
            throw ValidationError(where + ": unknown regime " + std::to_string(s.regime));
        }
    }
}

LabeledTrace simulate(const PhysicsConfig& physics, const Schedule& schedule, double y0,
                      double noise_sd, std::uint64_t seed) {
    physics.validate();
    schedule.validate(physics);
    if (!(y0 >= 0.0) || !std::isfinite(y0)) throw ValidationError("simulate: y0 must be >= 0");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
        throw ValidationError("simulate: noise_sd must be >= 0");
    }

    const double total = schedule.total_minutes();
    const auto steps = static_cast<std::size_t>(std::floor(total / physics.dt + 1e-9));
    if (steps < 1) throw ValidationError("simulate: schedule shorter than one time step");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sd > 0.0 ? noise_sd : 1.0);

    std::vector<double> y(steps + 1);
    std::vector<StateLabel> truth(steps);
    y[0] = y0;

    std::size_t seg = 0;
    double seg_end = schedule.steps.front().duration;
    std::size_t clamps = 0;
    for (std::size_t t = 0; t < steps; ++t) {
        const double now = static_cast<double>(t) * physics.dt;
        while (now >= seg_end - 1e-9 * physics.dt && seg + 1 < schedule.steps.size()) {
            ++seg;
            seg_end += schedule.steps[seg].duration;
        }
        const ScheduleStep& s = schedule.steps[seg];
        truth[t] = {s.occupancy, s.regime};

        const auto k = static_cast<std::size_t>(s.regime);
        double next = physics.decay(k) * y[t] + physics.drift(s.occupancy, k);
        if (noise_sd > 0.0) next += noise(rng);
        if (next < 0.0) {
            next = 0.0;
            ++clamps;
        }
        y[t + 1] = next;
    }

    return LabeledTrace{ObservationSeries::uniform(physics.dt, std::move(y)), std::move(truth),
                        clamps};
}

namespace {

int next_occupancy(int current, int max_occupancy, std::mt19937_64& rng) {
    if (max_occupancy == 0) return 0;

    std::vector<int> adjacent;
    std::vector<int> jumps;
    for (int n = 0; n <= max_occupancy; ++n) {
        const int d = std::abs(n - current);
        if (d == 1) adjacent.push_back(n);
        if (d >= 2) jumps.push_back(n);
    }
    std::bernoulli_distribution prefer_adjacent(0.8);
    const auto& pool = (jumps.empty() || prefer_adjacent(rng)) ? adjacent : jumps;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return pool[pick(rng)];
}

long dwell_steps(double mean_dwell, double dt, std::mt19937_64& rng) {
    const double p = std::min(1.0, dt / mean_dwell);
    std::geometric_distribution<long> failures(p);
    return 1 + failures(rng);
}

}  // namespace

Schedule random_schedule(const PhysicsConfig& physics, double total_minutes, double mean_dwell,
                         double regime_mean_dwell, std::uint64_t seed) {
    physics.validate();
    if (!(mean_dwell > 0.0)) throw ValidationError("random_schedule: mean_dwell must be > 0");
    if (!(total_minutes >= mean_dwell)) {
        throw ValidationError("random_schedule: total_minutes must be >= mean_dwell");
    }
    const bool switching = physics.num_regimes() > 1;
    if (!(regime_mean_dwell > 0.0)) {
        throw ValidationError("random_schedule: regime_mean_dwell must be > 0");
    }

    std::mt19937_64 rng(seed);
    const long total_steps = static_cast<long>(std::floor(total_minutes / physics.dt + 1e-9));

    std::uniform_int_distribution<int> first_level(0, physics.max_occupancy);
    std::uniform_int_distribution<int> first_regime(0,
                                                    static_cast<int>(physics.num_regimes()) - 1);
    int occupancy = first_level(rng);
    int regime = first_regime(rng);
    long occ_left = dwell_steps(mean_dwell, physics.dt, rng);
    long reg_left = switching ? dwell_steps(regime_mean_dwell, physics.dt, rng) : total_steps;

    Schedule schedule;
    long remaining = total_steps;
    while (remaining > 0) {
        const long len = std::min({occ_left, reg_left, remaining});
        const double duration = static_cast<double>(len) * physics.dt;
        if (!schedule.steps.empty() && schedule.steps.back().occupancy == occupancy &&
            schedule.steps.back().regime == regime) {
            schedule.steps.back().duration += duration;
        } else {
            schedule.steps.push_back({duration, occupancy, regime});
        }
        remaining -= len;
        occ_left -= len;
        reg_left -= len;
        if (occ_left == 0) {
            occupancy = next_occupancy(occupancy, physics.max_occupancy, rng);
            occ_left = dwell_steps(mean_dwell, physics.dt, rng);
        }
        if (reg_left == 0) {
            std::uniform_int_distribution<int> other(0,
                                                     static_cast<int>(physics.num_regimes()) - 2);
            const int r = other(rng);
            regime = r >= regime ? r + 1 : r;
            reg_left = dwell_steps(regime_mean_dwell, physics.dt, rng);
        }
    }
    return schedule;
}

void write_trace_csv(std::ostream& out, const LabeledTrace& trace, double ambient_co2) {
    out << "timestamp_min,co2_ppm,occupancy,regime\n";
    const auto ts = trace.series.timestamps();
    const auto y = trace.series.y();
    for (std::size_t t = 0; t < y.size(); ++t) {
        const StateLabel& label = trace.truth[std::min(t, trace.truth.size() - 1)];
        out << format_double(ts[t]) << ',' << format_double(y[t] + ambient_co2) << ','
            << label.occupancy << ',' << label.regime << '\n';
    }
}

void save_trace_csv(const std::string& path, const LabeledTrace& trace, double ambient_co2) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    write_trace_csv(out, trace, ambient_co2);
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace co2occ
