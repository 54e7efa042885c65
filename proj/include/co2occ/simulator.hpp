// Synthetic CO2 traces from the room mass balance
//
//     dx/dt = -(x - x0) / tau + n(t) * r
//
// integrated exactly over each step with piecewise-constant occupancy and
// ventilation regime, plus additive Gaussian noise on the discrete recursion.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "co2occ/core.hpp"

namespace co2occ {

struct ScheduleStep {
    double duration = 0.0;  ///< minutes
    int occupancy = 0;
    int regime = 0;

    bool operator==(const ScheduleStep&) const = default;
};

struct Schedule {
    std::vector<ScheduleStep> steps;

    double total_minutes() const;
    /// Throws ValidationError if a step has non-positive duration or refers to
    /// an occupancy level / regime the physics config does not have.
    void validate(const PhysicsConfig& physics) const;

    bool operator==(const Schedule&) const = default;
};

/// Simulated series plus the true state of every transition.
/// truth[t] is the (occupancy, regime) driving y_t -> y_{t+1}.
struct LabeledTrace {
    ObservationSeries series;
    std::vector<StateLabel> truth;
    std::size_t clamp_count = 0;  ///< samples clamped at 0 after noise
};

/// Deterministic in `seed`. The number of transitions is
/// floor(total_minutes / dt); the label of step t is the schedule entry active
/// at time t * dt.
LabeledTrace simulate(const PhysicsConfig& physics, const Schedule& schedule, double y0,
                      double noise_sd, std::uint64_t seed);

/// Random occupancy pattern: geometric dwell times with mean `mean_dwell`,
/// +-1 occupancy moves preferred over jumps (weight 0.8), and an independent
/// regime process with mean dwell `regime_mean_dwell`.
Schedule random_schedule(const PhysicsConfig& physics, double total_minutes, double mean_dwell,
                         double regime_mean_dwell, std::uint64_t seed);

/// CSV with header `timestamp_min,co2_ppm,occupancy,regime`, co2_ppm = y + ambient.
/// The last row repeats the final label.
void write_trace_csv(std::ostream& out, const LabeledTrace& trace, double ambient_co2);
void save_trace_csv(const std::string& path, const LabeledTrace& trace, double ambient_co2);

}  // namespace co2occ
