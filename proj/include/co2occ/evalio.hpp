// CSV ingestion/export and accuracy metrics.
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "co2occ/core.hpp"
#include "co2occ/estimation.hpp"

namespace co2occ {

// =============================================================================
// Input traces
// =============================================================================

/// A trace read from CSV. `truth` is present when the file carries an
/// occupancy column; row t labels the transition y_t -> y_{t+1}, so the last
/// row's label is dropped.
struct LoadedTrace {
    ObservationSeries series;
    std::optional<std::vector<StateLabel>> truth;
    std::size_t clamped = 0;  ///< readings below ambient, clamped to y = 0
};

/// Parses `timestamp_min,co2_ppm[,occupancy[,regime]]`. y = co2_ppm - ambient.
/// Throws ValidationError naming the line on malformed rows, duplicated or
/// decreasing timestamps, or spacing that deviates more than 1% from the first
/// interval; IoError if the file cannot be opened.
LoadedTrace read_series(std::istream& in, double ambient, const std::string& source = "<input>");
LoadedTrace load_series(const std::string& path, double ambient);

// =============================================================================
// Decoded paths
// =============================================================================

struct DecodedRow {
    double timestamp = 0.0;
    std::size_t state = 0;
    int occupancy = 0;
    int regime = 0;
    double posterior_max = 0.0;
};

/// CSV `timestamp_min,state,occupancy,regime,posterior_max`. Row t carries the
/// timestamp of y_t, the start of the transition it explains. `posterior_max`
/// may be empty, in which case 1 is written for every row.
void write_decoded_csv(std::ostream& out, const DecodedPath& path,
                       const ObservationSeries& series,
                       const std::vector<double>& posterior_max = {});
void save_decoded_csv(const std::string& path, const DecodedPath& decoded,
                      const ObservationSeries& series,
                      const std::vector<double>& posterior_max = {});
std::vector<DecodedRow> load_decoded_csv(const std::string& path);

// =============================================================================
// Metrics
// =============================================================================

struct MetricsReport {
    double accuracy = 0.0;
    std::optional<double> regime_accuracy;
    std::vector<std::vector<long>> confusion;  ///< confusion[true][predicted]
    double mean_detection_delay = 0.0;         ///< minutes
    std::size_t change_points = 0;
    std::size_t steps = 0;
};

/// Per-step occupancy agreement between `predicted` and `truth`. Detection
/// delay is, for every true occupancy change, the number of steps until the
/// prediction first agrees, capped at the next change, times `dt`.
/// Regime accuracy is reported when `score_regime` is set.
MetricsReport score(const DecodedPath& predicted, const std::vector<StateLabel>& truth,
                    int max_occupancy, double dt = 1.0, bool score_regime = false);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

std::string metrics_to_json(const MetricsReport& report);
void write_metrics_text(std::ostream& out, const MetricsReport& report);

// =============================================================================
// Fit reports
// =============================================================================

std::string fit_report_to_json(const FitReport& report);
void write_fit_report_text(std::ostream& out, const FitReport& report);
/// CSV `iteration,loglik`.
void write_loglik_csv(std::ostream& out, const std::vector<double>& trace);

}  // namespace co2occ
