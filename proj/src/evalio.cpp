#include "co2occ/evalio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "co2occ/keyvalue.hpp"

namespace co2occ {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

std::string at_line(const std::string& source, int line) {
    return source + ":" + std::to_string(line) + ": ";
}

}  // namespace

// =============================================================================
// Input traces
// =============================================================================

LoadedTrace read_series(std::istream& in, double ambient, const std::string& source) {
    if (!std::isfinite(ambient) || ambient < 0.0) {
        throw ValidationError("ambient CO2 must be finite and >= 0");
    }
    std::string line;
    int lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (blank(line)) continue;
        header = split_csv(line);
        break;
    }
    const std::vector<std::string> full = {"timestamp_min", "co2_ppm", "occupancy", "regime"};
    if (header.size() < 2 || header.size() > full.size() ||
        !std::equal(header.begin(), header.end(), full.begin())) {
        throw ValidationError(at_line(source, lineno) +
                              "expected header 'timestamp_min,co2_ppm[,occupancy[,regime]]'");
    }
    const bool has_occupancy = header.size() >= 3;
    const bool has_regime = header.size() >= 4;

    std::vector<double> ts;
    std::vector<double> y;
    std::vector<StateLabel> labels;
    std::vector<int> line_of;
    std::size_t clamped = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        const auto fields = split_csv(line);
        if (fields.size() != header.size()) {
            throw ValidationError(at_line(source, lineno) + "expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
        }
        const std::string ctx = at_line(source, lineno);
        const double t = parse_double(fields[0], ctx + "timestamp_min");
        const double co2 = parse_double(fields[1], ctx + "co2_ppm");
        if (!std::isfinite(t) || !std::isfinite(co2)) {
            throw ValidationError(ctx + "non-finite value");
        }
        double excess = co2 - ambient;
        if (excess < 0.0) {
            excess = 0.0;
            ++clamped;
        }
        StateLabel label;
        if (has_occupancy) {
            label.occupancy = static_cast<int>(parse_int(fields[2], ctx + "occupancy"));
            if (label.occupancy < 0) throw ValidationError(ctx + "occupancy must be >= 0");
        }
        if (has_regime) {
            label.regime = static_cast<int>(parse_int(fields[3], ctx + "regime"));
            if (label.regime < 0) throw ValidationError(ctx + "regime must be >= 0");
        }
        ts.push_back(t);
        y.push_back(excess);
        labels.push_back(label);
        line_of.push_back(lineno);
    }

    if (ts.size() < 2) throw ValidationError(source + ": need at least 2 data rows");
    const double dt0 = ts[1] - ts[0];
    for (std::size_t i = 1; i < ts.size(); ++i) {
        const double step = ts[i] - ts[i - 1];
        if (!(step > 0.0)) {
            throw ValidationError(at_line(source, line_of[i]) +
                                  "timestamp not increasing (duplicate or out of order)");
        }
        if (std::abs(step - dt0) > 0.01 * dt0) {
            throw ValidationError(at_line(source, line_of[i]) +
                                  "non-uniform sampling: gap deviates more than 1% from " +
                                  format_double(dt0) + " min");
        }
    }
    const double dt = (ts.back() - ts.front()) / static_cast<double>(ts.size() - 1);

    LoadedTrace out{ObservationSeries::uniform(dt, std::move(y), ts.front()), std::nullopt,
                    clamped};
    if (has_occupancy) {
        labels.pop_back();
        out.truth = std::move(labels);
    }
    return out;
}

LoadedTrace load_series(const std::string& path, double ambient) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_series(in, ambient, path);
}

// =============================================================================
// Decoded paths
// =============================================================================

void write_decoded_csv(std::ostream& out, const DecodedPath& path,
                       const ObservationSeries& series,
                       const std::vector<double>& posterior_max) {
    if (path.size() != series.steps()) {
        throw ValidationError("decoded path length does not match series transitions");
    }
    if (!posterior_max.empty() && posterior_max.size() != path.size()) {
        throw ValidationError("posterior column length does not match path");
    }
    const auto ts = series.timestamps();
    out << "timestamp_min,state,occupancy,regime,posterior_max\n";
    for (std::size_t t = 0; t < path.size(); ++t) {
        out << format_double(ts[t]) << ',' << path.states[t] << ',' << path.occupancy[t] << ','
            << path.regime[t] << ','
            << format_double(posterior_max.empty() ? 1.0 : posterior_max[t]) << '\n';
    }
}

void save_decoded_csv(const std::string& path, const DecodedPath& decoded,
                      const ObservationSeries& series,
                      const std::vector<double>& posterior_max) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    write_decoded_csv(out, decoded, series, posterior_max);
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<DecodedRow> load_decoded_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    int lineno = 0;
    bool header = false;
    std::vector<DecodedRow> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        const auto fields = split_csv(line);
        if (!header) {
            if (fields != std::vector<std::string>{"timestamp_min", "state", "occupancy",
                                                   "regime", "posterior_max"}) {
                throw ValidationError(at_line(path, lineno) +
                                      "expected header "
                                      "'timestamp_min,state,occupancy,regime,posterior_max'");
            }
            header = true;
            continue;
        }
        if (fields.size() != 5) {
            throw ValidationError(at_line(path, lineno) + "expected 5 fields");
        }
        const std::string ctx = at_line(path, lineno);
        DecodedRow row;
        row.timestamp = parse_double(fields[0], ctx + "timestamp_min");
        const long long state = parse_int(fields[1], ctx + "state");
        if (state < 0) throw ValidationError(ctx + "state must be >= 0");
        row.state = static_cast<std::size_t>(state);
        row.occupancy = static_cast<int>(parse_int(fields[2], ctx + "occupancy"));
        row.regime = static_cast<int>(parse_int(fields[3], ctx + "regime"));
        row.posterior_max = parse_double(fields[4], ctx + "posterior_max");
        rows.push_back(row);
    }
    if (!header) throw ValidationError(path + ": empty decoded file");
    return rows;
}

// =============================================================================
// Metrics
// =============================================================================

MetricsReport score(const DecodedPath& predicted, const std::vector<StateLabel>& truth,
                    int max_occupancy, double dt, bool score_regime) {
    if (predicted.occupancy.size() != truth.size()) {
        throw ValidationError("score: predicted path has " +
                              std::to_string(predicted.occupancy.size()) +
                              " steps, truth has " + std::to_string(truth.size()));
    }
    if (truth.empty()) throw ValidationError("score: empty path");
    if (max_occupancy < 0) throw ValidationError("score: max_occupancy must be >= 0");
    if (score_regime && predicted.regime.size() != truth.size()) {
        throw ValidationError("score: predicted path carries no regimes");
    }

    const auto levels = static_cast<std::size_t>(max_occupancy + 1);
    MetricsReport r;
    r.steps = truth.size();
    r.confusion.assign(levels, std::vector<long>(levels, 0));
    long correct = 0;
    long regime_correct = 0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        const int want = truth[t].occupancy;
        const int got = predicted.occupancy[t];
        if (want < 0 || want > max_occupancy || got < 0 || got > max_occupancy) {
            throw ValidationError("score: occupancy outside [0, " +
                                  std::to_string(max_occupancy) + "] at step " +
                                  std::to_string(t));
        }
        ++r.confusion[static_cast<std::size_t>(want)][static_cast<std::size_t>(got)];
        if (want == got) ++correct;
        if (score_regime && predicted.regime[t] == truth[t].regime) ++regime_correct;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    if (score_regime) {
        r.regime_accuracy = static_cast<double>(regime_correct) / static_cast<double>(truth.size());
    }

    std::vector<std::size_t> changes;
    for (std::size_t t = 1; t < truth.size(); ++t) {
        if (truth[t].occupancy != truth[t - 1].occupancy) changes.push_back(t);
    }
    r.change_points = changes.size();
    if (!changes.empty()) {
        double total = 0.0;
        for (std::size_t k = 0; k < changes.size(); ++k) {
            const std::size_t start = changes[k];
            const std::size_t end = k + 1 < changes.size() ? changes[k + 1] : truth.size();
            std::size_t t = start;
            while (t < end && predicted.occupancy[t] != truth[t].occupancy) ++t;
            total += static_cast<double>(t - start);
        }
        r.mean_detection_delay = dt * total / static_cast<double>(changes.size());
    }
    return r;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ValidationError("spearman: need two equal-length samples of size >= 2");
    }
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

std::string metrics_to_json(const MetricsReport& report) {
    nlohmann::json j;
    j["accuracy"] = report.accuracy;
    j["regime_accuracy"] =
        report.regime_accuracy ? nlohmann::json(*report.regime_accuracy) : nlohmann::json(nullptr);
    j["confusion"] = report.confusion;
    j["mean_detection_delay_min"] = report.mean_detection_delay;
    j["change_points"] = report.change_points;
    j["steps"] = report.steps;
    return j.dump(2);
}

void write_metrics_text(std::ostream& out, const MetricsReport& report) {
    out << "accuracy: " << report.accuracy << '\n';
    if (report.regime_accuracy) out << "regime_accuracy: " << *report.regime_accuracy << '\n';
    out << "mean_detection_delay_min: " << report.mean_detection_delay << '\n';
    out << "change_points: " << report.change_points << '\n';
    out << "steps: " << report.steps << '\n';
    out << "confusion (rows = true occupancy, cols = predicted):\n";
    for (const auto& row : report.confusion) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "  ") << row[c];
        out << '\n';
    }
}

// =============================================================================
// Fit reports
// =============================================================================

std::string fit_report_to_json(const FitReport& report) {
    nlohmann::json j;
    j["iterations"] = report.iterations;
    j["converged"] = report.converged;
    j["loglik_trace"] = report.loglik_trace;
    j["starved_states"] = report.starved_states;
    j["warnings"] = report.warnings;
    const auto& p = report.final_model.params();
    j["c"] = p.c;
    j["mu"] = p.mu;
    j["sigma"] = p.sigma;
    std::vector<double> tau;
    for (std::size_t i = 0; i < p.c.size(); ++i) {
        tau.push_back(-report.final_model.physics().dt / std::log(p.c[i]));
    }
    j["implied_tau_min"] = tau;
    return j.dump(2);
}

void write_fit_report_text(std::ostream& out, const FitReport& report) {
    const SwitchingARModel& m = report.final_model;
    out << "iterations: " << report.iterations << '\n';
    out << "converged: " << (report.converged ? "true" : "false") << '\n';
    if (!report.loglik_trace.empty()) {
        out << "final_loglik: " << format_double(report.loglik_trace.back()) << '\n';
    }
    out << "state occupancy regime c implied_tau_min mu sigma\n";
    for (std::size_t i = 0; i < m.num_states(); ++i) {
        const StateLabel s = m.space().label(i);
        out << i << ' ' << s.occupancy << ' ' << s.regime << ' ' << format_double(m.c(i)) << ' '
            << format_double(-m.physics().dt / std::log(m.c(i))) << ' '
            << format_double(m.mu(i)) << ' ' << format_double(m.sigma(i)) << '\n';
    }
    if (!report.starved_states.empty()) {
        out << "starved_states:";
        for (std::size_t s : report.starved_states) out << ' ' << s;
        out << '\n';
    }
    for (const auto& w : report.warnings) out << "warning: " << w << '\n';
}

void write_loglik_csv(std::ostream& out, const std::vector<double>& trace) {
    out << "iteration,loglik\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out << (i + 1) << ',' << format_double(trace[i]) << '\n';
    }
}

}  // namespace co2occ
