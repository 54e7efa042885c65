#include "co2occ/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "co2occ/inference.hpp"

namespace co2occ {

namespace {

constexpr double kSdFloor = 1e-6;

std::vector<double> observed(const ObservationSeries& series) {
    const auto y = series.y();
    return {y.begin() + 1, y.end()};
}

DecodedPath occupancy_path(std::vector<std::size_t> states) {
    DecodedPath path;
    path.occupancy.reserve(states.size());
    for (std::size_t s : states) path.occupancy.push_back(static_cast<int>(s));
    path.regime.assign(states.size(), 0);
    path.states = std::move(states);
    return path;
}

double emission_score(const SimpleHmm& model, std::span<const double> y,
                      std::span<const std::size_t> states) {
    double total = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        total += gaussian_logpdf(y[t], model.mean[states[t]], model.sd[states[t]]);
    }
    return total;
}

double transition_score(const Matrix& trans, std::span<const std::size_t> states) {
    double total = 0.0;
    for (std::size_t t = 1; t < states.size(); ++t) {
        const double p = trans(states[t - 1], states[t]);
        total += p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    }
    return total;
}

/// Relabel states so that means ascend.
void sort_states(SimpleHmm& model, DecodedPath& path) {
    const std::size_t n = model.num_states();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return model.mean[a] < model.mean[b]; });
    std::vector<std::size_t> rank(n);
    for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

    SimpleHmm sorted;
    sorted.mean.resize(n);
    sorted.sd.resize(n);
    sorted.init.resize(n);
    sorted.trans = Matrix(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        sorted.mean[rank[a]] = model.mean[a];
        sorted.sd[rank[a]] = model.sd[a];
        sorted.init[rank[a]] = model.init[a];
        for (std::size_t b = 0; b < n; ++b) sorted.trans(rank[a], rank[b]) = model.trans(a, b);
    }
    model = std::move(sorted);

    std::vector<std::size_t> states = path.states;
    for (auto& s : states) s = rank[s];
    path = occupancy_path(std::move(states));
}

}  // namespace

void SimpleHmm::validate() const {
    const std::size_t n = mean.size();
    if (n == 0) throw ValidationError("simple HMM: needs at least one state");
    if (sd.size() != n || init.size() != n) {
        throw ValidationError("simple HMM: mean/sd/init sizes differ");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(mean[i])) throw ValidationError("simple HMM: non-finite mean");
        if (!(sd[i] > 0.0)) throw ValidationError("simple HMM: sd must be > 0");
    }
    validate_transition_matrix(trans, n, "simple HMM trans");
    validate_distribution(init, "simple HMM init");
}

Matrix simple_emission_table(const SimpleHmm& model, const ObservationSeries& series) {
    const std::size_t n = model.num_states();
    const std::size_t steps = series.steps();
    Matrix table(steps, n);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            table(t, i) = gaussian_logpdf(series[t + 1], model.mean[i], model.sd[i]);
        }
    }
    return table;
}

DecodedPath decode_simple_hmm(const SimpleHmm& model, const ObservationSeries& series) {
    model.validate();
    auto result = viterbi_core(simple_emission_table(model, series), log_matrix(model.trans),
                               log_vector(model.init));
    return occupancy_path(std::move(result.states));
}

double simple_path_loglikelihood(const SimpleHmm& model, const ObservationSeries& series,
                                 const DecodedPath& path) {
    return path_loglik_core(simple_emission_table(model, series), log_matrix(model.trans),
                            log_vector(model.init), path.states);
}

SimpleHmmFit fit_simple_hmm(const ObservationSeries& series, std::size_t n_states,
                            const FitOptions& opts, double self_stay) {
    opts.validate();
    if (n_states == 0) throw ValidationError("fit_simple_hmm: n_states must be >= 1");
    if (!(self_stay > 0.0 && self_stay < 1.0)) {
        throw ValidationError("fit_simple_hmm: self_stay must lie in (0, 1)");
    }
    const std::vector<double> y = observed(series);
    const std::size_t steps = y.size();
    const std::size_t n = n_states;

    std::vector<double> sorted = y;
    std::sort(sorted.begin(), sorted.end());
    const double mean_all = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(steps);
    double var_all = 0.0;
    for (double v : y) var_all += (v - mean_all) * (v - mean_all);
    var_all /= static_cast<double>(steps);

    SimpleHmm model;
    model.mean.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double level = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
        const auto idx = std::min(steps - 1, static_cast<std::size_t>(level * steps));
        model.mean[j] = sorted[idx];
    }
    const double sd0 = std::sqrt(var_all) / static_cast<double>(n);
    model.sd.assign(n, sd0 > kSdFloor ? sd0 : 1.0);
    model.trans = Matrix(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            model.trans(r, c) =
                n == 1 ? 1.0 : (r == c ? self_stay : (1.0 - self_stay) / static_cast<double>(n - 1));
        }
    }
    model.init.assign(n, 1.0 / static_cast<double>(n));

    auto decode = [&](const SimpleHmm& m) {
        return viterbi_core(simple_emission_table(m, series), log_matrix(m.trans),
                            log_vector(m.init));
    };

    ViterbiResult decoded = decode(model);
    SimpleHmmFit fit;
    int iter = 0;
    while (iter < opts.max_iters) {
        ++iter;
        const std::vector<std::size_t> path = decoded.states;
        const double before = iter == 1 ? decoded.log_prob : fit.loglik_trace.back();

        // Emission block: per-state mean, then sd (pooled when tied).
        SimpleHmm cand = model;
        std::vector<double> wsum(n, 0.0);
        std::vector<double> sum(n, 0.0);
        for (std::size_t t = 0; t < steps; ++t) {
            wsum[path[t]] += 1.0;
            sum[path[t]] += y[t];
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (wsum[j] > 0.0 && wsum[j] >= opts.min_state_weight) cand.mean[j] = sum[j] / wsum[j];
        }
        std::vector<double> ss(n, 0.0);
        for (std::size_t t = 0; t < steps; ++t) {
            const double r = y[t] - cand.mean[path[t]];
            ss[path[t]] += r * r;
        }
        if (opts.tie_sigma_global) {
            const double total = std::accumulate(ss.begin(), ss.end(), 0.0);
            cand.sd.assign(n, std::max(kSdFloor, std::sqrt(total / static_cast<double>(steps))));
        } else {
            for (std::size_t j = 0; j < n; ++j) {
                if (wsum[j] > 0.0 && wsum[j] >= std::max(opts.min_state_weight, 1e-12)) {
                    cand.sd[j] = std::max(kSdFloor, std::sqrt(ss[j] / wsum[j]));
                }
            }
        }
        if (emission_score(cand, y, path) >= emission_score(model, y, path)) {
            model.mean = cand.mean;
            model.sd = cand.sd;
        }

        Matrix counts(n, n, 0.0);
        for (std::size_t t = 1; t < steps; ++t) counts(path[t - 1], path[t]) += 1.0;
        Matrix trans = transitions_from_counts(counts, opts.transition_smoothing);
        if (transition_score(trans, path) >= transition_score(model.trans, path)) {
            model.trans = std::move(trans);
        }

        const double after = emission_score(model, y, path) +
                             transition_score(model.trans, path) + std::log(model.init[path[0]]);
        fit.loglik_trace.push_back(after);

        decoded = decode(model);
        const bool repeated = decoded.states == path;
        if (repeated || after - before <= opts.tol * std::max(1.0, std::abs(before))) {
            fit.converged = true;
            break;
        }
    }

    fit.iterations = iter;
    fit.path = occupancy_path(std::move(decoded.states));
    sort_states(model, fit.path);
    fit.model = std::move(model);
    return fit;
}

}  // namespace co2occ
