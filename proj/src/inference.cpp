#include "co2occ/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace co2occ {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_shapes(const Matrix& log_emission, const Matrix& log_trans,
                  std::span<const double> log_init) {
    const std::size_t n = log_emission.cols();
    if (log_emission.rows() == 0 || n == 0) {
        throw ValidationError("HMM: emission table must be non-empty");
    }
    if (log_trans.rows() != n || log_trans.cols() != n || log_init.size() != n) {
        throw ValidationError("HMM: transition/init dimensions do not match emission table");
    }
}

void check_series(const ObservationSeries& series) {
    if (series.size() < 2) throw ValidationError("series needs at least 2 samples");
}

}  // namespace

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) return kNegInf;
    const double m = *std::max_element(v.begin(), v.end());
    if (m == kNegInf) return kNegInf;
    if (m == std::numeric_limits<double>::infinity()) return m;
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - m);
    return m + std::log(sum);
}

double gaussian_logpdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

Matrix log_matrix(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out(r, c) = m(r, c) > 0.0 ? std::log(m(r, c)) : kNegInf;
        }
    }
    return out;
}

std::vector<double> log_vector(std::span<const double> v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? std::log(v[i]) : kNegInf;
    return out;
}

// =============================================================================
// Generic core
// =============================================================================

ViterbiResult viterbi_core(const Matrix& log_emission, const Matrix& log_trans,
                           std::span<const double> log_init) {
    check_shapes(log_emission, log_trans, log_init);
    const std::size_t steps = log_emission.rows();
    const std::size_t n = log_emission.cols();

    std::vector<double> score(n);
    std::vector<double> next(n);
    std::vector<std::size_t> back(steps * n, 0);

    for (std::size_t j = 0; j < n; ++j) score[j] = log_init[j] + log_emission(0, j);

    for (std::size_t t = 1; t < steps; ++t) {
        for (std::size_t j = 0; j < n; ++j) {
            double best = kNegInf;
            std::size_t arg = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double cand = score[i] + log_trans(i, j);
                if (cand > best) {
                    best = cand;
                    arg = i;
                }
            }
            next[j] = best + log_emission(t, j);
            back[t * n + j] = arg;
        }
        std::swap(score, next);
    }

    std::size_t last = 0;
    for (std::size_t j = 1; j < n; ++j) {
        if (score[j] > score[last]) last = j;
    }
    if (score[last] == kNegInf || std::isnan(score[last])) {
        throw NumericalError("viterbi: no path has non-zero probability");
    }

    ViterbiResult result;
    result.log_prob = score[last];
    result.states.resize(steps);
    result.states[steps - 1] = last;
    for (std::size_t t = steps - 1; t > 0; --t) {
        result.states[t - 1] = back[t * n + result.states[t]];
    }
    return result;
}

ForwardBackwardResult forward_backward_core(const Matrix& log_emission, const Matrix& log_trans,
                                            std::span<const double> log_init) {
    check_shapes(log_emission, log_trans, log_init);
    const std::size_t steps = log_emission.rows();
    const std::size_t n = log_emission.cols();

    Matrix alpha(steps, n);
    Matrix beta(steps, n, 0.0);
    std::vector<double> terms(n);

    for (std::size_t j = 0; j < n; ++j) alpha(0, j) = log_init[j] + log_emission(0, j);
    for (std::size_t t = 1; t < steps; ++t) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i) terms[i] = alpha(t - 1, i) + log_trans(i, j);
            alpha(t, j) = log_sum_exp(terms) + log_emission(t, j);
        }
    }
    for (std::size_t t = steps - 1; t > 0; --t) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                terms[j] = log_trans(i, j) + log_emission(t, j) + beta(t, j);
            }
            beta(t - 1, i) = log_sum_exp(terms);
        }
    }

    ForwardBackwardResult out;
    out.log_evidence = log_sum_exp(alpha.row(steps - 1));
    if (!std::isfinite(out.log_evidence)) {
        throw NumericalError("forward_backward: observations have zero likelihood");
    }

    out.posterior = Matrix(steps, n);
    for (std::size_t t = 0; t < steps; ++t) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double p = std::exp(alpha(t, j) + beta(t, j) - out.log_evidence);
            out.posterior(t, j) = p;
            sum += p;
        }
        for (std::size_t j = 0; j < n; ++j) out.posterior(t, j) /= sum;
    }

    out.expected_transitions = Matrix(n, n, 0.0);
    for (std::size_t t = 1; t < steps; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            if (alpha(t - 1, i) == kNegInf) continue;
            for (std::size_t j = 0; j < n; ++j) {
                const double lp = alpha(t - 1, i) + log_trans(i, j) + log_emission(t, j) +
                                  beta(t, j) - out.log_evidence;
                if (lp > kNegInf) out.expected_transitions(i, j) += std::exp(lp);
            }
        }
    }
    return out;
}

double path_loglik_core(const Matrix& log_emission, const Matrix& log_trans,
                        std::span<const double> log_init, std::span<const std::size_t> states) {
    check_shapes(log_emission, log_trans, log_init);
    if (states.size() != log_emission.rows()) {
        throw ValidationError("path length " + std::to_string(states.size()) +
                              " does not match " + std::to_string(log_emission.rows()) +
                              " transitions");
    }
    const std::size_t n = log_emission.cols();
    for (std::size_t s : states) {
        if (s >= n) throw ValidationError("path state index out of range");
    }
    double total = log_init[states[0]] + log_emission(0, states[0]);
    for (std::size_t t = 1; t < states.size(); ++t) {
        total += log_trans(states[t - 1], states[t]) + log_emission(t, states[t]);
    }
    return total;
}

// =============================================================================
// Switching AR model
// =============================================================================

double emission_logdensity(const SwitchingARModel& model, std::size_t i, double y_prev,
                           double y_cur) {
    return gaussian_logpdf(y_cur, model.c(i) * y_prev + model.mu(i), model.sigma(i));
}

Matrix emission_table(const SwitchingARModel& model, const ObservationSeries& series) {
    check_series(series);
    const std::size_t steps = series.steps();
    const std::size_t n = model.num_states();
    Matrix table(steps, n);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            table(t, i) = emission_logdensity(model, i, series[t], series[t + 1]);
        }
    }
    return table;
}

Decoding viterbi(const SwitchingARModel& model, const ObservationSeries& series) {
    check_series(series);
    const auto result = viterbi_core(emission_table(model, series), log_matrix(model.params().trans),
                                     log_vector(model.params().init));
    return {make_path(model.space(), result.states), result.log_prob};
}

Posteriors forward_backward(const SwitchingARModel& model, const ObservationSeries& series) {
    check_series(series);
    auto fb = forward_backward_core(emission_table(model, series),
                                    log_matrix(model.params().trans),
                                    log_vector(model.params().init));
    return {PosteriorMatrix{std::move(fb.posterior)}, std::move(fb.expected_transitions),
            fb.log_evidence};
}

double path_loglikelihood(const SwitchingARModel& model, const ObservationSeries& series,
                          const DecodedPath& path) {
    check_series(series);
    if (path.size() != series.steps()) {
        throw ValidationError("path_loglikelihood: path has " + std::to_string(path.size()) +
                              " states, series has " + std::to_string(series.steps()) +
                              " transitions");
    }
    return path_loglik_core(emission_table(model, series), log_matrix(model.params().trans),
                            log_vector(model.params().init), path.states);
}

}  // namespace co2occ
