#include "co2occ/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "co2occ/inference.hpp"

namespace co2occ {

namespace {

constexpr double kSigmaFloor = 1e-6;
constexpr double kMinC = 1e-6;
constexpr double kMaxC = 1.0 - 1e-9;
constexpr double kMaxCondition = 1e12;

/// Weighted first and second moments of the lag pairs of one state.
struct LagMoments {
    double weight = 0.0;
    double mean_prev = 0.0;
    double mean_cur = 0.0;
    double sxx = 0.0;  ///< sum w (y_prev - mean_prev)^2
    double sxy = 0.0;  ///< sum w (y_prev - mean_prev)(y_cur - mean_cur)
};

LagMoments lag_moments(const ObservationSeries& series, const Matrix& weights, std::size_t i) {
    LagMoments m;
    const std::size_t steps = series.steps();
    for (std::size_t t = 0; t < steps; ++t) {
        const double w = weights(t, i);
        m.weight += w;
        m.mean_prev += w * series[t];
        m.mean_cur += w * series[t + 1];
    }
    if (m.weight <= 0.0) return m;
    m.mean_prev /= m.weight;
    m.mean_cur /= m.weight;
    for (std::size_t t = 0; t < steps; ++t) {
        const double w = weights(t, i);
        if (w == 0.0) continue;
        const double u = series[t] - m.mean_prev;
        const double v = series[t + 1] - m.mean_cur;
        m.sxx += w * u * u;
        m.sxy += w * u * v;
    }
    return m;
}

double clamp_c(double c) { return std::clamp(c, kMinC, kMaxC); }

double weighted_emission_score(const SwitchingARModel& model, const ObservationSeries& series,
                               const Matrix& weights) {
    const Matrix table = emission_table(model, series);
    double total = 0.0;
    for (std::size_t t = 0; t < table.rows(); ++t) {
        for (std::size_t i = 0; i < table.cols(); ++i) {
            if (weights(t, i) != 0.0) total += weights(t, i) * table(t, i);
        }
    }
    return total;
}

double transition_score(const Matrix& trans, const Matrix& counts) {
    double total = 0.0;
    for (std::size_t r = 0; r < trans.rows(); ++r) {
        for (std::size_t c = 0; c < trans.cols(); ++c) {
            if (counts(r, c) == 0.0) continue;
            total += counts(r, c) * (trans(r, c) > 0.0
                                         ? std::log(trans(r, c))
                                         : -std::numeric_limits<double>::infinity());
        }
    }
    return total;
}

Matrix hard_transition_counts(const DecodedPath& path, std::size_t n) {
    Matrix counts(n, n, 0.0);
    for (std::size_t t = 1; t < path.states.size(); ++t) {
        counts(path.states[t - 1], path.states[t]) += 1.0;
    }
    return counts;
}

/// Replace mu of starved states with n * (per-person drift of their regime),
/// the drift fitted through the origin on the visited states.
void extrapolate_starved(const SwitchingARModel& model, const std::vector<LagMoments>& moments,
                         const std::vector<bool>& starved, std::vector<double>& mu) {
    const StateSpace& space = model.space();
    const std::size_t regimes = space.num_regimes();
    std::vector<double> num(regimes + 1, 0.0);
    std::vector<double> den(regimes + 1, 0.0);
    for (std::size_t i = 0; i < space.size(); ++i) {
        const StateLabel s = space.label(i);
        if (starved[i] || s.occupancy == 0) continue;
        const double w = moments[i].weight * s.occupancy;
        num[s.regime] += w * mu[i];
        den[s.regime] += w * s.occupancy;
        num[regimes] += w * mu[i];
        den[regimes] += w * s.occupancy;
    }
    for (std::size_t i = 0; i < space.size(); ++i) {
        if (!starved[i]) continue;
        const StateLabel s = space.label(i);
        if (den[s.regime] > 0.0) {
            mu[i] = s.occupancy * num[s.regime] / den[s.regime];
        } else if (den[regimes] > 0.0) {
            mu[i] = s.occupancy * num[regimes] / den[regimes];
        }
    }
}

struct EmissionCandidate {
    std::vector<double> c;
    std::vector<double> mu;
    std::vector<double> sigma;
    std::vector<std::size_t> starved;
};

/// Conditional maximisation of the weighted emission log-likelihood:
/// (c, mu) by weighted least squares under the current sigma, then sigma.
EmissionCandidate fit_emissions(const SwitchingARModel& model, const ObservationSeries& series,
                                const Matrix& weights, const FitOptions& opts) {
    const std::size_t n = model.num_states();
    const StateSpace& space = model.space();
    EmissionCandidate out{model.params().c, model.params().mu, model.params().sigma, {}};

    std::vector<LagMoments> moments(n);
    std::vector<bool> starved(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        moments[i] = lag_moments(series, weights, i);
        starved[i] = moments[i].weight <= 0.0 || moments[i].weight < opts.min_state_weight;
    }

    if (opts.linear_drift) {
        // y_t = c_k y_{t-1} + n d_k: 2x2 normal equations per regime
        for (std::size_t k = 0; k < space.num_regimes(); ++k) {
            double a11 = 0.0, a12 = 0.0, a22 = 0.0, b1 = 0.0, b2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const StateLabel s = space.label(i);
                const LagMoments& m = moments[i];
                if (static_cast<std::size_t>(s.regime) != k || m.weight <= 0.0) continue;
                const double prec =
                    opts.tie_sigma_global ? 1.0 : 1.0 / (out.sigma[i] * out.sigma[i]);
                const double w = prec * m.weight;
                const double occ = s.occupancy;
                a11 += prec * m.sxx + w * m.mean_prev * m.mean_prev;
                a12 += w * occ * m.mean_prev;
                a22 += w * occ * occ;
                b1 += prec * m.sxy + w * m.mean_prev * m.mean_cur;
                b2 += w * occ * m.mean_cur;
            }
            const double det = a11 * a22 - a12 * a12;
            if (!(det > 1e-12 * (a11 * a22)) || a22 <= 0.0) continue;
            const double ck = clamp_c((b1 * a22 - b2 * a12) / det);
            const double dk = (b2 - a12 * ck) / a22;
            for (std::size_t i = 0; i < n; ++i) {
                const StateLabel s = space.label(i);
                if (static_cast<std::size_t>(s.regime) != k) continue;
                out.c[i] = ck;
                out.mu[i] = s.occupancy * dk;
            }
        }
    } else if (opts.tie_c_by_regime) {
        for (std::size_t k = 0; k < space.num_regimes(); ++k) {
            double num = 0.0;
            double den = 0.0;
            double scale = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (starved[i] || static_cast<std::size_t>(space.label(i).regime) != k) continue;
                const double prec =
                    opts.tie_sigma_global ? 1.0 : 1.0 / (out.sigma[i] * out.sigma[i]);
                num += prec * moments[i].sxy;
                den += prec * moments[i].sxx;
                scale += prec * moments[i].weight * (1.0 + moments[i].mean_prev * moments[i].mean_prev);
            }
            if (!(den > 1e-14 * scale)) continue;  // no lag variation in this regime
            const double ck = clamp_c(num / den);
            for (std::size_t i = 0; i < n; ++i) {
                if (static_cast<std::size_t>(space.label(i).regime) != k) continue;
                out.c[i] = ck;
                if (!starved[i]) out.mu[i] = moments[i].mean_cur - ck * moments[i].mean_prev;
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            if (starved[i]) continue;
            std::vector<double> w(weights.rows());
            for (std::size_t t = 0; t < w.size(); ++t) w[t] = weights(t, i);
            const auto fit = weighted_ar_fit(series, w, opts.min_state_weight);
            if (!fit) {
                starved[i] = true;
                continue;
            }
            out.c[i] = clamp_c(fit->c);
            out.mu[i] = out.c[i] == fit->c
                            ? fit->mu
                            : moments[i].mean_cur - out.c[i] * moments[i].mean_prev;
        }
    }

    if (std::all_of(starved.begin(), starved.end(), [](bool s) { return s; })) {
        throw NumericalError(
            "every state is starved; start from a physics-based initialization "
            "(init_from_physics) so that decoded segments cover the occupancy levels");
    }
    if (opts.extrapolate_starved) extrapolate_starved(model, moments, starved, out.mu);

    for (std::size_t i = 0; i < n; ++i) {
        if (starved[i]) out.starved.push_back(i);
    }

    ModelParams with_mean = model.params();
    with_mean.c = out.c;
    with_mean.mu = out.mu;
    const SwitchingARModel mean_model(model.physics(), std::move(with_mean));
    const double sigma_min_weight =
        opts.tie_sigma_global ? 0.0 : std::max(opts.min_state_weight, 1e-12);
    out.sigma = update_sigma(series, weights, mean_model, opts.tie_sigma_global, sigma_min_weight);
    if (!opts.tie_sigma_global) {
        for (std::size_t i : out.starved) out.sigma[i] = model.params().sigma[i];
    }
    return out;
}

struct MStep {
    SwitchingARModel model;
    std::vector<std::size_t> starved;
};

/// M-step with block-wise acceptance: the emission block and the transition
/// block are each kept only if they do not lower their part of the weighted
/// complete-data log-likelihood.
MStep guarded_m_step(const SwitchingARModel& model, const ObservationSeries& series,
                     const Matrix& weights, const Matrix& trans_counts, const FitOptions& opts) {
    EmissionCandidate em = fit_emissions(model, series, weights, opts);

    ModelParams params = model.params();
    {
        ModelParams cand = params;
        cand.c = em.c;
        cand.mu = em.mu;
        cand.sigma = em.sigma;
        SwitchingARModel cand_model(model.physics(), cand);
        if (weighted_emission_score(cand_model, series, weights) >=
            weighted_emission_score(model, series, weights)) {
            params = std::move(cand);
        }
    }
    {
        Matrix trans =
            opts.factorize_transitions
                ? factorized_transitions(trans_counts, model.space(), opts.transition_smoothing)
                : transitions_from_counts(trans_counts, opts.transition_smoothing);
        if (transition_score(trans, trans_counts) >= transition_score(params.trans, trans_counts)) {
            params.trans = std::move(trans);
        }
    }
    return {SwitchingARModel(model.physics(), std::move(params)), std::move(em.starved)};
}

}  // namespace

// =============================================================================
// Options
// =============================================================================

void FitOptions::validate() const {
    if (max_iters < 1) throw ValidationError("fit.max_iters must be >= 1");
    if (!(tol > 0.0)) throw ValidationError("fit.tol must be > 0");
    if (!(transition_smoothing >= 0.0)) {
        throw ValidationError("fit.transition_smoothing must be >= 0");
    }
    if (!(min_state_weight >= 0.0)) throw ValidationError("fit.min_state_weight must be >= 0");
}

// =============================================================================
// Regression primitives
// =============================================================================

ArCoefficients estimate_ar_single(std::span<const double> segment) {
    if (segment.size() < 3) {
        throw ValidationError("estimate_ar_single: segment needs at least 3 samples");
    }
    const std::size_t m = segment.size() - 1;
    double mean_prev = 0.0;
    double mean_cur = 0.0;
    for (std::size_t t = 1; t <= m; ++t) {
        mean_prev += segment[t - 1];
        mean_cur += segment[t];
    }
    mean_prev /= static_cast<double>(m);
    mean_cur /= static_cast<double>(m);

    double cov = 0.0;
    double var = 0.0;
    double scale = 0.0;
    for (std::size_t t = 1; t <= m; ++t) {
        const double u = segment[t - 1] - mean_prev;
        cov += (segment[t] - mean_cur) * u;
        var += u * u;
        scale += segment[t - 1] * segment[t - 1];
    }
    if (!(var > 1e-28 * scale) || var == 0.0) {
        throw NumericalError("estimate_ar_single: degenerate segment (lagged values constant)");
    }
    const double c = cov / var;
    return {c, mean_cur - c * mean_prev};
}

std::optional<ArCoefficients> weighted_ar_fit(const ObservationSeries& series,
                                              std::span<const double> weights,
                                              double min_weight) {
    const std::size_t steps = series.steps();
    if (weights.size() != steps) {
        throw ValidationError("weighted_ar_fit: expected " + std::to_string(steps) +
                              " weights, got " + std::to_string(weights.size()));
    }
    double total = 0.0;
    double shift_prev = 0.0;
    double shift_cur = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        total += weights[t];
        shift_prev += weights[t] * series[t];
        shift_cur += weights[t] * series[t + 1];
    }
    if (!(total > 0.0) || total < min_weight) return std::nullopt;
    shift_prev /= total;
    shift_cur /= total;

    // Normal equations in shifted coordinates u = y_{t-1} - shift_prev,
    // v = y_t - shift_cur; the shift keeps E well conditioned.
    double e00 = 0.0;
    double e01 = 0.0;
    const double e11 = total;
    double d0 = 0.0;
    double d1 = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        const double w = weights[t];
        if (w == 0.0) continue;
        const double u = series[t] - shift_prev;
        const double v = series[t + 1] - shift_cur;
        e00 += w * u * u;
        e01 += w * u;
        d0 += w * u * v;
        d1 += w * v;
    }
    const double det = e00 * e11 - e01 * e01;
    const double half_trace = 0.5 * (e00 + e11);
    const double disc = std::sqrt(std::max(0.0, half_trace * half_trace - det));
    const double lmax = half_trace + disc;
    const double lmin = det / lmax;
    if (!(lmin > 0.0) || lmax / lmin > kMaxCondition) return std::nullopt;

    const double c = (d0 * e11 - e01 * d1) / det;
    const double shifted_mu = (e00 * d1 - e01 * d0) / det;
    return ArCoefficients{c, shifted_mu + shift_cur - c * shift_prev};
}

std::optional<ArCoefficients> weighted_ls_update(const ObservationSeries& series,
                                                 const PosteriorMatrix& q, std::size_t i,
                                                 double min_weight) {
    if (q.steps() != series.steps()) {
        throw ValidationError("weighted_ls_update: posterior rows do not match series length");
    }
    if (i >= q.num_states()) throw ValidationError("weighted_ls_update: state out of range");
    std::vector<double> w(q.steps());
    for (std::size_t t = 0; t < w.size(); ++t) w[t] = q.q(t, i);
    return weighted_ar_fit(series, w, min_weight);
}

Matrix assignment_weights(const DecodedPath& path, std::size_t num_states) {
    Matrix w(path.size(), num_states, 0.0);
    for (std::size_t t = 0; t < path.size(); ++t) {
        if (path.states[t] >= num_states) {
            throw ValidationError("assignment_weights: state index out of range");
        }
        w(t, path.states[t]) = 1.0;
    }
    return w;
}

// =============================================================================
// Noise and transitions
// =============================================================================

std::vector<double> update_sigma(const ObservationSeries& series, const Matrix& weights,
                                 const SwitchingARModel& model, bool tie_global,
                                 double min_weight) {
    const std::size_t n = model.num_states();
    const std::size_t steps = series.steps();
    if (weights.rows() != steps || weights.cols() != n) {
        throw ValidationError("update_sigma: weight matrix must be T x N");
    }
    std::vector<double> ss(n, 0.0);
    std::vector<double> wsum(n, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const double w = weights(t, i);
            if (w == 0.0) continue;
            const double r = series[t + 1] - model.c(i) * series[t] - model.mu(i);
            ss[i] += w * r * r;
            wsum[i] += w;
        }
    }

    std::vector<double> sigma = model.params().sigma;
    if (tie_global) {
        double total_ss = 0.0;
        double total_w = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            total_ss += ss[i];
            total_w += wsum[i];
        }
        if (total_w > 0.0) {
            sigma.assign(n, std::max(kSigmaFloor, std::sqrt(total_ss / total_w)));
        }
        return sigma;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (wsum[i] > 0.0 && wsum[i] >= min_weight) {
            sigma[i] = std::max(kSigmaFloor, std::sqrt(ss[i] / wsum[i]));
        }
    }
    return sigma;
}

std::vector<double> update_sigma(const ObservationSeries& series, const DecodedPath& path,
                                 const SwitchingARModel& model, bool tie_global) {
    if (path.size() != series.steps()) {
        throw ValidationError("update_sigma: path does not cover every transition");
    }
    return update_sigma(series, assignment_weights(path, model.num_states()), model, tie_global);
}

std::vector<double> update_sigma(const ObservationSeries& series, const PosteriorMatrix& q,
                                 const SwitchingARModel& model, bool tie_global) {
    return update_sigma(series, q.q, model, tie_global);
}

Matrix transitions_from_counts(const Matrix& counts, double alpha) {
    if (!(alpha >= 0.0)) throw ValidationError("transition smoothing must be >= 0");
    const std::size_t n = counts.rows();
    Matrix trans(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < n; ++c) row += counts(r, c) + alpha;
        for (std::size_t c = 0; c < n; ++c) {
            trans(r, c) = row > 0.0 ? (counts(r, c) + alpha) / row : 1.0 / static_cast<double>(n);
        }
        // absorb rounding so the row sums to 1 well inside 1e-12
        double sum = 0.0;
        for (std::size_t c = 0; c < n; ++c) sum += trans(r, c);
        for (std::size_t c = 0; c < n; ++c) trans(r, c) /= sum;
    }
    return trans;
}

Matrix update_transitions(const DecodedPath& path, std::size_t num_states, double alpha) {
    for (std::size_t s : path.states) {
        if (s >= num_states) throw ValidationError("update_transitions: state out of range");
    }
    return transitions_from_counts(hard_transition_counts(path, num_states), alpha);
}

double estimate_noise_scale(const ObservationSeries& series) {
    const auto y = series.y();
    if (y.size() < 3) return kSigmaFloor;
    std::vector<double> d2(y.size() - 2);
    for (std::size_t t = 0; t < d2.size(); ++t) d2[t] = y[t + 2] - 2.0 * y[t + 1] + y[t];
    const auto median = [](std::vector<double>& v) {
        const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
        std::nth_element(v.begin(), mid, v.end());
        double m = *mid;
        if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
        return m;
    };
    const double center = median(d2);
    for (double& v : d2) v = std::abs(v - center);
    return std::max(kSigmaFloor, 1.4826 * median(d2) / std::sqrt(2.0));
}

Matrix factorized_transitions(const Matrix& counts, const StateSpace& space, double alpha) {
    const std::size_t n = space.size();
    if (counts.rows() != n || counts.cols() != n) {
        throw ValidationError("factorized_transitions: counts must be N x N");
    }
    const auto levels = static_cast<std::size_t>(space.max_occupancy() + 1);
    const std::size_t regimes = space.num_regimes();
    Matrix occ(levels, levels, 0.0);
    Matrix reg(regimes, regimes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const StateLabel a = space.label(i);
        for (std::size_t j = 0; j < n; ++j) {
            const StateLabel b = space.label(j);
            occ(a.occupancy, b.occupancy) += counts(i, j);
            reg(a.regime, b.regime) += counts(i, j);
        }
    }
    const Matrix p_occ = transitions_from_counts(occ, alpha);
    const Matrix p_reg = transitions_from_counts(reg, alpha);
    Matrix trans(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const StateLabel a = space.label(i);
        for (std::size_t j = 0; j < n; ++j) {
            const StateLabel b = space.label(j);
            trans(i, j) = p_occ(a.occupancy, b.occupancy) * p_reg(a.regime, b.regime);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) sum += trans(i, j);
        for (std::size_t j = 0; j < n; ++j) trans(i, j) /= sum;
    }
    return trans;
}

// =============================================================================
// EM-Viterbi
// =============================================================================

FitReport fit_em_viterbi(const SwitchingARModel& model0, const ObservationSeries& series,
                         const FitOptions& opts) {
    opts.validate();
    const std::size_t n = model0.num_states();

    std::vector<std::string> warnings;
    if (series.steps() < 3 * n) {
        warnings.push_back("series has " + std::to_string(series.steps()) +
                           " transitions, fewer than 3 per state (" + std::to_string(n) +
                           " states)");
    }

    SwitchingARModel model = model0;
    Decoding decoded = viterbi(model, series);
    std::vector<double> trace;
    std::vector<std::size_t> starved;
    bool converged = false;
    int iter = 0;

    while (iter < opts.max_iters) {
        ++iter;
        const DecodedPath path = decoded.path;
        const double before = iter == 1 ? decoded.log_prob : trace.back();

        MStep m = guarded_m_step(model, series, assignment_weights(path, n),
                                 hard_transition_counts(path, n), opts);
        model = std::move(m.model);
        starved = std::move(m.starved);

        const double after = path_loglikelihood(model, series, path);
        trace.push_back(after);

        decoded = viterbi(model, series);
        const bool repeated = decoded.path.states == path.states;
        const double gain = after - before;
        if (repeated || gain <= opts.tol * std::max(1.0, std::abs(before))) {
            converged = true;
            break;
        }
    }

    return FitReport{iter,  std::move(trace),   converged,          std::move(model),
                     std::move(decoded.path), std::move(starved), std::move(warnings)};
}

FitReport fit_em_viterbi_restarts(const SwitchingARModel& model0, const ObservationSeries& series,
                                  std::span<const double> drift_scales, const FitOptions& opts) {
    if (drift_scales.empty()) throw ValidationError("drift_scales must not be empty");
    for (double g : drift_scales) {
        if (!(g > 0.0)) throw ValidationError("drift_scales: every scale must be > 0");
    }
    const StateSpace& space = model0.space();
    const std::size_t regimes = space.num_regimes();
    std::size_t starts = 1;
    for (std::size_t k = 0; k < regimes; ++k) starts *= drift_scales.size();

    std::optional<FitReport> best;
    std::vector<std::size_t> digit(regimes, 0);
    for (std::size_t s = 0; s < starts; ++s) {
        std::size_t rest = s;
        for (std::size_t k = 0; k < regimes; ++k) {
            digit[k] = rest % drift_scales.size();
            rest /= drift_scales.size();
        }
        ModelParams p = model0.params();
        for (std::size_t i = 0; i < p.mu.size(); ++i) {
            p.mu[i] *= drift_scales[digit[static_cast<std::size_t>(space.label(i).regime)]];
        }
        FitReport r = fit_em_viterbi(SwitchingARModel(model0.physics(), std::move(p)), series, opts);
        if (!best || r.loglik_trace.back() > best->loglik_trace.back()) best = std::move(r);
    }
    return std::move(*best);
}

// =============================================================================
// Baum-Welch
// =============================================================================

BaumWelchStep baum_welch_step(const SwitchingARModel& model, const ObservationSeries& series,
                              const FitOptions& opts) {
    opts.validate();
    Posteriors post = forward_backward(model, series);
    MStep m = guarded_m_step(model, series, post.posterior.q, post.expected_transitions, opts);
    return {std::move(m.model), post.log_evidence, std::move(m.starved)};
}

SwitchingARModel fit_baum_welch_step(const SwitchingARModel& model,
                                     const ObservationSeries& series, const FitOptions& opts) {
    return baum_welch_step(model, series, opts).model;
}

}  // namespace co2occ
