// Parameter learning for the switching AR(1) model.
//
// Hard fitting (EM-Viterbi, a.k.a. segmental k-means) alternates a Viterbi
// decode with maximum-likelihood updates on the decoded segmentation. Soft
// fitting (Baum-Welch) uses forward-backward posteriors as regression
// weights. Both share the same weighted M-step.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "co2occ/core.hpp"

namespace co2occ {

struct FitOptions {
    int max_iters = 50;
    double tol = 1e-9;                  ///< relative complete-data log-likelihood change
    bool tie_c_by_regime = true;        ///< one AR coefficient per ventilation regime
    bool tie_sigma_global = true;       ///< one noise sd shared by every state
    double min_state_weight = 1.0;      ///< effective count below which a state is starved
    double transition_smoothing = 0.1;  ///< pseudo-count added to every transition
    /// Starved states take mu = n * (per-person drift fitted on the visited
    /// states of the same regime) instead of keeping their previous value.
    bool extrapolate_starved = false;
    /// Transitions estimated as independent occupancy and regime chains,
    /// trans((n,k) -> (n',k')) = P_occ(n -> n') * P_reg(k -> k'), instead of a
    /// free N x N matrix.
    bool factorize_transitions = true;
    /// Drift constrained to mu(n, k) = n * d_k with c shared per regime, so
    /// occupancy levels stay equally spaced and anchored at zero.
    bool linear_drift = false;

    void validate() const;
};

struct FitReport {
    int iterations = 0;
    std::vector<double> loglik_trace;  ///< complete-data log-likelihood after each M-step
    bool converged = false;
    SwitchingARModel final_model;
    DecodedPath final_path;
    std::vector<std::size_t> starved_states;  ///< starved in the last M-step
    std::vector<std::string> warnings;
};

struct ArCoefficients {
    double c = 0.0;
    double mu = 0.0;
};

/// Least-squares AR(1)-with-drift fit on one segment y_0..y_m:
/// c = Cov(y_t, y_{t-1}) / Var(y_{t-1}), mu = mean(y_t) - c * mean(y_{t-1}).
/// Throws ValidationError for fewer than 3 samples and NumericalError when the
/// lagged series has zero variance.
ArCoefficients estimate_ar_single(std::span<const double> segment);

/// Weighted least squares for one state: solves the 2x2 normal equations
/// E [c mu]^T = D with
///   D = [sum w y_t y_{t-1}, sum w y_t]^T,
///   E = [[sum w y_{t-1}^2, sum w y_{t-1}], [sum w y_{t-1}, sum w]].
/// `weights[t]` weighs transition y_t -> y_{t+1}. Returns nullopt (state
/// starved) when the total weight is below `min_weight` or E is singular
/// (condition number above 1e12).
std::optional<ArCoefficients> weighted_ar_fit(const ObservationSeries& series,
                                              std::span<const double> weights,
                                              double min_weight = 0.0);

/// weighted_ar_fit with weights q_t(i).
std::optional<ArCoefficients> weighted_ls_update(const ObservationSeries& series,
                                                 const PosteriorMatrix& q, std::size_t i,
                                                 double min_weight = 0.0);

/// One-hot T x N weight matrix for a hard path.
Matrix assignment_weights(const DecodedPath& path, std::size_t num_states);

/// Noise sd per state: sqrt of the weighted mean squared residual under
/// `model`'s c and mu. States whose weight does not exceed `min_weight` keep
/// their current sigma. Pooled across states when `tie_global`. Floored at 1e-6.
std::vector<double> update_sigma(const ObservationSeries& series, const Matrix& weights,
                                 const SwitchingARModel& model, bool tie_global,
                                 double min_weight = 0.0);
std::vector<double> update_sigma(const ObservationSeries& series, const DecodedPath& path,
                                 const SwitchingARModel& model, bool tie_global);
std::vector<double> update_sigma(const ObservationSeries& series, const PosteriorMatrix& q,
                                 const SwitchingARModel& model, bool tie_global);

/// Row-normalised (counts + alpha). Rows with no mass become uniform.
Matrix transitions_from_counts(const Matrix& counts, double alpha);

/// Lambda(i,j) = (count(i->j) + alpha) / (sum_j count(i->j) + N alpha).
Matrix update_transitions(const DecodedPath& path, std::size_t num_states, double alpha);

/// Kronecker-factored transitions from (possibly expected) counts: occupancy
/// and regime counts are marginalised from `counts`, smoothed with `alpha`
/// and normalised separately.
Matrix factorized_transitions(const Matrix& counts, const StateSpace& space, double alpha);

/// Robust noise sd of a piecewise AR(1) trace with c close to 1:
/// 1.4826 * MAD(second differences) / sqrt(2), floored at 1e-6. Second
/// differences cancel a constant drift, and the median ignores change points.
double estimate_noise_scale(const ObservationSeries& series);

/// EM-Viterbi: Viterbi decode, then hard-assignment regression, sigma and
/// transition updates, until the complete-data log-likelihood stops improving
/// (relative change below `tol`), the path repeats, or max_iters is reached.
/// The initial distribution is kept fixed. Each M-step block is only accepted
/// if it does not lower the complete-data log-likelihood, so the trace is
/// non-decreasing.
FitReport fit_em_viterbi(const SwitchingARModel& model0, const ObservationSeries& series,
                         const FitOptions& opts = {});

/// EM-Viterbi from several starts: the drift of every regime in `model0` is
/// scaled independently by each entry of `drift_scales` (|scales|^K starts for
/// K regimes) and the fit with the highest final complete-data
/// log-likelihood is returned. Meant for linear_drift, where occupancy scale
/// shows up in the likelihood.
FitReport fit_em_viterbi_restarts(const SwitchingARModel& model0, const ObservationSeries& series,
                                  std::span<const double> drift_scales,
                                  const FitOptions& opts = {});

struct BaumWelchStep {
    SwitchingARModel model;
    double log_evidence_before = 0.0;  ///< log P(Y | input model)
    std::vector<std::size_t> starved_states;
};

/// One soft EM iteration: forward-backward posteriors, weighted regression per
/// state (pooled per regime when tie_c_by_regime), soft sigma, and transitions
/// from expected counts. Never lowers the expected complete-data
/// log-likelihood, hence never lowers the evidence when smoothing is 0.
BaumWelchStep baum_welch_step(const SwitchingARModel& model, const ObservationSeries& series,
                              const FitOptions& opts = {});

SwitchingARModel fit_baum_welch_step(const SwitchingARModel& model,
                                     const ObservationSeries& series,
                                     const FitOptions& opts = {});

}  // namespace co2occ
