// Domain types for CO2-based occupancy estimation.
//
// Hidden states are (occupancy, ventilation regime) pairs. Each state i
// drives the excess-CO2 recursion
//
//     y_t = c(i) * y_{t-1} + mu(i) + w_t,   w_t ~ N(0, sigma(i)^2)
//
// where c(i) depends only on the regime's ventilation time and mu(i) on the
// number of people present.
#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace co2occ {

// =============================================================================
// Errors
// =============================================================================

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// File missing, unreadable, unwritable.
class IoError : public Error {
  public:
    using Error::Error;
};

/// Input violates a documented invariant; message names the offending field.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// Degenerate numerics (zero variance, all states starved, impossible path).
class NumericalError : public Error {
  public:
    using Error::Error;
};

// =============================================================================
// Dense matrix
// =============================================================================

/// Row-major dense matrix of doubles. Only what the HMM recursions need.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<const double> data() const { return data_; }

    bool operator==(const Matrix&) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// =============================================================================
// Physics
// =============================================================================

/// Physical parameters of a single ventilated room.
struct PhysicsConfig {
    double ambient_co2 = 400.0;           ///< outdoor concentration x0 (ppm)
    std::vector<double> regimes{100.0};   ///< ventilation time per regime (minutes)
    double person_rate = 5.0;             ///< CO2 generation per person (ppm/minute)
    double dt = 1.0;                      ///< sampling interval (minutes)
    int max_occupancy = 4;

    std::size_t num_regimes() const { return regimes.size(); }

    /// Throws ValidationError naming the first failed field.
    void validate() const;

    /// exp(-dt / tau_k): per-step decay factor of regime k.
    double decay(std::size_t regime) const;

    /// Per-step CO2 added by `occupancy` people under regime k:
    /// (1 - exp(-dt/tau)) * tau * r * n, the exact integral of the ODE over one step.
    double drift(int occupancy, std::size_t regime) const;
};

// =============================================================================
// State space
// =============================================================================

struct StateLabel {
    int occupancy = 0;
    int regime = 0;

    auto operator<=>(const StateLabel&) const = default;
};

/// Enumeration of hidden states, occupancy-major then regime:
/// index = occupancy * num_regimes + regime.
class StateSpace {
  public:
    StateSpace(int max_occupancy, std::size_t num_regimes);

    std::size_t size() const { return labels_.size(); }
    int max_occupancy() const { return max_occupancy_; }
    std::size_t num_regimes() const { return num_regimes_; }

    StateLabel label(std::size_t index) const;
    std::size_t index(StateLabel label) const;

    std::span<const StateLabel> labels() const { return labels_; }

    bool operator==(const StateSpace&) const = default;

  private:
    int max_occupancy_;
    std::size_t num_regimes_;
    std::vector<StateLabel> labels_;
};

StateSpace build_state_space(const PhysicsConfig& physics);

// =============================================================================
// Switching AR model
// =============================================================================

struct ModelParams {
    std::vector<double> c;      ///< AR coefficient per state, in (0, 1)
    std::vector<double> mu;     ///< drift per state (ppm)
    std::vector<double> sigma;  ///< noise sd per state (ppm), > 0
    Matrix trans;               ///< N x N row-stochastic, trans(from, to)
    std::vector<double> init;   ///< initial distribution over states
};

/// Immutable switching AR(1) model with Markov regime. The constructor
/// enforces every invariant on the parameters.
class SwitchingARModel {
  public:
    SwitchingARModel(PhysicsConfig physics, ModelParams params);

    const PhysicsConfig& physics() const { return physics_; }
    const StateSpace& space() const { return space_; }
    const ModelParams& params() const { return params_; }
    std::size_t num_states() const { return space_.size(); }

    double c(std::size_t i) const { return params_.c[i]; }
    double mu(std::size_t i) const { return params_.mu[i]; }
    double sigma(std::size_t i) const { return params_.sigma[i]; }
    double trans(std::size_t from, std::size_t to) const { return params_.trans(from, to); }
    double init(std::size_t i) const { return params_.init[i]; }

  private:
    PhysicsConfig physics_;
    StateSpace space_;
    ModelParams params_;
};

/// Check stochastic-matrix / distribution invariants (tolerance 1e-12).
void validate_distribution(std::span<const double> p, const std::string& what);
void validate_transition_matrix(const Matrix& trans, std::size_t n, const std::string& what);

/// Physics-derived starting point: c(i) = exp(-dt/tau_k), mu(i) = drift(n, k),
/// sigma(i) = sigma0, trans with `self_stay` on the diagonal and the remainder
/// spread uniformly, uniform init.
SwitchingARModel init_from_physics(const PhysicsConfig& physics, const StateSpace& space,
                                   double sigma0, double self_stay = 0.95);

// =============================================================================
// Observations and decoded output
// =============================================================================

/// Uniformly sampled excess-CO2 series y_0..y_T.
class ObservationSeries {
  public:
    ObservationSeries(std::vector<double> timestamps, std::vector<double> y);

    static ObservationSeries uniform(double dt, std::vector<double> y, double t0 = 0.0);

    std::size_t size() const { return y_.size(); }
    /// Number of transitions T = size() - 1.
    std::size_t steps() const { return y_.size() - 1; }
    double dt() const { return dt_; }

    std::span<const double> y() const { return y_; }
    std::span<const double> timestamps() const { return timestamps_; }
    double operator[](std::size_t t) const { return y_[t]; }

  private:
    std::vector<double> timestamps_;
    std::vector<double> y_;
    double dt_ = 1.0;
};

/// Hard state sequence S_1..S_T. Element t (0-based) explains y_t -> y_{t+1}.
struct DecodedPath {
    std::vector<std::size_t> states;
    std::vector<int> occupancy;
    std::vector<int> regime;

    std::size_t size() const { return states.size(); }
};

DecodedPath make_path(const StateSpace& space, std::vector<std::size_t> states);

/// Smoothed posteriors q_t(i) = P(S_t = i | Y), T x N, rows sum to 1.
struct PosteriorMatrix {
    Matrix q;

    std::size_t steps() const { return q.rows(); }
    std::size_t num_states() const { return q.cols(); }
};

}  // namespace co2occ
