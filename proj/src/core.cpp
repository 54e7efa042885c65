#include "co2occ/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace co2occ {

namespace {

constexpr double kStochasticTol = 1e-12;
constexpr double kSpacingTol = 1e-9;

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

}  // namespace

// =============================================================================
// PhysicsConfig
// =============================================================================

void PhysicsConfig::validate() const {
    if (!std::isfinite(ambient_co2) || ambient_co2 < 0.0) {
        fail("physics.ambient_co2 must be finite and >= 0");
    }
    if (regimes.empty()) {
        fail("physics.regimes must list at least one ventilation time");
    }
    for (std::size_t k = 0; k < regimes.size(); ++k) {
        if (!std::isfinite(regimes[k]) || regimes[k] <= 0.0) {
            std::ostringstream os;
            os << "physics.regimes: ventilation time tau[" << k << "] = " << regimes[k]
               << " must be > 0";
            fail(os.str());
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (regimes[j] == regimes[k]) {
                fail("physics.regimes: ventilation times must be distinct");
            }
        }
    }
    if (!std::isfinite(person_rate) || person_rate <= 0.0) {
        fail("physics.person_rate must be > 0");
    }
    if (!std::isfinite(dt) || dt <= 0.0) {
        fail("physics.dt must be > 0");
    }
    if (max_occupancy < 0) {
        fail("physics.max_occupancy must be >= 0");
    }
}

double PhysicsConfig::decay(std::size_t regime) const {
    return std::exp(-dt / regimes.at(regime));
}

double PhysicsConfig::drift(int occupancy, std::size_t regime) const {
    const double tau = regimes.at(regime);
    return -std::expm1(-dt / tau) * tau * person_rate * occupancy;
}

// =============================================================================
// StateSpace
// =============================================================================

StateSpace::StateSpace(int max_occupancy, std::size_t num_regimes)
    : max_occupancy_(max_occupancy), num_regimes_(num_regimes) {
    if (max_occupancy < 0) fail("state space: max_occupancy must be >= 0");
    if (num_regimes == 0) fail("state space: at least one regime required");
    labels_.reserve(static_cast<std::size_t>(max_occupancy + 1) * num_regimes);
    for (int n = 0; n <= max_occupancy; ++n) {
        for (std::size_t k = 0; k < num_regimes; ++k) {
            labels_.push_back({n, static_cast<int>(k)});
        }
    }
}

StateLabel StateSpace::label(std::size_t index) const {
    if (index >= labels_.size()) {
        std::ostringstream os;
        os << "state index " << index << " out of range [0, " << labels_.size() << ")";
        throw ValidationError(os.str());
    }
    return labels_[index];
}

std::size_t StateSpace::index(StateLabel label) const {
    if (label.occupancy < 0 || label.occupancy > max_occupancy_ || label.regime < 0 ||
        static_cast<std::size_t>(label.regime) >= num_regimes_) {
        std::ostringstream os;
        os << "state (occupancy " << label.occupancy << ", regime " << label.regime
           << ") outside state space (max_occupancy " << max_occupancy_ << ", "
           << num_regimes_ << " regimes)";
        throw ValidationError(os.str());
    }
    return static_cast<std::size_t>(label.occupancy) * num_regimes_ +
           static_cast<std::size_t>(label.regime);
}

StateSpace build_state_space(const PhysicsConfig& physics) {
    physics.validate();
    return StateSpace(physics.max_occupancy, physics.num_regimes());
}

// =============================================================================
// SwitchingARModel
// =============================================================================

void validate_distribution(std::span<const double> p, const std::string& what) {
    double sum = 0.0;
    for (double v : p) {
        if (!std::isfinite(v) || v < 0.0) fail(what + ": entries must be finite and >= 0");
        sum += v;
    }
    if (std::abs(sum - 1.0) > kStochasticTol) {
        std::ostringstream os;
        os.precision(17);
        os << what << ": must sum to 1 (got " << sum << ")";
        fail(os.str());
    }
}

void validate_transition_matrix(const Matrix& trans, std::size_t n, const std::string& what) {
    if (trans.rows() != n || trans.cols() != n) {
        std::ostringstream os;
        os << what << ": expected " << n << "x" << n << " matrix, got " << trans.rows() << "x"
           << trans.cols();
        fail(os.str());
    }
    for (std::size_t r = 0; r < n; ++r) {
        validate_distribution(trans.row(r), what + " row " + std::to_string(r));
    }
}

SwitchingARModel::SwitchingARModel(PhysicsConfig physics, ModelParams params)
    : physics_(std::move(physics)),
      space_(build_state_space(physics_)),
      params_(std::move(params)) {
    const std::size_t n = space_.size();
    auto check_len = [n](std::size_t len, const char* field) {
        if (len != n) {
            std::ostringstream os;
            os << "model." << field << ": expected " << n << " entries, got " << len;
            fail(os.str());
        }
    };
    check_len(params_.c.size(), "c");
    check_len(params_.mu.size(), "mu");
    check_len(params_.sigma.size(), "sigma");
    check_len(params_.init.size(), "init");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(params_.c[i] > 0.0 && params_.c[i] < 1.0)) {
            fail("model.c[" + std::to_string(i) + "] must lie in (0, 1)");
        }
        if (!std::isfinite(params_.mu[i])) {
            fail("model.mu[" + std::to_string(i) + "] must be finite");
        }
        if (!(params_.sigma[i] > 0.0) || !std::isfinite(params_.sigma[i])) {
            fail("model.sigma[" + std::to_string(i) + "] must be > 0");
        }
    }
    validate_transition_matrix(params_.trans, n, "model.trans");
    validate_distribution(params_.init, "model.init");
}

SwitchingARModel init_from_physics(const PhysicsConfig& physics, const StateSpace& space,
                                   double sigma0, double self_stay) {
    physics.validate();
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) fail("sigma0 must be > 0");
    if (!(self_stay > 0.0 && self_stay < 1.0)) fail("self_stay must lie in (0, 1)");
    if (space.max_occupancy() != physics.max_occupancy ||
        space.num_regimes() != physics.num_regimes()) {
        fail("state space does not match physics config");
    }

    const std::size_t n = space.size();
    ModelParams p;
    p.c.resize(n);
    p.mu.resize(n);
    p.sigma.assign(n, sigma0);
    for (std::size_t i = 0; i < n; ++i) {
        const StateLabel s = space.label(i);
        const auto k = static_cast<std::size_t>(s.regime);
        p.c[i] = physics.decay(k);
        p.mu[i] = physics.drift(s.occupancy, k);
    }
    p.trans = Matrix(n, n);
    if (n == 1) {
        p.trans(0, 0) = 1.0;
    } else {
        const double off = (1.0 - self_stay) / static_cast<double>(n - 1);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t col = 0; col < n; ++col) {
                p.trans(r, col) = r == col ? self_stay : off;
            }
        }
    }
    p.init.assign(n, 1.0 / static_cast<double>(n));
    return SwitchingARModel(physics, std::move(p));
}

// =============================================================================
// ObservationSeries
// =============================================================================

ObservationSeries::ObservationSeries(std::vector<double> timestamps, std::vector<double> y)
    : timestamps_(std::move(timestamps)), y_(std::move(y)) {
    if (y_.size() < 2) fail("observation series needs at least 2 samples");
    if (timestamps_.size() != y_.size()) {
        fail("observation series: timestamp and value counts differ");
    }
    for (std::size_t t = 0; t < y_.size(); ++t) {
        if (!std::isfinite(y_[t]) || !std::isfinite(timestamps_[t])) {
            fail("observation series: non-finite value at index " + std::to_string(t));
        }
    }
    dt_ = timestamps_[1] - timestamps_[0];
    if (!(dt_ > 0.0)) fail("observation series: timestamps must increase");
    for (std::size_t t = 1; t < timestamps_.size(); ++t) {
        const double step = timestamps_[t] - timestamps_[t - 1];
        if (std::abs(step - dt_) > kSpacingTol * dt_) {
            fail("observation series: non-uniform spacing at index " + std::to_string(t));
        }
    }
}

ObservationSeries ObservationSeries::uniform(double dt, std::vector<double> y, double t0) {
    if (!(dt > 0.0)) fail("observation series: dt must be > 0");
    std::vector<double> ts(y.size());
    for (std::size_t t = 0; t < ts.size(); ++t) ts[t] = t0 + dt * static_cast<double>(t);
    return ObservationSeries(std::move(ts), std::move(y));
}

DecodedPath make_path(const StateSpace& space, std::vector<std::size_t> states) {
    DecodedPath path;
    path.occupancy.reserve(states.size());
    path.regime.reserve(states.size());
    for (std::size_t s : states) {
        const StateLabel label = space.label(s);
        path.occupancy.push_back(label.occupancy);
        path.regime.push_back(label.regime);
    }
    path.states = std::move(states);
    return path;
}

}  // namespace co2occ
