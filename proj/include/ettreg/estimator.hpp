#ifndef ETTREG_ESTIMATOR_HPP
#define ETTREG_ESTIMATOR_HPP

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ettreg/formula.hpp"

namespace ettreg {

/// Discrete-time linear model x' = Ax + Bu + w, y = Cx + r with process and
/// measurement noise covariances Q and R.
struct LtiModel {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
    double ts = 0.0;

    int state_dim() const { return static_cast<int>(A.rows()); }
    int output_dim() const { return static_cast<int>(C.rows()); }

    void check() const {
        if (A.rows() != A.cols() || B.rows() != A.rows() ||
            C.cols() != A.cols() || Q.rows() != A.rows() ||
            Q.cols() != A.cols() || R.rows() != C.rows() ||
            R.cols() != C.rows()) {
            throw std::invalid_argument("model dimensions are inconsistent");
        }
    }
};

struct EstimatorState {
    Eigen::VectorXd xhat;
    Eigen::MatrixXd P;
};

/// One event-triggered sensor: remembers the last transmitted value, the
/// current threshold and how many events it has fired.
struct SensorChannel {
    std::string signal;
    double last_sent = 0.0;
    long last_trigger_step = -1;
    double delta = 0.0;
    long events = 0;
};

inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> kf_predict(
    const LtiModel& model, const EstimatorState& est, const Eigen::VectorXd& u) {
    if (est.xhat.size() != model.A.cols() || u.size() != model.B.cols()) {
        throw std::invalid_argument("prediction dimensions are inconsistent");
    }
    Eigen::VectorXd xhat_minus = model.A * est.xhat + model.B * u;
    Eigen::MatrixXd p_minus = model.A * est.P * model.A.transpose() + model.Q;
    return {std::move(xhat_minus), std::move(p_minus)};
}

/// Measurement update that folds untriggered channels back in: a missing
/// measurement is replaced by its prediction and its noise variance is
/// inflated by delta^2/3, the variance of a uniform distribution over the
/// threshold band. Entries of y for non-received channels are ignored.
inline EstimatorState kf_update(const LtiModel& model,
                                const Eigen::VectorXd& xhat_minus,
                                const Eigen::MatrixXd& p_minus,
                                const std::vector<bool>& received,
                                const Eigen::VectorXd& y,
                                const Eigen::VectorXd& delta) {
    const int m = model.output_dim();
    if (static_cast<int>(received.size()) != m || y.size() != m ||
        delta.size() != m) {
        throw std::invalid_argument("update dimensions are inconsistent");
    }
    const Eigen::VectorXd yhat = model.C * xhat_minus;
    Eigen::VectorXd y_eff(m);
    Eigen::MatrixXd r_eff = model.R;
    for (int i = 0; i < m; ++i) {
        if (received[i]) {
            if (std::isnan(y[i])) {
                throw std::invalid_argument(
                    "received channel carries no measurement");
            }
            y_eff[i] = y[i];
        } else {
            if (delta[i] < 0.0) {
                throw std::invalid_argument("negative threshold in update");
            }
            y_eff[i] = yhat[i];
            if (std::isfinite(delta[i])) {
                r_eff(i, i) += delta[i] * delta[i] / 3.0;
            }
        }
    }
    const Eigen::MatrixXd s = model.C * p_minus * model.C.transpose() + r_eff;
    const Eigen::MatrixXd k = p_minus * model.C.transpose() * s.inverse();
    EstimatorState out;
    out.xhat = xhat_minus + k * (y_eff - yhat);
    const Eigen::MatrixXd identity =
        Eigen::MatrixXd::Identity(model.state_dim(), model.state_dim());
    out.P = (identity - k * model.C) * p_minus;
    out.P = 0.5 * (out.P + out.P.transpose());  // keep symmetric
    return out;
}

/// Innovation update error |predicted - measured|.
inline double innovation_error(double yhat_pred, double y) {
    return std::abs(yhat_pred - y);
}

/// Send-on-delta update error |measured - last transmitted|.
inline double sod_error(double y_last_tx, double y) {
    return std::abs(y - y_last_tx);
}

/// Fires strictly above the threshold; an infinite threshold never fires.
inline bool trigger_check(double e, double delta) {
    if (delta < 0.0 || std::isnan(delta)) {
        throw std::invalid_argument("threshold must be nonnegative");
    }
    return e > delta;
}

/// One-step-ahead box of possible state values: the threshold-induced box
/// around the estimate pushed through the dynamics, widened per state by
/// z_sigma predicted standard deviations to cover process noise.
inline StateIntervalVector predict_state_interval(
    const LtiModel& model, const EstimatorState& est,
    const std::vector<std::string>& state_names,
    const std::map<std::string, double>& delta_now, const Eigen::VectorXd& u,
    double z_sigma) {
    const int n = model.state_dim();
    if (static_cast<int>(state_names.size()) != n) {
        throw std::invalid_argument("state name count mismatch");
    }
    const Eigen::VectorXd drift = model.B * u;
    const Eigen::MatrixXd p_minus =
        model.A * est.P * model.A.transpose() + model.Q;

    std::vector<Interval> box(n);
    for (int i = 0; i < n; ++i) {
        auto it = delta_now.find(state_names[i]);
        const double radius =
            it == delta_now.end() || !std::isfinite(it->second) ? 0.0
                                                                : it->second;
        box[i] = make_interval(est.xhat[i], radius);
    }
    StateIntervalVector out;
    for (int i = 0; i < n; ++i) {
        Interval acc(drift[i]);
        for (int j = 0; j < n; ++j) {
            acc = acc + scale(model.A(i, j), box[j]);
        }
        const double inflate = z_sigma * std::sqrt(std::max(p_minus(i, i), 0.0));
        out[state_names[i]] = Interval(acc.lo - inflate, acc.hi + inflate);
    }
    return out;
}

} // namespace ettreg

#endif
