#include <catch2/catch.hpp>

#include "ettreg/estimator.hpp"
#include "ettreg/rng.hpp"

#include <Eigen/Eigenvalues>

using namespace ettreg;

namespace {

LtiModel double_integrator(double ts) {
    LtiModel m;
    m.A = Eigen::MatrixXd{{1.0, ts}, {0.0, 1.0}};
    m.B = Eigen::MatrixXd{{0.5 * ts * ts}, {ts}};
    m.C = Eigen::MatrixXd{{0.0, 1.0}};
    m.Q = Eigen::MatrixXd{{2.5e-9, 5.0e-7}, {5.0e-7, 1.0e-4}};
    m.R = Eigen::MatrixXd{{0.1}};
    m.ts = ts;
    m.check();
    return m;
}

// Textbook Kalman step on full measurements; the reference the modified
// filter must match when every channel is received.
EstimatorState textbook_step(const LtiModel& m, const EstimatorState& est,
                             const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
    const Eigen::VectorXd xm = m.A * est.xhat + m.B * u;
    const Eigen::MatrixXd pm = m.A * est.P * m.A.transpose() + m.Q;
    const Eigen::MatrixXd s = m.C * pm * m.C.transpose() + m.R;
    const Eigen::MatrixXd k = pm * m.C.transpose() * s.inverse();
    EstimatorState out;
    out.xhat = xm + k * (y - m.C * xm);
    out.P = (Eigen::MatrixXd::Identity(2, 2) - k * m.C) * pm;
    return out;
}

} // namespace

TEST_CASE("prediction step", "[estimator]") {
    const LtiModel m = double_integrator(0.01);
    EstimatorState est{Eigen::VectorXd{{0.0, 30.0}}, Eigen::MatrixXd::Zero(2, 2)};
    const auto [xm, pm] = kf_predict(m, est, Eigen::VectorXd::Zero(1));
    CHECK(xm[0] == Approx(0.3));
    CHECK(xm[1] == Approx(30.0));

    LtiModel no_noise = m;
    no_noise.Q.setZero();
    const auto [xm2, pm2] = kf_predict(no_noise, est, Eigen::VectorXd::Zero(1));
    CHECK(pm2.norm() == 0.0);

    CHECK_THROWS_AS(kf_predict(m, est, Eigen::VectorXd::Zero(3)),
                    std::invalid_argument);
}

TEST_CASE("predicted covariance matches dense arithmetic", "[estimator]") {
    CounterRng rng(42, 1);
    for (std::uint64_t t = 0; t < 200; ++t) {
        LtiModel m = double_integrator(0.01);
        Eigen::MatrixXd a(2, 2), p(2, 2);
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                a(i, j) = 2.0 * rng.uniform01(8 * t + 2 * i + j) - 1.0;
                p(i, j) = rng.uniform01(8 * t + 4 + 2 * i + j);
            }
        }
        p = (0.5 * (p + p.transpose())).eval();
        p += 2.0 * Eigen::MatrixXd::Identity(2, 2);  // make it PSD
        m.A = a;
        EstimatorState est{Eigen::VectorXd::Zero(2), p};
        const auto [xm, pm] = kf_predict(m, est, Eigen::VectorXd::Zero(1));
        Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(2, 2);
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                for (int k = 0; k < 2; ++k) {
                    for (int l = 0; l < 2; ++l) {
                        expect(i, j) += a(i, k) * p(k, l) * a(j, l);
                    }
                }
            }
        }
        expect += m.Q;
        REQUIRE((pm - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("untriggered channels inflate the measurement covariance", "[estimator]") {
    const LtiModel m = double_integrator(0.01);
    EstimatorState est{Eigen::VectorXd{{0.0, 30.0}},
                       Eigen::MatrixXd::Identity(2, 2)};
    const auto [xm, pm] = kf_predict(m, est, Eigen::VectorXd::Zero(1));

    // not received with delta = 0.5: gain must match a textbook update with
    // R replaced by R + 0.25/3 and y set to the prediction
    LtiModel inflated = m;
    inflated.R(0, 0) += 0.25 / 3.0;
    const Eigen::MatrixXd s =
        inflated.C * pm * inflated.C.transpose() + inflated.R;
    const Eigen::MatrixXd k_expect = pm * inflated.C.transpose() * s.inverse();
    const Eigen::MatrixXd p_expect =
        (Eigen::MatrixXd::Identity(2, 2) - k_expect * inflated.C) * pm;

    const EstimatorState updated = kf_update(
        m, xm, pm, {false},
        Eigen::VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN()),
        Eigen::VectorXd::Constant(1, 0.5));
    CHECK((updated.xhat - xm).norm() == Approx(0.0).margin(1e-15));
    CHECK((updated.P - 0.5 * (p_expect + p_expect.transpose())).norm() ==
          Approx(0.0).margin(1e-12));

    // a received channel must carry a value
    CHECK_THROWS_AS(
        kf_update(m, xm, pm, {true},
                  Eigen::VectorXd::Constant(
                      1, std::numeric_limits<double>::quiet_NaN()),
                  Eigen::VectorXd::Zero(1)),
        std::invalid_argument);
}

TEST_CASE("all channels received equals the textbook filter", "[estimator]") {
    const LtiModel m = double_integrator(0.01);
    CounterRng rng(42, 2);
    EstimatorState a{Eigen::VectorXd{{0.0, 30.0}},
                     0.01 * Eigen::MatrixXd::Identity(2, 2)};
    EstimatorState b = a;
    for (std::uint64_t t = 0; t < 500; ++t) {
        const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, rng.normal(3 * t));
        const Eigen::VectorXd y =
            Eigen::VectorXd::Constant(1, 30.0 + rng.normal(3 * t + 1));
        const auto [xm, pm] = kf_predict(m, a, u);
        a = kf_update(m, xm, pm, {true}, y, Eigen::VectorXd::Zero(1));
        b = textbook_step(m, b, u, y);
        REQUIRE((a.xhat - b.xhat).norm() < 1e-10);
        REQUIRE((a.P - b.P).norm() < 1e-10);
    }
}

TEST_CASE("zero-threshold miss keeps the prior state", "[estimator]") {
    const LtiModel m = double_integrator(0.01);
    EstimatorState est{Eigen::VectorXd{{1.0, 2.0}},
                       0.5 * Eigen::MatrixXd::Identity(2, 2)};
    const auto [xm, pm] = kf_predict(m, est, Eigen::VectorXd::Zero(1));
    const EstimatorState updated =
        kf_update(m, xm, pm, {false}, Eigen::VectorXd::Zero(1),
                  Eigen::VectorXd::Zero(1));
    CHECK((updated.xhat - xm).norm() == Approx(0.0).margin(1e-15));
}

TEST_CASE("covariance stays symmetric positive semidefinite", "[estimator]") {
    const LtiModel m = double_integrator(0.01);
    CounterRng rng(42, 3);
    EstimatorState est{Eigen::VectorXd{{0.0, 30.0}},
                       Eigen::MatrixXd::Identity(2, 2)};
    for (std::uint64_t t = 0; t < 10000; ++t) {
        const auto [xm, pm] = kf_predict(m, est, Eigen::VectorXd::Zero(1));
        const bool received = rng.uniform01(2 * t) < 0.3;
        const Eigen::VectorXd y =
            Eigen::VectorXd::Constant(1, 30.0 + rng.normal(2 * t + 1));
        est = kf_update(m, xm, pm, {received}, y,
                        Eigen::VectorXd::Constant(1, 0.4));
        REQUIRE((est.P - est.P.transpose()).norm() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(est.P);
        REQUIRE(eig.eigenvalues().minCoeff() > -1e-9);
    }
}

TEST_CASE("update errors", "[estimator]") {
    CHECK(innovation_error(12.0, 15.0) == 3.0);
    CHECK(innovation_error(7.5, 7.5) == 0.0);
    CHECK(innovation_error(2.0, 5.0) == innovation_error(5.0, 2.0));

    CHECK(sod_error(12.0, 15.0) == 3.0);
    CHECK(sod_error(7.5, 7.5) == 0.0);
    CHECK(sod_error(2.0, 5.0) == sod_error(5.0, 2.0));
}

TEST_CASE("trigger condition", "[estimator]") {
    CHECK(trigger_check(3.0, 2.0));
    CHECK_FALSE(trigger_check(0.0, 0.0));  // strict inequality
    CHECK_FALSE(trigger_check(1e9, std::numeric_limits<double>::infinity()));
    CHECK_THROWS_AS(trigger_check(1.0, -0.5), std::invalid_argument);
}

TEST_CASE("predicted state box", "[estimator]") {
    LtiModel m = double_integrator(0.01);
    m.Q.setZero();
    const std::vector<std::string> names{"x1", "x2"};

    SECTION("degenerate when thresholds and covariance vanish") {
        EstimatorState est{Eigen::VectorXd{{1.0, 2.0}}, Eigen::MatrixXd::Zero(2, 2)};
        const auto box = predict_state_interval(m, est, names, {},
                                                Eigen::VectorXd::Zero(1), 0.0);
        CHECK(box.at("x1").degenerate());
        CHECK(box.at("x1").lo == Approx(1.0 + 0.01 * 2.0));
        CHECK(box.at("x2") == Interval(2.0));
    }

    SECTION("identity dynamics reproduce the threshold box") {
        LtiModel id = m;
        id.A = Eigen::MatrixXd::Identity(2, 2);
        EstimatorState est{Eigen::VectorXd{{3.0, 1.0}}, Eigen::MatrixXd::Zero(2, 2)};
        const auto box = predict_state_interval(
            id, est, names, {{"x1", 1.0 / 3.0}, {"x2", 1.0 / 3.0}},
            Eigen::VectorXd::Zero(1), 0.0);
        CHECK(box.at("x1").lo == Approx(8.0 / 3.0));
        CHECK(box.at("x1").hi == Approx(10.0 / 3.0));
        CHECK(box.at("x2").lo == Approx(2.0 / 3.0));
        CHECK(box.at("x2").hi == Approx(4.0 / 3.0));
    }

    SECTION("every corner of the input box lands inside the output box") {
        CounterRng rng(42, 4);
        for (std::uint64_t t = 0; t < 500; ++t) {
            LtiModel rm = m;
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    rm.A(i, j) = 3.0 * rng.uniform01(8 * t + 2 * i + j) - 1.5;
                }
            }
            EstimatorState est{
                Eigen::VectorXd{{rng.uniform01(8 * t + 4), rng.uniform01(8 * t + 5)}},
                Eigen::MatrixXd::Zero(2, 2)};
            const double d1 = rng.uniform01(8 * t + 6);
            const double d2 = rng.uniform01(8 * t + 7);
            const auto box =
                predict_state_interval(rm, est, names, {{"x1", d1}, {"x2", d2}},
                                       Eigen::VectorXd::Zero(1), 0.0);
            for (double s1 : {-1.0, 1.0}) {
                for (double s2 : {-1.0, 1.0}) {
                    const Eigen::VectorXd corner =
                        rm.A * Eigen::VectorXd{{est.xhat[0] + s1 * d1,
                                                est.xhat[1] + s2 * d2}};
                    for (int i = 0; i < 2; ++i) {
                        REQUIRE(corner[i] >= box.at(names[i]).lo - 1e-12);
                        REQUIRE(corner[i] <= box.at(names[i]).hi + 1e-12);
                    }
                }
            }
        }
    }
}

TEST_CASE("three-sigma prediction boxes contain the realized state", "[estimator]") {
    // closed filtering loop on a noisy double integrator: the next true
    // state must fall inside the z=3 box nearly always
    LtiModel m = double_integrator(0.01);
    m.R(0, 0) = 0.02;
    CounterRng process(99, 10), measure(99, 11);
    const std::vector<std::string> names{"pos", "vel"};

    Eigen::VectorXd truth{{0.0, 30.0}};
    EstimatorState est{truth, 0.01 * Eigen::MatrixXd::Identity(2, 2)};
    const Eigen::Matrix2d l = [&] {
        Eigen::Matrix2d chol = Eigen::Matrix2d::Zero();
        chol(0, 0) = std::sqrt(m.Q(0, 0));
        chol(1, 0) = m.Q(1, 0) / chol(0, 0);
        chol(1, 1) = std::sqrt(std::max(m.Q(1, 1) - chol(1, 0) * chol(1, 0), 0.0));
        return chol;
    }();

    long contained = 0;
    const long steps = 20000;
    for (long t = 1; t <= steps; ++t) {
        const auto box = predict_state_interval(m, est, names, {},
                                                Eigen::VectorXd::Zero(1), 3.0);
        const double n0 = process.normal(2 * t);
        const double n1 = process.normal(2 * t + 1);
        truth = m.A * truth;
        truth[0] += l(0, 0) * n0;
        truth[1] += l(1, 0) * n0 + l(1, 1) * n1;
        if (box.at("pos").contains(truth[0]) && box.at("vel").contains(truth[1])) {
            contained += 1;
        }
        const Eigen::VectorXd y = Eigen::VectorXd::Constant(
            1, truth[1] + std::sqrt(m.R(0, 0)) * measure.normal(t));
        const auto [xm, pm] = kf_predict(m, est, Eigen::VectorXd::Zero(1));
        est = kf_update(m, xm, pm, {true}, y, Eigen::VectorXd::Zero(1));
    }
    CHECK(static_cast<double>(contained) / steps >= 0.99);
}
