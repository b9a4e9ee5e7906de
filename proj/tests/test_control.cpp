#include "indilab/control.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace indilab;

namespace {

double max_abs(const auto &m) { return m.cwiseAbs().maxCoeff(); }

Vec6 random6(std::mt19937_64 &g, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Vec6 v;
    for (int i = 0; i < 6; ++i) v(i) = u(g);
    return v;
}

RigidState random_state(std::mt19937_64 &g) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RigidState x;
    x.p = Vec3(u(g), u(g), u(g));
    x.v = Vec3(u(g), u(g), u(g));
    x.R = so3::exp_map(Vec3(u(g), u(g), u(g)) * 3.0, 1.0);
    x.Omega = Vec3(u(g), u(g), u(g)) * 5.0;
    return x;
}

} // namespace

TEST(Gains, Defaults) {
    const Gains k;
    EXPECT_EQ(k.Kp, Vec3(15.5, 35, 16.7));
    EXPECT_EQ(k.Kv, Vec3(9.5, 38, 13.5));
    EXPECT_EQ(k.KR, Vec3(3.2, 3.5, 6.6));
    EXPECT_EQ(k.KOmega, Vec3(14, 15, 26));
    EXPECT_TRUE(k.valid());
    Gains bad = k;
    bad.KR.y() = 0.0;
    EXPECT_FALSE(bad.valid());
}

TEST(VirtualCommands, OnReferenceGivesFeedforward) {
    Reference ref;
    ref.p = Vec3(1, 2, 3);
    ref.v = Vec3(0.1, 0.2, 0.3);
    ref.a = Vec3(-1, 0.5, 0.2);
    ref.R = so3::rot_z(0.3);
    ref.Omega = Vec3(0.1, 0, 0.2);
    ref.Omega_dot = Vec3(0.3, -0.2, 0.1);
    const RigidState x{ref.p, ref.v, ref.R, ref.Omega};
    Vec6 expected;
    expected << ref.a, ref.Omega_dot;
    EXPECT_LE(max_abs(virtual_commands(x, ref, Gains{}) - expected), 1e-15);
}

TEST(VirtualCommands, PositionErrorUsesKp) {
    RigidState x;
    x.p = Vec3(1, 0, 0);
    const Vec6 nu = virtual_commands(x, Reference{}, Gains{});
    EXPECT_EQ(nu.head<3>(), Vec3(-15.5, 0, 0));
    EXPECT_EQ(nu.tail<3>(), Vec3::Zero());
}

TEST(VirtualCommands, AttitudeErrorUsesKR) {
    RigidState x;
    x.R = so3::rot_z(0.2);
    const Vec6 nu = virtual_commands(x, Reference{}, Gains{});
    EXPECT_NEAR(nu(5), -6.6 * std::sin(0.2), 1e-15);
}

TEST(LowPass, Coefficient) {
    // 0.0188496 is 2 pi 30 1e-4 rounded to six digits, hence the loose match.
    EXPECT_NEAR(lowpass_coefficient(30.0, 1e-4), std::exp(-0.0188496), 5e-8);
    EXPECT_NEAR(lowpass_coefficient(30.0, 1e-4), 0.981327, 1e-6);
    EXPECT_NEAR(lowpass_coefficient(30.0, 1e-4), std::exp(-2.0 * 3.141592653589793 * 30.0 * 1e-4), 1e-15);
    const double a60 = lowpass_coefficient(60.0, 1e-4);
    EXPECT_GT(a60, 0.0);
    EXPECT_LT(a60, 1.0);
}

TEST(LowPass, StepResponseIsGeometric) {
    LowPassFilter<3> f(30.0, 1e-4);
    const double a = f.coefficient();
    const Vec3 c(1.0, -2.0, 0.5);
    for (int n = 1; n <= 2000; ++n) {
        const Vec3 y = f.step(c);
        EXPECT_LE(max_abs(y - c * (1.0 - std::pow(a, n))), 1e-12);
    }
}

TEST(LowPass, ZeroInputStaysZeroAndOutputIsBounded) {
    LowPassFilter<6> f(60.0, 1e-4);
    for (int n = 0; n < 100; ++n) EXPECT_EQ(f.step(Vec6::Zero()), Vec6::Zero());
    std::mt19937_64 g(21);
    for (int n = 0; n < 10000; ++n) EXPECT_LE(max_abs(f.step(random6(g, 1.0))), 1.0);
}

TEST(LowPass, SeededFilterHoldsConstant) {
    LowPassFilter<3> f(30.0, 1e-4);
    f.seed(Vec3(1, 2, 3));
    for (int n = 0; n < 100; ++n) EXPECT_EQ(f.step(Vec3(1, 2, 3)), Vec3(1, 2, 3));
    f.reset();
    EXPECT_EQ(f.output(), Vec3::Zero());
}

namespace {

struct FilterRig {
    VehicleParams params;
    AllocationMatrix alloc = build_allocation(params);
};

} // namespace

TEST(FeedbackFilter, ZeroMeasurementsGiveZero) {
    FilterRig rig;
    for (bool seed : {false, true}) {
        FeedbackFilter f(FilterSettings{30, 60, seed}, 1e-4, rig.alloc);
        for (int k = 0; k < 100; ++k) {
            const auto fb = f.step(Vec3::Zero(), Vec3::Zero(), Vec6::Zero());
            EXPECT_EQ(fb.ydot_f, Vec6::Zero());
            EXPECT_EQ(fb.u_f, Vec6::Zero());
        }
    }
}

TEST(FeedbackFilter, GyroRampDerivative) {
    FilterRig rig;
    const double Ts = 1e-4;
    FeedbackFilter f(FilterSettings{}, Ts, rig.alloc);
    Vec6 last;
    for (int k = 0; k <= 2000; ++k) last = f.step(Vec3::Zero(), Vec3(k * Ts, 0, 0), Vec6::Zero()).ydot_f;
    EXPECT_NEAR(last(3), 1.0, 0.01);
    EXPECT_NEAR(last(4), 0.0, 1e-12);
    EXPECT_NEAR(last(5), 0.0, 1e-12);
}

TEST(FeedbackFilter, UnseededAccelTracksGeometricallyWithOneStepDelay) {
    FilterRig rig;
    FeedbackFilter f(FilterSettings{30, 60, false}, 1e-4, rig.alloc);
    const double a = lowpass_coefficient(30.0, 1e-4);
    // Delivered at step k is the filter output after k-1 samples.
    for (int k = 0; k < 1000; ++k) {
        const Vec6 y = f.step(Vec3(0, 0, 1), Vec3::Zero(), Vec6::Zero()).ydot_f;
        EXPECT_NEAR(y(2), 1.0 - std::pow(a, k), 1e-12);
    }
}

TEST(FeedbackFilter, SeededConstantsPassStraightThrough) {
    FilterRig rig;
    FeedbackFilter f(FilterSettings{}, 1e-4, rig.alloc);
    const Vec6 u = hover_input(rig.params, rig.alloc);
    for (int k = 0; k < 500; ++k) {
        const auto fb = f.step(Vec3(0.1, 0.2, 0.3), Vec3(0.5, 0.5, 0.5), u);
        EXPECT_LE(max_abs(fb.ydot_f - (Vec6() << 0.1, 0.2, 0.3, 0, 0, 0).finished()), 1e-14);
        EXPECT_LE(max_abs(fb.u_f - u), 1e-9);
    }
}

TEST(FeedbackFilter, InputFilterMatchesOutputFilterDynamics) {
    // If the measured acceleration is exactly the nominal response to the
    // held input (R = I, gyroscopic term left out), the filtered pair stays
    // consistent: ydot_f = a + A u_f.
    FilterRig rig;
    const RigidState x;
    const Mat6 A = decoupling_matrix(x, rig.params, rig.alloc);
    const Vec6 a = drift_term(x, rig.params);
    FeedbackFilter f(FilterSettings{}, 1e-4, rig.alloc);
    std::mt19937_64 g(22);
    Vec6 u_prev = hover_input(rig.params, rig.alloc);
    Vec3 Omega = Vec3::Zero();
    for (int k = 0; k < 3000; ++k) {
        // Measurements at step k reflect the input held over [k-1, k].
        const Vec6 acc = a + A * u_prev;
        Omega += acc.tail<3>() * 1e-4;
        const auto fb = f.step(acc.head<3>(), Omega, u_prev);
        const Vec6 expected = a + A * fb.u_f;
        if (k > 1) {
            EXPECT_LE(max_abs(fb.ydot_f - expected), 1e-9 * std::max(1.0, max_abs(expected))) << "step " << k;
        }
        u_prev += random6(g, 50.0);
    }
}

TEST(Indi, Update) {
    std::mt19937_64 g(23);
    const Mat6 A = Mat6::Random() + 6.0 * Mat6::Identity();
    const Vec6 u_f = random6(g, 100.0), y = random6(g, 1.0);
    EXPECT_LE(max_abs(indi_update(u_f, y, y, A) - u_f), 0.0);
    EXPECT_EQ(indi_update(u_f, Vec6::Zero(), Vec6::Zero(), A), u_f);
    const Vec6 c = random6(g, 1000.0);
    EXPECT_LE(max_abs(indi_update(Vec6::Zero(), A * c, Vec6::Zero(), A) - c), 1e-12 * 1000.0);
}

TEST(Ndo, ResidualsVanishForMatchingModel) {
    FilterRig rig;
    std::mt19937_64 g(24);
    for (int i = 0; i < 100; ++i) {
        const RigidState x = random_state(g);
        const Vec6 u = random6(g, 3e4);
        const auto d = plant_derivative(x, u, Vec3::Zero(), Vec3::Zero(), rig.params, rig.alloc);
        Vec6 ydot;
        ydot << d.v_dot, d.Omega_dot;
        const Residuals r = ndo_residuals(ydot, u, x, rig.params, rig.alloc);
        EXPECT_LE(r.force.norm(), 1e-12);
        EXPECT_LE(r.torque.norm(), 1e-12);
    }
}

TEST(Ndo, ResidualsRecoverExternalForce) {
    FilterRig rig;
    const RigidState x;
    const Vec6 u = hover_input(rig.params, rig.alloc);
    const auto d = plant_derivative(x, u, Vec3(1, 0, 0), Vec3::Zero(), rig.params, rig.alloc);
    FeedbackFilter f(FilterSettings{}, 1e-4, rig.alloc);
    FilteredFeedback fb;
    for (int k = 0; k < 5000; ++k) fb = f.step(d.v_dot, Vec3::Zero(), u);
    const Residuals r = ndo_residuals(fb.ydot_f, fb.u_f, x, rig.params, rig.alloc);
    EXPECT_LE((r.force - Vec3(1, 0, 0)).norm(), 1e-9);
}

TEST(Ndo, ResidualsSeeHeavyModelMismatch) {
    FilterRig rig;
    const VehicleParams plant = rig.params.perturbed(0.2, 0.2);
    const RigidState x;
    // Input that holds the heavier plant in hover; the measured acceleration is zero.
    const Vec6 u = hover_input(plant, rig.alloc);
    ASSERT_LE(plant_derivative(x, u, Vec3::Zero(), Vec3::Zero(), plant, rig.alloc).v_dot.norm(), 1e-12);
    const Residuals r = ndo_residuals(Vec6::Zero(), u, x, rig.params, rig.alloc);
    EXPECT_NEAR(r.force.z(), -0.2 * 0.935 * 9.81, 1e-9);
    EXPECT_NEAR(std::abs(r.force.z()), 1.835, 1e-3);
    EXPECT_LE(r.force.head<2>().norm(), 1e-12);
}

TEST(Observer, FixedPointAndClosedForm) {
    const ObserverGains gains;
    const Residuals r{Vec3(1.0, -2.0, 0.5), Vec3(0.01, 0.02, -0.03)};
    const DisturbanceEstimate at{r.force, r.torque};
    const DisturbanceEstimate same = observer_step(at, r, gains, 1e-4);
    EXPECT_EQ(same.force, r.force);
    EXPECT_EQ(same.torque, r.torque);

    const double Ts = 1e-4;
    DisturbanceEstimate d;
    const int n_F = static_cast<int>(std::lround(5.0 / gains.lambda_F / Ts));
    for (int k = 1; k <= n_F; ++k) {
        d = observer_step(d, r, gains, Ts);
        const double exact = 1.0 - std::pow(1.0 - Ts * gains.lambda_F, k);
        EXPECT_LE(max_abs(d.force - exact * r.force) / r.force.cwiseAbs().maxCoeff(), 1e-12);
    }
    EXPECT_LT((d.force - r.force).norm() / r.force.norm(), 0.01);
    // Continuous-time time constant: 63 % after about 1/lambda = 333 steps.
    DisturbanceEstimate e;
    int steps = 0;
    while (e.force.x() < (1.0 - std::exp(-1.0)) * r.force.x()) {
        e = observer_step(e, r, gains, Ts);
        ++steps;
    }
    EXPECT_NEAR(steps, 333, 2);
}

TEST(Observer, MonotoneTowardConstantResidual) {
    const ObserverGains gains;
    const Residuals r{Vec3(3, 3, 3), Vec3(1, 1, 1)};
    DisturbanceEstimate d;
    double prev = (r.force - d.force).norm();
    for (int k = 0; k < 5000; ++k) {
        d = observer_step(d, r, gains, 1e-4);
        const double err = (r.force - d.force).norm();
        EXPECT_LE(err, prev);
        prev = err;
    }
}

TEST(Ndo, ControlCases) {
    FilterRig rig;
    const RigidState x;
    const Mat6 A = decoupling_matrix(x, rig.params, rig.alloc);
    const Vec6 a = drift_term(x, rig.params);
    EXPECT_LE(max_abs(ndo_control(a, x, Vec6::Zero(), rig.params, A)), 1e-12);

    const Vec6 hover = ndo_control(Vec6::Zero(), x, Vec6::Zero(), rig.params, A);
    Vec6 g_up = Vec6::Zero();
    g_up(2) = 9.81;
    EXPECT_LE(max_abs(hover - A.inverse() * g_up), 1e-9);
    EXPECT_LE(max_abs(hover - hover_input(rig.params, rig.alloc)), 1e-9);

    std::mt19937_64 g(25);
    const Vec6 delta = random6(g, 1.0);
    const Vec6 shifted = ndo_control(Vec6::Zero(), x, delta, rig.params, A);
    EXPECT_LE(max_abs((shifted - hover) + A.partialPivLu().solve(delta)), 1e-9);

    const Residuals r{Vec3(0.935, 0, 0), Vec3(0, 0, 2.77e-3)};
    const Vec6 acc = disturbance_acceleration(DisturbanceEstimate{r.force, r.torque}, rig.params);
    EXPECT_DOUBLE_EQ(acc(0), 1.0);
    EXPECT_DOUBLE_EQ(acc(5), 1.0);
}

TEST(EquivalenceGap, IdentityHoldsForRandomDraws) {
    FilterRig rig;
    std::mt19937_64 g(26);
    double worst_rel = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const RigidState x = random_state(g);
        const Mat6 A = decoupling_matrix(x, rig.params, rig.alloc);
        const Vec6 a = drift_term(x, rig.params);
        const Vec6 nu = random6(g, 20.0), ydot_f = random6(g, 20.0), d_hat = random6(g, 20.0);
        const Vec6 u_f = hover_input(rig.params, rig.alloc) + random6(g, 5e3);
        const Vec6 u_indi = indi_update(u_f, nu, ydot_f, A);
        const Vec6 u_ndo = ndo_control(nu, x, d_hat, rig.params, A);
        const Vec6 r_hat = incremental_disturbance_estimate(ydot_f, a, A, u_f);
        const Vec6 gap = equivalence_gap(u_ndo, u_indi, A, r_hat, d_hat);
        const double scale = std::max({1.0, max_abs(u_ndo), max_abs(u_indi)});
        worst_rel = std::max(worst_rel, max_abs(gap) / scale);
    }
    EXPECT_LE(worst_rel, 1e-12);
}

TEST(EquivalenceGap, MatchingEstimatesGiveEqualInputs) {
    FilterRig rig;
    std::mt19937_64 g(27);
    const RigidState x = random_state(g);
    const Mat6 A = decoupling_matrix(x, rig.params, rig.alloc);
    const Vec6 a = drift_term(x, rig.params);
    const Vec6 nu = random6(g, 5.0), ydot_f = random6(g, 5.0);
    const Vec6 u_f = hover_input(rig.params, rig.alloc);
    const Vec6 r_hat = incremental_disturbance_estimate(ydot_f, a, A, u_f);
    const Vec6 u_indi = indi_update(u_f, nu, ydot_f, A);
    const Vec6 u_ndo = ndo_control(nu, x, r_hat, rig.params, A);
    EXPECT_LE(max_abs(u_ndo - u_indi) / max_abs(u_indi), 1e-13);
}

TEST(EquivalenceGap, IdentityMatrixCase) {
    const Vec6 delta = (Vec6() << 1, 2, 3, 4, 5, 6).finished();
    const Vec6 u_indi = Vec6::Constant(10.0);
    EXPECT_EQ(equivalence_gap(u_indi + delta, u_indi, Mat6::Identity(), delta, Vec6::Zero()), Vec6::Zero());
    EXPECT_NE(equivalence_gap(u_indi + 2 * delta, u_indi, Mat6::Identity(), delta, Vec6::Zero()), Vec6::Zero());
}

TEST(Controller, UsesOnlyTheNominalModel) {
    // Two controllers built from the same nominal data must agree whatever
    // plant the measurements come from.
    FilterRig rig;
    InversionController a(ControllerKind::Ndo, ControllerSettings{}, rig.params, rig.alloc, 1e-4);
    InversionController b(ControllerKind::Ndo, ControllerSettings{}, rig.params, rig.alloc, 1e-4);
    std::mt19937_64 g(28);
    RigidState x;
    for (int k = 0; k < 100; ++k) {
        const Vec3 acc = random6(g, 1.0).head<3>(), gyro = random6(g, 0.1).head<3>();
        EXPECT_EQ(a.step(x, Reference{}, acc, gyro), b.step(x, Reference{}, acc, gyro));
    }
    EXPECT_LE(a.max_relative_gap(), 1e-12);
}

TEST(Controller, KindNames) {
    EXPECT_EQ(to_string(ControllerKind::Indi), "indi");
    EXPECT_EQ(to_string(ControllerKind::Ndo), "ndo");
}
