#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "sfset/oracle.hpp"
#include "sfset/planner.hpp"

using namespace sfs;
using namespace sfs::testing;

namespace {

struct Converged {
    MdpSpec mdp;
    PsrModel model;
    SFSet set;
};

const Converged& grid_set() {
    static const Converged c = [] {
        MdpSpec mdp = gridworld_mdp(grid3());
        PsrModel model = mdp_to_psr(mdp);
        std::vector<Vector> angles;
        for (int i = 0; i < 360; ++i) {
            const double t = 2.0 * M_PI * i / 360.0;
            angles.push_back((Vector(2) << std::cos(t), std::sin(t)).finished());
        }
        BackupConfig cfg;
        cfg.convergence_tol = 1e-10;
        SFSet set = run_dp(model, cfg, tiled_directions(angles, 9)).set;
        return Converged{std::move(mdp), std::move(model), std::move(set)};
    }();
    return c;
}

}  // namespace

TEST(OptimalValue, ZeroReward) {
    const Converged& c = grid_set();
    EXPECT_EQ(optimal_value(c.set, c.model, {Vector::Zero(2)}, Vector::Unit(9, 4)), 0.0);
}

TEST(OptimalValue, MatchesValueIteration) {
    const Converged& c = grid_set();
    Rng rng(3);
    std::normal_distribution<double> normal;
    for (int t = 0; t < 5; ++t) {
        const RewardSpec r{(Vector(2) << normal(rng), normal(rng)).finished()};
        const Vector v = value_iteration(c.mdp, r);
        for (int s = 0; s < 9; ++s)
            EXPECT_NEAR(optimal_value(c.set, c.model, r, Vector::Unit(9, s)), v[s], 1e-6 / (1.0 - 0.9));
    }
}

TEST(OptimalAction, CornerSeekingUnderNegativeReward) {
    const Converged& c = grid_set();
    const RewardSpec r{(Vector(2) << -1.0, -1.0).finished()};
    // Down and left both keep the agent in the corner; the lower index wins.
    EXPECT_EQ(optimal_action(c.set, c.model, r, Vector::Unit(9, 0)), kDown);
    EXPECT_EQ(optimal_action(c.set, c.model, r, Vector::Unit(9, 3)), kDown);
    EXPECT_EQ(optimal_action(c.set, c.model, r, Vector::Unit(9, 1)), kLeft);
}

TEST(OptimalAction, SingleAction) {
    const PsrModel p = mdp_to_psr(cycle_mdp());
    const DpResult r = run_dp(p, BackupConfig{}, sample_directions(1, 4, 1, 2));
    EXPECT_EQ(optimal_action(r.set, p, {(Vector(1) << 2.0).finished()}, p.q1()), 0);
}

TEST(OptimalAction, GreedyRolloutAchievesOptimalReturn) {
    const Converged& c = grid_set();
    Rng rng(5);
    std::normal_distribution<double> normal;
    for (int t = 0; t < 5; ++t) {
        const RewardSpec r{(Vector(2) << normal(rng), normal(rng)).finished()};
        const Vector v = value_iteration(c.mdp, r);
        for (int s0 = 0; s0 < 9; ++s0) {
            int s = s0;
            double ret = 0.0;
            double discount = 1.0;
            for (int step = 0; step < 300; ++step) {
                const int a = optimal_action(c.set, c.model, r, Vector::Unit(9, s));
                ret += discount * r.r.dot(c.mdp.features[a].col(s));
                discount *= 0.9;
                s = grid_move(grid3(), s, a);
            }
            EXPECT_NEAR(ret, v[s0], 1e-5);
        }
    }
}

TEST(OptimalValue, ConvexInStateAndHomogeneousInReward) {
    GridSpec g = grid3();
    g.noise = 0.05;
    const PsrModel p = pomdp_to_psr(gridworld_pomdp(g));
    BackupConfig cfg;
    cfg.max_iters = 20;
    const DpResult dp = run_dp(p, cfg, sample_directions(2, 40, 2, 9));
    Rng rng(1);
    std::uniform_real_distribution<double> unif;
    const RewardSpec r{(Vector(2) << 0.4, -0.9).finished()};
    const RewardSpec r3{3.0 * r.r};
    for (int t = 0; t < 20; ++t) {
        Vector q = Vector::NullaryExpr(9, [&] { return unif(rng); });
        Vector q2 = Vector::NullaryExpr(9, [&] { return unif(rng); });
        q /= q.sum();
        q2 /= q2.sum();
        const double lam = unif(rng);
        const double mid = optimal_value(dp.set, p, r, lam * q + (1 - lam) * q2);
        EXPECT_LE(mid, lam * optimal_value(dp.set, p, r, q) + (1 - lam) * optimal_value(dp.set, p, r, q2) + 1e-9);
        EXPECT_NEAR(optimal_value(dp.set, p, r3, q), 3.0 * optimal_value(dp.set, p, r, q), 1e-12);
        EXPECT_EQ(optimal_action(dp.set, p, r3, q), optimal_action(dp.set, p, r, q));
    }
}

TEST(AlphaVectors, ZeroRewardGivesZeros) {
    const Converged& c = grid_set();
    for (const Vector& a : alpha_vectors(c.set, c.model, {Vector::Zero(2)})) EXPECT_TRUE(a.isZero(0.0));
}

TEST(AlphaVectors, MatchPbviAtSampledBeliefs) {
    GridSpec g = grid3();
    g.noise = 0.05;
    const PsrModel p = pomdp_to_psr(gridworld_pomdp(g));
    const RewardSpec r{(Vector(2) << -1.0, 0.5).finished()};
    Rng rng(4);
    std::uniform_real_distribution<double> unif;
    std::vector<Vector> beliefs;
    for (int i = 0; i < 8; ++i) {
        Vector b = Vector::NullaryExpr(9, [&] { return unif(rng); });
        beliefs.push_back(b / b.sum());
    }
    BackupConfig cfg;
    cfg.max_iters = 10;
    cfg.convergence_tol = 1e-300;
    cfg.retention = Retention::Assembled;
    const DpResult dp = run_dp(p, cfg, pbvi_directions(r, beliefs));
    const std::vector<Vector> ours = alpha_vectors(dp.set, p, r);
    const std::vector<Vector> ref = pbvi_reference(p, r, beliefs, 11);
    for (const Vector& b : beliefs) EXPECT_NEAR(alpha_value(ours, b), alpha_value(ref, b), 1e-8);
}

TEST(AlphaVectors, ScalarFeaturesGiveValueIteration) {
    // d = 1 with f equal to the reward: alpha vectors are exact PSR value iteration.
    const PomdpSpec spec = two_state_pomdp();
    const PsrModel p = pomdp_to_psr(spec);
    const RewardSpec r{Vector::Ones(1)};
    BackupConfig cfg;
    cfg.max_iters = 3;
    cfg.convergence_tol = 1e-300;
    const DpResult dp = run_dp(p, cfg, sample_directions(1, 200, 1, 2));
    const std::vector<Vector> alphas = alpha_vectors(dp.set, p, r);
    for (double x = 0.0; x <= 1.0; x += 0.05) {
        const Vector q = (Vector(2) << x, 1.0 - x).finished();
        EXPECT_NEAR(alpha_value(alphas, q), recursive_support(p, r.r * q.transpose(), 4), 1e-9);
    }
}

TEST(PbviDirections, RankOneUnitNorm) {
    const DirectionSet d = pbvi_directions({Vector::Unit(2, 0)}, {Vector::Unit(3, 1)});
    ASSERT_EQ(d.size(), 1);
    Matrix expected = Matrix::Zero(2, 3);
    expected(0, 1) = 1.0;
    EXPECT_TRUE(d[0].isApprox(expected));
    EXPECT_THROW(pbvi_directions({Vector::Zero(2)}, {Vector::Unit(3, 1)}), DimensionMismatch);
}

TEST(PbviDirections, CornerStatesGivePerStateOptimum) {
    const MdpSpec mdp = gridworld_mdp(grid3());
    const PsrModel p = mdp_to_psr(mdp);
    const RewardSpec r{(Vector(2) << 0.3, 1.0).finished()};
    std::vector<Vector> corners;
    for (int s = 0; s < 9; ++s) corners.push_back(Vector::Unit(9, s));
    BackupConfig cfg;
    cfg.retention = Retention::Assembled;
    cfg.convergence_tol = 1e-10;
    const DpResult dp = run_dp(p, cfg, pbvi_directions(r, corners));
    const Vector v = value_iteration(mdp, r);
    for (int s = 0; s < 9; ++s) EXPECT_NEAR(optimal_value(dp.set, p, r, corners[s]), v[s], 1e-8);
}
