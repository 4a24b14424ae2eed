#include "sfset/planner.hpp"

#include <cmath>
#include <limits>

namespace sfs {

namespace {

void check_reward(const PsrModel& model, const RewardSpec& reward) {
    if (reward.r.size() != model.d()) throw DimensionMismatch("reward must have length d");
    if (!reward.r.allFinite()) throw DimensionMismatch("reward entries must be finite");
}

}  // namespace

double optimal_value(const SFSet& set, const PsrModel& model, const RewardSpec& reward, const Vector& q) {
    check_reward(model, reward);
    return ProjectedSet(model, set, q).lmo(reward.r).value;
}

int optimal_action(const SFSet& set, const PsrModel& model, const RewardSpec& reward, const Vector& q) {
    check_reward(model, reward);
    return ProjectedSet(model, set, q).lmo(reward.r).action;
}

std::vector<Vector> alpha_vectors(const SFSet& set, const PsrModel& model, const RewardSpec& reward) {
    check_reward(model, reward);
    const std::vector<Eigen::VectorXi> best = cell_maximizers(model, set, set.directions);
    const int A = model.num_actions();
    const int O = model.num_observations();
    const int d = model.d();
    // r^T (c_j B_ao) per stored point, computed once.
    std::vector<Matrix> projected(set.cells.size());
    for (int a = 0; a < A; ++a)
        for (int o = 0; o < O; ++o) {
            const SFCell& c = set.cell(a, o);
            Matrix& P = projected[model.cell(a, o)];
            P.resize(c.size(), model.k());
            for (int j = 0; j < c.size(); ++j) {
                RowVector rc(static_cast<Eigen::Index>(c.rows.size()));
                for (std::size_t x = 0; x < c.rows.size(); ++x)
                    rc[static_cast<Eigen::Index>(x)] =
                        c.points.row(j).segment(static_cast<Eigen::Index>(x) * d, d).dot(reward.r);
                P.row(j) = rc * model.row_block(a, o);
            }
        }
    std::vector<Vector> out;
    for (int i = 0; i < set.directions.size(); ++i) {
        for (int a = 0; a < A; ++a) {
            Vector alpha = model.F(a).transpose() * reward.r;
            for (int o = 0; o < O; ++o) {
                const int j = best[model.cell(a, o)][i];
                if (j >= 0) alpha.noalias() += model.gamma() * projected[model.cell(a, o)].row(j).transpose();
            }
            bool seen = false;
            for (const Vector& v : out)
                if ((v - alpha).cwiseAbs().maxCoeff() <= kTieTol) {
                    seen = true;
                    break;
                }
            if (!seen) out.push_back(std::move(alpha));
        }
    }
    return out;
}

double alpha_value(const std::vector<Vector>& alphas, const Vector& q) {
    if (alphas.empty()) throw EmptySet("no alpha vectors");
    double best = -std::numeric_limits<double>::infinity();
    for (const Vector& a : alphas) best = std::max(best, a.dot(q));
    return best;
}

DirectionSet pbvi_directions(const RewardSpec& reward, const std::vector<Vector>& states) {
    if (states.empty()) throw DimensionMismatch("need at least one sampled state");
    if (!(reward.r.norm() > 0.0)) throw DimensionMismatch("reward must be nonzero");
    std::vector<Matrix> dirs;
    for (const Vector& q : states) dirs.push_back(reward.r * q.transpose());
    return make_directions(std::move(dirs));
}

}  // namespace sfs
