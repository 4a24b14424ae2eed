#include "sfset/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sfs {

namespace {

constexpr int kMaxProbes = 10000;

// Lowest index among the maximizers of values, ties within kTieTol.
int argmax_lowest(const Vector& values) {
    int best = 0;
    for (int i = 1; i < values.size(); ++i)
        if (values[i] > values[best] + kTieTol) best = i;
    return best;
}

Vector state_rewards(const MdpSpec& mdp, const Vector& r, int a) {
    return mdp.features[a].transpose() * r;
}

Vector bellman(const MdpSpec& mdp, const std::vector<Vector>& rewards, const Vector& v) {
    Vector out = Vector::Constant(mdp.num_states(), -std::numeric_limits<double>::infinity());
    for (int a = 0; a < mdp.num_actions(); ++a)
        out = out.cwiseMax(rewards[a] + mdp.gamma * (mdp.transitions[a].transpose() * v));
    return out;
}

std::vector<Vector> all_rewards(const MdpSpec& mdp, const Vector& r) {
    if (r.size() != mdp.feature_dim()) throw DimensionMismatch("reward must have length d");
    std::vector<Vector> out;
    for (int a = 0; a < mdp.num_actions(); ++a) out.push_back(state_rewards(mdp, r, a));
    return out;
}

}  // namespace

ExactSet exact_sfset(const PsrModel& model, int horizon, double cap) {
    if (horizon < 0) throw DimensionMismatch("horizon must be nonnegative");
    TreeEnumerator trees = enumerate_trees(model.num_actions(), model.num_observations(), horizon, cap);
    ExactSet out;
    out.horizon = horizon;
    out.fingerprint = model.fingerprint();
    while (std::optional<PolicyTree> tree = trees.next()) {
        Matrix p = successor_matrix(model, *tree);
        const bool seen = std::any_of(out.points.begin(), out.points.end(), [&](const Matrix& x) {
            return (x - p).cwiseAbs().maxCoeff() <= 1e-12;
        });
        if (!seen) out.points.push_back(std::move(p));
    }
    return out;
}

double exact_support(const ExactSet& exact, const Matrix& m) {
    if (exact.points.empty()) throw EmptySet("empty exact set");
    double best = -std::numeric_limits<double>::infinity();
    for (const Matrix& p : exact.points) {
        if (p.rows() != m.rows() || p.cols() != m.cols()) throw DimensionMismatch("direction shape");
        best = std::max(best, (p.array() * m.array()).sum());
    }
    return best;
}

double recursive_support(const PsrModel& model, const Matrix& m, int horizon, const std::optional<Matrix>& base) {
    if (m.rows() != model.d() || m.cols() != model.k()) throw DimensionMismatch("direction must be d x k");
    if (horizon < 0) throw DimensionMismatch("horizon must be nonnegative");
    if (m.isZero(0.0)) return 0.0;
    if (horizon == 0) return base ? (m.array() * base->array()).sum() : 0.0;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < model.num_actions(); ++a) {
        double v = (m.array() * model.F(a).array()).sum();
        for (int o = 0; o < model.num_observations(); ++o)
            v += model.gamma() * recursive_support(model, m * model.T(a, o).transpose(), horizon - 1, base);
        best = std::max(best, v);
    }
    return best;
}

Vector finite_horizon_values(const MdpSpec& mdp, const Vector& r, int horizon, const std::optional<Vector>& base) {
    const std::vector<Vector> rewards = all_rewards(mdp, r);
    Vector v = base ? *base : Vector::Zero(mdp.num_states());
    if (v.size() != mdp.num_states()) throw DimensionMismatch("base must have length k");
    for (int h = 0; h < horizon; ++h) v = bellman(mdp, rewards, v);
    return v;
}

Vector value_iteration(const MdpSpec& mdp, const RewardSpec& reward, double tol) {
    const std::vector<Vector> rewards = all_rewards(mdp, reward.r);
    Vector v = Vector::Zero(mdp.num_states());
    for (int it = 0; it < 100000; ++it) {
        Vector next = bellman(mdp, rewards, v);
        const double change = (next - v).cwiseAbs().maxCoeff();
        v = std::move(next);
        if (change < tol) break;
    }
    return v;
}

double mdp_exact_support(const MdpSpec& mdp, const Matrix& m, int horizon, const std::optional<Matrix>& stop) {
    const int k = mdp.num_states();
    if (m.rows() != mdp.feature_dim() || m.cols() != k) throw DimensionMismatch("direction must be d x k");
    if (horizon == 0) return stop ? (m.array() * stop->array()).sum() : 0.0;
    // Values of a single next state o under reward g.
    auto next_value = [&](const Vector& g, int o) {
        std::optional<Vector> base;
        if (stop) base = Vector(stop->transpose() * g);
        if (horizon > 0) return finite_horizon_values(mdp, g, horizon - 1, base)[o];
        const std::vector<Vector> rewards = all_rewards(mdp, g);
        Vector v = base ? *base : Vector::Zero(k);
        for (int it = 0; it < 100000; ++it) {
            Vector next = bellman(mdp, rewards, v);
            const double change = (next - v).cwiseAbs().maxCoeff();
            v = std::move(next);
            if (change < 1e-14 * (1.0 + v.cwiseAbs().maxCoeff())) break;
        }
        return v[o];
    };
    // After the first step the state is e_o, so the direction m T_ao^T keeps
    // a single column g = sum_s m_s P(o | s, a).
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.num_actions(); ++a) {
        double v = (m.array() * mdp.features[a].array()).sum();
        for (int o = 0; o < k; ++o) {
            const Vector g = m * mdp.transitions[a].row(o).transpose();
            if (g.isZero(0.0)) continue;
            v += mdp.gamma * next_value(g, o);
        }
        best = std::max(best, v);
    }
    return best;
}

std::vector<std::vector<std::vector<Point2>>> exact_state_sets_2d(const MdpSpec& mdp, int max_horizon) {
    if (mdp.feature_dim() != 2) throw DimensionUnsupported("exact hulls need d = 2");
    const int k = mdp.num_states();
    std::vector<std::vector<std::vector<Point2>>> out;
    out.push_back(std::vector<std::vector<Point2>>(k, std::vector<Point2>{Point2::Zero()}));
    for (int h = 1; h <= max_horizon; ++h) {
        const auto& prev = out.back();
        std::vector<std::vector<Point2>> next(k);
        for (int s = 0; s < k; ++s) {
            std::vector<Point2> all;
            for (int a = 0; a < mdp.num_actions(); ++a) {
                std::vector<Point2> poly{Point2(mdp.features[a](0, s), mdp.features[a](1, s))};
                for (int t = 0; t < k; ++t) {
                    const double p = mdp.transitions[a](t, s);
                    if (p == 0.0) continue;
                    std::vector<Point2> scaled = prev[t];
                    for (Point2& x : scaled) x *= mdp.gamma * p;
                    poly = minkowski_sum_2d(poly, scaled);
                }
                all.insert(all.end(), poly.begin(), poly.end());
            }
            next[s] = convex_hull_2d(std::move(all));
        }
        out.push_back(std::move(next));
    }
    return out;
}

GapReport support_gap(const SupportFn& exact, const PsrModel& model, const SFSet& approx, const DirectionSet& fresh) {
    check_compatible(model, approx);
    if (approx.directions.size() + fresh.size() > kMaxProbes) throw DimensionMismatch("too many probe directions");
    GapReport out;
    auto probe = [&](const DirectionSet& dirs, double& worst) {
        if (dirs.size() == 0) return;
        const Vector h = support_values(model, approx, dirs);
        for (int i = 0; i < dirs.size(); ++i) {
            const double e = exact(dirs[i]);
            worst = std::max(worst, std::abs(e - h[i]));
            out.excess = std::max(out.excess, h[i] - e);
            ++out.num_probes;
        }
    };
    out.excess = -std::numeric_limits<double>::infinity();
    probe(approx.directions, out.optimized);
    probe(fresh, out.fresh);
    return out;
}

GapReport support_gap(const ExactSet& exact, const PsrModel& model, const SFSet& approx, const DirectionSet& fresh) {
    return support_gap([&](const Matrix& m) { return exact_support(exact, m); }, model, approx, fresh);
}

GapReport state_support_gap(const std::function<double(const Vector&, const Vector&)>& exact, const PsrModel& model,
                            const SFSet& approx, const std::vector<Vector>& states,
                            const std::vector<Vector>& optimized, const std::vector<Vector>& fresh) {
    check_compatible(model, approx);
    if (states.size() * (optimized.size() + fresh.size()) > kMaxProbes)
        throw DimensionMismatch("too many probes");
    GapReport out;
    out.excess = -std::numeric_limits<double>::infinity();
    for (const Vector& q : states) {
        const ProjectedSet P(model, approx, q);
        auto probe = [&](const std::vector<Vector>& dirs, double& worst) {
            for (const Vector& g : dirs) {
                const double h = P.lmo(g).value;
                const double e = exact(q, g);
                worst = std::max(worst, std::abs(e - h));
                out.excess = std::max(out.excess, h - e);
                ++out.num_probes;
            }
        };
        probe(optimized, out.optimized);
        probe(fresh, out.fresh);
    }
    return out;
}

std::vector<Vector> pbvi_reference(const PsrModel& model, const RewardSpec& reward, const std::vector<Vector>& states,
                                   int iterations) {
    if (reward.r.size() != model.d()) throw DimensionMismatch("reward must have length d");
    if (states.empty()) throw DimensionMismatch("need at least one sampled state");
    const int A = model.num_actions();
    const int O = model.num_observations();
    std::vector<Vector> gamma_set{Vector::Zero(model.k())};
    for (int it = 0; it < iterations; ++it) {
        Matrix G(static_cast<Eigen::Index>(gamma_set.size()), model.k());
        for (std::size_t i = 0; i < gamma_set.size(); ++i) G.row(static_cast<Eigen::Index>(i)) = gamma_set[i].transpose();
        std::vector<Vector> next;
        for (const Vector& b : states) {
            Vector best_alpha;
            double best_value = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                Vector alpha = model.F(a).transpose() * reward.r;
                for (int o = 0; o < O; ++o) {
                    const Vector tb = model.T(a, o) * b;
                    const int j = argmax_lowest(G * tb);
                    alpha.noalias() += model.gamma() * (model.T(a, o).transpose() * gamma_set[j]);
                }
                const double value = alpha.dot(b);
                if (value > best_value + kTieTol) {
                    best_value = value;
                    best_alpha = std::move(alpha);
                }
            }
            const bool seen = std::any_of(next.begin(), next.end(), [&](const Vector& x) {
                return (x - best_alpha).cwiseAbs().maxCoeff() <= kTieTol;
            });
            if (!seen) next.push_back(std::move(best_alpha));
        }
        gamma_set = std::move(next);
    }
    return gamma_set;
}

}  // namespace sfs
