#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include <json.hpp>

#include "sfset/model.hpp"

namespace sfs {

using Rng = std::mt19937_64;

/// Balanced deterministic policy tree. Nodes carry actions, edges carry
/// observations. A default-constructed tree has depth 0 (no steps left).
/// Subtrees are shared, so copies are cheap.
class PolicyTree {
public:
    PolicyTree() = default;

    static PolicyTree leaf(int action);
    /// children[o] is the subtree executed after observation o; all children
    /// must have the same depth.
    static PolicyTree node(int action, std::vector<PolicyTree> children);

    int depth() const { return node_ ? node_->depth : 0; }
    bool empty() const { return node_ == nullptr; }
    int root_action() const;
    /// Subtree after observation o. For depth-1 trees this is the empty tree.
    const PolicyTree& child(int o) const;
    std::size_t num_children() const { return node_ ? node_->children.size() : 0; }

    /// Identity of the shared node, used for memoization.
    const void* id() const { return node_.get(); }

private:
    struct Node {
        int action;
        int depth;
        std::vector<PolicyTree> children;
    };
    explicit PolicyTree(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

    std::shared_ptr<const Node> node_;
};

/// Convex combination of same-depth trees.
class PolicyMixture {
public:
    PolicyMixture(std::vector<PolicyTree> trees, std::vector<double> weights);
    explicit PolicyMixture(PolicyTree tree) : PolicyMixture({std::move(tree)}, {1.0}) {}

    const std::vector<PolicyTree>& trees() const { return trees_; }
    const std::vector<double>& weights() const { return weights_; }
    int depth() const { return trees_.front().depth(); }

private:
    std::vector<PolicyTree> trees_;
    std::vector<double> weights_;
};

/// A^pi = F_a + gamma sum_o A^{pi(o)} T_ao, with the zero matrix at depth 0.
Matrix successor_matrix(const PsrModel& model, const PolicyTree& tree);
Matrix successor_matrix_mixture(const PsrModel& model, const PolicyMixture& mix);

/// Probability of each root action: total weight of trees with that root.
Vector action_distribution(const PolicyMixture& mix, int num_actions);

/// Keep trees whose root is a, renormalize, descend along o.
PolicyMixture condition_mixture(const PolicyMixture& mix, int action, int observation);

struct MixtureStep {
    int action = 0;
    /// Mixture to follow once the observation is known.
    std::function<PolicyMixture(int observation)> condition;
};

MixtureStep execute_mixture_step(const PolicyMixture& mix, Rng& rng);

/// Discounted feature sum of one simulated execution of the mixture from q.
Vector rollout_mixture(const PsrModel& model, const PolicyMixture& mix, const Vector& q, Rng& rng);

/// Number of balanced depth-H trees, A^((O^H - 1)/(O - 1)); nullopt past ~1e18.
std::optional<double> tree_count(int num_actions, int num_observations, int depth);

/// Yields every balanced depth-H tree once, ordered lexicographically by
/// (root action, children tuple). Single consumer.
class TreeEnumerator {
public:
    static constexpr double kDefaultCap = 1e6;

    TreeEnumerator(int num_actions, int num_observations, int depth, double cap = kDefaultCap);

    std::optional<PolicyTree> next();
    double size() const { return size_; }

private:
    int num_actions_;
    int num_observations_;
    int depth_;
    double size_ = 0;
    std::vector<PolicyTree> subtrees_;
    int action_ = 0;
    std::vector<std::size_t> odometer_;
    bool done_ = false;
};

TreeEnumerator enumerate_trees(int num_actions, int num_observations, int depth,
                               double cap = TreeEnumerator::kDefaultCap);

/// Uniformly random balanced tree.
PolicyTree random_tree(int num_actions, int num_observations, int depth, Rng& rng);

nlohmann::json tree_to_json(const PolicyTree& tree);
PolicyTree tree_from_json(const nlohmann::json& j);

}  // namespace sfs
