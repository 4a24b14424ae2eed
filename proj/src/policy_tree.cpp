#include "sfset/policy_tree.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>

namespace sfs {

PolicyTree PolicyTree::leaf(int action) {
    if (action < 0) throw DimensionMismatch("negative action index");
    return PolicyTree(std::make_shared<const Node>(Node{action, 1, {}}));
}

PolicyTree PolicyTree::node(int action, std::vector<PolicyTree> children) {
    if (action < 0) throw DimensionMismatch("negative action index");
    if (children.empty()) return leaf(action);
    const int child_depth = children.front().depth();
    for (const PolicyTree& c : children)
        if (c.depth() != child_depth) throw DimensionMismatch("policy tree must be balanced");
    if (child_depth == 0) return leaf(action);
    return PolicyTree(std::make_shared<const Node>(Node{action, child_depth + 1, std::move(children)}));
}

int PolicyTree::root_action() const {
    if (!node_) throw DimensionMismatch("empty tree has no root action");
    return node_->action;
}

const PolicyTree& PolicyTree::child(int o) const {
    static const PolicyTree kEmpty;
    if (!node_ || node_->children.empty()) return kEmpty;
    return node_->children.at(static_cast<std::size_t>(o));
}

PolicyMixture::PolicyMixture(std::vector<PolicyTree> trees, std::vector<double> weights)
    : trees_(std::move(trees)), weights_(std::move(weights)) {
    if (trees_.empty()) throw DegenerateMixture("mixture needs at least one tree");
    if (trees_.size() != weights_.size()) throw DimensionMismatch("one weight per tree");
    double total = 0.0;
    for (std::size_t i = 0; i < trees_.size(); ++i) {
        if (weights_[i] < 0.0) throw DegenerateMixture("mixture weights must be nonnegative");
        if (trees_[i].depth() != trees_.front().depth())
            throw DimensionMismatch("mixture trees must share a depth");
        total += weights_[i];
    }
    if (std::abs(total - 1.0) > 1e-12) throw DegenerateMixture("mixture weights must sum to 1");
}

namespace {

const Matrix& successor_memo(const PsrModel& model, const PolicyTree& tree,
                             std::unordered_map<const void*, Matrix>& memo) {
    auto it = memo.find(tree.id());
    if (it != memo.end()) return it->second;
    const int a = tree.root_action();
    if (a >= model.num_actions()) throw DimensionMismatch("tree action out of range");
    Matrix A = model.F(a);
    if (tree.depth() > 1) {
        if (static_cast<int>(tree.num_children()) != model.num_observations())
            throw DimensionMismatch("tree node needs one child per observation");
        for (int o = 0; o < model.num_observations(); ++o) {
            const auto& rows = model.row_support(a, o);
            if (rows.empty()) continue;
            A.noalias() += model.gamma() * successor_memo(model, tree.child(o), memo) * model.T(a, o);
        }
    }
    return memo.emplace(tree.id(), std::move(A)).first->second;
}

}  // namespace

Matrix successor_matrix(const PsrModel& model, const PolicyTree& tree) {
    if (tree.empty()) return Matrix::Zero(model.d(), model.k());
    std::unordered_map<const void*, Matrix> memo;
    return successor_memo(model, tree, memo);
}

Matrix successor_matrix_mixture(const PsrModel& model, const PolicyMixture& mix) {
    Matrix out = Matrix::Zero(model.d(), model.k());
    std::unordered_map<const void*, Matrix> memo;
    for (std::size_t i = 0; i < mix.trees().size(); ++i) {
        if (mix.weights()[i] == 0.0 || mix.trees()[i].empty()) continue;
        out += mix.weights()[i] * successor_memo(model, mix.trees()[i], memo);
    }
    return out;
}

Vector action_distribution(const PolicyMixture& mix, int num_actions) {
    Vector p = Vector::Zero(num_actions);
    for (std::size_t i = 0; i < mix.trees().size(); ++i) p[mix.trees()[i].root_action()] += mix.weights()[i];
    return p;
}

PolicyMixture condition_mixture(const PolicyMixture& mix, int action, int observation) {
    std::vector<PolicyTree> kept;
    std::vector<double> w;
    double total = 0.0;
    for (std::size_t i = 0; i < mix.trees().size(); ++i) {
        if (mix.trees()[i].root_action() != action || mix.weights()[i] <= 0.0) continue;
        kept.push_back(mix.trees()[i].child(observation));
        w.push_back(mix.weights()[i]);
        total += mix.weights()[i];
    }
    if (kept.empty() || !(total > 0.0))
        throw DegenerateMixture("no tree in the mixture starts with the chosen action");
    for (double& x : w) x /= total;
    // Renormalizing can leave the sum a few ulps away from one.
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    w.back() += 1.0 - s;
    return PolicyMixture(std::move(kept), std::move(w));
}

MixtureStep execute_mixture_step(const PolicyMixture& mix, Rng& rng) {
    std::discrete_distribution<std::size_t> pick(mix.weights().begin(), mix.weights().end());
    const int a = mix.trees()[pick(rng)].root_action();
    return {a, [mix, a](int o) { return condition_mixture(mix, a, o); }};
}

Vector rollout_mixture(const PsrModel& model, const PolicyMixture& mix, const Vector& q0, Rng& rng) {
    Vector total = Vector::Zero(model.d());
    Vector q = q0;
    double discount = 1.0;
    PolicyMixture current = mix;
    for (int t = 0; t < mix.depth(); ++t) {
        MixtureStep step = execute_mixture_step(current, rng);
        total += discount * model.F(step.action) * q;
        discount *= model.gamma();
        if (t + 1 == mix.depth()) break;
        const ObservationDistribution dist = observation_probs(model, q, step.action);
        std::discrete_distribution<int> pick_obs(dist.probs.data(), dist.probs.data() + dist.probs.size());
        const int o = pick_obs(rng);
        q = psr_update(model, q, step.action, o).state;
        current = step.condition(o);
    }
    return total;
}

std::optional<double> tree_count(int num_actions, int num_observations, int depth) {
    if (depth <= 0) return 1.0;
    double nodes = 0.0;
    double level = 1.0;
    for (int h = 0; h < depth; ++h) {
        nodes += level;
        level *= num_observations;
    }
    const double log_count = nodes * std::log(static_cast<double>(num_actions));
    if (log_count > std::log(1e18)) return std::nullopt;
    return std::round(std::exp(log_count));
}

TreeEnumerator::TreeEnumerator(int num_actions, int num_observations, int depth, double cap)
    : num_actions_(num_actions), num_observations_(num_observations), depth_(depth) {
    if (num_actions < 1 || num_observations < 1 || depth < 0)
        throw DimensionMismatch("invalid enumeration dimensions");
    const auto count = tree_count(num_actions, num_observations, depth);
    if (!count || *count > cap)
        throw EnumerationTooLarge("tree enumeration exceeds the configured cap");
    size_ = *count;
    if (depth_ >= 2) {
        TreeEnumerator inner(num_actions, num_observations, depth - 1, cap);
        while (auto t = inner.next()) subtrees_.push_back(std::move(*t));
        odometer_.assign(static_cast<std::size_t>(num_observations), 0);
    }
}

std::optional<PolicyTree> TreeEnumerator::next() {
    if (done_) return std::nullopt;
    if (depth_ == 0) {
        done_ = true;
        return PolicyTree();
    }
    if (depth_ == 1) {
        PolicyTree t = PolicyTree::leaf(action_);
        if (++action_ == num_actions_) done_ = true;
        return t;
    }
    std::vector<PolicyTree> children;
    children.reserve(odometer_.size());
    for (std::size_t idx : odometer_) children.push_back(subtrees_[idx]);
    PolicyTree t = PolicyTree::node(action_, std::move(children));
    // Advance: last child varies fastest, then the root action.
    std::size_t pos = odometer_.size();
    while (pos > 0) {
        --pos;
        if (++odometer_[pos] < subtrees_.size()) return t;
        odometer_[pos] = 0;
    }
    if (++action_ == num_actions_) done_ = true;
    return t;
}

TreeEnumerator enumerate_trees(int num_actions, int num_observations, int depth, double cap) {
    return TreeEnumerator(num_actions, num_observations, depth, cap);
}

PolicyTree random_tree(int num_actions, int num_observations, int depth, Rng& rng) {
    if (depth <= 0) return PolicyTree();
    std::uniform_int_distribution<int> pick(0, num_actions - 1);
    const int a = pick(rng);
    if (depth == 1) return PolicyTree::leaf(a);
    std::vector<PolicyTree> children;
    children.reserve(static_cast<std::size_t>(num_observations));
    for (int o = 0; o < num_observations; ++o)
        children.push_back(random_tree(num_actions, num_observations, depth - 1, rng));
    return PolicyTree::node(a, std::move(children));
}

nlohmann::json tree_to_json(const PolicyTree& tree) {
    if (tree.empty()) return nullptr;
    nlohmann::json j;
    j["a"] = tree.root_action();
    nlohmann::json kids = nlohmann::json::array();
    for (std::size_t o = 0; o < tree.num_children(); ++o) kids.push_back(tree_to_json(tree.child(static_cast<int>(o))));
    j["children"] = std::move(kids);
    return j;
}

PolicyTree tree_from_json(const nlohmann::json& j) {
    if (j.is_null()) return PolicyTree();
    std::vector<PolicyTree> kids;
    if (j.contains("children"))
        for (const auto& c : j.at("children")) kids.push_back(tree_from_json(c));
    return PolicyTree::node(j.at("a").get<int>(), std::move(kids));
}

}  // namespace sfs
