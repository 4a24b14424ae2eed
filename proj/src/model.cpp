#include "sfset/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <string>

namespace sfs {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t hash_matrix(std::uint64_t h, const Matrix& m) {
    const std::int64_t dims[2] = {m.rows(), m.cols()};
    h = fnv1a(h, dims, sizeof(dims));
    return fnv1a(h, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw DimensionMismatch(msg);
}

void check_column_stochastic(const Matrix& m, const std::string& what) {
    if ((m.array() < -kProbTol).any()) throw InvalidModel(what + " has negative entries");
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (std::abs(m.col(j).sum() - 1.0) > 1e-9)
            throw InvalidModel(what + ": column " + std::to_string(j) + " does not sum to 1");
    }
}

void check_simplex(const Vector& b, const std::string& what) {
    if ((b.array() < -kProbTol).any() || std::abs(b.sum() - 1.0) > 1e-9)
        throw InvalidModel(what + " is not a probability vector");
}

}  // namespace

PsrModel::PsrModel(Vector q1, Vector u, std::vector<std::vector<Matrix>> transitions,
                   std::vector<Matrix> features, double gamma)
    : q1_(std::move(q1)), u_(std::move(u)), transitions_(std::move(transitions)),
      features_(std::move(features)), gamma_(gamma) {
    const Eigen::Index k = q1_.size();
    require(k >= 1, "state dimension must be positive");
    require(u_.size() == k, "u must have length k");
    require(!transitions_.empty(), "model needs at least one action");
    require(features_.size() == transitions_.size(), "one feature matrix per action");
    const std::size_t num_obs = transitions_.front().size();
    require(num_obs >= 1, "model needs at least one observation");
    const Eigen::Index d = features_.front().rows();
    require(d >= 1, "feature dimension must be positive");
    for (std::size_t a = 0; a < transitions_.size(); ++a) {
        require(transitions_[a].size() == num_obs, "every action needs O transition operators");
        for (const Matrix& t : transitions_[a])
            require(t.rows() == k && t.cols() == k, "T_ao must be k x k");
        require(features_[a].rows() == d && features_[a].cols() == k, "F_a must be d x k");
    }
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw InvalidModel("discount must lie in [0, 1)");
    if (std::abs(u_.dot(q1_) - 1.0) > 1e-9) throw InvalidModel("u^T q1 must equal 1");

    const int A = num_actions();
    const int O = num_observations();
    support_.resize(static_cast<std::size_t>(A * O));
    blocks_.resize(static_cast<std::size_t>(A * O));
    for (int a = 0; a < A; ++a) {
        for (int o = 0; o < O; ++o) {
            const Matrix& t = transitions_[a][o];
            std::vector<int>& rows = support_[cell(a, o)];
            for (Eigen::Index i = 0; i < k; ++i)
                if ((t.row(i).array() != 0.0).any()) rows.push_back(static_cast<int>(i));
            Matrix block(static_cast<Eigen::Index>(rows.size()), k);
            for (std::size_t r = 0; r < rows.size(); ++r) block.row(r) = t.row(rows[r]);
            blocks_[cell(a, o)] = std::move(block);
        }
    }

    std::uint64_t h = 1469598103934665603ULL;
    h = hash_matrix(h, q1_);
    h = hash_matrix(h, u_);
    for (const auto& per_action : transitions_)
        for (const Matrix& t : per_action) h = hash_matrix(h, t);
    for (const Matrix& f : features_) h = hash_matrix(h, f);
    h = fnv1a(h, &gamma_, sizeof(gamma_));
    fingerprint_ = h;
}

double PsrModel::max_feature_norm() const {
    double best = 0.0;
    for (const Matrix& f : features_) best = std::max(best, f.norm());
    return best;
}

PsrModel PsrModel::with_gamma(double gamma) const {
    return PsrModel(q1_, u_, transitions_, features_, gamma);
}

PsrModel PsrModel::with_initial_state(Vector q1) const {
    return PsrModel(std::move(q1), u_, transitions_, features_, gamma_);
}

void validate(const MdpSpec& spec) {
    const int k = spec.num_states();
    require(k >= 1, "MDP needs at least one state");
    require(spec.num_actions() >= 1, "MDP needs at least one action");
    require(spec.features.size() == spec.transitions.size(), "one feature table per action");
    const Eigen::Index d = spec.features.front().rows();
    for (int a = 0; a < spec.num_actions(); ++a) {
        require(spec.transitions[a].rows() == k && spec.transitions[a].cols() == k,
                "T_a must be k x k");
        require(spec.features[a].rows() == d && spec.features[a].cols() == k,
                "feature table must be d x k");
        check_column_stochastic(spec.transitions[a], "T_" + std::to_string(a));
    }
    check_simplex(spec.b1, "b1");
}

void validate(const PomdpSpec& spec) {
    MdpSpec base{spec.transitions, spec.features, spec.b1, spec.gamma};
    validate(base);
    require(spec.observation.cols() == spec.num_states(), "observation matrix must be O x k");
    require(spec.observation.rows() >= 1, "POMDP needs at least one observation");
    check_column_stochastic(spec.observation, "observation matrix");
}

PsrModel mdp_to_psr(const MdpSpec& spec) {
    validate(spec);
    const int k = spec.num_states();
    std::vector<std::vector<Matrix>> T(static_cast<std::size_t>(spec.num_actions()));
    for (int a = 0; a < spec.num_actions(); ++a) {
        T[a].assign(static_cast<std::size_t>(k), Matrix::Zero(k, k));
        for (int o = 0; o < k; ++o) T[a][o].row(o) = spec.transitions[a].row(o);
    }
    return PsrModel(spec.b1, Vector::Ones(k), std::move(T), spec.features, spec.gamma);
}

PsrModel pomdp_to_psr(const PomdpSpec& spec) {
    validate(spec);
    const int k = spec.num_states();
    const int O = spec.num_observations();
    std::vector<std::vector<Matrix>> T(static_cast<std::size_t>(spec.num_actions()));
    for (int a = 0; a < spec.num_actions(); ++a) {
        T[a].reserve(static_cast<std::size_t>(O));
        for (int o = 0; o < O; ++o)
            T[a].push_back(spec.observation.row(o).transpose().asDiagonal() * spec.transitions[a]);
    }
    return PsrModel(spec.b1, Vector::Ones(k), std::move(T), spec.features, spec.gamma);
}

StateUpdate psr_update(const PsrModel& model, const Vector& q, int a, int o) {
    Vector next = model.T(a, o) * q;
    const double p = model.u().dot(next);
    if (!(p > kProbTol))
        throw ZeroProbabilityObservation("observation " + std::to_string(o) + " after action " +
                                         std::to_string(a) + " has probability " +
                                         std::to_string(p));
    next /= p;
    // Renormalize once more; keeps long rollouts on the u^T q = 1 plane.
    next /= model.u().dot(next);
    return {std::move(next), p};
}

ObservationDistribution observation_probs(const PsrModel& model, const Vector& q, int a) {
    const int O = model.num_observations();
    ObservationDistribution out;
    out.probs.resize(O);
    double drift = 0.0;
    for (int o = 0; o < O; ++o) {
        const double p = model.u().dot(model.T(a, o) * q);
        if (p < 0.0) drift = std::max(drift, -p);
        out.probs[o] = std::max(p, 0.0);
    }
    const double total = out.probs.sum();
    drift = std::max(drift, std::abs(total - 1.0));
    if (drift > kProbTol && total > 0.0) out.probs /= total;
    out.drift = drift;
    return out;
}

Vector feature_vector(const PsrModel& model, const Vector& q, int a) { return model.F(a) * q; }

RowVector prediction_vector(const PsrModel& model, const SimpleTest& test) {
    if (test.actions.size() != test.observations.size())
        throw DimensionMismatch("test actions and observations differ in length");
    RowVector m = model.u().transpose();
    // u^T T_{a_l o_l} ... T_{a_1 o_1}: fold from the last step backwards.
    for (std::size_t i = test.length(); i-- > 0;) {
        const int a = test.actions[i];
        const int o = test.observations[i];
        if (a < 0 || a >= model.num_actions() || o < 0 || o >= model.num_observations())
            throw DimensionMismatch("test index out of range");
        m = m * model.T(a, o);
    }
    return m;
}

double test_value(const PsrModel& model, const Vector& q, const SimpleTest& test) {
    return prediction_vector(model, test).dot(q.transpose());
}

Matrix core_test_matrix(const PsrModel& model, const std::vector<SimpleTest>& tests) {
    const int k = model.k();
    if (static_cast<int>(tests.size()) != k)
        throw DimensionMismatch("need exactly k core tests");
    Matrix S(k, k);
    for (int i = 0; i < k; ++i) S.row(i) = prediction_vector(model, tests[i]);
    Eigen::JacobiSVD<Matrix> svd(S);
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0 || sv(sv.size() - 1) < 1e-8 * sv(0))
        throw SingularCoreTests("core test prediction vectors are linearly dependent");
    return S;
}

PsrModel similarity_transform(const PsrModel& model, const Matrix& S) {
    const int k = model.k();
    if (S.rows() != k || S.cols() != k) throw DimensionMismatch("transform must be k x k");
    Eigen::ColPivHouseholderQR<Matrix> qr(S);
    if (!qr.isInvertible()) throw SingularCoreTests("transform is singular");
    const Matrix S_inv = qr.inverse();
    std::vector<std::vector<Matrix>> T(static_cast<std::size_t>(model.num_actions()));
    std::vector<Matrix> F;
    for (int a = 0; a < model.num_actions(); ++a) {
        for (int o = 0; o < model.num_observations(); ++o) T[a].push_back(S * model.T(a, o) * S_inv);
        F.push_back(model.F(a) * S_inv);
    }
    Vector u = S_inv.transpose() * model.u();
    return PsrModel(S * model.q1(), std::move(u), std::move(T), std::move(F), model.gamma());
}

PsrModel transform_via_core_tests(const PsrModel& model, const std::vector<SimpleTest>& tests) {
    return similarity_transform(model, core_test_matrix(model, tests));
}

ValidationReport validate_model(const PsrModel& model, int num_trajectories, int horizon,
                                std::uint64_t seed) {
    ValidationReport report;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick_action(0, model.num_actions() - 1);
    const int O = model.num_observations();
    for (int n = 0; n < num_trajectories; ++n) {
        Vector q = model.q1();
        for (int t = 0; t < horizon; ++t) {
            // Check every action at the current state, then move along one of them.
            for (int a = 0; a < model.num_actions(); ++a) {
                double sum = 0.0;
                for (int o = 0; o < O; ++o) {
                    const double p = model.u().dot(model.T(a, o) * q);
                    report.max_negativity = std::max(report.max_negativity, -p);
                    sum += p;
                }
                report.max_sum_deviation = std::max(report.max_sum_deviation, std::abs(sum - 1.0));
                ++report.checks;
            }
            const int a = pick_action(rng);
            const ObservationDistribution dist = observation_probs(model, q, a);
            if (!(dist.probs.sum() > 0.0)) break;
            std::discrete_distribution<int> pick_obs(dist.probs.data(),
                                                     dist.probs.data() + dist.probs.size());
            const int o = pick_obs(rng);
            if (dist.probs[o] <= kProbTol) break;
            q = psr_update(model, q, a, o).state;
        }
    }
    report.passed = report.max_negativity <= kProbTol && report.max_sum_deviation <= kProbTol;
    return report;
}

}  // namespace sfs
