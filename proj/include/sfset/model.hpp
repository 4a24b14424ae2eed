#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sfset/errors.hpp"

namespace sfs {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

/// Tolerance for probability checks (nonnegativity, normalization, conditioning).
inline constexpr double kProbTol = 1e-9;

/// Fully observable model. Column j of transitions[a] is the next-state
/// distribution from state j; column j of features[a] is f(j, a).
struct MdpSpec {
    std::vector<Matrix> transitions;
    std::vector<Matrix> features;
    Vector b1;
    double gamma = 0.9;

    int num_states() const { return static_cast<int>(b1.size()); }
    int num_actions() const { return static_cast<int>(transitions.size()); }
    int feature_dim() const { return features.empty() ? 0 : static_cast<int>(features[0].rows()); }
};

/// Partially observable model; observation(o, s') = P(o | next state s').
struct PomdpSpec {
    std::vector<Matrix> transitions;
    Matrix observation;
    std::vector<Matrix> features;
    Vector b1;
    double gamma = 0.9;

    int num_states() const { return static_cast<int>(b1.size()); }
    int num_actions() const { return static_cast<int>(transitions.size()); }
    int num_observations() const { return static_cast<int>(observation.rows()); }
    int feature_dim() const { return features.empty() ? 0 : static_cast<int>(features[0].rows()); }
};

/// Action/observation sequence whose value is the probability of seeing the
/// observations when executing the actions.
struct SimpleTest {
    std::vector<int> actions;
    std::vector<int> observations;

    std::size_t length() const { return actions.size(); }
};

/// Linear predictive state model: q' = T_ao q / u^T T_ao q, f(q, a) = F_a q.
///
/// Immutable once built. Besides the raw operators it caches, for each
/// (a, o), the indices of the nonzero rows of T_ao and the matching row
/// block. Everything downstream stores Phi T_ao compactly through that block.
class PsrModel {
public:
    PsrModel(Vector q1, Vector u, std::vector<std::vector<Matrix>> transitions,
             std::vector<Matrix> features, double gamma);

    int k() const { return static_cast<int>(q1_.size()); }
    int d() const { return static_cast<int>(features_.front().rows()); }
    int num_actions() const { return static_cast<int>(transitions_.size()); }
    int num_observations() const { return static_cast<int>(transitions_.front().size()); }
    double gamma() const { return gamma_; }

    const Vector& q1() const { return q1_; }
    const Vector& u() const { return u_; }
    const Matrix& T(int a, int o) const { return transitions_[a][o]; }
    const Matrix& F(int a) const { return features_[a]; }

    /// Sorted indices of the rows of T_ao that are not identically zero.
    const std::vector<int>& row_support(int a, int o) const { return support_[cell(a, o)]; }
    /// T_ao restricted to row_support(a, o); |support| x k.
    const Matrix& row_block(int a, int o) const { return blocks_[cell(a, o)]; }

    int cell(int a, int o) const { return a * num_observations() + o; }

    /// Largest Frobenius norm over the feature matrices.
    double max_feature_norm() const;

    /// FNV-1a hash over dimensions and every stored coefficient.
    std::uint64_t fingerprint() const { return fingerprint_; }

    PsrModel with_gamma(double gamma) const;
    PsrModel with_initial_state(Vector q1) const;

private:
    Vector q1_;
    Vector u_;
    std::vector<std::vector<Matrix>> transitions_;
    std::vector<Matrix> features_;
    double gamma_;
    std::vector<std::vector<int>> support_;
    std::vector<Matrix> blocks_;
    std::uint64_t fingerprint_ = 0;
};

void validate(const MdpSpec& spec);
void validate(const PomdpSpec& spec);

/// Observations are next states; T_ao keeps row o of T_a.
PsrModel mdp_to_psr(const MdpSpec& spec);
/// T_ao = diag(observation row o) T_a.
PsrModel pomdp_to_psr(const PomdpSpec& spec);

struct StateUpdate {
    Vector state;
    double prob = 0.0;
};

StateUpdate psr_update(const PsrModel& model, const Vector& q, int a, int o);

struct ObservationDistribution {
    Vector probs;
    /// Largest deviation seen before clamping/renormalizing (negativity or sum error).
    double drift = 0.0;
};

ObservationDistribution observation_probs(const PsrModel& model, const Vector& q, int a);

Vector feature_vector(const PsrModel& model, const Vector& q, int a);

/// Row vector m with test value m q.
RowVector prediction_vector(const PsrModel& model, const SimpleTest& test);
double test_value(const PsrModel& model, const Vector& q, const SimpleTest& test);

/// Matrix whose rows are the prediction vectors of the given tests. Throws
/// SingularCoreTests when its smallest singular value is below 1e-8 of the largest.
Matrix core_test_matrix(const PsrModel& model, const std::vector<SimpleTest>& tests);

/// Change of state coordinates q' = S q for an invertible S.
PsrModel similarity_transform(const PsrModel& model, const Matrix& S);

/// Re-expresses the model in the coordinates of the given core tests.
PsrModel transform_via_core_tests(const PsrModel& model, const std::vector<SimpleTest>& tests);

struct ValidationReport {
    double max_negativity = 0.0;
    double max_sum_deviation = 0.0;
    long checks = 0;
    bool passed = true;
};

/// Samples random-action trajectories and checks observation probabilities
/// along them.
ValidationReport validate_model(const PsrModel& model, int num_trajectories, int horizon,
                                std::uint64_t seed);

}  // namespace sfs
