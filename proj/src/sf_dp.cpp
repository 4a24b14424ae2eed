#include "sfset/sf_dp.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "parallel.hpp"

namespace sfs {

namespace {

double frob_dot(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

struct RowArgmax {
    Vector value;
    Eigen::VectorXi index;
};

// Row-wise maximum of S; the lowest column wins unless a later one is larger by kTieTol.
RowArgmax row_argmax(const Matrix& S) {
    RowArgmax out;
    const Eigen::Index n = S.rows();
    out.value = S.col(0);
    out.index = Eigen::VectorXi::Zero(n);
    for (Eigen::Index j = 1; j < S.cols(); ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (S(i, j) > out.value[i] + kTieTol) {
                out.value[i] = S(i, j);
                out.index[i] = static_cast<int>(j);
            }
        }
    }
    return out;
}

// K (|Rs| x |Rt|) expanded to act on column-major d x |R| blocks: K kron I_d.
Matrix kron_identity(const Matrix& K, int d) {
    Matrix E = Matrix::Zero(K.rows() * d, K.cols() * d);
    for (Eigen::Index r = 0; r < K.rows(); ++r)
        for (Eigen::Index c = 0; c < K.cols(); ++c)
            if (K(r, c) != 0.0)
                for (int i = 0; i < d; ++i) E(r * d + i, c * d + i) = K(r, c);
    return E;
}

RowVector restricted_vec(const Matrix& M, const std::vector<int>& cols) {
    const Eigen::Index d = M.rows();
    RowVector v(d * static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < cols.size(); ++r) v.segment(static_cast<Eigen::Index>(r) * d, d) = M.col(cols[r]).transpose();
    return v;
}

struct Coupling {
    int source = 0;
    // Maps a source block row to its contribution on the target's rows.
    Matrix E;
};

struct TargetPlan {
    std::vector<std::vector<Coupling>> by_action;
    std::vector<RowVector> fsub;
    // Rows of (points * canon) have Euclidean distances equal to the
    // Frobenius distances of the full d x k points.
    Matrix canon;
};

struct Plan {
    std::vector<TargetPlan> targets;

    explicit Plan(const PsrModel& model) {
        const int A = model.num_actions();
        const int O = model.num_observations();
        const int k = model.k();
        const int d = model.d();
        // For every action and state column x, the observations whose block touches x.
        std::vector<std::vector<std::vector<int>>> touching(static_cast<std::size_t>(A),
                                                            std::vector<std::vector<int>>(static_cast<std::size_t>(k)));
        for (int a = 0; a < A; ++a)
            for (int o = 0; o < O; ++o) {
                const Matrix& B = model.row_block(a, o);
                for (int x = 0; x < k; ++x)
                    if (B.rows() > 0 && (B.col(x).array() != 0.0).any()) touching[a][x].push_back(o);
            }
        targets.resize(static_cast<std::size_t>(A * O));
        for (int a = 0; a < A; ++a) {
            for (int o = 0; o < O; ++o) {
                TargetPlan& tp = targets[model.cell(a, o)];
                const std::vector<int>& rows = model.row_support(a, o);
                tp.by_action.resize(static_cast<std::size_t>(A));
                for (int b = 0; b < A; ++b) tp.fsub.push_back(restricted_vec(model.F(b), rows));
                if (rows.empty()) continue;
                for (int b = 0; b < A; ++b) {
                    std::vector<int> sources;
                    for (int x : rows) sources.insert(sources.end(), touching[b][x].begin(), touching[b][x].end());
                    std::sort(sources.begin(), sources.end());
                    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
                    for (int p : sources) {
                        const Matrix& Bs = model.row_block(b, p);
                        Matrix K(Bs.rows(), static_cast<Eigen::Index>(rows.size()));
                        for (std::size_t c = 0; c < rows.size(); ++c) K.col(c) = Bs.col(rows[c]);
                        tp.by_action[b].push_back({model.cell(b, p), kron_identity(K, d)});
                    }
                }
                const Matrix& B = model.row_block(a, o);
                Eigen::SelfAdjointEigenSolver<Matrix> eig(B * B.transpose());
                const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
                tp.canon = kron_identity(eig.eigenvectors() * root.asDiagonal(), d);
            }
        }
    }
};

// Per-direction quantities shared by every pass over a set.
struct DirData {
    int n = 0;
    // Per cell, row i is vec(m_i B_ao^T).
    std::vector<Matrix> G;
    // n x A, <m_i, F_a>.
    Matrix fdot;
};

DirData prepare(const PsrModel& model, const DirectionSet& dirs, int threads) {
    const int d = model.d();
    const int k = model.k();
    DirData out;
    out.n = dirs.size();
    Matrix stack(static_cast<Eigen::Index>(out.n) * d, k);
    for (int i = 0; i < out.n; ++i) {
        if (dirs[i].rows() != d || dirs[i].cols() != k) throw DimensionMismatch("direction must be d x k");
        stack.middleRows(static_cast<Eigen::Index>(i) * d, d) = dirs[i];
    }
    out.fdot.resize(out.n, model.num_actions());
    for (int i = 0; i < out.n; ++i)
        for (int a = 0; a < model.num_actions(); ++a) out.fdot(i, a) = frob_dot(dirs[i], model.F(a));
    const int cells = model.num_actions() * model.num_observations();
    out.G.resize(static_cast<std::size_t>(cells));
    detail::parallel_for(cells, threads, [&](int c) {
        const Matrix& B = model.row_block(c / model.num_observations(), c % model.num_observations());
        const Eigen::Index r = B.rows();
        Matrix& G = out.G[c];
        G.resize(out.n, d * r);
        if (r == 0) return;
        const Matrix X = stack * B.transpose();
        for (int i = 0; i < out.n; ++i)
            for (Eigen::Index j = 0; j < r; ++j) G.block(i, j * d, 1, d) = X.block(static_cast<Eigen::Index>(i) * d, j, d, 1).transpose();
    });
    return out;
}

struct StoredPass {
    // Per cell: max over stored points of <m_i B^T, c_j> and its index.
    std::vector<RowArgmax> cell;
    Vector h;
    std::vector<int> action;
};

StoredPass stored_pass(const PsrModel& model, const SFSet& set, const DirData& dd, int threads) {
    const int A = model.num_actions();
    const int O = model.num_observations();
    StoredPass out;
    out.cell.resize(set.cells.size());
    detail::parallel_for(static_cast<int>(set.cells.size()), threads, [&](int c) {
        const SFCell& cell = set.cells[c];
        if (cell.size() == 0) {
            out.cell[c].value = Vector::Zero(dd.n);
            out.cell[c].index = Eigen::VectorXi::Constant(dd.n, -1);
            return;
        }
        out.cell[c] = row_argmax(dd.G[c] * cell.points.transpose());
    });
    out.h.resize(dd.n);
    out.action.assign(static_cast<std::size_t>(dd.n), 0);
    for (int i = 0; i < dd.n; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) {
            double v = 0.0;
            for (int o = 0; o < O; ++o) v += out.cell[model.cell(a, o)].value[i];
            v = dd.fdot(i, a) + model.gamma() * v;
            if (a == 0 || v > best + kTieTol) {
                best = v;
                out.action[i] = a;
            }
        }
        out.h[i] = best;
    }
    return out;
}

// Where a cell's point for one direction comes from: an old point or a new combination.
using Signature = std::vector<int>;

class CellBuilder {
public:
    CellBuilder(const SFSet& set, const TargetPlan& tp, const SFCell& old, int n, int d, double gamma)
        : set_(set), tp_(tp), old_(old), d_(d), gamma_(gamma), slot_(static_cast<std::size_t>(n), -1) {}

    void keep_old(int i, int j) { assign(i, {-1, j}); }

    void use_new(int i, int action, const std::vector<int>& chosen) {
        Signature sig;
        sig.reserve(chosen.size() + 1);
        sig.push_back(action);
        sig.insert(sig.end(), chosen.begin(), chosen.end());
        assign(i, std::move(sig));
    }

    SFCell finish(const Matrix& G, double dedup_tol, int max_points) {
        SFCell cell;
        cell.rows = old_.rows;
        const Eigen::Index width = static_cast<Eigen::Index>(d_ * old_.rows.size());
        Matrix rows(static_cast<Eigen::Index>(order_.size()), width);
        for (std::size_t u = 0; u < order_.size(); ++u) rows.row(u) = materialize(*order_[u]);

        // Tolerance dedup; the first point of each cluster represents it.
        const Matrix Y = rows * tp_.canon;
        Vector w(width);
        for (Eigen::Index c = 0; c < width; ++c) w[c] = 1.0 + 0.618 * static_cast<double>(c);
        const double reach = dedup_tol * w.norm();
        std::multimap<double, int> kept_by_key;
        std::vector<int> remap(order_.size());
        std::vector<int> kept;
        for (std::size_t u = 0; u < order_.size(); ++u) {
            const double key = Y.row(u).dot(w);
            int match = -1;
            for (auto it = kept_by_key.lower_bound(key - reach); it != kept_by_key.end() && it->first <= key + reach; ++it) {
                if ((Y.row(u) - Y.row(kept[it->second])).norm() <= dedup_tol &&
                    (match < 0 || it->second < match))
                    match = it->second;
            }
            if (match < 0) {
                match = static_cast<int>(kept.size());
                kept.push_back(static_cast<int>(u));
                kept_by_key.emplace(key, match);
            }
            remap[u] = match;
        }
        const int count = (max_points > 0) ? std::min<int>(max_points, static_cast<int>(kept.size()))
                                            : static_cast<int>(kept.size());
        cell.points.resize(count, width);
        for (int j = 0; j < count; ++j) cell.points.row(j) = rows.row(kept[j]);
        cell.slot.resize(slot_.size());
        for (std::size_t i = 0; i < slot_.size(); ++i) {
            int j = remap[slot_[i]];
            if (j >= count) {
                const Vector s = cell.points * G.row(static_cast<Eigen::Index>(i)).transpose();
                Eigen::Index best = 0;
                for (Eigen::Index t = 1; t < s.size(); ++t)
                    if (s[t] > s[best] + kTieTol) best = t;
                j = static_cast<int>(best);
            }
            cell.slot[i] = j;
        }
        return cell;
    }

private:
    void assign(int i, Signature sig) {
        auto it = unique_.find(sig);
        if (it == unique_.end()) {
            it = unique_.emplace(std::move(sig), static_cast<int>(order_.size())).first;
            order_.push_back(&it->first);
        }
        slot_[i] = it->second;
    }

    RowVector materialize(const Signature& sig) const {
        if (sig[0] < 0) return old_.points.row(sig[1]);
        const int a = sig[0];
        RowVector row = tp_.fsub[a];
        const auto& couplings = tp_.by_action[a];
        for (std::size_t c = 0; c < couplings.size(); ++c)
            row.noalias() += gamma_ * set_.cells[couplings[c].source].points.row(sig[c + 1]) * couplings[c].E;
        return row;
    }

    const SFSet& set_;
    const TargetPlan& tp_;
    const SFCell& old_;
    int d_;
    double gamma_;
    std::map<Signature, int> unique_;
    std::vector<const Signature*> order_;
    std::vector<int> slot_;
};

struct TargetPass {
    // Per cell: support of the represented set in direction m_i T_ao^T.
    std::vector<Vector> score;
    std::vector<SFCell> next;
};

TargetPass target_pass(const PsrModel& model, const Plan& plan, const SFSet& set, const DirData& dd,
                       const StoredPass& stored, const BackupConfig* build, int threads) {
    const int A = model.num_actions();
    const int d = model.d();
    const double gamma = model.gamma();
    const int cells = static_cast<int>(set.cells.size());
    TargetPass out;
    out.score.resize(static_cast<std::size_t>(cells));
    if (build) out.next.resize(static_cast<std::size_t>(cells));

    std::vector<char> updating(static_cast<std::size_t>(dd.n), 1);
    if (build && build->incremental_subset) {
        std::fill(updating.begin(), updating.end(), 0);
        for (int i : *build->incremental_subset) {
            if (i < 0 || i >= dd.n) throw DimensionMismatch("incremental direction index out of range");
            updating[i] = 1;
        }
    }

    detail::parallel_for(cells, threads, [&](int t) {
        const SFCell& old = set.cells[t];
        const TargetPlan& tp = plan.targets[t];
        if (old.rows.empty()) {
            out.score[t] = Vector::Zero(dd.n);
            if (build) out.next[t] = SFCell{{}, Matrix(0, 0), std::vector<int>(static_cast<std::size_t>(dd.n), -1)};
            return;
        }
        const Matrix& G = dd.G[t];
        Vector best;
        std::vector<int> best_action(static_cast<std::size_t>(dd.n), 0);
        std::vector<std::vector<Eigen::VectorXi>> choice(static_cast<std::size_t>(A));
        for (int b = 0; b < A; ++b) {
            Vector val = G * tp.fsub[b].transpose();
            for (const Coupling& c : tp.by_action[b]) {
                const Matrix H = G * c.E.transpose();
                RowArgmax r = row_argmax(H * set.cells[c.source].points.transpose());
                val += gamma * r.value;
                choice[b].push_back(std::move(r.index));
            }
            if (b == 0) {
                best = val;
                continue;
            }
            for (int i = 0; i < dd.n; ++i)
                if (val[i] > best[i] + kTieTol) {
                    best[i] = val[i];
                    best_action[i] = b;
                }
        }
        out.score[t] = best;
        if (!build) return;

        CellBuilder builder(set, tp, old, dd.n, d, gamma);
        std::vector<int> chosen;
        for (int i = 0; i < dd.n; ++i) {
            if (!updating[i]) {
                builder.keep_old(i, old.slot[i]);
                continue;
            }
            int a = 0;
            chosen.clear();
            if (build->retention == Retention::PerCell) {
                a = best_action[i];
                for (const Eigen::VectorXi& idx : choice[a]) chosen.push_back(idx[i]);
            } else {
                a = stored.action[i];
                for (const Coupling& c : tp.by_action[a]) chosen.push_back(stored.cell[c.source].index[i]);
            }
            if (build->monotone) {
                double fresh = 0.0;
                if (build->retention == Retention::PerCell) {
                    fresh = best[i];
                } else {
                    RowVector row = tp.fsub[a];
                    const auto& couplings = tp.by_action[a];
                    for (std::size_t c = 0; c < couplings.size(); ++c)
                        row.noalias() += gamma * set.cells[couplings[c].source].points.row(chosen[c]) * couplings[c].E;
                    fresh = G.row(i).dot(row);
                }
                const RowArgmax& prev = stored.cell[t];
                if (prev.value[i] >= fresh) {
                    builder.keep_old(i, prev.index[i]);
                    continue;
                }
            }
            builder.use_new(i, a, chosen);
        }
        out.next[t] = builder.finish(G, build->dedup_tol, build->max_points);
    });
    return out;
}

Vector backup_support(const PsrModel& model, const DirData& dd, const TargetPass& tp) {
    const int A = model.num_actions();
    const int O = model.num_observations();
    Vector hb(dd.n);
    for (int i = 0; i < dd.n; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) {
            double v = 0.0;
            for (int o = 0; o < O; ++o) v += tp.score[model.cell(a, o)][i];
            best = std::max(best, dd.fdot(i, a) + model.gamma() * v);
        }
        hb[i] = best;
    }
    return hb;
}

// Monotone runs iterate Phi -> conv(Phi u B Phi), whose support is max(h, h_B).
Vector error_against(const Vector& backup, const Vector& current, bool monotone) {
    const Vector diff = backup - current;
    return monotone ? Vector(diff.cwiseMax(0.0)) : Vector(diff.cwiseAbs());
}

void check_config(const BackupConfig& config) {
    if (config.max_points < 0) throw DimensionMismatch("max_points must be nonnegative");
    if (!(config.dedup_tol > 0.0)) throw DimensionMismatch("dedup_tol must be positive");
    if (config.convergence_tol && !(*config.convergence_tol > 0.0))
        throw DimensionMismatch("convergence_tol must be positive");
    if (config.max_iters < 0) throw DimensionMismatch("max_iters must be nonnegative");
}

}  // namespace

DirectionSet sample_directions(std::uint64_t seed, int count, int d, int k) {
    if (count < 1 || d < 1 || k < 1) throw DimensionMismatch("need at least one d x k direction");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    DirectionSet out;
    out.seed = seed;
    out.directions.reserve(static_cast<std::size_t>(count));
    while (static_cast<int>(out.directions.size()) < count) {
        Matrix m(d, k);
        for (int j = 0; j < k; ++j)
            for (int i = 0; i < d; ++i) m(i, j) = normal(rng);
        const double n = m.norm();
        if (n == 0.0) continue;
        out.directions.push_back(m / n);
    }
    return out;
}

DirectionSet make_directions(std::vector<Matrix> directions, std::uint64_t seed) {
    DirectionSet out;
    out.seed = seed;
    for (Matrix& m : directions) {
        const double n = m.norm();
        if (!(n > 0.0)) throw DimensionMismatch("direction must be nonzero");
        out.directions.push_back(m / n);
    }
    return out;
}

DirectionSet tiled_directions(const std::vector<Vector>& feature_dirs, int k) {
    std::vector<Matrix> dirs;
    dirs.reserve(feature_dirs.size());
    for (const Vector& g : feature_dirs) dirs.push_back(g * RowVector::Ones(k));
    return make_directions(std::move(dirs));
}

std::vector<DirectionSet> fresh_direction_sets(std::uint64_t seed, int count, int size, int d, int k) {
    std::vector<DirectionSet> out;
    std::mt19937_64 seeder(seed);
    for (int s = 0; s < count; ++s) out.push_back(sample_directions(seeder(), size, d, k));
    return out;
}

SupportPoint support(const std::vector<Matrix>& points, const Matrix& m) {
    if (points.empty()) throw EmptySet("support of an empty point list");
    SupportPoint best{frob_dot(points[0], m), 0};
    for (std::size_t j = 1; j < points.size(); ++j) {
        const double v = frob_dot(points[j], m);
        if (v > best.value + kTieTol) best = {v, static_cast<int>(j)};
    }
    return best;
}

double default_convergence_tol(const PsrModel& model) {
    return 1e-8 * model.max_feature_norm() / (1.0 - model.gamma());
}

Matrix SFSet::coefficient(int a, int o, int j) const {
    const SFCell& c = cell(a, o);
    const RowVector row = c.points.row(j);
    return Eigen::Map<const Matrix>(row.data(), d, static_cast<Eigen::Index>(c.rows.size()));
}

Matrix SFSet::point(const PsrModel& model, int a, int o, int j) const {
    return coefficient(a, o, j) * model.row_block(a, o);
}

int SFSet::num_points() const {
    int total = 0;
    for (const SFCell& c : cells) total += c.size();
    return total;
}

void check_compatible(const PsrModel& model, const SFSet& set) {
    if (set.d != model.d() || set.k != model.k() || set.num_actions != model.num_actions() ||
        set.num_observations != model.num_observations())
        throw DimensionMismatch("successor feature set does not match the model dimensions");
    if (set.cells.size() != static_cast<std::size_t>(model.num_actions() * model.num_observations()))
        throw DimensionMismatch("successor feature set has the wrong number of cells");
    for (int a = 0; a < model.num_actions(); ++a)
        for (int o = 0; o < model.num_observations(); ++o) {
            const SFCell& c = set.cell(a, o);
            if (c.rows != model.row_support(a, o))
                throw DimensionMismatch("cell row support does not match T_ao");
            if (!c.rows.empty() && c.points.cols() != static_cast<Eigen::Index>(model.d() * c.rows.size()))
                throw DimensionMismatch("cell point width does not match d |R|");
            if (c.slot.size() != static_cast<std::size_t>(set.directions.size()))
                throw DimensionMismatch("cell needs one slot per direction");
        }
}

SFSet initial_set(const PsrModel& model, const DirectionSet& directions, const std::optional<Matrix>& stop_matrix) {
    if (directions.size() < 1) throw DimensionMismatch("need at least one direction");
    const int d = model.d();
    const int k = model.k();
    if (stop_matrix && (stop_matrix->rows() != d || stop_matrix->cols() != k))
        throw DimensionMismatch("stop matrix must be d x k");
    SFSet set;
    set.d = d;
    set.k = k;
    set.num_actions = model.num_actions();
    set.num_observations = model.num_observations();
    set.fingerprint = model.fingerprint();
    set.directions = directions;
    const Matrix base = stop_matrix ? *stop_matrix : Matrix::Zero(d, k);
    for (int a = 0; a < model.num_actions(); ++a)
        for (int o = 0; o < model.num_observations(); ++o) {
            SFCell c;
            c.rows = model.row_support(a, o);
            if (c.rows.empty()) {
                c.points.resize(0, 0);
                c.slot.assign(static_cast<std::size_t>(directions.size()), -1);
            } else {
                c.points = restricted_vec(base, c.rows);
                c.slot.assign(static_cast<std::size_t>(directions.size()), 0);
            }
            set.cells.push_back(std::move(c));
        }
    return set;
}

SFSet point_based_backup(const PsrModel& model, const SFSet& current, const BackupConfig& config) {
    check_config(config);
    check_compatible(model, current);
    const int threads = detail::resolve_threads(config.threads);
    const Plan plan(model);
    const DirData dd = prepare(model, current.directions, threads);
    const StoredPass stored = stored_pass(model, current, dd, threads);
    TargetPass tp = target_pass(model, plan, current, dd, stored, &config, threads);
    SFSet next = current;
    next.cells = std::move(tp.next);
    next.iteration = current.iteration + 1;
    return next;
}

Matrix constant_action_successor_matrix(const PsrModel& model, int action) {
    if (action < 0 || action >= model.num_actions()) throw DimensionMismatch("action out of range");
    Matrix Ta = Matrix::Zero(model.k(), model.k());
    for (int o = 0; o < model.num_observations(); ++o) Ta += model.T(action, o);
    const Matrix M = Matrix::Identity(model.k(), model.k()) - model.gamma() * Ta;
    // A (I - gamma T_a) = F_a, solved through the transpose.
    return M.transpose().partialPivLu().solve(model.F(action).transpose()).transpose();
}

std::vector<Eigen::VectorXi> cell_maximizers(const PsrModel& model, const SFSet& set,
                                             const DirectionSet& directions) {
    check_compatible(model, set);
    const int threads = detail::resolve_threads(0);
    const DirData dd = prepare(model, directions, threads);
    StoredPass stored = stored_pass(model, set, dd, threads);
    std::vector<Eigen::VectorXi> out;
    for (RowArgmax& c : stored.cell) out.push_back(std::move(c.index));
    return out;
}

Vector support_values(const PsrModel& model, const SFSet& set, const DirectionSet& directions) {
    check_compatible(model, set);
    const int threads = detail::resolve_threads(0);
    const DirData dd = prepare(model, directions, threads);
    return stored_pass(model, set, dd, threads).h;
}

BellmanErrors bellman_error(const PsrModel& model, const SFSet& set, const DirectionSet& directions) {
    check_compatible(model, set);
    const int threads = detail::resolve_threads(0);
    const Plan plan(model);
    const DirData dd = prepare(model, directions, threads);
    const StoredPass stored = stored_pass(model, set, dd, threads);
    const TargetPass tp = target_pass(model, plan, set, dd, stored, nullptr, threads);
    return {stored.h, backup_support(model, dd, tp)};
}

DpResult run_dp(const PsrModel& model, const BackupConfig& config, const DirectionSet& directions,
                const DpOptions& options) {
    check_config(config);
    const auto start = std::chrono::steady_clock::now();
    const int threads = detail::resolve_threads(config.threads);
    const double tol = config.convergence_tol.value_or(default_convergence_tol(model));
    const Plan plan(model);
    const DirData dd = prepare(model, directions, threads);

    DirData fresh_dd;
    std::vector<int> fresh_offsets{0};
    if (!options.fresh.empty()) {
        DirectionSet all;
        for (const DirectionSet& s : options.fresh) {
            all.directions.insert(all.directions.end(), s.directions.begin(), s.directions.end());
            fresh_offsets.push_back(all.size());
        }
        fresh_dd = prepare(model, all, threads);
    }
    const int interval = std::max(1, options.fresh_interval);

    DpResult result;
    SFSet set = initial_set(model, directions, config.stop_matrix);
    Vector prev_h;
    for (int n = 0;; ++n) {
        const StoredPass stored = stored_pass(model, set, dd, threads);
        TraceRow row;
        row.iteration = n;
        row.num_points = set.num_points();
        row.max_support_change = std::numeric_limits<double>::quiet_NaN();
        bool done = n >= config.max_iters;
        if (n > 0) {
            row.max_support_change = (stored.h - prev_h).cwiseAbs().maxCoeff();
            if (row.max_support_change < tol) {
                done = true;
                result.trace.converged = true;
            }
        }
        TargetPass tp = target_pass(model, plan, set, dd, stored, done ? nullptr : &config, threads);
        row.max_error_optimized = error_against(backup_support(model, dd, tp), stored.h, config.monotone).maxCoeff();

        row.max_error_fresh = std::numeric_limits<double>::quiet_NaN();
        row.fresh_error_stderr = std::numeric_limits<double>::quiet_NaN();
        if (!options.fresh.empty() && (done || n % interval == 0)) {
            const StoredPass fs = stored_pass(model, set, fresh_dd, threads);
            const TargetPass ft = target_pass(model, plan, set, fresh_dd, fs, nullptr, threads);
            const Vector err = error_against(backup_support(model, fresh_dd, ft), fs.h, config.monotone);
            const int sets = static_cast<int>(options.fresh.size());
            Vector per_set(sets);
            for (int s = 0; s < sets; ++s)
                per_set[s] = err.segment(fresh_offsets[s], fresh_offsets[s + 1] - fresh_offsets[s]).maxCoeff();
            row.max_error_fresh = per_set.mean();
            row.fresh_error_stderr =
                sets > 1 ? std::sqrt((per_set.array() - per_set.mean()).square().sum() / (sets - 1) / sets) : 0.0;
        }
        row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.trace.rows.push_back(row);
        if (options.observer) options.observer(set, row);
        if (done) break;
        prev_h = stored.h;
        SFSet next = set;
        next.cells = std::move(tp.next);
        next.iteration = n + 1;
        set = std::move(next);
    }
    result.set = std::move(set);
    return result;
}

ProjectedSet::ProjectedSet(const PsrModel& model, const SFSet& set, const Vector& q)
    : q_(q), gamma_(model.gamma()), num_obs_(model.num_observations()) {
    check_compatible(model, set);
    if (q.size() != model.k()) throw DimensionMismatch("state must have length k");
    const int d = model.d();
    for (int a = 0; a < model.num_actions(); ++a) base_.push_back(model.F(a) * q);
    projected_.resize(set.cells.size());
    for (int a = 0; a < model.num_actions(); ++a)
        for (int o = 0; o < num_obs_; ++o) {
            const SFCell& c = set.cell(a, o);
            Matrix& V = projected_[model.cell(a, o)];
            V = Matrix::Zero(c.size(), d);
            if (c.size() == 0) continue;
            const Vector bq = model.row_block(a, o) * q;
            for (std::size_t r = 0; r < c.rows.size(); ++r)
                if (bq[r] != 0.0) V.noalias() += bq[r] * c.points.middleCols(static_cast<Eigen::Index>(r) * d, d);
        }
}

LmoResult ProjectedSet::lmo(int action, const Vector& g) const {
    LmoResult out;
    out.action = action;
    out.vertex = base_[action];
    out.annotation.assign(static_cast<std::size_t>(num_obs_), -1);
    for (int o = 0; o < num_obs_; ++o) {
        const Matrix& V = projected(action, o);
        if (V.rows() == 0) continue;
        const Vector s = V * g;
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < s.size(); ++j)
            if (s[j] > s[best] + kTieTol) best = j;
        out.annotation[o] = static_cast<int>(best);
        out.vertex.noalias() += gamma_ * V.row(best).transpose();
    }
    out.value = out.vertex.dot(g);
    return out;
}

LmoResult ProjectedSet::lmo(const Vector& g) const {
    LmoResult best = lmo(0, g);
    for (int a = 1; a < num_actions(); ++a) {
        LmoResult r = lmo(a, g);
        if (r.value > best.value + kTieTol) best = std::move(r);
    }
    return best;
}

Vector ProjectedSet::vertex(int action, const std::vector<int>& annotation) const {
    if (static_cast<int>(annotation.size()) != num_obs_) throw DimensionMismatch("annotation needs one entry per observation");
    Vector v = base_[action];
    for (int o = 0; o < num_obs_; ++o)
        if (annotation[o] >= 0) v.noalias() += gamma_ * projected(action, o).row(annotation[o]).transpose();
    return v;
}

ProjectedSet project_set(const SFSet& set, const PsrModel& model, const Vector& q) {
    return ProjectedSet(model, set, q);
}

}  // namespace sfs
