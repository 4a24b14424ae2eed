#include "sfset/envs.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace sfs {

namespace {

std::pair<int, int> edge(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

void check_grid(const GridSpec& spec) {
    if (spec.width < 1 || spec.height < 1) throw DimensionMismatch("grid dimensions must be positive");
    if (!(spec.noise >= 0.0 && spec.noise < 1.0)) throw InvalidModel("noise must lie in [0, 1)");
    if (spec.start_cell < 0 || spec.start_cell >= spec.num_cells()) throw DimensionMismatch("start cell out of range");
}

// Grid neighbour in direction `action`, or -1 off the grid.
int neighbour(const GridSpec& spec, int cell, int action) {
    const int x = cell % spec.width;
    const int y = cell / spec.width;
    switch (action) {
        case kUp: return y + 1 < spec.height ? cell + spec.width : -1;
        case kDown: return y > 0 ? cell - spec.width : -1;
        case kLeft: return x > 0 ? cell - 1 : -1;
        case kRight: return x + 1 < spec.width ? cell + 1 : -1;
        default: return -1;
    }
}

std::set<std::pair<int, int>> wall_set(const GridSpec& spec) {
    std::set<std::pair<int, int>> walls;
    for (const auto& [a, b] : spec.walls) walls.insert(edge(a, b));
    return walls;
}

std::vector<int> open_neighbours(const GridSpec& spec, const std::set<std::pair<int, int>>& walls, int cell) {
    std::vector<int> out;
    for (int a = kUp; a <= kRight; ++a) {
        const int n = neighbour(spec, cell, a);
        if (n >= 0 && !walls.count(edge(cell, n))) out.push_back(n);
    }
    return out;
}

std::vector<Matrix> grid_features(const GridSpec& spec, int num_actions) {
    const int k = spec.num_cells();
    Matrix f;
    if (spec.feature_mode == FeatureMode::Coordinates) {
        f.resize(2, k);
        for (int c = 0; c < k; ++c) {
            const int x = c % spec.width;
            const int y = c / spec.width;
            f(0, c) = spec.width > 1 ? 2.0 * x / (spec.width - 1) - 1.0 : 0.0;
            f(1, c) = spec.height > 1 ? 2.0 * y / (spec.height - 1) - 1.0 : 0.0;
        }
    } else {
        std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        f.resize(3, k);
        for (int c = 0; c < k; ++c)
            for (int i = 0; i < 3; ++i) f(i, c) = unit(rng);
    }
    return std::vector<Matrix>(static_cast<std::size_t>(num_actions), f);
}

}  // namespace

bool grid_connected(const GridSpec& spec) {
    const auto walls = wall_set(spec);
    std::vector<char> seen(static_cast<std::size_t>(spec.num_cells()), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        const int c = stack.back();
        stack.pop_back();
        for (int n : open_neighbours(spec, walls, c))
            if (!seen[n]) {
                seen[n] = 1;
                ++count;
                stack.push_back(n);
            }
    }
    return count == spec.num_cells();
}

GridSpec random_maze(int width, int height, std::uint64_t seed, double density) {
    GridSpec spec;
    spec.width = width;
    spec.height = height;
    spec.seed = seed;
    check_grid(spec);
    if (!(density >= 0.0 && density < 1.0)) throw InvalidModel("wall density must lie in [0, 1)");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution wall(density);
    for (;;) {
        spec.walls.clear();
        for (int c = 0; c < spec.num_cells(); ++c) {
            for (int a : {kUp, kRight}) {
                const int n = neighbour(spec, c, a);
                if (n >= 0 && wall(rng)) spec.walls.emplace_back(c, n);
            }
        }
        if (grid_connected(spec)) return spec;
    }
}

int grid_move(const GridSpec& spec, int cell, int action) {
    if (action == kIdle) return cell;
    const int n = neighbour(spec, cell, action);
    if (n < 0) return cell;
    for (const auto& [a, b] : spec.walls)
        if (edge(a, b) == edge(cell, n)) return cell;
    return n;
}

MdpSpec gridworld_mdp(const GridSpec& spec) {
    check_grid(spec);
    const int k = spec.num_cells();
    const int A = spec.idle_action ? 5 : 4;
    MdpSpec out;
    for (int a = 0; a < A; ++a) {
        Matrix T = Matrix::Zero(k, k);
        for (int s = 0; s < k; ++s) T(grid_move(spec, s, a), s) = 1.0;
        out.transitions.push_back(std::move(T));
    }
    out.features = grid_features(spec, A);
    out.b1 = Vector::Unit(k, spec.start_cell);
    out.gamma = spec.gamma;
    return out;
}

PomdpSpec gridworld_pomdp(const GridSpec& spec) {
    check_grid(spec);
    const int k = spec.num_cells();
    const int A = spec.idle_action ? 5 : 4;
    const auto walls = wall_set(spec);
    PomdpSpec out;
    for (int a = 0; a < A; ++a) {
        Matrix T = Matrix::Zero(k, k);
        for (int s = 0; s < k; ++s) {
            T(grid_move(spec, s, a), s) += 1.0 - spec.noise;
            const std::vector<int> open = open_neighbours(spec, walls, s);
            if (open.empty()) {
                T(s, s) += spec.noise;
            } else {
                for (int n : open) T(n, s) += spec.noise / static_cast<double>(open.size());
            }
        }
        out.transitions.push_back(std::move(T));
    }
    out.observation = Matrix::Zero(k, k);
    for (int s = 0; s < k; ++s) {
        std::vector<int> adjacent;
        for (int a = kUp; a <= kRight; ++a)
            if (const int n = neighbour(spec, s, a); n >= 0) adjacent.push_back(n);
        if (adjacent.empty()) {
            out.observation(s, s) = 1.0;
            continue;
        }
        out.observation(s, s) = 1.0 - spec.noise;
        for (int n : adjacent) out.observation(n, s) += spec.noise / static_cast<double>(adjacent.size());
    }
    out.features = grid_features(spec, A);
    out.b1 = Vector::Unit(k, spec.start_cell);
    out.gamma = spec.gamma;
    return out;
}

CarState mountain_car_step(const MountainCarSpec& spec, CarState s, int action) {
    const double accel = action == 0 ? -1.0 : 1.0;
    s.velocity += 0.001 * accel - 0.0025 * std::cos(3.0 * s.position);
    s.velocity = std::clamp(s.velocity, spec.velocity_min, spec.velocity_max);
    s.position += s.velocity;
    s.position = std::clamp(s.position, spec.position_min, spec.position_max);
    if (s.position <= spec.position_min && s.velocity < 0.0) s.velocity = 0.0;
    return s;
}

int mountain_car_cell(const MountainCarSpec& spec, CarState s) {
    auto bin = [&](double v, double lo, double hi) {
        const int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * spec.mesh));
        return std::clamp(b, 0, spec.mesh - 1);
    };
    return bin(s.velocity, spec.velocity_min, spec.velocity_max) * spec.mesh +
           bin(s.position, spec.position_min, spec.position_max);
}

CarState mountain_car_center(const MountainCarSpec& spec, int cell) {
    const int p = cell % spec.mesh;
    const int v = cell / spec.mesh;
    const double pw = (spec.position_max - spec.position_min) / spec.mesh;
    const double vw = (spec.velocity_max - spec.velocity_min) / spec.mesh;
    return {spec.position_min + (p + 0.5) * pw, spec.velocity_min + (v + 0.5) * vw};
}

Vector mountain_car_features(const MountainCarSpec& spec, CarState s) {
    const double x = 2.0 * (s.position - spec.position_min) / (spec.position_max - spec.position_min) - 1.0;
    const double y = 2.0 * (s.velocity - spec.velocity_min) / (spec.velocity_max - spec.velocity_min) - 1.0;
    const std::size_t g = spec.rbf_grid.size();
    Vector f(static_cast<Eigen::Index>(g * g));
    const double denom = 2.0 * spec.rbf_sigma * spec.rbf_sigma;
    for (std::size_t i = 0; i < g; ++i)
        for (std::size_t j = 0; j < g; ++j) {
            const double dx = x - spec.rbf_grid[j];
            const double dy = y - spec.rbf_grid[i];
            f[static_cast<Eigen::Index>(i * g + j)] = std::exp(-(dx * dx + dy * dy) / denom);
        }
    return f;
}

MdpSpec mountain_car(const MountainCarSpec& spec) {
    if (spec.mesh < 1 || spec.rbf_grid.empty()) throw DimensionMismatch("mesh and RBF grid must be nonempty");
    if (spec.subsamples < 1) throw DimensionMismatch("need at least one sample per cell axis");
    const int k = spec.mesh * spec.mesh;
    const int n = spec.subsamples;
    const double pw = (spec.position_max - spec.position_min) / spec.mesh;
    const double vw = (spec.velocity_max - spec.velocity_min) / spec.mesh;
    MdpSpec out;
    Matrix f(static_cast<Eigen::Index>(spec.rbf_grid.size() * spec.rbf_grid.size()), k);
    for (int c = 0; c < k; ++c) f.col(c) = mountain_car_features(spec, mountain_car_center(spec, c));
    for (int a = 0; a < 2; ++a) {
        Matrix T = Matrix::Zero(k, k);
        for (int c = 0; c < k; ++c) {
            const CarState centre = mountain_car_center(spec, c);
            const double weight = 1.0 / (n * n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const CarState s{centre.position + ((i + 0.5) / n - 0.5) * pw,
                                     centre.velocity + ((j + 0.5) / n - 0.5) * vw};
                    T(mountain_car_cell(spec, mountain_car_step(spec, s, a)), c) += weight;
                }
        }
        out.transitions.push_back(std::move(T));
        out.features.push_back(f);
    }
    out.b1 = Vector::Unit(k, mountain_car_cell(spec, {-0.5, 0.0}));
    out.gamma = spec.gamma;
    return out;
}

}  // namespace sfs
