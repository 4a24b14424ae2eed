#pragma once

#include "sfset/envs.hpp"
#include "sfset/model.hpp"

namespace sfs::testing {

/// Two states that swap on every step; f = state index + 1.
inline MdpSpec cycle_mdp(double gamma = 0.9) {
    MdpSpec m;
    Matrix T(2, 2);
    T << 0, 1, 1, 0;
    m.transitions = {T};
    Matrix f(1, 2);
    f << 1, 2;
    m.features = {f};
    m.b1 = Vector::Unit(2, 0);
    m.gamma = gamma;
    return m;
}

/// Two states, two actions (stay / switch), one observation per next state,
/// 2-D features that differ per action.
inline MdpSpec two_state_mdp(double gamma = 0.8) {
    MdpSpec m;
    m.transitions = {Matrix::Identity(2, 2), (Matrix(2, 2) << 0, 1, 1, 0).finished()};
    m.features = {(Matrix(2, 2) << 1, 0, 0, 1).finished(), (Matrix(2, 2) << -0.5, 0.3, 0.2, -0.4).finished()};
    m.b1 = (Vector(2) << 0.5, 0.5).finished();
    m.gamma = gamma;
    return m;
}

/// Tiger-like 2-state POMDP: listen (noisy observation, state kept) or act
/// (random reset).
inline PomdpSpec two_state_pomdp(double gamma = 0.9) {
    PomdpSpec p;
    Matrix listen = Matrix::Identity(2, 2);
    Matrix reset = Matrix::Constant(2, 2, 0.5);
    Matrix drift(2, 2);
    drift << 0.9, 0.2, 0.1, 0.8;
    p.transitions = {listen, reset, drift};
    p.observation = (Matrix(2, 2) << 0.85, 0.25, 0.15, 0.75).finished();
    p.features = {(Matrix(1, 2) << -0.1, -0.1).finished(), (Matrix(1, 2) << 1.0, -1.0).finished(),
                  (Matrix(1, 2) << 0.3, 0.2).finished()};
    p.b1 = (Vector(2) << 0.5, 0.5).finished();
    p.gamma = gamma;
    return p;
}

inline GridSpec grid3() {
    GridSpec g;
    g.width = 3;
    g.height = 3;
    return g;
}

}  // namespace sfs::testing
