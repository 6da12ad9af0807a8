#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sif {

// Closed-form proximal steps for the architecture constraint sets. All
// tie-breaks pick the lowest index.

/// Projection onto {x : ||x||_0 = 1}: keeps z_i at i = argmax |z_i|.
std::vector<double> prox_c1(std::span<const double> z);

/// Projection onto the box [0, 1]^d.
std::vector<double> prox_c2(std::span<const double> z);

/// Projection onto {x : ||x||_0 = k}: keeps the k largest-magnitude entries.
std::vector<double> prox_ck(std::span<const double> z, std::size_t k);

/// Euclidean projection onto the closed unit l2 ball.
std::vector<double> project_unit_ball(std::span<const double> z);
void project_unit_ball_inplace(std::span<double> z);

/// Indices kept by prox_ck, in ascending order.
std::vector<std::size_t> top_k_support(std::span<const double> z, std::size_t k);

// Membership predicates.
bool in_c1(std::span<const double> x);
bool in_c2(std::span<const double> x);
bool in_ck(std::span<const double> x, std::size_t k);
bool in_unit_ball(std::span<const double> x, double tol = 1e-12);

}  // namespace sif
