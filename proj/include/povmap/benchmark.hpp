#pragma once

#include <span>
#include <vector>

#include "povmap/util.hpp"

namespace povmap::benchmark {

/// One national benchmarking constraint sum_i q_i * theta_i = t over the
/// sub-area vector, with per-coordinate loss weights psi (default q).
struct BenchmarkProblem {
    std::vector<double> q;    // positive, sums to 1
    std::vector<double> psi;  // positive
    double t = 0.0;           // strictly interior benchmark value

    void validate() const;
};

BenchmarkProblem make_problem(std::vector<double> q, double t);
BenchmarkProblem make_problem(std::vector<double> q, std::vector<double> psi, double t);

/// Weighted sum of binary KL terms; zero iff the vectors coincide.
/// Both vectors must be strictly inside (0,1).
double bregman_loss(std::span<const double> theta, std::span<const double> theta_tilde,
                    std::span<const double> psi);

struct ProjectionResult {
    std::vector<double> theta;  // projected vector, strictly inside (0,1)
    double gamma = 0.0;         // solved multiplier (0 when already feasible)
    double residual = 0.0;      // |sum q*theta - t| at the solution
    int evaluations = 0;
};

/// Minimum-Bregman-loss point on the constraint slice. The multiplier is
/// found by safeguarded bracketing (bisection refined by secant steps);
/// near gamma = 0 the closed form degenerates and a second-order series
/// takes over. Root bracketing failure raises numeric_error, never a
/// silent clamp.
ProjectionResult project_draw(std::span<const double> theta, const BenchmarkProblem& problem);

/// Weighted-quadratic baseline: a closed-form affine shift that can leave
/// (0,1); returned unclipped on purpose.
std::vector<double> project_squared_error(std::span<const double> theta, std::span<const double> q,
                                          std::span<const double> psi, double t);

struct PosteriorProjection {
    std::vector<double> draws;  // row-major [n_draws x m]
    size_t n_draws = 0;
    size_t m = 0;
    double max_violation = 0.0;
    double min_coordinate = 1.0;
    double max_coordinate = 0.0;
};

/// Applies project_draw to every row. Coordinates at the machine boundary
/// are nudged into [eps, 1-eps] first (eps = 1e-12). Per-draw failures are
/// rethrown with the draw index attached.
PosteriorProjection project_posterior(std::span<const double> theta_draws, size_t n_draws, size_t m,
                                      const BenchmarkProblem& problem);

namespace detail {
/// theta_tilde_i(gamma) for a single coordinate, numerically stable on
/// both gamma signs; exposed for tests.
double projected_coordinate(double theta, double q, double psi, double gamma);
/// Constraint value sum_i q_i * theta_tilde_i(gamma), long-double accumulation.
double constraint_value(std::span<const double> theta, const BenchmarkProblem& p, double gamma);
}  // namespace detail

}  // namespace povmap::benchmark
