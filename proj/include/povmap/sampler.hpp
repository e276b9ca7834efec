#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "povmap/util.hpp"

namespace povmap::sampler {

struct SamplerConfig {
    int chains = 4;
    int iterations = 4000;  // per chain, warm-up included
    int warmup = 2000;
    uint64_t seed = 1;
    double target_acceptance = 0.8;
    int max_tree_depth = 10;
    double init_radius = 2.0;  // unconstrained inits drawn uniformly in +-radius
    int threads = 0;           // 0: one thread per chain, capped by hardware

    void validate() const;
};

/// Differentiable unnormalized log density on R^dim. The sampler touches
/// gradients only through `log_density_gradient` (which also returns the
/// log density), so a finite-difference implementation is a valid drop-in.
struct TargetDensity {
    size_t dim = 0;
    std::function<double(std::span<const double>)> log_density;
    std::function<double(std::span<const double>, std::vector<double>&)> log_density_gradient;
};

/// Certified fallback when no analytic/taped gradient is available.
TargetDensity with_finite_difference_gradient(size_t dim,
                                              std::function<double(std::span<const double>)> logp);

struct ChainStats {
    int divergences = 0;  // sampling phase
    double step_size = 0.0;
    double mean_accept = 0.0;
    std::vector<double> inv_mass;
};

struct PosteriorDraws {
    size_t n_chains = 0;
    size_t n_kept = 0;  // per chain, warm-up excluded
    size_t n_params = 0;
    std::vector<std::string> names;  // parameter registry (may be empty)
    std::vector<double> draws;       // [chain][kept-iteration][param]
    std::vector<double> lp;          // [chain][kept-iteration]
    std::vector<ChainStats> chain_stats;

    // per-draw log-likelihood matrix [total_draws x n_obs], filled by the
    // model layer for LOO computations
    std::vector<double> loglik;
    size_t n_obs = 0;

    size_t total_draws() const { return n_chains * n_kept; }
    double at(size_t chain, size_t iter, size_t param) const {
        return draws[(chain * n_kept + iter) * n_params + param];
    }
    std::span<const double> draw(size_t chain, size_t iter) const {
        return {draws.data() + (chain * n_kept + iter) * n_params, n_params};
    }
    std::span<const double> flat_draw(size_t s) const { return {draws.data() + s * n_params, n_params}; }
    /// Column of one parameter, chains concatenated.
    std::vector<double> parameter_column(size_t param) const;
    int total_divergences() const;
};

PosteriorDraws sample(const TargetDensity& target, const SamplerConfig& config);

struct ParamDiagnostics {
    double rhat = 0.0;
    double ess_bulk = 0.0;
    double ess_tail = 0.0;
    std::string note;  // set when a sentinel replaces a statistic
};

/// Rank-normalized split R-hat plus bulk/tail effective sample sizes.
/// Requires at least 2 chains; constant parameters report NaN sentinels.
std::map<std::string, ParamDiagnostics> diagnostics(const PosteriorDraws& draws);

/// Same statistics for one series laid out as [chain][iter].
ParamDiagnostics series_diagnostics(std::span<const double> series, size_t n_chains, size_t n_iter);

struct LooResult {
    double elpd = 0.0;
    double looic = 0.0;
    double se = 0.0;  // of looic
    std::vector<double> pareto_k;
    std::vector<size_t> flagged;  // observations with k > 0.7
};

/// Pareto-smoothed importance-sampling leave-one-out criterion, returned
/// on the -2*elpd deviance scale.
LooResult looic(std::span<const double> loglik, size_t n_draws, size_t n_obs);

namespace detail {

struct GpdFit {
    double k = 0.0;
    double sigma = 0.0;
};

/// Profile-likelihood generalized Pareto fit (Zhang-Stephens style) with
/// the usual weak-prior regularization of the shape toward 0.5.
GpdFit gpd_fit(std::vector<double> exceedances);

/// Smoothed, max-shifted log importance weights for one observation;
/// writes the regularized shape estimate into `khat`.
std::vector<double> psis_log_weights(std::span<const double> log_ratios, double* khat);

double ess_series(std::span<const double> series, size_t n_chains, size_t n_iter);

}  // namespace detail

}  // namespace povmap::sampler
