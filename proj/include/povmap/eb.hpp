#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "povmap/autodiff.hpp"

namespace povmap::eb {

/// Log density of Beta in mean-precision form: shapes (mu*phi, (1-mu)*phi).
/// y must be strictly interior; boundary mass belongs to the mixture.
template <class T>
T beta_logpdf(double y, const T& mu, const T& phi) {
    if (!(y > 0.0 && y < 1.0)) throw std::domain_error("beta_logpdf: y must lie in (0,1)");
    using std::lgamma;
    using std::log;
    using std::log1p;
    const T a = mu * phi;
    const T b = (1.0 - mu) * phi;
    return lgamma(phi) - lgamma(a) - lgamma(b) + (a - 1.0) * std::log(y) + (b - 1.0) * std::log1p(-y);
}

template <class T>
struct CensorProbs {
    T pi0;
    T pi1;
};

template <class T>
T censoring_lower_bound_term(const T& mu) {
    return (2.0 * mu - 1.0) / mu;
}

/// Largest admissible lower bound for the within-domain correlation given
/// the current means: max{0, max_d (2*mu_d - 1)/mu_d}.
template <class T>
T lambda_lower_bound(std::span<const T> mus) {
    using std::max;
    T bound = T(0.0);
    for (const T& mu : mus) bound = max(bound, censoring_lower_bound_term(mu));
    return bound;
}

inline double lambda_lower_bound(const std::vector<double>& mus) {
    return lambda_lower_bound(std::span<const double>(mus));
}

namespace detail {

template <class T>
void check_censor_args(const T& mu, const T& lambda, long m) {
    if (m < 1) throw std::invalid_argument("censor_probs: m must be >= 1");
    const double mv = value(mu);
    if (!(mv > 0.0 && mv < 1.0)) throw std::domain_error("censor_probs: mu must lie in (0,1)");
    const double lo = std::max(0.0, (2.0 * mv - 1.0) / mv);
    if (value(lambda) < lo - 1e-12 || value(lambda) > 1.0 + 1e-12) {
        throw std::domain_error("censor_probs: correlation lambda outside its admissible interval [" +
                                std::to_string(lo) + ",1]");
    }
}

}  // namespace detail

/// Mixture masses at 0 and 1 under exchangeable within-domain correlation
/// lambda over m exchangeable units. m == 1 degenerates to a Bernoulli,
/// and lambda == 1 to the all-or-nothing limit (handled exactly).
template <class T>
CensorProbs<T> censor_probs(const T& mu, const T& lambda, long m) {
    using std::exp;
    using std::log1p;
    using std::max;
    detail::check_censor_args(mu, lambda, m);
    if (m == 1 || value(lambda) == 1.0) return {1.0 - mu, mu};
    const T pi1 = mu * pow_int(lambda, m - 1);
    // log space: the bracket 1 + mu*(lambda-2) can underflow when raised to m-1
    const T bracket = max(T(1.0) + mu * (lambda - 2.0), T(0.0));
    T pi0;
    if (value(bracket) == 0.0) {
        pi0 = T(0.0);
    } else {
        pi0 = exp(static_cast<double>(m - 1) * log1p(mu * (lambda - 2.0)) -
                  static_cast<double>(m - 2) * log1p(-mu));
    }
    return {pi0, pi1};
}

/// log of the boundary masses, stable for large m.
template <class T>
T log_pi1(const T& mu, const T& lambda, long m) {
    using std::log;
    if (m == 1 || value(lambda) == 1.0) return log(mu);
    return log(mu) + static_cast<double>(m - 1) * log(lambda);
}

template <class T>
T log_pi0(const T& mu, const T& lambda, long m) {
    using std::log1p;
    if (m == 1 || value(lambda) == 1.0) return log1p(-mu);
    return static_cast<double>(m - 1) * log1p(mu * (lambda - 2.0)) - static_cast<double>(m - 2) * log1p(-mu);
}

/// Log likelihood of one direct estimate under the zero/one-inflated Beta
/// mixture. phi is the fixed precision (effective size minus one).
template <class T>
T eb_loglik(double y, const T& mu, const T& phi, const T& lambda, long m) {
    using std::log;
    using std::max;
    if (!(y >= 0.0 && y <= 1.0)) throw std::domain_error("eb_loglik: y must lie in [0,1]");
    if (y == 0.0) return log_pi0(mu, lambda, m);
    if (y == 1.0) return log_pi1(mu, lambda, m);
    if (m == 1) {
        // a single Bernoulli unit cannot produce an interior estimate
        return T(-std::numeric_limits<double>::infinity());
    }
    const CensorProbs<T> p = censor_probs(mu, lambda, m);
    const T w = max(T(1.0) - p.pi0 - p.pi1, T(1e-300));
    return log(w) + beta_logpdf(y, mu, phi);
}

/// Population proportion implied by the mixture: its expectation
/// (1 - pi0 - pi1) * mu + pi1. Identically mu when lambda == 1.
template <class T>
T theta_functional(const T& mu, const T& lambda, long m) {
    if (value(lambda) == 1.0) return mu;
    const CensorProbs<T> p = censor_probs(mu, lambda, m);
    return (T(1.0) - p.pi0 - p.pi1) * mu + p.pi1;
}

// -- double-facing parameter bundle --------------------------------------

struct EBParams {
    double mu;
    double phi;
    double pi0;
    double pi1;
    double lambda;
    long m;
};

inline EBParams make_eb_params(double mu, double phi, double lambda, long m) {
    if (!(mu > 0.0 && mu < 1.0)) throw std::domain_error("EBParams: mu must lie in (0,1)");
    if (!(phi > 0.0)) throw std::domain_error("EBParams: phi must be positive");
    const CensorProbs<double> p = censor_probs(mu, lambda, m);
    if (!(p.pi0 >= 0.0 && p.pi0 < 1.0 && p.pi1 >= 0.0 && p.pi1 < 1.0 && p.pi0 + p.pi1 < 1.0 + 1e-15)) {
        throw std::domain_error("EBParams: censoring probabilities outside [0,1) or summing above 1");
    }
    return {mu, phi, p.pi0, p.pi1, lambda, m};
}

inline double eb_loglik(double y, const EBParams& p) {
    return eb_loglik(y, p.mu, p.phi, p.lambda, p.m);
}

inline double theta_functional_d(double mu, double lambda, long m) {
    return theta_functional<double>(mu, lambda, m);
}

}  // namespace povmap::eb
