#include "povmap/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace povmap::benchmark {

namespace {

constexpr double kShareTol = 1e-9;
constexpr double kConstraintTol = 1e-12;
constexpr double kSeriesGamma = 1e-8;
constexpr double kBoundaryEps = 1e-12;

void check_interior(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!(x > 0.0 && x < 1.0)) {
            throw std::domain_error(std::string(what) + " must lie strictly inside (0,1), got " +
                                    format_double(x));
        }
    }
}

}  // namespace

void BenchmarkProblem::validate() const {
    if (q.empty() || q.size() != psi.size()) {
        throw input_error("benchmark problem: q and psi must be non-empty and equally sized");
    }
    double s = 0.0;
    for (double x : q) {
        if (!(x > 0.0)) throw input_error("benchmark problem: q must be positive");
        s += x;
    }
    if (std::fabs(s - 1.0) > kShareTol) {
        throw input_error("benchmark problem: q must sum to 1 within 1e-9 (got " + format_double(s) + ")");
    }
    for (double x : psi) {
        if (!(x > 0.0)) throw input_error("benchmark problem: psi must be positive");
    }
    if (!(t > 0.0 && t < 1.0)) {
        throw input_error("benchmark problem: t must lie strictly inside (0,1)");
    }
}

BenchmarkProblem make_problem(std::vector<double> q, double t) {
    BenchmarkProblem p;
    p.psi = q;  // conservative default: adjustments scale with the share
    p.q = std::move(q);
    p.t = t;
    p.validate();
    return p;
}

BenchmarkProblem make_problem(std::vector<double> q, std::vector<double> psi, double t) {
    BenchmarkProblem p;
    p.q = std::move(q);
    p.psi = std::move(psi);
    p.t = t;
    p.validate();
    return p;
}

double bregman_loss(std::span<const double> theta, std::span<const double> theta_tilde,
                    std::span<const double> psi) {
    if (theta.size() != theta_tilde.size() || theta.size() != psi.size()) {
        throw input_error("bregman_loss: size mismatch");
    }
    check_interior(theta, "bregman_loss: theta");
    check_interior(theta_tilde, "bregman_loss: theta_tilde");
    double loss = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) {
        const double th = theta[i], tt = theta_tilde[i];
        loss += psi[i] * (th * std::log(th / tt) + (1.0 - th) * std::log((1.0 - th) / (1.0 - tt)));
    }
    return loss;
}

namespace detail {

double projected_coordinate(double theta, double q, double psi, double gamma) {
    const double r = q / psi;
    if (std::fabs(gamma) * std::max(r, 1.0) < kSeriesGamma) {
        // second-order expansion around gamma = 0
        const double a = r * theta * (1.0 - theta);
        return theta + gamma * a + gamma * gamma * r * a * (1.0 - 2.0 * theta);
    }
    const double gq = gamma * q;
    const double disc = (psi - gq) * (psi - gq) + 4.0 * gq * psi * theta;
    const double root = std::sqrt(std::max(disc, 0.0));
    if (gq <= psi) {
        // rationalized form, cancellation-free for gamma <= psi/q
        return 2.0 * psi * theta / (root + psi - gq);
    }
    return (gq - psi + root) / (2.0 * gq);
}

double constraint_value(std::span<const double> theta, const BenchmarkProblem& p, double gamma) {
    long double s = 0.0L;
    for (size_t i = 0; i < theta.size(); ++i) {
        s += static_cast<long double>(p.q[i]) * projected_coordinate(theta[i], p.q[i], p.psi[i], gamma);
    }
    return static_cast<double>(s);
}

}  // namespace detail

ProjectionResult project_draw(std::span<const double> theta, const BenchmarkProblem& problem) {
    problem.validate();
    if (theta.size() != problem.q.size()) throw input_error("project_draw: theta/q size mismatch");
    check_interior(theta, "project_draw: theta");

    ProjectionResult res;
    int evals = 0;
    auto h = [&](double gamma) {
        ++evals;
        return detail::constraint_value(theta, problem, gamma);
    };

    const double h0 = h(0.0);
    if (std::fabs(h0 - problem.t) <= kConstraintTol) {
        res.theta.assign(theta.begin(), theta.end());
        res.gamma = 0.0;
        res.residual = std::fabs(h0 - problem.t);
        res.evaluations = evals;
        return res;
    }

    // h is strictly increasing in gamma; expand a bracket around 0
    double lo = -1.0, hi = 1.0;
    double h_lo = h(lo), h_hi = h(hi);
    int expansions = 0;
    while (h_lo > problem.t) {
        lo *= 4.0;
        h_lo = h(lo);
        if (++expansions > 200) {
            throw numeric_error("project_draw: bracket expansion failed toward -inf (t=" +
                                format_double(problem.t) + ", h(" + format_double(lo) +
                                ")=" + format_double(h_lo) + ")");
        }
    }
    while (h_hi < problem.t) {
        hi *= 4.0;
        h_hi = h(hi);
        if (++expansions > 200) {
            throw numeric_error("project_draw: bracket expansion failed toward +inf (t=" +
                                format_double(problem.t) + ", h(" + format_double(hi) +
                                ")=" + format_double(h_hi) + ")");
        }
    }

    // bisection alternating with secant proposals; the bracket always shrinks
    double g_prev = lo, f_prev = h_lo - problem.t;
    double g_cur = hi, f_cur = h_hi - problem.t;
    double gamma = 0.5 * (lo + hi);
    double f_best = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 400; ++iter) {
        double cand;
        if (iter % 2 == 0 && f_cur != f_prev) {
            cand = g_cur - f_cur * (g_cur - g_prev) / (f_cur - f_prev);
            if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
        } else {
            cand = 0.5 * (lo + hi);
        }
        const double f_cand = h(cand) - problem.t;
        g_prev = g_cur;
        f_prev = f_cur;
        g_cur = cand;
        f_cur = f_cand;
        if (f_cand > 0.0) {
            hi = cand;
        } else {
            lo = cand;
        }
        if (std::fabs(f_cand) < f_best) {
            f_best = std::fabs(f_cand);
            gamma = cand;
        }
        if (f_best <= 0.25 * kConstraintTol) break;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(gamma))) break;
    }

    res.gamma = gamma;
    res.theta.resize(theta.size());
    long double s = 0.0L;
    for (size_t i = 0; i < theta.size(); ++i) {
        res.theta[i] = detail::projected_coordinate(theta[i], problem.q[i], problem.psi[i], gamma);
        s += static_cast<long double>(problem.q[i]) * res.theta[i];
    }
    res.residual = std::fabs(static_cast<double>(s - static_cast<long double>(problem.t)));
    res.evaluations = evals;
    if (res.residual > 100.0 * kConstraintTol) {
        throw numeric_error("project_draw: solver residual " + format_double(res.residual) +
                            " above tolerance at gamma=" + format_double(gamma));
    }
    return res;
}

std::vector<double> project_squared_error(std::span<const double> theta, std::span<const double> q,
                                          std::span<const double> psi, double t) {
    if (theta.size() != q.size() || theta.size() != psi.size()) {
        throw input_error("project_squared_error: size mismatch");
    }
    double s = 0.0, denom = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) {
        s += q[i] * theta[i];
        denom += q[i] * q[i] / psi[i];
    }
    const double shift = (t - s) / denom;
    std::vector<double> out(theta.size());
    for (size_t i = 0; i < theta.size(); ++i) out[i] = theta[i] + shift * q[i] / psi[i];
    return out;
}

PosteriorProjection project_posterior(std::span<const double> theta_draws, size_t n_draws, size_t m,
                                      const BenchmarkProblem& problem) {
    if (theta_draws.size() != n_draws * m) throw input_error("project_posterior: draw matrix shape mismatch");
    PosteriorProjection out;
    out.n_draws = n_draws;
    out.m = m;
    out.draws.resize(n_draws * m);
    std::vector<double> row(m);
    for (size_t s = 0; s < n_draws; ++s) {
        for (size_t i = 0; i < m; ++i) {
            row[i] = std::clamp(theta_draws[s * m + i], kBoundaryEps, 1.0 - kBoundaryEps);
        }
        try {
            ProjectionResult r = project_draw(row, problem);
            std::copy(r.theta.begin(), r.theta.end(), out.draws.begin() + static_cast<ptrdiff_t>(s * m));
            out.max_violation = std::max(out.max_violation, r.residual);
            for (double x : r.theta) {
                out.min_coordinate = std::min(out.min_coordinate, x);
                out.max_coordinate = std::max(out.max_coordinate, x);
            }
        } catch (const std::exception& e) {
            throw numeric_error("projection failed at draw " + std::to_string(s) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace povmap::benchmark
