#include "povmap/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "povmap/prng.hpp"

namespace povmap::sampler {

namespace {

constexpr double kDivergenceThreshold = 1000.0;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using VecD = std::vector<double>;

double dot(const VecD& a, const VecD& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct PhasePoint {
    VecD q;
    VecD p;
    VecD grad;
    double lp = 0.0;
};

struct Welford {
    size_t n = 0;
    VecD mean, m2;
    void init(size_t dim) {
        n = 0;
        mean.assign(dim, 0.0);
        m2.assign(dim, 0.0);
    }
    void add(const VecD& x) {
        ++n;
        for (size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - mean[i];
            mean[i] += d / static_cast<double>(n);
            m2[i] += d * (x[i] - mean[i]);
        }
    }
    VecD variance() const {
        VecD v(mean.size(), 1.0);
        if (n < 2) return v;
        for (size_t i = 0; i < v.size(); ++i) v[i] = m2[i] / static_cast<double>(n - 1);
        return v;
    }
};

struct DualAveraging {
    double mu = 0.0, log_eps = 0.0, log_eps_bar = 0.0, h_bar = 0.0;
    double delta = 0.8;
    int m = 0;
    static constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;

    void restart(double eps) {
        mu = std::log(10.0 * eps);
        log_eps = std::log(eps);
        log_eps_bar = std::log(eps);
        h_bar = 0.0;
        m = 0;
    }
    void update(double accept) {
        ++m;
        const double md = static_cast<double>(m);
        h_bar = (1.0 - 1.0 / (md + t0)) * h_bar + (delta - accept) / (md + t0);
        log_eps = mu - std::sqrt(md) / gamma * h_bar;
        const double eta = std::pow(md, -kappa);
        log_eps_bar = (1.0 - eta) * log_eps_bar + eta * log_eps;
    }
};

/// Warm-up schedule: a step-size-only opening buffer, doubling covariance
/// estimation windows, and a closing step-size buffer.
struct AdaptSchedule {
    int init_buffer = 0;
    int term_buffer = 0;
    std::vector<int> window_ends;  // iteration indices (exclusive) closing each window

    static AdaptSchedule build(int warmup) {
        AdaptSchedule s;
        if (warmup < 20) return s;  // too short: step size only
        int init = 75, term = 50, base = 25;
        if (warmup < init + base + term) {
            init = static_cast<int>(0.15 * warmup);
            term = static_cast<int>(0.10 * warmup);
            s.init_buffer = init;
            s.term_buffer = term;
            s.window_ends.push_back(warmup - term);
            return s;
        }
        s.init_buffer = init;
        s.term_buffer = term;
        int start = init, size = base;
        for (;;) {
            int end = start + size;
            // absorb a final stub window that could not double again
            if (end + 2 * size > warmup - term) end = warmup - term;
            s.window_ends.push_back(end);
            if (end >= warmup - term) break;
            start = end;
            size *= 2;
        }
        return s;
    }
};

class NutsChain {
  public:
    NutsChain(const TargetDensity& target, const SamplerConfig& cfg, uint64_t chain_seed)
        : target_(target),
          cfg_(cfg),
          rng_(chain_seed),
          dim_(target.dim),
          inv_mass_(target.dim, 1.0) {}

    void run(std::span<double> out_draws, std::span<double> out_lp, ChainStats& stats) {
        init_position();
        double eps = find_initial_step();
        da_.delta = cfg_.target_acceptance;
        da_.restart(eps);

        const auto schedule = AdaptSchedule::build(cfg_.warmup);
        size_t window_idx = 0;
        Welford acc;
        acc.init(dim_);

        double accept_sum = 0.0;
        int accept_n = 0;
        const int kept = cfg_.iterations - cfg_.warmup;
        for (int it = 0; it < cfg_.iterations; ++it) {
            const bool warming = it < cfg_.warmup;
            eps = warming ? std::exp(da_.log_eps) : std::exp(da_.log_eps_bar);
            const auto res = transition(eps);
            if (warming) {
                da_.update(res.accept);
                if (!schedule.window_ends.empty() && it >= schedule.init_buffer &&
                    window_idx < schedule.window_ends.size()) {
                    acc.add(cur_.q);
                    if (it + 1 == schedule.window_ends[window_idx]) {
                        set_inv_mass(acc);
                        acc.init(dim_);
                        ++window_idx;
                        da_.restart(std::exp(da_.log_eps));
                    }
                }
            } else {
                if (res.divergent) ++stats.divergences;
                accept_sum += res.accept;
                ++accept_n;
                const int k = it - cfg_.warmup;
                std::copy(cur_.q.begin(), cur_.q.end(),
                          out_draws.begin() + static_cast<ptrdiff_t>(static_cast<size_t>(k) * dim_));
                out_lp[static_cast<size_t>(k)] = cur_.lp;
            }
        }
        (void)kept;
        stats.step_size = std::exp(da_.log_eps_bar);
        stats.mean_accept = accept_n ? accept_sum / accept_n : 0.0;
        stats.inv_mass = inv_mass_;
    }

  private:
    struct TransitionResult {
        double accept = 0.0;
        bool divergent = false;
    };

    void init_position() {
        cur_.q.resize(dim_);
        cur_.grad.resize(dim_);
        for (int attempt = 0; attempt < 100; ++attempt) {
            for (auto& x : cur_.q) x = rng_.uniform(-cfg_.init_radius, cfg_.init_radius);
            cur_.lp = target_.log_density_gradient(cur_.q, cur_.grad);
            if (std::isfinite(cur_.lp)) return;
        }
        throw numeric_error("sampler: failed to find a finite initial point after 100 attempts");
    }

    void set_inv_mass(const Welford& acc) {
        if (acc.n < 2) return;
        const VecD v = acc.variance();
        const double n = static_cast<double>(acc.n);
        for (size_t i = 0; i < dim_; ++i) {
            inv_mass_[i] = n / (n + 5.0) * v[i] + 1e-3 * (5.0 / (n + 5.0));
            if (!(inv_mass_[i] > 0.0)) inv_mass_[i] = 1e-3;
        }
    }

    void sample_momentum(VecD& p) {
        p.resize(dim_);
        for (size_t i = 0; i < dim_; ++i) p[i] = rng_.normal() / std::sqrt(inv_mass_[i]);
    }

    double hamiltonian(const PhasePoint& z) const {
        double kin = 0.0;
        for (size_t i = 0; i < dim_; ++i) kin += z.p[i] * z.p[i] * inv_mass_[i];
        return -z.lp + 0.5 * kin;
    }

    void leapfrog(PhasePoint& z, double eps) {
        for (size_t i = 0; i < dim_; ++i) z.p[i] += 0.5 * eps * z.grad[i];
        for (size_t i = 0; i < dim_; ++i) z.q[i] += eps * inv_mass_[i] * z.p[i];
        z.lp = target_.log_density_gradient(z.q, z.grad);
        for (size_t i = 0; i < dim_; ++i) z.p[i] += 0.5 * eps * z.grad[i];
    }

    double find_initial_step() {
        double eps = 1.0;
        PhasePoint z = cur_;
        sample_momentum(z.p);
        const double h0 = hamiltonian(z);
        auto ratio = [&](double e) {
            PhasePoint w = z;
            leapfrog(w, e);
            const double h = hamiltonian(w);
            return std::isfinite(h) ? std::exp(h0 - h) : 0.0;
        };
        double a = ratio(eps);
        const double dir = a > 0.5 ? 1.0 : -1.0;
        for (int i = 0; i < 50; ++i) {
            eps *= std::pow(2.0, dir);
            a = ratio(eps);
            if ((dir > 0 && a <= 0.5) || (dir < 0 && a >= 0.5) || eps < 1e-10 || eps > 1e7) break;
        }
        return std::clamp(eps, 1e-10, 1e7);
    }

    bool uturn(const PhasePoint& minus, const PhasePoint& plus) const {
        double fwd = 0.0, bwd = 0.0;
        for (size_t i = 0; i < dim_; ++i) {
            const double dq = plus.q[i] - minus.q[i];
            fwd += dq * inv_mass_[i] * plus.p[i];
            bwd += dq * inv_mass_[i] * minus.p[i];
        }
        return fwd < 0.0 || bwd < 0.0;
    }

    struct Tree {
        PhasePoint minus, plus, sample;
        double log_sum_w = -std::numeric_limits<double>::infinity();
        double accept_sum = 0.0;
        int n_leapfrog = 0;
        bool ok = true;
        bool divergent = false;
    };

    Tree build_leaf(const PhasePoint& from, int dir, double h0, double eps) {
        Tree t;
        PhasePoint z = from;
        leapfrog(z, dir * eps);
        const double h = hamiltonian(z);
        const double dh = h0 - h;  // log weight
        t.n_leapfrog = 1;
        if (!std::isfinite(h) || -dh > kDivergenceThreshold) {
            t.ok = false;
            t.divergent = true;
            t.accept_sum = 0.0;
            t.minus = t.plus = t.sample = z;
            return t;
        }
        t.minus = t.plus = t.sample = z;
        t.log_sum_w = dh;
        t.accept_sum = std::min(1.0, std::exp(dh));
        return t;
    }

    Tree build_tree(int depth, const PhasePoint& from, int dir, double h0, double eps) {
        if (depth == 0) return build_leaf(from, dir, h0, eps);
        Tree t1 = build_tree(depth - 1, from, dir, h0, eps);
        if (!t1.ok) return t1;
        const PhasePoint& edge = dir > 0 ? t1.plus : t1.minus;
        Tree t2 = build_tree(depth - 1, edge, dir, h0, eps);
        t1.n_leapfrog += t2.n_leapfrog;
        t1.accept_sum += t2.accept_sum;
        if (!t2.ok) {
            t1.ok = false;
            t1.divergent = t1.divergent || t2.divergent;
            return t1;
        }
        const double lsw = std::max(t1.log_sum_w, t2.log_sum_w) +
                           std::log(std::exp(t1.log_sum_w - std::max(t1.log_sum_w, t2.log_sum_w)) +
                                    std::exp(t2.log_sum_w - std::max(t1.log_sum_w, t2.log_sum_w)));
        // multinomial selection between subtrees
        if (std::log(rng_.uniform() + 1e-300) < t2.log_sum_w - lsw) t1.sample = t2.sample;
        t1.log_sum_w = lsw;
        if (dir > 0) {
            t1.plus = t2.plus;
        } else {
            t1.minus = t2.minus;
        }
        if (uturn(t1.minus, t1.plus)) t1.ok = false;
        return t1;
    }

    TransitionResult transition(double eps) {
        TransitionResult out;
        sample_momentum(cur_.p);
        const double h0 = hamiltonian(cur_);

        Tree tree;
        tree.minus = tree.plus = tree.sample = cur_;
        tree.log_sum_w = 0.0;
        double accept_sum = 0.0;
        int n_leapfrog = 0;

        for (int depth = 0; depth < cfg_.max_tree_depth; ++depth) {
            const int dir = rng_.uniform() < 0.5 ? -1 : 1;
            const PhasePoint& edge = dir > 0 ? tree.plus : tree.minus;
            Tree sub = build_tree(depth, edge, dir, h0, eps);
            accept_sum += sub.accept_sum;
            n_leapfrog += sub.n_leapfrog;
            if (!sub.ok) {
                out.divergent = sub.divergent;
                break;
            }
            // biased progressive sampling favors the fresh subtree
            if (std::log(rng_.uniform() + 1e-300) < sub.log_sum_w - tree.log_sum_w) {
                tree.sample = sub.sample;
            }
            tree.log_sum_w = std::max(tree.log_sum_w, sub.log_sum_w) +
                             std::log(std::exp(tree.log_sum_w - std::max(tree.log_sum_w, sub.log_sum_w)) +
                                      std::exp(sub.log_sum_w - std::max(tree.log_sum_w, sub.log_sum_w)));
            if (dir > 0) {
                tree.plus = sub.plus;
            } else {
                tree.minus = sub.minus;
            }
            if (uturn(tree.minus, tree.plus)) break;
        }
        cur_ = tree.sample;
        out.accept = n_leapfrog > 0 ? accept_sum / n_leapfrog : 0.0;
        return out;
    }

    const TargetDensity& target_;
    const SamplerConfig& cfg_;
    Rng rng_;
    size_t dim_;
    VecD inv_mass_;
    PhasePoint cur_;
    DualAveraging da_;
};

}  // namespace

void SamplerConfig::validate() const {
    if (chains < 1) throw input_error("sampler: chains must be >= 1");
    if (warmup < 0 || warmup >= iterations) throw input_error("sampler: require 0 <= warmup < iterations");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
        throw input_error("sampler: target_acceptance must lie in (0,1)");
    }
    if (max_tree_depth < 1 || max_tree_depth > 14) throw input_error("sampler: max_tree_depth out of range");
}

TargetDensity with_finite_difference_gradient(size_t dim,
                                              std::function<double(std::span<const double>)> logp) {
    TargetDensity t;
    t.dim = dim;
    t.log_density = logp;
    t.log_density_gradient = [logp, dim](std::span<const double> x, std::vector<double>& grad) {
        grad.assign(dim, 0.0);
        std::vector<double> w(x.begin(), x.end());
        for (size_t i = 0; i < dim; ++i) {
            const double h = 1e-6 * std::max(1.0, std::fabs(w[i]));
            const double x0 = w[i];
            w[i] = x0 + h;
            const double up = logp(w);
            w[i] = x0 - h;
            const double dn = logp(w);
            w[i] = x0;
            grad[i] = (up - dn) / (2.0 * h);
        }
        return logp(x);
    };
    return t;
}

PosteriorDraws sample(const TargetDensity& target, const SamplerConfig& config) {
    config.validate();
    if (target.dim == 0) throw input_error("sampler: zero-dimensional target");

    PosteriorDraws out;
    out.n_chains = static_cast<size_t>(config.chains);
    out.n_kept = static_cast<size_t>(config.iterations - config.warmup);
    out.n_params = target.dim;
    out.draws.assign(out.n_chains * out.n_kept * out.n_params, 0.0);
    out.lp.assign(out.n_chains * out.n_kept, 0.0);
    out.chain_stats.assign(out.n_chains, ChainStats{});

    auto run_chain = [&](size_t c) {
        NutsChain chain(target, config, derive_seed(config.seed, "chain", c));
        std::span<double> d{out.draws.data() + c * out.n_kept * out.n_params, out.n_kept * out.n_params};
        std::span<double> l{out.lp.data() + c * out.n_kept, out.n_kept};
        chain.run(d, l, out.chain_stats[c]);
    };

    size_t n_threads = config.threads > 0 ? static_cast<size_t>(config.threads)
                                          : std::max<size_t>(1, std::thread::hardware_concurrency());
    n_threads = std::min(n_threads, out.n_chains);
    if (n_threads <= 1) {
        for (size_t c = 0; c < out.n_chains; ++c) run_chain(c);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(out.n_chains);
        for (size_t tix = 0; tix < n_threads; ++tix) {
            pool.emplace_back([&, tix] {
                for (size_t c = tix; c < out.n_chains; c += n_threads) {
                    try {
                        run_chain(c);
                    } catch (...) {
                        errors[c] = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    return out;
}

std::vector<double> PosteriorDraws::parameter_column(size_t param) const {
    std::vector<double> col(total_draws());
    for (size_t s = 0; s < total_draws(); ++s) col[s] = draws[s * n_params + param];
    return col;
}

int PosteriorDraws::total_divergences() const {
    int d = 0;
    for (const auto& c : chain_stats) d += c.divergences;
    return d;
}

// -- diagnostics ----------------------------------------------------------

namespace detail {

namespace {

/// Autocovariance at lag t for one centered chain, biased (1/n) scaling.
double autocov(std::span<const double> x, double mean, size_t t) {
    double s = 0.0;
    for (size_t i = 0; i + t < x.size(); ++i) s += (x[i] - mean) * (x[i + t] - mean);
    return s / static_cast<double>(x.size());
}

}  // namespace

double ess_series(std::span<const double> series, size_t n_chains, size_t n_iter) {
    if (n_iter < 4 || n_chains < 1) return kNaN;
    const size_t m = n_chains, n = n_iter;
    std::vector<double> means(m), vars(m);
    for (size_t c = 0; c < m; ++c) {
        auto x = series.subspan(c * n, n);
        means[c] = mean(x);
        vars[c] = autocov(x, means[c], 0) * static_cast<double>(n) / static_cast<double>(n - 1);
    }
    const double w = mean(vars);
    double var_plus = w * static_cast<double>(n - 1) / static_cast<double>(n);
    if (m > 1) var_plus += sample_variance(means);
    if (!(var_plus > 0.0)) return kNaN;

    // Geyer initial monotone sequence over paired autocorrelations
    double rho_prev_pair = 1.0;
    double tau = 0.0;
    {
        // lag 0 and 1
        double c0 = 0.0, c1 = 0.0;
        for (size_t c = 0; c < m; ++c) {
            auto x = series.subspan(c * n, n);
            c0 += autocov(x, means[c], 0);
            c1 += autocov(x, means[c], 1);
        }
        c0 /= static_cast<double>(m);
        c1 /= static_cast<double>(m);
        const double rho0 = 1.0 - (w - c0) / var_plus;
        const double rho1 = 1.0 - (w - c1) / var_plus;
        double pair = rho0 + rho1;
        if (pair < 0.0) pair = 0.0;
        tau = pair;
        rho_prev_pair = pair;
    }
    for (size_t t = 2; t + 1 < n; t += 2) {
        double ct = 0.0, ct1 = 0.0;
        for (size_t c = 0; c < m; ++c) {
            auto x = series.subspan(c * n, n);
            ct += autocov(x, means[c], t);
            ct1 += autocov(x, means[c], t + 1);
        }
        ct /= static_cast<double>(m);
        ct1 /= static_cast<double>(m);
        const double rho_t = 1.0 - (w - ct) / var_plus;
        const double rho_t1 = 1.0 - (w - ct1) / var_plus;
        double pair = rho_t + rho_t1;
        if (pair < 0.0) break;
        if (pair > rho_prev_pair) pair = rho_prev_pair;  // enforce monotone decrease
        tau += pair;
        rho_prev_pair = pair;
    }
    const double tau_hat = std::max(-1.0 + 2.0 * tau, 1.0 / std::log10(static_cast<double>(m * n) + 10.0));
    double ess = static_cast<double>(m * n) / tau_hat;
    return std::min(ess, static_cast<double>(m * n));
}

}  // namespace detail

namespace {

/// Pooled average ranks mapped through the normal quantile function.
std::vector<double> rank_normalize(std::span<const double> x) {
    const size_t n = x.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
        i = j + 1;
    }
    std::vector<double> z(n);
    for (size_t k = 0; k < n; ++k) {
        z[k] = inv_normal_cdf((rank[k] - 0.375) / (static_cast<double>(n) + 0.25));
    }
    return z;
}

double split_rhat(std::span<const double> z, size_t m, size_t n) {
    std::vector<double> means(m), vars(m);
    for (size_t c = 0; c < m; ++c) {
        auto x = z.subspan(c * n, n);
        means[c] = mean(x);
        vars[c] = sample_variance(x);
    }
    const double w = mean(vars);
    const double b = static_cast<double>(n) * sample_variance(means);
    if (!(w > 0.0)) return kNaN;
    const double var_plus =
        (static_cast<double>(n - 1) / static_cast<double>(n)) * w + b / static_cast<double>(n);
    return std::sqrt(var_plus / w);
}

}  // namespace

ParamDiagnostics series_diagnostics(std::span<const double> series, size_t n_chains, size_t n_iter) {
    ParamDiagnostics out;
    if (n_chains < 2) throw input_error("diagnostics: need at least 2 chains");
    const double first = series.empty() ? 0.0 : series[0];
    bool constant = true;
    for (double v : series) {
        if (v != first) {
            constant = false;
            break;
        }
    }
    if (constant) {
        out.rhat = kNaN;
        out.ess_bulk = kNaN;
        out.ess_tail = kNaN;
        out.note = "constant parameter: scale-free statistics undefined";
        return out;
    }

    // split each chain in half
    const size_t half = n_iter / 2;
    const size_t m2 = 2 * n_chains;
    std::vector<double> split;
    split.reserve(m2 * half);
    for (size_t c = 0; c < n_chains; ++c) {
        auto x = series.subspan(c * n_iter, n_iter);
        split.insert(split.end(), x.begin(), x.begin() + static_cast<ptrdiff_t>(half));
        split.insert(split.end(), x.begin() + static_cast<ptrdiff_t>(n_iter - half), x.end());
    }

    const std::vector<double> z = rank_normalize(split);
    out.rhat = split_rhat(z, m2, half);
    out.ess_bulk = detail::ess_series(z, m2, half);

    // tail ESS via central-interval boundary indicators
    std::vector<double> sorted(split);
    std::sort(sorted.begin(), sorted.end());
    const double q05 = quantile_type7(sorted, 0.05);
    const double q95 = quantile_type7(sorted, 0.95);
    std::vector<double> ind(split.size());
    for (size_t k = 0; k < split.size(); ++k) ind[k] = split[k] <= q05 ? 1.0 : 0.0;
    const double e1 = detail::ess_series(ind, m2, half);
    for (size_t k = 0; k < split.size(); ++k) ind[k] = split[k] <= q95 ? 1.0 : 0.0;
    const double e2 = detail::ess_series(ind, m2, half);
    out.ess_tail = std::min(e1, e2);
    return out;
}

std::map<std::string, ParamDiagnostics> diagnostics(const PosteriorDraws& draws) {
    std::map<std::string, ParamDiagnostics> out;
    for (size_t p = 0; p < draws.n_params; ++p) {
        const std::vector<double> col = draws.parameter_column(p);
        const std::string name = p < draws.names.size() ? draws.names[p] : "param[" + std::to_string(p) + "]";
        out[name] = series_diagnostics(col, draws.n_chains, draws.n_kept);
    }
    return out;
}

// -- PSIS LOO ---------------------------------------------------------------

namespace detail {

GpdFit gpd_fit(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const size_t n = x.size();
    GpdFit out{kNaN, kNaN};
    if (n < 5 || x.back() <= 0.0) return out;
    const size_t quart = static_cast<size_t>(std::floor(static_cast<double>(n) / 4.0 + 0.5));
    const double xstar = x[std::max<size_t>(quart, 1) - 1];
    if (!(xstar > 0.0)) return out;

    const size_t m = 30 + static_cast<size_t>(std::floor(std::sqrt(static_cast<double>(n))));
    std::vector<double> theta(m), loglik(m);
    for (size_t j = 0; j < m; ++j) {
        theta[j] = 1.0 / x[n - 1] +
                   (1.0 - std::sqrt(static_cast<double>(m) / (static_cast<double>(j) + 0.5))) / (3.0 * xstar);
        double k = 0.0;
        for (double xi : x) k += std::log1p(-theta[j] * xi);
        k /= static_cast<double>(n);
        loglik[j] = static_cast<double>(n) * (std::log(-theta[j] / k) - k - 1.0);
    }
    const double lse = logsumexp(loglik);
    double theta_hat = 0.0;
    for (size_t j = 0; j < m; ++j) theta_hat += theta[j] * std::exp(loglik[j] - lse);

    double k = 0.0;
    for (double xi : x) k += std::log1p(-theta_hat * xi);
    k /= static_cast<double>(n);
    out.sigma = -k / theta_hat;
    // weak prior pulling the shape toward 0.5 stabilizes small tails
    out.k = (static_cast<double>(n) * k + 5.0) / (static_cast<double>(n) + 10.0);
    return out;
}

std::vector<double> psis_log_weights(std::span<const double> log_ratios, double* khat) {
    const size_t s = log_ratios.size();
    const double lmax = *std::max_element(log_ratios.begin(), log_ratios.end());
    std::vector<double> lw(s);
    for (size_t i = 0; i < s; ++i) lw[i] = log_ratios[i] - lmax;

    const size_t tail =
        static_cast<size_t>(std::ceil(std::min(0.2 * static_cast<double>(s), 3.0 * std::sqrt(s))));
    if (khat) *khat = -std::numeric_limits<double>::infinity();
    if (tail < 5 || tail >= s) return lw;

    std::vector<size_t> idx(s);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return lw[a] < lw[b]; });
    const double cutoff_lw = lw[idx[s - tail - 1]];
    const double cutoff_w = std::exp(cutoff_lw);

    std::vector<double> exceed(tail);
    for (size_t z = 0; z < tail; ++z) exceed[z] = std::exp(lw[idx[s - tail + z]]) - cutoff_w;
    const GpdFit fit = gpd_fit(exceed);
    if (!std::isfinite(fit.k)) return lw;
    if (khat) *khat = fit.k;

    for (size_t z = 0; z < tail; ++z) {
        const double p = (static_cast<double>(z) + 0.5) / static_cast<double>(tail);
        double quant;
        if (std::fabs(fit.k) < 1e-12) {
            quant = -fit.sigma * std::log1p(-p);
        } else {
            quant = fit.sigma * std::expm1(-fit.k * std::log1p(-p)) / fit.k;
        }
        const double smoothed = std::min(std::log(cutoff_w + quant), 0.0);
        lw[idx[s - tail + z]] = smoothed;
    }
    return lw;
}

}  // namespace detail

LooResult looic(std::span<const double> loglik, size_t n_draws, size_t n_obs) {
    if (loglik.size() != n_draws * n_obs) throw input_error("looic: log-likelihood matrix shape mismatch");
    if (n_draws < 2 || n_obs == 0) throw input_error("looic: need at least 2 draws and 1 observation");
    for (double v : loglik) {
        if (std::isnan(v)) throw numeric_error("looic: NaN in log-likelihood matrix");
    }

    LooResult out;
    out.pareto_k.resize(n_obs);
    std::vector<double> elpd(n_obs);
    std::vector<double> lr(n_draws), col(n_draws), num(n_draws);
    for (size_t j = 0; j < n_obs; ++j) {
        for (size_t i = 0; i < n_draws; ++i) {
            col[i] = loglik[i * n_obs + j];
            lr[i] = -col[i];
        }
        double khat = 0.0;
        const std::vector<double> lw = detail::psis_log_weights(lr, &khat);
        out.pareto_k[j] = khat;
        if (khat > 0.7) out.flagged.push_back(j);
        for (size_t i = 0; i < n_draws; ++i) num[i] = lw[i] + col[i];
        elpd[j] = logsumexp(num) - logsumexp(lw);
    }
    out.elpd = 0.0;
    for (double e : elpd) out.elpd += e;
    out.looic = -2.0 * out.elpd;
    out.se = 2.0 * std::sqrt(static_cast<double>(n_obs) * sample_variance(elpd));
    return out;
}

}  // namespace povmap::sampler
