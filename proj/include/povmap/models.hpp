#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "povmap/autodiff.hpp"
#include "povmap/eb.hpp"
#include "povmap/sampler.hpp"
#include "povmap/survey.hpp"

namespace povmap::models {

enum class Variant { SMS, SA, IMS };

Variant variant_from_string(const std::string& s);
const char* variant_name(Variant v);

struct HorseshoeConfig {
    double expected_nonzero = 5.0;
    double slab_scale = 2.0;
    double slab_df = 4.0;
};

struct ReffGammaConfig {
    double shape = 1.0;
    double rate = 1.0;
};

struct PriorConfig {
    HorseshoeConfig horseshoe;
    ReffGammaConfig reff_gamma;
    double intercept_sd = 5.0;
    double reff_global_scale = 1.0;  // half-normal scale of the random-effect scales

    void validate() const;
};

struct ModelSpec {
    Variant variant = Variant::SMS;
    std::vector<std::string> area_covariates;
    std::vector<std::string> subarea_covariates;
    PriorConfig priors;
    uint64_t seed = 1;
};

struct Matrix {
    size_t rows = 0, cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
    double& operator()(size_t r, size_t c) { return v[r * cols + c]; }
    double operator()(size_t r, size_t c) const { return v[r * cols + c]; }
    std::span<const double> row(size_t r) const { return {v.data() + r * cols, cols}; }
};

struct CovariateTable {
    std::string id_column;
    std::vector<std::string> ids;
    std::vector<std::string> names;  // value columns
    Matrix values;                   // [ids x names]
};

CovariateTable load_covariates_csv(const std::filesystem::path& path, const std::string& id_column);

/// One spatial level of assembled model inputs. Covariate columns are
/// standardized (mean 0, sd 1); the transforms are kept for prediction.
struct LevelData {
    std::vector<std::string> ids;
    std::vector<double> estimate;  // NaN when out of sample
    std::vector<double> phi;       // effective size minus one, floored at 1e-6
    std::vector<long> m;
    std::vector<char> in_sample;
    std::vector<char> estimable;  // covariates available
    Matrix x;                     // [n_domains x P], NaN rows for non-estimable
    std::vector<double> col_mean, col_sd;
    std::vector<int> in_sample_rows;

    size_t n() const { return ids.size(); }
};

struct ModelData {
    LevelData area;
    LevelData subarea;
    std::vector<int> subarea_area;  // area index per sub-area
    std::vector<double> s_d;        // area population shares
    std::vector<double> s_dj;       // within-area sub-area shares
    std::vector<double> q_dj;       // national sub-area shares
    std::vector<std::string> notes;
};

ModelData build_model_data(const survey::PopulationShares& shares,
                           std::span<const survey::DirectEstimate> directs, const CovariateTable& area_cov,
                           const std::vector<std::string>& area_cols, const CovariateTable& subarea_cov,
                           const std::vector<std::string>& subarea_cols);

/// Correlation parameter mapped from the real line into its data-dependent
/// support [L, 1], L = lambda_lower_bound(mus), with the log Jacobian of
/// the affine-logistic map.
template <class T>
struct LambdaTransform {
    T lambda;
    T log_jacobian;
};

template <class T>
T inv_logit(const T& x) {
    using std::exp;
    if (value(x) >= 0.0) {
        const T e = exp(-x);
        return T(1.0) / (T(1.0) + e);
    }
    const T e = exp(x);
    return e / (T(1.0) + e);
}

template <class T>
T log_sigmoid_t(const T& x) {
    using std::exp;
    using std::log1p;
    if (value(x) >= 0.0) return -log1p(exp(-x));
    return x - log1p(exp(x));
}

template <class T>
LambdaTransform<T> lambda_transform(const T& raw, std::span<const T> mus) {
    using std::log1p;
    const T lower = eb::lambda_lower_bound(mus);
    const T lambda = lower + (T(1.0) - lower) * inv_logit(raw);
    const T log_jac = log1p(-lower) + log_sigmoid_t(raw) + log_sigmoid_t(-raw);
    return {lambda, log_jac};
}

inline LambdaTransform<double> lambda_transform(double raw, const std::vector<double>& mus) {
    return lambda_transform<double>(raw, std::span<const double>(mus));
}

/// Parameter values on their natural (constrained) scales for one draw.
struct ConstrainedDraw {
    double alpha_a = 0.0, alpha_s = 0.0;
    std::vector<double> beta_a, beta_s;  // effective shrunk coefficients
    std::vector<double> u;               // all areas
    std::vector<double> v;               // in-sample sub-areas (model order)
    std::vector<double> xi_u, xi_v;
    double s_u = 0.0, s_v = 0.0;
    double tau_a = 0.0, tau_s = 0.0, c2_a = 0.0, c2_s = 0.0;
    std::vector<double> hs_local_a, hs_local_s;
    double lambda_a = 0.0, lambda_s = 0.0;
};

struct LogLikTerms {
    std::vector<double> area;     // in-sample areas, model order
    std::vector<double> subarea;  // in-sample sub-areas, model order
};

/// Joint log posterior over the unconstrained parameter vector for one
/// model variant, with taped reverse-mode gradients.
class AssembledModel {
  public:
    AssembledModel(ModelSpec spec, ModelData data);

    size_t dim() const { return dim_; }
    const std::vector<std::string>& unconstrained_names() const { return unames_; }
    const std::vector<std::string>& constrained_names() const { return cnames_; }
    const ModelSpec& spec() const { return spec_; }
    const ModelData& data() const { return data_; }
    bool has_area_layer() const { return spec_.variant != Variant::SA; }
    int v_index(size_t subarea) const { return v_index_[subarea]; }
    size_t n_v() const { return n_v_; }

    double log_posterior(std::span<const double> x) const;
    double log_posterior_grad(std::span<const double> x, std::vector<double>& grad) const;
    LogLikTerms loglik_terms(std::span<const double> x) const;
    ConstrainedDraw constrain(std::span<const double> x) const;
    std::vector<double> constrained_row(const ConstrainedDraw& c) const;

    /// Mean of the area-level mixture for one area; usage error under SA.
    double mu_area(const ConstrainedDraw& c, size_t d) const;
    /// Mean of the sub-area mixture given an explicit random effect value.
    double mu_subarea(const ConstrainedDraw& c, size_t j, double v_dj) const;
    /// Sub-area predictor without the sub-area effect (prediction helper).
    double eta_subarea_base(const ConstrainedDraw& c, size_t j) const;

    /// Correlation supports evaluated at a draw's means (in-sample domains).
    double lambda_lower_bound_area(const ConstrainedDraw& c) const;
    double lambda_lower_bound_subarea(const ConstrainedDraw& c) const;

    sampler::TargetDensity target() const;

  private:
    struct Layout {
        int alpha_a = -1, alpha_s = -1;
        int z_a = -1, loglocal_a = -1, logtau_a = -1, logc2_a = -1;
        int z_s = -1, loglocal_s = -1, logtau_s = -1, logc2_s = -1;
        int z_u = -1, logxi_u = -1, logs_u = -1;
        int z_v = -1, logxi_v = -1, logs_v = -1;
        int raw_lambda_a = -1, raw_lambda_s = -1;
    };

    template <class T>
    struct Unpacked {
        T lp{0.0};
        T alpha_a{0.0}, alpha_s{0.0};
        std::vector<T> beta_a, beta_s;
        std::vector<T> u, v, xi_u, xi_v;
        T s_u{0.0}, s_v{0.0};
        T tau_a{0.0}, tau_s{0.0}, c2_a{0.0}, c2_s{0.0};
        std::vector<T> hs_local_a, hs_local_s;
        T lambda_a{0.0}, lambda_s{0.0};
        std::vector<T> mu_area_in, mu_sub_in;  // aligned with in_sample_rows
    };

    template <class T>
    Unpacked<T> unpack(const T* x) const;

    template <class T>
    T log_posterior_t(const T* x, LogLikTerms* sink) const;

    template <class T>
    void horseshoe_block(const T* x, int z_off, int local_off, int tau_off, int c2_off, size_t p,
                         double tau0, T& lp, std::vector<T>& beta, std::vector<T>& locals, T& tau,
                         T& c2) const;

    ModelSpec spec_;
    ModelData data_;
    Layout la_;
    size_t dim_ = 0;
    size_t n_v_ = 0;
    std::vector<int> v_index_;  // per sub-area, -1 when out of sample
    double tau0_a_ = 1.0, tau0_s_ = 1.0;
    std::vector<std::string> unames_, cnames_;
};

}  // namespace povmap::models
