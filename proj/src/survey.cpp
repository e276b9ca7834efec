#include "povmap/survey.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>

#include "povmap/csv.hpp"

namespace povmap::survey {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kShareTol = 1e-9;
constexpr double kDeffFloor = 1e-6;

struct DomainUnits {
    std::vector<size_t> units;  // indices into records
};

std::string cluster_key(const SurveyRecord& r) { return r.stratum_id + '\x1f' + r.cluster_id; }

/// Weight-sharing unit: units in the same cluster carrying an identical
/// weight are treated as one household for the censoring exponent.
std::string household_key(const SurveyRecord& r) {
    uint64_t bits;
    static_assert(sizeof(bits) == sizeof(r.weight));
    std::memcpy(&bits, &r.weight, sizeof(bits));
    return cluster_key(r) + '\x1f' + hex_u64(bits);
}

struct DomainStats {
    double estimate = kNaN;
    long n = 0;
    long m = 0;
    double deff = kNaN;        // NaN = needs boundary imputation
    bool deff_computed = false;
};

/// Hajek point estimate plus a with-replacement first-stage cluster
/// linearization of its variance, stratified by the survey strata.
DomainStats domain_stats(const SurveyDataset& data, const std::vector<size_t>& units) {
    DomainStats out;
    out.n = static_cast<long>(units.size());
    if (units.empty()) return out;

    double sw = 0.0, swy = 0.0;
    std::set<std::string> households;
    for (size_t i : units) {
        const auto& r = data.records[i];
        sw += r.weight;
        swy += r.weight * static_cast<double>(r.poor);
        households.insert(household_key(r));
    }
    out.estimate = swy / sw;
    out.m = static_cast<long>(households.size());

    if (out.estimate <= 0.0 || out.estimate >= 1.0) {
        // binomial variance vanishes at the boundary; DEff imputed later
        return out;
    }

    // cluster totals of the linearized residuals, grouped by stratum
    std::map<std::string, std::map<std::string, double>> strata;  // stratum -> cluster -> total
    for (size_t i : units) {
        const auto& r = data.records[i];
        const double z = r.weight * (static_cast<double>(r.poor) - out.estimate) / sw;
        strata[r.stratum_id][cluster_key(r)] += z;
    }
    double var = 0.0;
    bool any_pair = false;
    for (const auto& [stratum, clusters] : strata) {
        const size_t nh = clusters.size();
        if (nh < 2) continue;  // single-cluster stratum: no variance contribution
        any_pair = true;
        double s = 0.0;
        for (const auto& [c, t] : clusters) s += t;
        const double mh = s / static_cast<double>(nh);
        double ss = 0.0;
        for (const auto& [c, t] : clusters) ss += (t - mh) * (t - mh);
        var += static_cast<double>(nh) / static_cast<double>(nh - 1) * ss;
    }
    if (!any_pair) {
        // domain observed in a single cluster: fall back to DEff = 1
        out.deff = 1.0;
        out.deff_computed = true;
        return out;
    }
    const double var_srs = out.estimate * (1.0 - out.estimate) / static_cast<double>(out.n);
    out.deff = std::max(var / var_srs, kDeffFloor);
    out.deff_computed = true;
    return out;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 1.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void PopulationShares::finalize() {
    area_index.clear();
    subarea_index.clear();
    for (size_t i = 0; i < area_ids.size(); ++i) area_index[area_ids[i]] = static_cast<int>(i);
    for (size_t i = 0; i < subarea_ids.size(); ++i) subarea_index[subarea_ids[i]] = static_cast<int>(i);

    double total = 0.0;
    for (double x : q) {
        if (!(x > 0.0)) throw input_error("population shares: q must be positive");
        total += x;
    }
    if (std::fabs(total - 1.0) > kShareTol) {
        throw input_error("population shares: q must sum to 1 (got " + format_double(total) + ")");
    }
    area_share.assign(area_ids.size(), 0.0);
    for (size_t j = 0; j < subarea_ids.size(); ++j) area_share[static_cast<size_t>(subarea_area[j])] += q[j];
    within_share.resize(subarea_ids.size());
    for (size_t j = 0; j < subarea_ids.size(); ++j) {
        within_share[j] = q[j] / area_share[static_cast<size_t>(subarea_area[j])];
    }
}

PopulationShares load_shares(const std::filesystem::path& shares_csv) {
    const auto t = csv::read_csv(shares_csv);
    const size_t c_sub = t.col("subarea_id");
    const size_t c_area = t.col("area_id");
    const size_t c_q = t.col("q");
    PopulationShares s;
    for (size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& sub = t.rows[r][c_sub];
        const std::string& area = t.rows[r][c_area];
        if (s.subarea_index.count(sub)) {
            throw input_error(t.path + ": row " + std::to_string(r + 2) + ": duplicate subarea_id '" + sub + "'");
        }
        s.subarea_index[sub] = static_cast<int>(s.subarea_ids.size());
        s.subarea_ids.push_back(sub);
        if (!s.area_index.count(area)) {
            s.area_index[area] = static_cast<int>(s.area_ids.size());
            s.area_ids.push_back(area);
        }
        s.subarea_area.push_back(s.area_index[area]);
        s.q.push_back(csv::parse_double(t, r, c_q));
    }
    s.finalize();
    return s;
}

SurveyDataset load_survey(const std::filesystem::path& survey_csv, const std::filesystem::path& shares_csv) {
    SurveyDataset data;
    data.shares = load_shares(shares_csv);
    const auto t = csv::read_csv(survey_csv);
    const size_t c_area = t.col("area_id");
    const size_t c_sub = t.col("subarea_id");
    const size_t c_cluster = t.col("cluster_id");
    const size_t c_stratum = t.col("stratum_id");
    const size_t c_weight = t.col("weight");
    const size_t c_poor = t.col("poor");
    data.records.reserve(t.rows.size());
    for (size_t r = 0; r < t.rows.size(); ++r) {
        SurveyRecord rec;
        rec.area_id = t.rows[r][c_area];
        rec.subarea_id = t.rows[r][c_sub];
        rec.cluster_id = t.rows[r][c_cluster];
        rec.stratum_id = t.rows[r][c_stratum];
        rec.weight = csv::parse_double(t, r, c_weight);
        const long poor = csv::parse_long(t, r, c_poor);
        if (!(rec.weight > 0.0)) {
            throw input_error(t.path + ": row " + std::to_string(r + 2) + ": weight must be positive");
        }
        if (poor != 0 && poor != 1) {
            throw input_error(t.path + ": row " + std::to_string(r + 2) + ": poor must be 0 or 1");
        }
        rec.poor = static_cast<int>(poor);
        data.records.push_back(std::move(rec));
    }
    validate(data);
    return data;
}

void validate(const SurveyDataset& data) {
    for (size_t i = 0; i < data.records.size(); ++i) {
        const auto& r = data.records[i];
        const auto it = data.shares.subarea_index.find(r.subarea_id);
        if (it == data.shares.subarea_index.end()) {
            throw input_error("survey row " + std::to_string(i + 2) + ": subarea_id '" + r.subarea_id +
                              "' not present in population shares");
        }
        const int a = data.shares.subarea_area[static_cast<size_t>(it->second)];
        if (data.shares.area_ids[static_cast<size_t>(a)] != r.area_id) {
            throw input_error("survey row " + std::to_string(i + 2) + ": subarea '" + r.subarea_id +
                              "' mapped to area '" + r.area_id + "' but shares file nests it under '" +
                              data.shares.area_ids[static_cast<size_t>(a)] + "'");
        }
        if (!(r.weight > 0.0)) {
            throw input_error("survey row " + std::to_string(i + 2) + ": weight must be positive");
        }
        if (r.poor != 0 && r.poor != 1) {
            throw input_error("survey row " + std::to_string(i + 2) + ": poor must be 0 or 1");
        }
    }
}

std::optional<double> hajek_subarea(const SurveyDataset& data, const std::string& subarea_id) {
    double sw = 0.0, swy = 0.0;
    bool any = false;
    for (const auto& r : data.records) {
        if (r.subarea_id != subarea_id) continue;
        any = true;
        sw += r.weight;
        swy += r.weight * static_cast<double>(r.poor);
    }
    if (!any) return std::nullopt;
    return swy / sw;
}

std::optional<double> hajek_area(const SurveyDataset& data, const std::string& area_id) {
    double sw = 0.0, swy = 0.0;
    bool any = false;
    for (const auto& r : data.records) {
        if (r.area_id != area_id) continue;
        any = true;
        sw += r.weight;
        swy += r.weight * static_cast<double>(r.poor);
    }
    if (!any) return std::nullopt;
    return swy / sw;
}

std::vector<DirectEstimate> direct_estimates(const SurveyDataset& data) {
    const auto& sh = data.shares;
    std::vector<DomainUnits> by_area(sh.area_ids.size());
    std::vector<DomainUnits> by_subarea(sh.subarea_ids.size());
    for (size_t i = 0; i < data.records.size(); ++i) {
        const int j = sh.subarea_index.at(data.records[i].subarea_id);
        by_subarea[static_cast<size_t>(j)].units.push_back(i);
        by_area[static_cast<size_t>(sh.subarea_area[static_cast<size_t>(j)])].units.push_back(i);
    }

    auto build_level = [&](Level level, const std::vector<std::string>& ids,
                           const std::vector<DomainUnits>& groups) {
        std::vector<DirectEstimate> out(ids.size());
        std::vector<double> computed_deffs;
        for (size_t d = 0; d < ids.size(); ++d) {
            const DomainStats st = domain_stats(data, groups[d].units);
            DirectEstimate& e = out[d];
            e.domain_id = ids[d];
            e.level = level;
            e.n = st.n;
            e.in_sample = st.n > 0;
            if (!e.in_sample) {
                e.estimate = kNaN;
                e.design_effect = kNaN;
                e.effective_size = kNaN;
                e.censor_exponent = 0;
                continue;
            }
            e.estimate = st.estimate;
            e.censor_exponent = st.m;
            e.design_effect = st.deff;
            if (st.deff_computed) computed_deffs.push_back(st.deff);
        }
        // boundary estimates (0 or 1) get the level median DEff
        const double med = median_of(computed_deffs);
        for (auto& e : out) {
            if (!e.in_sample) continue;
            if (std::isnan(e.design_effect)) e.design_effect = med;
            e.effective_size = std::max(1.0, static_cast<double>(e.n) / e.design_effect);
        }
        return out;
    };

    std::vector<DirectEstimate> all = build_level(Level::Area, sh.area_ids, by_area);
    std::vector<DirectEstimate> subs = build_level(Level::Subarea, sh.subarea_ids, by_subarea);
    all.insert(all.end(), subs.begin(), subs.end());
    return all;
}

EffectiveSizes effective_sample_sizes(const SurveyDataset& data) {
    EffectiveSizes out;
    for (const auto& e : direct_estimates(data)) {
        if (!e.in_sample) continue;
        EffInfo info{e.effective_size, e.design_effect, e.censor_exponent};
        (e.level == Level::Area ? out.area : out.subarea)[e.domain_id] = info;
    }
    return out;
}

void write_direct_csv(const std::filesystem::path& path, std::span<const DirectEstimate> estimates) {
    csv::Writer w(path);
    w.row({"domain_id", "level", "estimate", "n", "deff", "n_eff", "m", "in_sample"});
    for (const auto& e : estimates) {
        if (e.in_sample) {
            w.row({e.domain_id, level_name(e.level), format_double(e.estimate), std::to_string(e.n),
                   format_double(e.design_effect), format_double(e.effective_size),
                   std::to_string(e.censor_exponent), "1"});
        } else {
            w.row({e.domain_id, level_name(e.level), "", "0", "", "", "", "0"});
        }
    }
    w.close();
}

std::vector<DirectEstimate> read_direct_csv(const std::filesystem::path& path) {
    const auto t = csv::read_csv(path);
    const size_t c_id = t.col("domain_id");
    const size_t c_level = t.col("level");
    const size_t c_est = t.col("estimate");
    const size_t c_n = t.col("n");
    const size_t c_deff = t.col("deff");
    const size_t c_neff = t.col("n_eff");
    const size_t c_m = t.col("m");
    const size_t c_in = t.col("in_sample");
    std::vector<DirectEstimate> out;
    for (size_t r = 0; r < t.rows.size(); ++r) {
        DirectEstimate e;
        e.domain_id = t.rows[r][c_id];
        const std::string& lv = t.rows[r][c_level];
        if (lv == "area") {
            e.level = Level::Area;
        } else if (lv == "subarea") {
            e.level = Level::Subarea;
        } else {
            throw input_error(t.path + ": row " + std::to_string(r + 2) + ": unknown level '" + lv + "'");
        }
        e.in_sample = csv::parse_long(t, r, c_in) != 0;
        e.n = csv::parse_long(t, r, c_n);
        if (e.in_sample) {
            e.estimate = csv::parse_double(t, r, c_est);
            e.design_effect = csv::parse_double(t, r, c_deff);
            e.effective_size = csv::parse_double(t, r, c_neff);
            e.censor_exponent = csv::parse_long(t, r, c_m);
        } else {
            e.estimate = kNaN;
            e.design_effect = kNaN;
            e.effective_size = kNaN;
            e.censor_exponent = 0;
        }
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace povmap::survey
