#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "povmap/util.hpp"

namespace povmap::survey {

enum class Level { Area, Subarea };

inline const char* level_name(Level l) { return l == Level::Area ? "area" : "subarea"; }

struct SurveyRecord {
    std::string area_id;
    std::string subarea_id;
    std::string cluster_id;
    std::string stratum_id;
    double weight = 0.0;
    int poor = 0;
};

/// Registry of all areas/sub-areas (in shares-file order) with their
/// national population shares q_dj; defines the full domain universe,
/// including sub-areas the sample never reaches.
struct PopulationShares {
    std::vector<std::string> area_ids;
    std::vector<std::string> subarea_ids;
    std::vector<int> subarea_area;     // area index per sub-area
    std::vector<double> q;             // national share per sub-area, sums to 1
    std::vector<double> area_share;    // s_d = sum of q within the area
    std::vector<double> within_share;  // s_dj = q / s_d, sums to 1 within each area

    std::unordered_map<std::string, int> area_index;
    std::unordered_map<std::string, int> subarea_index;

    void finalize();  // builds indices, derived shares; validates
};

struct SurveyDataset {
    std::vector<SurveyRecord> records;
    PopulationShares shares;
};

PopulationShares load_shares(const std::filesystem::path& shares_csv);
SurveyDataset load_survey(const std::filesystem::path& survey_csv, const std::filesystem::path& shares_csv);

/// Validates weights, poverty indicators and the nesting of records into
/// the shares registry; throws input_error with row context.
void validate(const SurveyDataset& data);

struct DirectEstimate {
    std::string domain_id;
    Level level = Level::Area;
    double estimate = 0.0;       // NaN when out of sample
    long n = 0;                  // sampled units
    double design_effect = 1.0;  // NaN when out of sample
    double effective_size = 1.0; // NaN when out of sample
    long censor_exponent = 0;    // weight-sharing units; 0 when out of sample
    bool in_sample = false;
};

/// Ratio of weighted poverty sum to weighted size; empty domain reports
/// out-of-sample (nullopt) rather than a numeric error.
std::optional<double> hajek_subarea(const SurveyDataset& data, const std::string& subarea_id);
std::optional<double> hajek_area(const SurveyDataset& data, const std::string& area_id);

struct EffInfo {
    double effective_size = 1.0;
    double design_effect = 1.0;
    long censor_exponent = 1;
};

struct EffectiveSizes {
    std::map<std::string, EffInfo> area;
    std::map<std::string, EffInfo> subarea;
};

EffectiveSizes effective_sample_sizes(const SurveyDataset& data);

/// Both levels, registry order (areas first). Out-of-sample domains are
/// present with n = 0 and no estimate.
std::vector<DirectEstimate> direct_estimates(const SurveyDataset& data);

void write_direct_csv(const std::filesystem::path& path, std::span<const DirectEstimate> estimates);
std::vector<DirectEstimate> read_direct_csv(const std::filesystem::path& path);

}  // namespace povmap::survey
