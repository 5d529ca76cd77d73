#pragma once

// Configuration-driven end-to-end analysis: single sources, every combiner,
// metrics and reports, once per requested penalty kind.

#include "omnicomb/combiners.hpp"
#include "omnicomb/data_io.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace omnicomb {

inline constexpr const char* kVersion = "0.1.0";

enum class RunMode { Real, Synthetic };
enum class SequentialOuter { Loo, KFold };
enum class MixtureMode { Fixed, Search };
enum class LayoutSelection { Table, Machine, Both };

struct SourceInput {
    std::string name;
    std::filesystem::path path;
};

struct RunConfig {
    RunMode mode = RunMode::Synthetic;
    std::vector<SourceInput> sources;
    std::filesystem::path outcome_path;
    SyntheticConfig synthetic;

    std::vector<PenaltyKind> penalties{PenaltyKind::Ridge, PenaltyKind::Lasso};
    int outer_folds = 10;
    int inner_folds = 10;
    int n_lambda = 20;
    double lambda_min_ratio = 1e-2;
    bool stratified = true;
    SequentialOuter sequential_outer = SequentialOuter::Loo;

    MixtureMode mixture = MixtureMode::Fixed;
    double mixture_weight = 0.5;
    double mixture_step = 0.01;
    MixCriterion mixture_criterion = MixCriterion::Deviance;

    std::uint64_t seed = 42;
    /// Report base path; `.txt` and `.jsonl` are appended per layout. Empty
    /// means no files are written.
    std::filesystem::path output = "omnicomb_report";
    LayoutSelection layout = LayoutSelection::Both;

    void validate() const;
    CvSettings cv_settings() const;
};

/// Reads an INI file with sections [run], [data], [synthetic], [cv] and
/// [combiners]. Unknown keys are rejected. Relative data paths resolve
/// against the config file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});

std::vector<PenaltyKind> parse_penalty_selection(const std::string& text);
std::string_view to_string(SequentialOuter outer);

/// A failure inside run_pipeline, tagged with the stage that raised it.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message);
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct PenaltyRun {
    PenaltyKind kind = PenaltyKind::Ridge;
    /// Every prediction vector behind the report rows, keyed by row label,
    /// plus "null" for the cross-validated prevalence.
    std::map<std::string, Eigen::VectorXd> predictions;
    std::vector<MetricsRow> rows;
    std::map<std::string, CombinedPrediction> combiners;
};

struct PipelineResult {
    StudyBundle bundle;
    std::optional<Eigen::VectorXd> bayes_probs;
    FoldPlan outer_plan;
    std::vector<PenaltyRun> runs;
    std::vector<ReportRow> report;
    ReportProvenance provenance;
    std::vector<std::filesystem::path> written;
};

/// Loads or generates the data, runs every stage per penalty kind and writes
/// the configured report layouts. Throws StageError.
PipelineResult run_pipeline(const RunConfig& config);

/// Row labels in report order for sources named s1 and s2.
std::vector<std::string> method_labels(const std::string& s1, const std::string& s2, const RunConfig& config);

}  // namespace omnicomb
