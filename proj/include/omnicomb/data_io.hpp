#pragma once

// CSV ingestion, sample alignment, the synthetic two-source generator and
// report serialization.

#include "omnicomb/evaluation.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace omnicomb {

/// One named predictor source.
struct PredictorSource {
    std::string name;
    DesignMatrix matrix;
};

/// Loads `sample_id,<feature>...` CSV. Errors name the offending row/column.
PredictorSource load_source_csv(const std::filesystem::path& path, std::string name = {});

/// Loads `sample_id,outcome` CSV with outcomes strictly 0 or 1.
OutcomeVector load_outcome_csv(const std::filesystem::path& path);

/// Writes a source in the format read by load_source_csv, using shortest
/// round-trip decimal representations.
void write_source_csv(const DesignMatrix& source, const std::filesystem::path& path);
void write_outcome_csv(const OutcomeVector& outcome, const std::filesystem::path& path);

struct StudyBundle {
    std::vector<PredictorSource> sources;
    OutcomeVector outcome;
    std::vector<std::string> provenance;
    /// Samples dropped per input during alignment: sources in order, then the outcome.
    std::vector<std::size_t> dropped;

    Eigen::Index n() const { return outcome.size(); }
};

/// Keeps samples present in every source and the outcome, in outcome order.
StudyBundle align_samples(std::vector<PredictorSource> sources, const OutcomeVector& outcome);

struct SyntheticConfig {
    int n = 400;
    int p1 = 50;
    int p2 = 150;
    int latent_dim = 2;
    double shared_signal = 1.5;
    double source2_unique_signal = 1.5;
    double noise_sd = 1.0;
    double prevalence_target = 0.19;
    std::uint64_t seed = 42;

    void validate() const;
};

struct SyntheticData {
    StudyBundle bundle;
    Eigen::VectorXd bayes_probs;
    double intercept = 0.0;  // calibrated c
};

/// Latent-factor generator: X1 = z A1 + e, X2 = z A2 + u B + e,
/// logit P(y=1) = c + shared * (z g) + unique * (u d). c is bisected so the
/// drawn outcome's prevalence is within 0.02 of the target.
SyntheticData generate_synthetic(const SyntheticConfig& cfg);

struct ReportRow {
    std::string penalty;
    MetricsRow metrics;
};

struct ReportProvenance {
    std::uint64_t seed = 0;
    int outer_folds = 0;
    int inner_folds = 0;
    std::string sequential_outer;
    std::string version;
};

enum class ReportLayout { Table, Machine };

/// Aligned text tables, one block per penalty, with single-source,
/// combination and recalibrated columns.
std::string format_table_report(const std::vector<ReportRow>& rows, const ReportProvenance& prov);

/// One JSON object per line with the metric fields plus provenance.
std::string format_machine_report(const std::vector<ReportRow>& rows, const ReportProvenance& prov);

struct ParsedRecord {
    ReportRow row;
    ReportProvenance provenance;
};

std::vector<ParsedRecord> parse_machine_report(const std::string& text);

void write_report(const std::vector<ReportRow>& rows, ReportLayout layout, const std::filesystem::path& path,
                  const ReportProvenance& prov);

}  // namespace omnicomb
