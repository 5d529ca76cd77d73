#pragma once

// Strategies for combining two sources of out-of-fold predictions: convex
// mixtures, a logistic model on the two logits (and its single-source
// recalibration counterpart), the sequential offset model, and the naive
// column-stacked fit.

#include "omnicomb/cross_validation.hpp"

#include <map>
#include <string>

namespace omnicomb {

enum class CombineMethod { Naive, Average, Mixture, ModelBased, Recalibrated, Sequential };

std::string_view to_string(CombineMethod method);

struct CombinedPrediction {
    Eigen::VectorXd probs;
    CombineMethod method = CombineMethod::Average;
    std::string label;
    std::map<std::string, double> parameters;
    /// Per left-out sample (alpha, beta...) on the logit scale, for the
    /// leave-one-out combiners; empty otherwise.
    std::vector<Eigen::VectorXd> loo_coefficients;
    /// Outer double-CV details for the naive and sequential strategies.
    std::optional<DoubleCvResult> cv;
};

/// w * p1 + (1 - w) * p2.
CombinedPrediction mix(const Eigen::VectorXd& p1, const Eigen::VectorXd& p2, double w);

enum class MixCriterion { Deviance, Brier };

struct MixtureSearch {
    double weight = 0.5;
    CombinedPrediction combined;
    std::vector<double> weights;
    std::vector<double> criterion;
    /// Criterion at w = 0.5 is within 5% of the optimum.
    bool flat_maximum = false;
};

/// Grid search over w in {0, step, ..., 1}. The weight is chosen on the same
/// samples it is evaluated on; the result carries parameters["in_sample_weight"] = 1.
/// Ties resolve towards w = 0.5.
MixtureSearch search_mixture_weight(const Eigen::VectorXd& p1, const Eigen::VectorXd& p2, const Eigen::VectorXd& y,
                                    MixCriterion criterion = MixCriterion::Deviance, double grid_step = 0.01);

/// Ridge added to the slope terms of the leave-one-out logistic combiners.
inline constexpr double kCombinerStabilizer = 1e-8;

/// Leave-one-out fits of logit(p) = a + b1 logit(p1) + b2 logit(p2).
CombinedPrediction stack_logistic_loo(const Eigen::VectorXd& p1, const Eigen::VectorXd& p2, const Eigen::VectorXd& y);

/// Leave-one-out fits of logit(p) = a + b logit(pk).
CombinedPrediction recalibrate_loo(const Eigen::VectorXd& pk, const Eigen::VectorXd& y);

/// Leave-one-out fit of logit(p) = a + sum_k b_k logit(p_k) over any number of
/// prediction columns; the two functions above are thin wrappers.
CombinedPrediction logistic_combination_loo(const std::vector<Eigen::VectorXd>& sources, const Eigen::VectorXd& y);

/// Penalized fit of y on X2 with logit(p1) as a fixed offset, under the full
/// inner-CV machinery, evaluated over `outer_plan` (leave-one-out by default
/// in callers). p1 is never refit.
CombinedPrediction sequential_offset(const Eigen::VectorXd& p1, const Eigen::MatrixXd& X2, const Eigen::VectorXd& y,
                                     PenaltyKind kind, const FoldPlan& outer_plan, const CvSettings& settings);

/// Column concatenation [X1 | X2] with feature names prefixed by source.
DesignMatrix concat_sources(const DesignMatrix& X1, std::string_view name1, const DesignMatrix& X2,
                            std::string_view name2);

/// Double-CV fit on the concatenated sources under one common penalty.
CombinedPrediction naive_stack(const DesignMatrix& X1, const DesignMatrix& X2, const Eigen::VectorXd& y,
                               PenaltyKind kind, const FoldPlan& plan, const CvSettings& settings);

}  // namespace omnicomb
