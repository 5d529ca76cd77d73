#pragma once

// Calibration and discrimination measures for out-of-fold probabilities.

#include "omnicomb/folds.hpp"

#include <string>

namespace omnicomb {

struct MetricsRow {
    std::string label;
    double brier_sum = 0.0;   // PRESS
    double brier_mean = 0.0;  // PRESS / n
    double deviance = 0.0;
    double q2 = 0.0;
    double c_index = 0.0;
    Eigen::Index n = 0;
};

/// Intercept-only cross-validated predictor: each sample gets the prevalence
/// of the training part of its fold, clipped to [kProbEps, 1-kProbEps].
Eigen::VectorXd null_probs_cv(const Eigen::VectorXd& y, const FoldPlan& plan);

/// Prediction sum of squares, sum_i (y_i - p_i)^2.
double press(const Eigen::VectorXd& y, const Eigen::VectorXd& p);

/// Sum of squared differences between two prediction vectors.
double cvss(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// CVSS(p, p0) / PRESS(y, p0).
double q2(const Eigen::VectorXd& y, const Eigen::VectorXd& p, const Eigen::VectorXd& p0);

/// -2 sum_i log(1 - |y_i - p_i|).
double deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& p);

/// -2 sum_i [y_i log p_i + (1 - y_i) log(1 - p_i)]; same quantity, other form.
double deviance_loglik_form(const Eigen::VectorXd& y, const Eigen::VectorXd& p);

/// Concordance probability between cases and controls with ties counted 1/2.
/// O(n log n) via sorting.
double c_index(const Eigen::VectorXd& y, const Eigen::VectorXd& p);

MetricsRow metrics_row(std::string label, const Eigen::VectorXd& y, const Eigen::VectorXd& p,
                       const Eigen::VectorXd& p0);

}  // namespace omnicomb
