#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace omnicomb {

/// Thrown for any violated precondition or data contract.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Probability clipping used everywhere a probability leaves the solver.
inline constexpr double kProbEps = 1e-6;

/// logit(1 - kProbEps); the linear predictor cap used inside the solver.
inline const double kLogitCap = std::log((1.0 - kProbEps) / kProbEps);

enum class PenaltyKind { Ridge, Lasso };

std::string_view to_string(PenaltyKind kind);
PenaltyKind parse_penalty_kind(std::string_view text);

struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::Ridge;
    double lambda = 0.0;
};

/// Dense n x p predictor matrix with row and column labels.
struct DesignMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> feature_names;
    std::vector<std::string> sample_ids;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }

    /// Checks finiteness, shape agreement and label uniqueness. Zero-column
    /// matrices are allowed so an absent source can be represented.
    void validate() const;
};

/// Binary outcome aligned to sample ids.
struct OutcomeVector {
    Eigen::VectorXd labels;
    std::vector<std::string> sample_ids;

    Eigen::Index size() const { return labels.size(); }

    /// Requires labels in {0,1} with both classes present.
    void validate() const;
};

/// Throws unless every entry of y is 0 or 1.
void require_binary(const Eigen::VectorXd& y, std::string_view what);

/// Throws unless y holds at least one 0 and one 1.
void require_both_classes(const Eigen::VectorXd& y, std::string_view what);

}  // namespace omnicomb
