#include "omnicomb/types.hpp"

#include <unordered_set>

namespace omnicomb {

std::string_view to_string(PenaltyKind kind) {
    return kind == PenaltyKind::Ridge ? "ridge" : "lasso";
}

PenaltyKind parse_penalty_kind(std::string_view text) {
    if (text == "ridge") return PenaltyKind::Ridge;
    if (text == "lasso") return PenaltyKind::Lasso;
    throw Error("unknown penalty kind '" + std::string(text) + "' (expected ridge or lasso)");
}

namespace {

void require_unique(const std::vector<std::string>& names, std::string_view what) {
    std::unordered_set<std::string> seen;
    for (const auto& name : names) {
        if (!seen.insert(name).second)
            throw Error("duplicate " + std::string(what) + " '" + name + "'");
    }
}

}  // namespace

void DesignMatrix::validate() const {
    if (values.rows() < 2) throw Error("design matrix needs at least 2 samples");
    if (static_cast<Eigen::Index>(sample_ids.size()) != values.rows())
        throw Error("design matrix: sample_ids size does not match row count");
    if (static_cast<Eigen::Index>(feature_names.size()) != values.cols())
        throw Error("design matrix: feature_names size does not match column count");
    if (!values.allFinite()) throw Error("design matrix contains non-finite values");
    require_unique(sample_ids, "sample id");
    require_unique(feature_names, "feature name");
}

void require_binary(const Eigen::VectorXd& y, std::string_view what) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0)
            throw Error(std::string(what) + ": label at index " + std::to_string(i) +
                        " is not 0 or 1");
    }
}

void require_both_classes(const Eigen::VectorXd& y, std::string_view what) {
    const double ones = y.sum();
    if (ones < 1.0 || ones > static_cast<double>(y.size()) - 1.0)
        throw Error(std::string(what) + ": outcome must contain both classes");
}

void OutcomeVector::validate() const {
    if (static_cast<Eigen::Index>(sample_ids.size()) != labels.size())
        throw Error("outcome: sample_ids size does not match label count");
    require_binary(labels, "outcome");
    require_both_classes(labels, "outcome");
    require_unique(sample_ids, "sample id");
}

}  // namespace omnicomb
