#pragma once

#include "omnicomb/types.hpp"

#include <cstdint>
#include <vector>

namespace omnicomb {

/// Assignment of n samples to `folds` folds.
struct FoldPlan {
    std::vector<int> fold_of;
    int folds = 0;
    std::uint64_t seed = 0;
    bool stratified = false;

    std::size_t size() const { return fold_of.size(); }
    std::vector<Eigen::Index> members(int fold) const;
    std::vector<Eigen::Index> complement(int fold) const;
};

/// Shuffled round-robin assignment, class-wise when stratified. Deterministic
/// in (y, folds, seed, stratified).
FoldPlan make_folds(const Eigen::VectorXd& y, int folds, std::uint64_t seed, bool stratified);

/// Leave-one-out plan: fold i holds sample i.
FoldPlan leave_one_out_plan(Eigen::Index n);

/// Independent stream seed for a sub-task (e.g. an outer fold).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace omnicomb
