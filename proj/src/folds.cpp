#include "omnicomb/folds.hpp"

#include <algorithm>
#include <random>

namespace omnicomb {

std::vector<Eigen::Index> FoldPlan::members(int fold) const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] == fold) out.push_back(static_cast<Eigen::Index>(i));
    return out;
}

std::vector<Eigen::Index> FoldPlan::complement(int fold) const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != fold) out.push_back(static_cast<Eigen::Index>(i));
    return out;
}

FoldPlan make_folds(const Eigen::VectorXd& y, int folds, std::uint64_t seed, bool stratified) {
    const auto n = static_cast<std::size_t>(y.size());
    if (folds < 2 || static_cast<std::size_t>(folds) > n)
        throw Error("fold count " + std::to_string(folds) + " out of range [2, " + std::to_string(n) + "]");
    require_binary(y, "make_folds");

    std::vector<std::vector<std::size_t>> groups(stratified ? 2 : 1);
    for (std::size_t i = 0; i < n; ++i) groups[stratified && y[static_cast<Eigen::Index>(i)] == 1.0 ? 1 : 0].push_back(i);
    if (stratified) {
        const std::size_t smallest = std::min(groups[0].size(), groups[1].size());
        if (smallest < static_cast<std::size_t>(folds))
            throw Error("stratified " + std::to_string(folds) + "-fold split infeasible: smallest class has " +
                        std::to_string(smallest) + " samples");
    }

    FoldPlan plan;
    plan.folds = folds;
    plan.seed = seed;
    plan.stratified = stratified;
    plan.fold_of.assign(n, 0);
    std::mt19937_64 rng(seed);
    std::size_t counter = 0;
    for (auto& group : groups) {
        std::shuffle(group.begin(), group.end(), rng);
        for (const std::size_t i : group) plan.fold_of[i] = static_cast<int>(counter++ % static_cast<std::size_t>(folds));
    }
    return plan;
}

FoldPlan leave_one_out_plan(Eigen::Index n) {
    if (n < 2) throw Error("leave-one-out needs at least 2 samples");
    FoldPlan plan;
    plan.folds = static_cast<int>(n);
    plan.fold_of.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) plan.fold_of[static_cast<std::size_t>(i)] = static_cast<int>(i);
    return plan;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the combined key
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace omnicomb
