#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smg/features.hpp"
#include "smg/learn.hpp"

namespace smg {

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

/// Disjoint, exhaustive split. Stratified: each class contributes round(n_c * fraction)
/// samples to train, at least one sample to each side.
Split split(std::span<const int> labels, double train_fraction, std::uint64_t seed, bool stratified = true);

/// k disjoint folds; each class is shuffled and dealt round-robin, so per-class fold
/// sizes differ by at most one. Indices within a fold are ascending.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed);

struct ConfusionMatrix {
    int n = 0;
    std::vector<std::size_t> counts; // row = truth, column = prediction
    std::vector<std::string> names;

    std::size_t at(int truth, int pred) const { return counts[static_cast<std::size_t>(truth) * n + pred]; }
    std::size_t total() const;
};

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, int n);
double accuracy(const ConfusionMatrix& cm);

struct CvReport {
    std::string scheme; // "kfold" or "nested"
    int k_outer = 0;
    int k_inner = 0;
    std::vector<double> fold_scores;
    double mean = 0.0;
    double std = 0.0; // sample standard deviation
    /// Per outer fold: hyperparameter JSON of the chosen grid entry (nested only).
    std::vector<std::string> chosen;
    std::vector<int> chosen_index;
};

/// Gathers rows `idx` of X and y.
void gather(const FeatureMatrix& X, std::span<const int> y, std::span<const std::size_t> idx, FeatureMatrix& Xo,
            std::vector<int>& yo);

double holdout_score(const AlgoSpec& spec, const FeatureMatrix& X, std::span<const int> y,
                     std::span<const std::size_t> train, std::span<const std::size_t> test);

CvReport kfold_cv(const AlgoSpec& spec, const FeatureMatrix& X, std::span<const int> y, int k, std::uint64_t seed);

/// Non-nested search: every grid entry is scored by kfold_cv on the same folds and the best
/// entry's fold scores are reported (ties to the earliest entry).
CvReport grid_search_cv(const AlgoSpec& spec, const FeatureMatrix& X, std::span<const int> y, int k,
                        std::span<const Hyper> grid, std::uint64_t seed);

/// Outer folds are the same as kfold_cv with `seed`; the inner folds of outer fold i use
/// mix_seed({seed, i}). Ties between grid entries go to the earliest.
CvReport nested_cv(const AlgoSpec& spec, const FeatureMatrix& X, std::span<const int> y, int k_outer, int k_inner,
                   std::span<const Hyper> grid, std::uint64_t seed);

/// Grid JSON: an object of arrays (cartesian product, keys in document order, last key
/// varying fastest) or an array of objects. Entries override `base`.
std::vector<Hyper> parse_grid(Algo a, const std::string& json_text, const Hyper& base);

double mean_of(std::span<const double> v);
double sample_std(std::span<const double> v);

} // namespace smg
