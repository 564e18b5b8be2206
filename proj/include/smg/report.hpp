#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "smg/eval.hpp"
#include "smg/learn.hpp"
#include "smg/stats.hpp"

namespace smg {

struct AlgoResult {
    Algo algo = Algo::KNN;
    double accuracy = 0.0;
    double fit_s = 0.0;
    double predict_us = 0.0; // mean per validation frame
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    std::string hyper_json;
};

/// One row per algorithm: holdout accuracy on a stratified split plus timings.
struct ComparisonReport {
    std::vector<AlgoResult> rows;
    std::uint64_t feature_hash = 0;
    std::uint64_t seed = 0;
    double split = 2.0 / 3.0;
    std::string dataset;
    /// Timing columns vary run to run; without them the output is byte-identical.
    bool include_timings = true;

    const AlgoResult* find(Algo a) const;
};

ComparisonReport compare_algorithms(const FeatureMatrix& X, std::span<const int> y, std::span<const Algo> algos,
                                    const LearnDefaults& defaults, double split_fraction, std::uint64_t seed);

std::string to_csv(const ComparisonReport& r);
std::string to_json(const ComparisonReport& r);
std::string to_text(const ComparisonReport& r);
/// Writes `<stem>.csv` and `<stem>.json`.
void emit_report(const ComparisonReport& r, const std::filesystem::path& stem);

std::string to_json(const CvReport& r, Algo algo, std::uint64_t seed);
std::string to_json(const StatResult& r, const std::string& test, std::span<const std::string> groups);

std::string hex64(std::uint64_t v);

} // namespace smg
