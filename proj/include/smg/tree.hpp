#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "smg/binio.hpp"
#include "smg/features.hpp"
#include "smg/rng.hpp"

namespace smg {

struct TreeNode {
    std::int32_t feature = -1; // -1 marks a leaf
    float threshold = 0.0f;    // x[feature] <= threshold goes left
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;        // majority class id (classification) or mean target (regression)
    std::int32_t samples = 0;

    bool is_leaf() const { return feature < 0; }
};

/// CART tree stored as a pre-order node array.
class DecisionTree {
public:
    enum class Criterion : std::uint8_t { Gini = 0, Variance = 1 };

    struct Params {
        Criterion criterion = Criterion::Gini;
        int min_leaf = 1;
        int max_depth = 0; // 0 = unlimited
        int mtry = 0;      // features tried per node; 0 = all
        int n_classes = 0; // required for Gini
    };

    /// Grows on the rows `sample` of X (duplicates allowed, as in a bootstrap).
    /// `rng` is consulted only when 0 < mtry < X.cols. Ties between equally good
    /// splits resolve to the lowest feature index, then the lowest threshold.
    static DecisionTree grow(const FeatureMatrix& X, std::span<const double> target, std::span<const std::size_t> sample,
                             const Params& params, Rng* rng = nullptr);

    double predict(std::span<const float> x) const { return nodes_[static_cast<std::size_t>(leaf_index(x))].value; }
    int leaf_index(std::span<const float> x) const;
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    int depth() const;

    void write(ByteWriter& out) const;
    static DecisionTree read(ByteReader& in, std::size_t feature_dim);

private:
    std::vector<TreeNode> nodes_;
};

} // namespace smg
