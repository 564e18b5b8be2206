#include "smg/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smg/error.hpp"

namespace smg {

namespace {

constexpr double kEps = 1e-12;

struct Split {
    int feature = -1;
    float threshold = 0.0f;
    double score = -1.0;
};

float midpoint(float a, float b) {
    const float m = static_cast<float>((static_cast<double>(a) + b) / 2.0);
    return (m < b) ? m : a;
}

class Grower {
public:
    Grower(const FeatureMatrix& X, std::span<const double> y, const DecisionTree::Params& p, Rng* rng,
           std::vector<TreeNode>& nodes)
        : X_(X), y_(y), p_(p), rng_(rng), nodes_(nodes) {
        feats_.resize(X.cols);
        std::iota(feats_.begin(), feats_.end(), 0);
        if (p.criterion == DecisionTree::Criterion::Gini) counts_.resize(static_cast<std::size_t>(p.n_classes));
    }

    int build(std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, int depth) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        const std::size_t n = end - begin;
        double parent_score = 0.0;
        const bool pure = summarize(idx, begin, end, nodes_[static_cast<std::size_t>(id)].value, parent_score);
        nodes_[static_cast<std::size_t>(id)].samples = static_cast<std::int32_t>(n);

        if (pure || n < 2 * static_cast<std::size_t>(p_.min_leaf) || (p_.max_depth > 0 && depth >= p_.max_depth))
            return id;
        const Split s = best_split(idx, begin, end, parent_score);
        if (s.feature < 0) return id;

        auto mid_it = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                     idx.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t i) {
                                         return X_.row(i)[static_cast<std::size_t>(s.feature)] <= s.threshold;
                                     });
        const auto mid = static_cast<std::size_t>(mid_it - idx.begin());
        // Keep partitions ordered so growth does not depend on partition's internal permutation.
        std::sort(idx.begin() + static_cast<std::ptrdiff_t>(begin), mid_it);
        std::sort(mid_it, idx.begin() + static_cast<std::ptrdiff_t>(end));

        nodes_[static_cast<std::size_t>(id)].feature = s.feature;
        nodes_[static_cast<std::size_t>(id)].threshold = s.threshold;
        const int l = build(idx, begin, mid, depth + 1);
        const int r = build(idx, mid, end, depth + 1);
        nodes_[static_cast<std::size_t>(id)].left = l;
        nodes_[static_cast<std::size_t>(id)].right = r;
        return id;
    }

private:
    /// Sets the node value and the parent split score; returns true if the node is pure.
    bool summarize(const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, double& value,
                   double& score) {
        const double n = static_cast<double>(end - begin);
        if (p_.criterion == DecisionTree::Criterion::Gini) {
            std::fill(counts_.begin(), counts_.end(), 0.0);
            for (std::size_t k = begin; k < end; ++k) counts_[static_cast<std::size_t>(y_[idx[k]])] += 1.0;
            int best = 0, distinct = 0;
            double sq = 0.0;
            for (std::size_t c = 0; c < counts_.size(); ++c) {
                if (counts_[c] > counts_[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
                if (counts_[c] > 0) ++distinct;
                sq += counts_[c] * counts_[c];
            }
            value = best;
            score = sq / n;
            return distinct <= 1;
        }
        double sum = 0.0;
        bool same = true;
        const double first = y_[idx[begin]];
        for (std::size_t k = begin; k < end; ++k) {
            sum += y_[idx[k]];
            same = same && y_[idx[k]] == first;
        }
        value = sum / n;
        score = sum * sum / n;
        return same;
    }

    std::span<const int> candidate_features() {
        const int d = static_cast<int>(X_.cols);
        if (p_.mtry <= 0 || p_.mtry >= d || rng_ == nullptr) return feats_;
        // Partial Fisher-Yates draws mtry distinct features; evaluate them in ascending order.
        for (int i = 0; i < p_.mtry; ++i) {
            const auto j = static_cast<std::size_t>(i) + rng_->below(static_cast<std::uint64_t>(d - i));
            std::swap(feats_[static_cast<std::size_t>(i)], feats_[j]);
        }
        chosen_.assign(feats_.begin(), feats_.begin() + p_.mtry);
        std::sort(chosen_.begin(), chosen_.end());
        return chosen_;
    }

    Split best_split(const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, double parent_score) {
        const std::size_t n = end - begin;
        const std::size_t min_leaf = static_cast<std::size_t>(p_.min_leaf);
        Split best;
        best.score = parent_score + kEps * std::max(1.0, std::abs(parent_score));
        pairs_.resize(n);
        const bool gini = p_.criterion == DecisionTree::Criterion::Gini;
        double total = 0.0;
        if (!gini)
            for (std::size_t k = begin; k < end; ++k) total += y_[idx[k]];

        for (int f : candidate_features()) {
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t i = idx[begin + k];
                pairs_[k] = {X_.row(i)[static_cast<std::size_t>(f)], y_[i]};
            }
            std::sort(pairs_.begin(), pairs_.end(), [](const auto& a, const auto& b) {
                return a.first < b.first || (a.first == b.first && a.second < b.second);
            });
            if (pairs_.front().first == pairs_.back().first) continue;

            if (gini) {
                left_.assign(counts_.size(), 0.0);
                right_ = counts_;
                double lsq = 0.0, rsq = 0.0;
                for (double c : right_) rsq += c * c;
                for (std::size_t k = 0; k + 1 < n; ++k) {
                    const auto c = static_cast<std::size_t>(pairs_[k].second);
                    lsq += 2.0 * left_[c] + 1.0;
                    left_[c] += 1.0;
                    rsq -= 2.0 * right_[c] - 1.0;
                    right_[c] -= 1.0;
                    const std::size_t nl = k + 1, nr = n - nl;
                    if (nl < min_leaf || nr < min_leaf || pairs_[k].first == pairs_[k + 1].first) continue;
                    const double score = lsq / static_cast<double>(nl) + rsq / static_cast<double>(nr);
                    if (score > best.score + kEps * std::abs(best.score)) {
                        best = {f, midpoint(pairs_[k].first, pairs_[k + 1].first), score};
                    }
                }
            } else {
                double lsum = 0.0;
                for (std::size_t k = 0; k + 1 < n; ++k) {
                    lsum += pairs_[k].second;
                    const std::size_t nl = k + 1, nr = n - nl;
                    if (nl < min_leaf || nr < min_leaf || pairs_[k].first == pairs_[k + 1].first) continue;
                    const double rsum = total - lsum;
                    const double score =
                        lsum * lsum / static_cast<double>(nl) + rsum * rsum / static_cast<double>(nr);
                    if (score > best.score + kEps * std::abs(best.score)) {
                        best = {f, midpoint(pairs_[k].first, pairs_[k + 1].first), score};
                    }
                }
            }
        }
        return best;
    }

    const FeatureMatrix& X_;
    std::span<const double> y_;
    DecisionTree::Params p_;
    Rng* rng_;
    std::vector<TreeNode>& nodes_;
    std::vector<int> feats_, chosen_;
    std::vector<double> counts_, left_, right_;
    std::vector<std::pair<float, double>> pairs_;
};

} // namespace

DecisionTree DecisionTree::grow(const FeatureMatrix& X, std::span<const double> target,
                                std::span<const std::size_t> sample, const Params& params, Rng* rng) {
    if (sample.empty()) throw ValidationError("empty data");
    if (target.size() != X.rows) throw ValidationError("dimension mismatch");
    if (params.min_leaf < 1) throw ValidationError("min_leaf must be >= 1");
    if (params.criterion == Criterion::Gini) {
        if (params.n_classes < 1) throw ValidationError("n_classes required for Gini trees");
        for (auto i : sample)
            if (target[i] < 0 || target[i] >= params.n_classes || target[i] != std::floor(target[i]))
                throw ValidationError("class label out of range");
    }
    DecisionTree t;
    std::vector<std::size_t> idx(sample.begin(), sample.end());
    std::sort(idx.begin(), idx.end());
    Grower g(X, target, params, rng, t.nodes_);
    g.build(idx, 0, idx.size(), 0);
    return t;
}

int DecisionTree::leaf_index(std::span<const float> x) const {
    int i = 0;
    while (!nodes_[static_cast<std::size_t>(i)].is_leaf()) {
        const auto& n = nodes_[static_cast<std::size_t>(i)];
        i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return i;
}

int DecisionTree::depth() const {
    std::vector<int> d(nodes_.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes_[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return best;
}

void DecisionTree::write(ByteWriter& out) const {
    out.u32(static_cast<std::uint32_t>(nodes_.size()));
    for (const auto& n : nodes_) {
        out.i32(n.feature);
        out.f32(n.threshold);
        out.i32(n.left);
        out.i32(n.right);
        out.f64(n.value);
        out.i32(n.samples);
    }
}

DecisionTree DecisionTree::read(ByteReader& in, std::size_t feature_dim) {
    DecisionTree t;
    const auto count = in.u32();
    if (count == 0 || count > in.remaining() / 24) throw FormatError("bad tree node count");
    t.nodes_.resize(count);
    for (auto& n : t.nodes_) {
        n.feature = in.i32();
        n.threshold = in.f32();
        n.left = in.i32();
        n.right = in.i32();
        n.value = in.f64();
        n.samples = in.i32();
    }
    // Pre-order: children always follow their parent, which also rules out cycles.
    for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
        const auto& n = t.nodes_[i];
        if (n.is_leaf()) continue;
        if (static_cast<std::size_t>(n.feature) >= feature_dim || n.left <= static_cast<int>(i) ||
            n.right <= static_cast<int>(i) || static_cast<std::size_t>(n.left) >= count ||
            static_cast<std::size_t>(n.right) >= count)
            throw FormatError("corrupt tree node");
    }
    return t;
}

} // namespace smg
