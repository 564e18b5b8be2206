#include "smg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "smg/error.hpp"
#include "smg/parallel.hpp"
#include "smg/rng.hpp"

namespace smg {

using nlohmann::json;

namespace {

std::map<int, std::vector<std::size_t>> by_class(std::span<const int> labels) {
    std::map<int, std::vector<std::size_t>> m;
    for (std::size_t i = 0; i < labels.size(); ++i) m[labels[i]].push_back(i);
    return m;
}

} // namespace

Split split(std::span<const int> labels, double train_fraction, std::uint64_t seed, bool stratified) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("out of range: split fraction must lie in (0, 1)");
    if (labels.size() < 2) throw ValidationError("need at least 2 samples to split");
    Split s;
    auto take = [&](std::vector<std::size_t> idx, std::uint64_t salt) {
        Rng rng(mix_seed({seed, salt}));
        rng.shuffle(idx.begin(), idx.end());
        auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(idx.size()) * train_fraction));
        n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
        s.train.insert(s.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        s.val.insert(s.val.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    };
    if (stratified) {
        for (auto& [cls, idx] : by_class(labels)) {
            if (idx.size() < 2) throw ValidationError("class " + std::to_string(cls) + " is too small to split");
            take(idx, static_cast<std::uint64_t>(cls));
        }
    } else {
        std::vector<std::size_t> all(labels.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        take(std::move(all), 0xA11ull);
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    return s;
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("out of range: k must be >= 2");
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    std::size_t next = 0;
    for (auto& [cls, idx] : by_class(labels)) {
        if (idx.size() < static_cast<std::size_t>(k))
            throw ValidationError("class " + std::to_string(cls) + " has fewer than k=" + std::to_string(k) + " samples");
        Rng rng(mix_seed({seed, static_cast<std::uint64_t>(cls), 0xF01Dull}));
        rng.shuffle(idx.begin(), idx.end());
        for (std::size_t i : idx) {
            folds[next].push_back(i);
            next = (next + 1) % folds.size();
        }
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, int n) {
    if (y_true.size() != y_pred.size()) throw ValidationError("length mismatch between truth and prediction");
    if (n < 1) throw ValidationError("out of range: n must be >= 1");
    ConfusionMatrix cm;
    cm.n = n;
    cm.counts.assign(static_cast<std::size_t>(n) * n, 0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 0 || y_true[i] >= n || y_pred[i] < 0 || y_pred[i] >= n)
            throw ValidationError("label out of range");
        ++cm.counts[static_cast<std::size_t>(y_true[i]) * n + y_pred[i]];
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const auto t = cm.total();
    if (t == 0) throw ValidationError("empty confusion matrix");
    std::size_t diag = 0;
    for (int i = 0; i < cm.n; ++i) diag += cm.at(i, i);
    return static_cast<double>(diag) / static_cast<double>(t);
}

double mean_of(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void gather(const FeatureMatrix& X, std::span<const int> y, std::span<const std::size_t> idx, FeatureMatrix& Xo,
            std::vector<int>& yo) {
    Xo = X.select(idx);
    yo.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) yo[i] = y[idx[i]];
}

double holdout_score(const AlgoSpec& spec, const FeatureMatrix& X, std::span<const int> y,
                     std::span<const std::size_t> train, std::span<const std::size_t> test) {
    FeatureMatrix Xtr, Xte;
    std::vector<int> ytr, yte;
    gather(X, y, train, Xtr, ytr);
    gather(X, y, test, Xte, yte);
    const auto model = fit(spec, Xtr, ytr);
    const auto pred = model.predict_labels(Xte);
    int n = model.n_classes();
    for (int v : yte) n = std::max(n, v + 1);
    return accuracy(confusion_matrix(yte, pred, n));
}

namespace {

std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> held_out) {
    std::vector<bool> out(n, false);
    for (auto i : held_out) out[i] = true;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i)
        if (!out[i]) rest.push_back(i);
    return rest;
}

void finish(CvReport& r) {
    r.mean = mean_of(r.fold_scores);
    r.std = sample_std(r.fold_scores);
}

} // namespace

CvReport kfold_cv(const AlgoSpec& spec, const FeatureMatrix& X, std::span<const int> y, int k, std::uint64_t seed) {
    if (X.rows != y.size()) throw ValidationError("dimension mismatch");
    const auto folds = stratified_folds(y, k, seed);
    CvReport r;
    r.scheme = "kfold";
    r.k_outer = k;
    r.fold_scores.resize(folds.size());
    parallel_for(folds.size(), [&](std::size_t f) {
        const auto train = complement(X.rows, folds[f]);
        r.fold_scores[f] = holdout_score(spec, X, y, train, folds[f]);
    });
    finish(r);
    return r;
}

CvReport grid_search_cv(const AlgoSpec& spec, const FeatureMatrix& X, std::span<const int> y, int k,
                        std::span<const Hyper> grid, std::uint64_t seed) {
    if (grid.empty()) throw ValidationError("grid empty");
    CvReport best;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        AlgoSpec s = spec;
        s.hyper = grid[g];
        CvReport r = kfold_cv(s, X, y, k, seed);
        if (g == 0 || r.mean > best.mean) {
            best = std::move(r);
            best.chosen = {hyper_to_json(spec.algo, grid[g])};
            best.chosen_index = {static_cast<int>(g)};
        }
    }
    best.scheme = "kfold-grid";
    return best;
}

CvReport nested_cv(const AlgoSpec& spec, const FeatureMatrix& X, std::span<const int> y, int k_outer, int k_inner,
                   std::span<const Hyper> grid, std::uint64_t seed) {
    if (grid.empty()) throw ValidationError("grid empty");
    if (X.rows != y.size()) throw ValidationError("dimension mismatch");
    for (const auto& h : grid) validate_hyper(spec.algo, h);
    const auto outer = stratified_folds(y, k_outer, seed);
    CvReport r;
    r.scheme = "nested";
    r.k_outer = k_outer;
    r.k_inner = k_inner;
    r.fold_scores.resize(outer.size());
    r.chosen.resize(outer.size());
    r.chosen_index.resize(outer.size());
    parallel_for(outer.size(), [&](std::size_t f) {
        const auto train = complement(X.rows, outer[f]);
        std::vector<int> ytr(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) ytr[i] = y[train[i]];
        const auto inner = stratified_folds(ytr, k_inner, mix_seed({seed, static_cast<std::uint64_t>(f)}));
        std::size_t best = 0;
        double best_score = -1.0;
        if (grid.size() > 1) {
            for (std::size_t g = 0; g < grid.size(); ++g) {
                AlgoSpec s = spec;
                s.hyper = grid[g];
                double total = 0.0;
                for (const auto& fold : inner) {
                    const auto inner_train = complement(train.size(), fold);
                    std::vector<std::size_t> a(inner_train.size()), b(fold.size());
                    for (std::size_t i = 0; i < a.size(); ++i) a[i] = train[inner_train[i]];
                    for (std::size_t i = 0; i < b.size(); ++i) b[i] = train[fold[i]];
                    total += holdout_score(s, X, y, a, b);
                }
                const double score = total / static_cast<double>(inner.size());
                if (score > best_score) {
                    best_score = score;
                    best = g;
                }
            }
        }
        AlgoSpec s = spec;
        s.hyper = grid[best];
        r.fold_scores[f] = holdout_score(s, X, y, train, outer[f]);
        r.chosen[f] = hyper_to_json(spec.algo, grid[best]);
        r.chosen_index[f] = static_cast<int>(best);
    });
    finish(r);
    return r;
}

std::vector<Hyper> parse_grid(Algo a, const std::string& json_text, const Hyper& base) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("grid parse failure: ") + e.what());
    }
    std::vector<Hyper> out;
    if (j.is_array()) {
        for (const auto& e : j) out.push_back(apply_hyper_json(a, e.dump(), base));
    } else if (j.is_object()) {
        std::vector<std::pair<std::string, nlohmann::ordered_json>> axes;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!it.value().is_array() || it.value().empty())
                throw ValidationError("grid axis '" + it.key() + "' must be a non-empty array");
            axes.emplace_back(it.key(), it.value());
        }
        std::vector<std::size_t> pos(axes.size(), 0);
        for (bool done = axes.empty(); !done;) {
            nlohmann::ordered_json e = nlohmann::ordered_json::object();
            for (std::size_t i = 0; i < axes.size(); ++i) e[axes[i].first] = axes[i].second[pos[i]];
            out.push_back(apply_hyper_json(a, e.dump(), base));
            for (std::size_t i = axes.size();;) {
                if (i == 0) {
                    done = true;
                    break;
                }
                --i;
                if (++pos[i] < axes[i].second.size()) break;
                pos[i] = 0;
            }
        }
    } else {
        throw ValidationError("grid must be a JSON object or array");
    }
    if (out.empty()) throw ValidationError("grid empty");
    return out;
}

} // namespace smg
