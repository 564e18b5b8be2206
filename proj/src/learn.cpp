#include "smg/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "smg/error.hpp"
#include "smg/parallel.hpp"
#include "smg/rng.hpp"
#include "smg/store.hpp"
#include "smg/svm.hpp"
#include "smg/tree.hpp"

namespace smg {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 9> kAlgoNames{"knn", "nnr", "dtc", "dtr", "rf", "svm-l", "svm-p", "svr-l", "svr-p"};

int argmax_lowest(std::span<const double> s) {
    int best = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i] > s[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

std::vector<double> one_hot(int label, int n) {
    std::vector<double> s(static_cast<std::size_t>(n), 0.0);
    s[static_cast<std::size_t>(label)] = 1.0;
    return s;
}

// ---- nearest neighbours ----

class NeighborModel final : public ModelImpl {
public:
    NeighborModel(FeatureMatrix X, std::vector<int> y, int k, int n_classes, bool regress)
        : X_(std::move(X)), y_(std::move(y)), k_(k), n_classes_(n_classes), regress_(regress) {}

    Prediction predict(std::span<const float> x) const override {
        const std::size_t n = X_.rows;
        std::vector<std::pair<double, std::size_t>> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = X_.row(i);
            double d = 0.0;
            for (std::size_t j = 0; j < r.size(); ++j) {
                const double t = static_cast<double>(r[j]) - x[j];
                d += t * t;
            }
            dist[i] = {d, i};
        }
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_), n);
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        Prediction p;
        if (regress_) {
            double mean = 0.0;
            for (std::size_t i = 0; i < k; ++i) mean += y_[dist[i].second];
            mean /= static_cast<double>(k);
            p.raw = mean;
            p.label = decode_regression(mean, n_classes_);
            p.scores = one_hot(p.label, n_classes_);
            return p;
        }
        p.scores.assign(static_cast<std::size_t>(n_classes_), 0.0);
        for (std::size_t i = 0; i < k; ++i) p.scores[static_cast<std::size_t>(y_[dist[i].second])] += 1.0 / k;
        p.label = argmax_lowest(p.scores);
        p.raw = p.label;
        return p;
    }

    void write(ByteWriter& out) const override {
        out.u32(static_cast<std::uint32_t>(k_));
        out.u32(static_cast<std::uint32_t>(X_.rows));
        for (int v : y_) out.u16(static_cast<std::uint16_t>(v));
        out.f32s(X_.data);
    }

    static std::shared_ptr<NeighborModel> read(ByteReader& in, std::size_t d, int n_classes, bool regress) {
        const auto k = static_cast<int>(in.u32());
        const auto n = in.u32();
        if (k < 1 || n == 0 || n > in.remaining() / 2) throw FormatError("bad neighbour payload");
        std::vector<int> y(n);
        for (auto& v : y) {
            v = in.u16();
            if (v >= n_classes) throw FormatError("label out of range");
        }
        if (d != 0 && static_cast<std::size_t>(n) * d * 4 > in.remaining()) throw FormatError("truncated");
        FeatureMatrix X(n, d);
        in.f32s(X.data);
        return std::make_shared<NeighborModel>(std::move(X), std::move(y), k, n_classes, regress);
    }

private:
    FeatureMatrix X_;
    std::vector<int> y_;
    int k_;
    int n_classes_;
    bool regress_;
};

// ---- trees ----

class TreeModel final : public ModelImpl {
public:
    TreeModel(DecisionTree t, int n_classes, bool regress) : tree_(std::move(t)), n_classes_(n_classes), regress_(regress) {}

    Prediction predict(std::span<const float> x) const override {
        Prediction p;
        p.raw = tree_.predict(x);
        p.label = regress_ ? decode_regression(p.raw, n_classes_) : static_cast<int>(p.raw);
        p.scores = one_hot(p.label, n_classes_);
        return p;
    }
    void write(ByteWriter& out) const override { tree_.write(out); }
    const DecisionTree& tree() const { return tree_; }

private:
    DecisionTree tree_;
    int n_classes_;
    bool regress_;
};

class ForestModel final : public ModelImpl {
public:
    ForestModel(std::vector<DecisionTree> trees, int n_classes) : trees_(std::move(trees)), n_classes_(n_classes) {}

    Prediction predict(std::span<const float> x) const override {
        Prediction p;
        p.scores.assign(static_cast<std::size_t>(n_classes_), 0.0);
        const double w = 1.0 / static_cast<double>(trees_.size());
        for (const auto& t : trees_) p.scores[static_cast<std::size_t>(t.predict(x))] += w;
        p.label = argmax_lowest(p.scores);
        p.raw = p.label;
        return p;
    }
    void write(ByteWriter& out) const override {
        out.u32(static_cast<std::uint32_t>(trees_.size()));
        for (const auto& t : trees_) t.write(out);
    }
    const std::vector<DecisionTree>& trees() const { return trees_; }

private:
    std::vector<DecisionTree> trees_;
    int n_classes_;
};

// ---- kernel machines ----

void write_kernel(ByteWriter& out, const Kernel& k) {
    out.u8(static_cast<std::uint8_t>(k.kind));
    out.f64(k.gamma);
    out.f64(k.coef0);
    out.u32(static_cast<std::uint32_t>(k.degree));
}

Kernel read_kernel(ByteReader& in) {
    Kernel k;
    const auto kind = in.u8();
    if (kind > 1) throw FormatError("unknown kernel");
    k.kind = static_cast<Kernel::Kind>(kind);
    k.gamma = in.f64();
    k.coef0 = in.f64();
    k.degree = static_cast<int>(in.u32());
    return k;
}

void write_expansion(ByteWriter& out, const KernelExpansion& e) {
    out.f64(e.rho);
    out.u32(static_cast<std::uint32_t>(e.support.rows));
    for (std::size_t s = 0; s < e.support.rows; ++s) {
        out.f64(e.coef[s]);
        out.f32s(e.support.row(s));
    }
}

KernelExpansion read_expansion(ByteReader& in, std::size_t d, const Kernel& k) {
    KernelExpansion e;
    e.rho = in.f64();
    const auto n = in.u32();
    if (static_cast<std::size_t>(n) * (8 + d * 4) > in.remaining()) throw FormatError("truncated");
    e.support = FeatureMatrix(n, d);
    e.coef.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        e.coef[s] = in.f64();
        in.f32s(e.support.row(s));
    }
    e.prepare(k);
    return e;
}

class SvmModel final : public ModelImpl {
public:
    struct Machine {
        int cls;
        KernelExpansion f;
    };
    SvmModel(Kernel k, std::vector<Machine> m, int n_classes) : k_(k), machines_(std::move(m)), n_classes_(n_classes) {}

    Prediction predict(std::span<const float> x) const override {
        Prediction p;
        p.scores.assign(static_cast<std::size_t>(n_classes_), -std::numeric_limits<double>::infinity());
        for (const auto& m : machines_) p.scores[static_cast<std::size_t>(m.cls)] = m.f.decision(x, k_);
        p.label = argmax_lowest(p.scores);
        p.raw = p.label;
        return p;
    }
    void write(ByteWriter& out) const override {
        write_kernel(out, k_);
        out.u16(static_cast<std::uint16_t>(machines_.size()));
        for (const auto& m : machines_) {
            out.u16(static_cast<std::uint16_t>(m.cls));
            write_expansion(out, m.f);
        }
    }
    static std::shared_ptr<SvmModel> read(ByteReader& in, std::size_t d, int n_classes) {
        const Kernel k = read_kernel(in);
        const auto count = in.u16();
        std::vector<Machine> ms;
        for (int i = 0; i < count; ++i) {
            const int cls = in.u16();
            if (cls >= n_classes) throw FormatError("class out of range");
            ms.push_back({cls, read_expansion(in, d, k)});
        }
        return std::make_shared<SvmModel>(k, std::move(ms), n_classes);
    }
    const std::vector<Machine>& machines() const { return machines_; }

private:
    Kernel k_;
    std::vector<Machine> machines_;
    int n_classes_;
};

class SvrModel final : public ModelImpl {
public:
    SvrModel(Kernel k, KernelExpansion f, int n_classes) : k_(k), f_(std::move(f)), n_classes_(n_classes) {}

    Prediction predict(std::span<const float> x) const override {
        Prediction p;
        p.raw = f_.decision(x, k_);
        p.label = decode_regression(p.raw, n_classes_);
        p.scores = one_hot(p.label, n_classes_);
        return p;
    }
    void write(ByteWriter& out) const override {
        write_kernel(out, k_);
        write_expansion(out, f_);
    }
    static std::shared_ptr<SvrModel> read(ByteReader& in, std::size_t d, int n_classes) {
        const Kernel k = read_kernel(in);
        auto f = read_expansion(in, d, k);
        return std::make_shared<SvrModel>(k, std::move(f), n_classes);
    }

private:
    Kernel k_;
    KernelExpansion f_;
    int n_classes_;
};

Kernel kernel_for(Algo a, const Hyper& h) {
    Kernel k;
    if (a == Algo::SVM_P || a == Algo::SVR_P) {
        k.kind = Kernel::Kind::Polynomial;
        k.gamma = h.gamma;
        k.coef0 = h.coef0;
        k.degree = h.degree;
    }
    return k;
}

long smo_iteration_cap(const Hyper& h, std::size_t n_vars) {
    return static_cast<long>(h.max_passes) * static_cast<long>(std::max<std::size_t>(n_vars, 1000));
}

constexpr std::size_t kMaxKernelRows = 12000;

} // namespace

std::string_view algo_name(Algo a) { return kAlgoNames.at(static_cast<std::size_t>(a)); }

Algo parse_algo(std::string_view s) {
    for (std::size_t i = 0; i < kAlgoNames.size(); ++i)
        if (kAlgoNames[i] == s) return static_cast<Algo>(i);
    throw ValidationError("unknown algorithm '" + std::string(s) + "'");
}

bool is_regressor(Algo a) { return a == Algo::NNR || a == Algo::DTR || a == Algo::SVR_L || a == Algo::SVR_P; }

Hyper default_hyper(Algo a, const LearnDefaults& d) {
    Hyper h;
    h.standardize = d.standardize;
    h.c = d.svm_c;
    h.tol = d.svm_tol;
    h.max_passes = d.svm_max_passes;
    h.degree = d.poly_degree;
    h.gamma = d.poly_gamma;
    h.coef0 = d.poly_coef0;
    h.epsilon = d.svr_epsilon;
    switch (a) {
    case Algo::KNN: h.k = d.knn_k; break;
    case Algo::NNR: h.k = d.nnr_k; break;
    case Algo::DTC: h.min_leaf = d.dtc_min_leaf; h.max_depth = d.dtc_max_depth; break;
    case Algo::DTR: h.min_leaf = d.dtr_min_leaf; h.max_depth = d.dtr_max_depth; break;
    case Algo::RF:
        h.trees = d.rf_trees;
        h.mtry = d.rf_mtry;
        h.max_depth = d.rf_max_depth;
        h.min_leaf = d.rf_min_leaf;
        h.bootstrap = d.rf_bootstrap;
        break;
    default: break;
    }
    return h;
}

void validate_hyper(Algo a, const Hyper& h) {
    auto bad = [](const char* what) { throw ValidationError(std::string("invalid hyperparameter: ") + what); };
    switch (a) {
    case Algo::KNN:
    case Algo::NNR:
        if (h.k < 1) bad("k must be >= 1");
        break;
    case Algo::RF:
        if (h.trees < 1) bad("trees must be >= 1");
        if (h.mtry < 0) bad("mtry must be >= 0");
        [[fallthrough]];
    case Algo::DTC:
    case Algo::DTR:
        if (h.min_leaf < 1) bad("min_leaf must be >= 1");
        if (h.max_depth < 0) bad("max_depth must be >= 0");
        break;
    case Algo::SVR_L:
    case Algo::SVR_P:
        if (h.epsilon < 0) bad("epsilon must be >= 0");
        [[fallthrough]];
    case Algo::SVM_L:
    case Algo::SVM_P:
        if (!(h.c > 0)) bad("C must be > 0");
        if (!(h.tol > 0)) bad("tol must be > 0");
        if (h.max_passes < 1) bad("max_passes must be >= 1");
        if (h.degree < 1) bad("degree must be >= 1");
        if (!(h.gamma > 0)) bad("gamma must be > 0");
        break;
    }
}

namespace {

json hyper_json(Algo a, const Hyper& h) {
    json j;
    j["standardize"] = h.standardize;
    switch (a) {
    case Algo::KNN:
    case Algo::NNR: j["k"] = h.k; break;
    case Algo::RF:
        j["trees"] = h.trees;
        j["mtry"] = h.mtry;
        j["bootstrap"] = h.bootstrap;
        [[fallthrough]];
    case Algo::DTC:
    case Algo::DTR:
        j["min_leaf"] = h.min_leaf;
        j["max_depth"] = h.max_depth;
        break;
    case Algo::SVR_L:
    case Algo::SVR_P:
        j["epsilon"] = h.epsilon;
        [[fallthrough]];
    case Algo::SVM_L:
    case Algo::SVM_P:
        j["c"] = h.c;
        j["tol"] = h.tol;
        j["max_passes"] = h.max_passes;
        if (a == Algo::SVM_P || a == Algo::SVR_P) {
            j["degree"] = h.degree;
            j["gamma"] = h.gamma;
            j["coef0"] = h.coef0;
        }
        break;
    }
    return j;
}

Hyper apply_hyper(Algo a, const json& j, Hyper h) {
    if (!j.is_object()) throw ValidationError("hyperparameters must be a JSON object");
    const json allowed = hyper_json(a, h);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.contains(it.key()))
            throw ValidationError("hyperparameter '" + it.key() + "' does not apply to " + std::string(algo_name(a)));
        const auto& v = it.value();
        const auto& key = it.key();
        try {
            if (key == "k") h.k = v.get<int>();
            else if (key == "trees") h.trees = v.get<int>();
            else if (key == "mtry") h.mtry = v.get<int>();
            else if (key == "bootstrap") h.bootstrap = v.get<bool>();
            else if (key == "min_leaf") h.min_leaf = v.get<int>();
            else if (key == "max_depth") h.max_depth = v.get<int>();
            else if (key == "epsilon") h.epsilon = v.get<double>();
            else if (key == "c") h.c = v.get<double>();
            else if (key == "tol") h.tol = v.get<double>();
            else if (key == "max_passes") h.max_passes = v.get<int>();
            else if (key == "degree") h.degree = v.get<int>();
            else if (key == "gamma") h.gamma = v.get<double>();
            else if (key == "coef0") h.coef0 = v.get<double>();
            else if (key == "standardize") h.standardize = v.get<bool>();
        } catch (const json::exception&) {
            throw ValidationError("hyperparameter '" + key + "' has the wrong type");
        }
    }
    validate_hyper(a, h);
    return h;
}

} // namespace

std::string hyper_to_json(Algo a, const Hyper& h) { return hyper_json(a, h).dump(); }

Hyper apply_hyper_json(Algo a, const std::string& text, Hyper base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("hyperparameter parse failure: ") + e.what());
    }
    return apply_hyper(a, j, base);
}

int decode_regression(double y_hat, int n_classes) {
    if (!std::isfinite(y_hat)) throw ValidationError("non-finite regression output");
    if (n_classes < 1) throw ValidationError("n_classes must be >= 1");
    const double r = std::nearbyint(y_hat); // default rounding mode: half to even
    return static_cast<int>(std::clamp(r, 0.0, static_cast<double>(n_classes - 1)));
}

TrainedModel::TrainedModel(AlgoSpec spec, int n_classes, std::size_t feature_dim, std::vector<float> mean,
                           std::vector<float> scale, std::shared_ptr<const ModelImpl> impl)
    : spec_(spec), n_classes_(n_classes), feature_dim_(feature_dim), mean_(std::move(mean)), scale_(std::move(scale)),
      impl_(std::move(impl)) {}

Prediction TrainedModel::predict(std::span<const float> x) const {
    if (!impl_) throw ValidationError("model is empty");
    if (x.size() != feature_dim_)
        throw ValidationError("dimension mismatch: model expects " + std::to_string(feature_dim_) + " features, got " +
                              std::to_string(x.size()));
    if (mean_.empty()) return impl_->predict(x);
    std::vector<float> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mean_[i]) / scale_[i];
    return impl_->predict(z);
}

std::vector<int> TrainedModel::predict_labels(const FeatureMatrix& X) const {
    if (X.cols != feature_dim_) throw ValidationError("dimension mismatch");
    std::vector<int> out(X.rows);
    parallel_for(X.rows, [&](std::size_t i) { out[i] = predict(X.row(i)).label; });
    return out;
}

TrainedModel fit(const AlgoSpec& spec, const FeatureMatrix& Xin, std::span<const int> y, std::span<const int> classes) {
    validate_hyper(spec.algo, spec.hyper);
    if (Xin.rows == 0 || y.empty()) throw ValidationError("empty data");
    if (Xin.rows != y.size()) throw ValidationError("dimension mismatch: " + std::to_string(Xin.rows) + " rows, " +
                                                    std::to_string(y.size()) + " labels");
    if (Xin.cols == 0) throw ValidationError("dimension mismatch: zero features");
    int max_label = 0;
    for (int v : y) {
        if (v < 0 || v > 0xFFFF) throw ValidationError("label out of range");
        max_label = std::max(max_label, v);
    }
    for (int c : classes) max_label = std::max(max_label, c);
    const int n_classes = max_label + 1;
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (int v : y) ++counts[static_cast<std::size_t>(v)];
    if (!is_regressor(spec.algo))
        for (int c : classes)
            if (c < 0 || counts[static_cast<std::size_t>(c)] == 0)
                throw ValidationError("class " + std::to_string(c) + " has zero samples");

    const std::size_t n = Xin.rows, d = Xin.cols;
    std::vector<float> mean, scale;
    FeatureMatrix Xs;
    const FeatureMatrix* Xp = &Xin;
    if (spec.hyper.standardize) {
        mean.assign(d, 0.0f);
        scale.assign(d, 1.0f);
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0, s2 = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double v = Xin.row(i)[j];
                s += v;
                s2 += v * v;
            }
            const double mu = s / n;
            const double var = std::max(0.0, s2 / n - mu * mu);
            mean[j] = static_cast<float>(mu);
            scale[j] = var > 1e-24 ? static_cast<float>(std::sqrt(var)) : 1.0f;
        }
        Xs = Xin;
        for (std::size_t i = 0; i < n; ++i) {
            auto r = Xs.row(i);
            for (std::size_t j = 0; j < d; ++j) r[j] = (r[j] - mean[j]) / scale[j];
        }
        Xp = &Xs;
    }
    const FeatureMatrix& X = *Xp;
    const Hyper& h = spec.hyper;
    std::vector<double> target(y.begin(), y.end());
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);

    std::shared_ptr<const ModelImpl> impl;
    switch (spec.algo) {
    case Algo::KNN:
    case Algo::NNR:
        impl = std::make_shared<NeighborModel>(X, std::vector<int>(y.begin(), y.end()), h.k, n_classes,
                                               spec.algo == Algo::NNR);
        break;
    case Algo::DTC:
    case Algo::DTR: {
        DecisionTree::Params p;
        p.criterion = spec.algo == Algo::DTC ? DecisionTree::Criterion::Gini : DecisionTree::Criterion::Variance;
        p.min_leaf = h.min_leaf;
        p.max_depth = h.max_depth;
        p.n_classes = n_classes;
        impl = std::make_shared<TreeModel>(DecisionTree::grow(X, target, all, p), n_classes, spec.algo == Algo::DTR);
        break;
    }
    case Algo::RF: {
        DecisionTree::Params p;
        p.criterion = DecisionTree::Criterion::Gini;
        p.min_leaf = h.min_leaf;
        p.max_depth = h.max_depth;
        p.n_classes = n_classes;
        p.mtry = h.mtry > 0 ? h.mtry : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
        std::vector<DecisionTree> trees(static_cast<std::size_t>(h.trees));
        parallel_for(trees.size(), [&](std::size_t t) {
            Rng rng(mix_seed({spec.seed, static_cast<std::uint64_t>(t), 0xF0F0ull}));
            std::vector<std::size_t> sample(n);
            if (h.bootstrap)
                for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n));
            else
                sample = all;
            trees[t] = DecisionTree::grow(X, target, sample, p, &rng);
        });
        impl = std::make_shared<ForestModel>(std::move(trees), n_classes);
        break;
    }
    case Algo::SVM_L:
    case Algo::SVM_P:
    case Algo::SVR_L:
    case Algo::SVR_P: {
        if (n > kMaxKernelRows)
            throw ValidationError("kernel learners are limited to " + std::to_string(kMaxKernelRows) + " training rows");
        const Kernel k = kernel_for(spec.algo, h);
        const auto gram = kernel_matrix(X, k);
        if (spec.algo == Algo::SVR_L || spec.algo == Algo::SVR_P) {
            auto f = train_svr(X, gram, target, k, h.c, h.epsilon, h.tol, smo_iteration_cap(h, 2 * n));
            impl = std::make_shared<SvrModel>(k, std::move(f), n_classes);
            break;
        }
        std::vector<int> present;
        for (int c = 0; c < n_classes; ++c)
            if (counts[static_cast<std::size_t>(c)] > 0) present.push_back(c);
        std::vector<SvmModel::Machine> machines(present.size());
        parallel_for(present.size(), [&](std::size_t mi) {
            const int cls = present[mi];
            machines[mi].cls = cls;
            if (present.size() == 1) {
                machines[mi].f.rho = -1.0; // constant +1 decision
                return;
            }
            std::vector<std::int8_t> yy(n);
            for (std::size_t i = 0; i < n; ++i) yy[i] = y[i] == cls ? 1 : -1;
            machines[mi].f = train_svc(X, gram, yy, k, h.c, h.tol, smo_iteration_cap(h, n));
        });
        impl = std::make_shared<SvmModel>(k, std::move(machines), n_classes);
        break;
    }
    }
    return TrainedModel(spec, n_classes, d, std::move(mean), std::move(scale), std::move(impl));
}

std::vector<std::uint8_t> serialize_model(const TrainedModel& m) {
    if (!m.impl_) throw ValidationError("model is empty");
    ByteWriter out;
    out.u8(static_cast<std::uint8_t>(m.algo()));
    out.u32(static_cast<std::uint32_t>(m.feature_dim_));
    out.u16(static_cast<std::uint16_t>(m.n_classes_));
    out.u8(m.mean_.empty() ? 0 : 1);
    if (!m.mean_.empty()) {
        out.f32s(m.mean_);
        out.f32s(m.scale_);
    }
    m.impl_->write(out);

    json meta;
    try {
        meta = json::parse(m.metadata);
    } catch (const json::parse_error&) {
        throw ValidationError("model metadata is not valid JSON");
    }
    json header = {{"algo", algo_name(m.algo())},
                   {"hyper", hyper_json(m.algo(), m.spec().hyper)},
                   {"seed", m.spec().seed},
                   {"meta", meta}};
    ModelBlob blob{static_cast<std::uint8_t>(m.algo()), header.dump(), out.take()};
    return encode_model_blob(blob);
}

TrainedModel deserialize_model(std::span<const std::uint8_t> bytes) {
    const ModelBlob blob = decode_model_blob(bytes);
    if (blob.algo_id >= kAllAlgos.size()) throw FormatError("unknown algo_id");
    const auto algo = static_cast<Algo>(blob.algo_id);
    json header;
    try {
        header = json::parse(blob.hyper_json);
    } catch (const json::parse_error&) {
        throw FormatError("hyperparameter blob is not valid JSON");
    }
    if (!header.is_object() || !header.contains("hyper")) throw FormatError("hyperparameter blob lacks 'hyper'");
    ByteReader in(blob.payload);
    if (in.u8() != blob.algo_id) throw FormatError("algo_id mismatch between header and payload");
    AlgoSpec spec{algo, {}, 0};
    try {
        spec.hyper = apply_hyper(algo, header["hyper"], default_hyper(algo));
        spec.seed = header.value("seed", std::uint64_t{0});
    } catch (const ValidationError& e) {
        throw FormatError(std::string("bad hyperparameter blob: ") + e.what());
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad hyperparameter blob: ") + e.what());
    }
    const std::size_t d = in.u32();
    const int n_classes = in.u16();
    if (d == 0 || n_classes == 0) throw FormatError("bad model dimensions");
    std::vector<float> mean, scale;
    const auto standardized = in.u8();
    if (standardized > 1) throw FormatError("bad standardization flag");
    if (standardized) {
        if (d * 8 > in.remaining()) throw FormatError("truncated");
        mean.resize(d);
        scale.resize(d);
        in.f32s(mean);
        in.f32s(scale);
    }
    std::shared_ptr<const ModelImpl> impl;
    switch (algo) {
    case Algo::KNN:
    case Algo::NNR: impl = NeighborModel::read(in, d, n_classes, algo == Algo::NNR); break;
    case Algo::DTC:
    case Algo::DTR: impl = std::make_shared<TreeModel>(DecisionTree::read(in, d), n_classes, algo == Algo::DTR); break;
    case Algo::RF: {
        const auto count = in.u32();
        if (count == 0) throw FormatError("forest without trees");
        std::vector<DecisionTree> trees;
        for (std::uint32_t t = 0; t < count; ++t) trees.push_back(DecisionTree::read(in, d));
        impl = std::make_shared<ForestModel>(std::move(trees), n_classes);
        break;
    }
    case Algo::SVM_L:
    case Algo::SVM_P: impl = SvmModel::read(in, d, n_classes); break;
    case Algo::SVR_L:
    case Algo::SVR_P: impl = SvrModel::read(in, d, n_classes); break;
    }
    if (in.remaining() != 0) throw FormatError("trailing bytes in model payload");
    TrainedModel m(spec, n_classes, d, std::move(mean), std::move(scale), std::move(impl));
    m.metadata = header.contains("meta") ? header["meta"].dump() : "{}";
    return m;
}

void save_model(const TrainedModel& m, const std::filesystem::path& path) { write_file(path, serialize_model(m)); }

TrainedModel load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

} // namespace smg
