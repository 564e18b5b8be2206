#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smg/binio.hpp"
#include "smg/config.hpp"
#include "smg/features.hpp"

namespace smg {

enum class Algo : std::uint8_t {
    KNN = 0,
    NNR = 1,
    DTC = 2,
    DTR = 3,
    RF = 4,
    SVM_L = 5,
    SVM_P = 6,
    SVR_L = 7,
    SVR_P = 8,
};

inline constexpr std::array<Algo, 9> kAllAlgos{Algo::KNN, Algo::NNR,   Algo::DTC,   Algo::DTR,  Algo::RF,
                                               Algo::SVM_L, Algo::SVM_P, Algo::SVR_L, Algo::SVR_P};

/// CLI spelling: knn, nnr, dtc, dtr, rf, svm-l, svm-p, svr-l, svr-p.
std::string_view algo_name(Algo a);
Algo parse_algo(std::string_view s);
bool is_regressor(Algo a);

/// Union of every learner's hyperparameters; each algorithm reads its own subset.
struct Hyper {
    int k = 5;
    int trees = 100;
    int mtry = 0;      // 0 = ceil(sqrt(d))
    int max_depth = 0; // 0 = unlimited
    int min_leaf = 1;
    bool bootstrap = true;
    double c = 1.0;
    double tol = 1e-3;
    int max_passes = 10;
    int degree = 3;
    double gamma = 1.0;
    double coef0 = 1.0;
    double epsilon = 0.1;
    bool standardize = false;
    bool operator==(const Hyper&) const = default;
};

Hyper default_hyper(Algo a, const LearnDefaults& d = {});
void validate_hyper(Algo a, const Hyper& h);
/// JSON object holding only the keys `a` uses.
std::string hyper_to_json(Algo a, const Hyper& h);
/// Applies the keys of a JSON object onto `base`; keys foreign to `a` are errors.
Hyper apply_hyper_json(Algo a, const std::string& json_object, Hyper base);

struct AlgoSpec {
    Algo algo = Algo::KNN;
    Hyper hyper;
    std::uint64_t seed = 0;

    static AlgoSpec make(Algo a, const LearnDefaults& d = {}, std::uint64_t seed = 0) {
        return {a, default_hyper(a, d), seed};
    }
};

struct Prediction {
    int label = 0;
    /// Per-class scores: vote fractions (KNN, RF), one-hot (trees and regressors),
    /// one-vs-rest decision values (SVM; absent classes get -inf).
    std::vector<double> scores;
    /// Raw real-valued output for regressors, else the label.
    double raw = 0.0;
};

class ModelImpl {
public:
    virtual ~ModelImpl() = default;
    virtual Prediction predict(std::span<const float> x) const = 0;
    virtual void write(ByteWriter& out) const = 0;
};

class TrainedModel {
public:
    TrainedModel() = default;
    TrainedModel(AlgoSpec spec, int n_classes, std::size_t feature_dim, std::vector<float> mean, std::vector<float> scale,
                 std::shared_ptr<const ModelImpl> impl);

    Algo algo() const { return spec_.algo; }
    const AlgoSpec& spec() const { return spec_; }
    int n_classes() const { return n_classes_; }
    std::size_t feature_dim() const { return feature_dim_; }
    const ModelImpl& impl() const { return *impl_; }

    /// Throws ValidationError on a feature-length mismatch.
    Prediction predict(std::span<const float> x) const;
    std::vector<int> predict_labels(const FeatureMatrix& X) const;

    /// Free-form JSON object persisted alongside the hyperparameters (feature pipeline provenance).
    std::string metadata = "{}";

private:
    friend std::vector<std::uint8_t> serialize_model(const TrainedModel& m);

    AlgoSpec spec_;
    int n_classes_ = 0;
    std::size_t feature_dim_ = 0;
    std::vector<float> mean_, scale_;
    std::shared_ptr<const ModelImpl> impl_;
};

/// Fits `spec` on rows of X with integer class ids y (regressors use the id as target).
/// If `classes` is non-empty every listed class must have at least one sample.
TrainedModel fit(const AlgoSpec& spec, const FeatureMatrix& X, std::span<const int> y,
                 std::span<const int> classes = {});

/// Round half to even, then clamp to [0, n_classes - 1]. Throws on non-finite input.
int decode_regression(double y_hat, int n_classes);

std::vector<std::uint8_t> serialize_model(const TrainedModel& m);
TrainedModel deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const TrainedModel& m, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

} // namespace smg
