#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "smg/config.hpp"
#include "smg/store.hpp"

namespace smg {

/// Single-channel float image in [0,1], row-major.
struct ImageMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    float& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

/// One response map per filter, filter-major then row-major.
struct FeatureMaps {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    float at(int f, int r, int c) const {
        return data[(static_cast<std::size_t>(f) * rows + r) * cols + c];
    }
};

struct FeatureVector {
    std::vector<float> values;
    std::optional<Gesture> label;
};

/// Row-major sample matrix used by the learners.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

    std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    FeatureMatrix select(std::span<const std::size_t> idx) const;
};

/// Zero-mean, unit-L2 Gabor kernels over orientations x wavelengths x phases.
/// Throws ValidationError unless n_orient * n_wavelen * n_phase == 64.
FilterBank make_gabor_bank(int n_orient = 8, int n_wavelen = 4, int n_phase = 2, int k = 3);

/// "gabor" builds the bank described by cfg; anything else is read as an SMGF path.
FilterBank resolve_bank(const std::string& spec, const FeatureConfig& cfg);

/// Sums each filter over its input channels so it applies to grayscale input.
FilterBank collapse_channels(const FilterBank& b);

/// Block-average downsample and scale to [0,1].
ImageMatrix preprocess(const UltrasoundFrame& f, const FeatureConfig& cfg);

/// Valid-mode cross-correlation, stride 1, plus bias, optionally rectified.
FeatureMaps correlate(const ImageMatrix& img, const FilterBank& b, bool relu);
inline FeatureMaps convolve_relu(const ImageMatrix& img, const FilterBank& b) { return correlate(img, b, true); }

/// Mean over a rows x cols grid per map (remainder pixels go to the last row/column), filter-major.
FeatureVector grid_pool(const FeatureMaps& maps, int rows, int cols);

std::size_t feature_dim(const FilterBank& b, const FeatureConfig& cfg);

/// Holds a collapsed bank so per-frame extraction skips re-collapsing. Fuses
/// correlation, rectification and pooling without materializing the maps.
class Extractor {
public:
    Extractor(const FilterBank& bank, const FeatureConfig& cfg);

    FeatureVector extract(const UltrasoundFrame& f) const;
    void extract_into(const UltrasoundFrame& f, std::span<float> out) const;
    std::size_t dim() const { return dim_; }
    const FilterBank& bank() const { return bank_; }
    const FeatureConfig& config() const { return cfg_; }

private:
    FilterBank bank_;
    FeatureConfig cfg_;
    std::size_t dim_ = 0;
};

FeatureVector extract(const UltrasoundFrame& f, const FilterBank& b, const FeatureConfig& cfg);

/// Extracts every frame of a dataset (in parallel) into a matrix plus label ids.
FeatureMatrix extract_dataset(const LabeledDataset& d, const Extractor& ex, std::vector<int>* labels = nullptr);

/// FNV-1a over the feature config and bank coefficients; identifies a feature pipeline in reports.
std::uint64_t feature_pipeline_hash(const FilterBank& b, const FeatureConfig& cfg);

} // namespace smg
