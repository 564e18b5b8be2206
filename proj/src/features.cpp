#include "smg/features.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "smg/error.hpp"
#include "smg/parallel.hpp"

namespace smg {

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> idx) const {
    FeatureMatrix out(idx.size(), cols);
    for (std::size_t i = 0; i < idx.size(); ++i) std::memcpy(out.row(i).data(), row(idx[i]).data(), cols * sizeof(float));
    return out;
}

FilterBank make_gabor_bank(int n_orient, int n_wavelen, int n_phase, int k) {
    if (n_orient <= 0 || n_wavelen <= 0 || n_phase <= 0 || n_orient * n_wavelen * n_phase != 64)
        throw ValidationError("n_orient * n_wavelen * n_phase must equal 64");
    if (k < 2) throw ValidationError("Gabor kernel size must be at least 2");
    constexpr double kSigma = 1.0;
    constexpr double kGamma = 0.5;
    const double c = (k - 1) / 2.0;

    FilterBank b;
    b.num_filters = 64;
    b.channels = 1;
    b.kh = k;
    b.kw = k;
    b.provenance = "gabor";
    b.biases.assign(64, 0.0f);
    b.weights.reserve(static_cast<std::size_t>(64) * k * k);

    std::vector<double> kern(static_cast<std::size_t>(k) * k);
    for (int o = 0; o < n_orient; ++o) {
        const double theta = std::numbers::pi * o / n_orient;
        for (int w = 0; w < n_wavelen; ++w) {
            const double lambda = 2.5 + w;
            for (int p = 0; p < n_phase; ++p) {
                const double phi = std::numbers::pi * p / n_phase;
                double mean = 0;
                for (int i = 0; i < k; ++i) {
                    for (int j = 0; j < k; ++j) {
                        const double y = i - c, x = j - c;
                        const double xr = x * std::cos(theta) + y * std::sin(theta);
                        const double yr = -x * std::sin(theta) + y * std::cos(theta);
                        const double g = std::exp(-(xr * xr + kGamma * kGamma * yr * yr) / (2 * kSigma * kSigma)) *
                                         std::cos(2 * std::numbers::pi * xr / lambda + phi);
                        kern[static_cast<std::size_t>(i) * k + j] = g;
                        mean += g;
                    }
                }
                mean /= static_cast<double>(kern.size());
                double norm = 0;
                for (auto& v : kern) {
                    v -= mean;
                    norm += v * v;
                }
                norm = std::sqrt(norm);
                if (norm < 1e-9) throw Error("degenerate Gabor kernel");
                for (double v : kern) b.weights.push_back(static_cast<float>(v / norm));
            }
        }
    }
    return b;
}

FilterBank collapse_channels(const FilterBank& b) {
    b.validate();
    if (b.channels == 1) return b;
    FilterBank out = b;
    out.channels = 1;
    const std::size_t plane = static_cast<std::size_t>(b.kh) * b.kw;
    out.weights.assign(static_cast<std::size_t>(b.num_filters) * plane, 0.0f);
    for (int f = 0; f < b.num_filters; ++f) {
        const float* src = b.filter(f);
        float* dst = out.weights.data() + static_cast<std::size_t>(f) * plane;
        for (int ch = 0; ch < b.channels; ++ch)
            for (std::size_t t = 0; t < plane; ++t) dst[t] += src[static_cast<std::size_t>(ch) * plane + t];
    }
    return out;
}

ImageMatrix preprocess(const UltrasoundFrame& f, const FeatureConfig& cfg) {
    const int k = cfg.downsample_factor;
    if (k < 1 || f.width % k != 0 || f.height % k != 0)
        throw ValidationError("frame dimensions not divisible by downsample factor");
    ImageMatrix m;
    m.rows = f.height / k;
    m.cols = f.width / k;
    m.data.assign(static_cast<std::size_t>(m.rows) * m.cols, 0.0f);
    std::vector<std::uint32_t> acc(static_cast<std::size_t>(m.cols));
    const float scale = 1.0f / (255.0f * static_cast<float>(k * k));
    for (int r = 0; r < m.rows; ++r) {
        std::fill(acc.begin(), acc.end(), 0u);
        for (int dy = 0; dy < k; ++dy) {
            const std::uint8_t* src = f.pixels.data() + static_cast<std::size_t>(r * k + dy) * f.width;
            for (int c = 0; c < m.cols; ++c)
                for (int dx = 0; dx < k; ++dx) acc[static_cast<std::size_t>(c)] += src[c * k + dx];
        }
        for (int c = 0; c < m.cols; ++c) m.at(r, c) = static_cast<float>(acc[static_cast<std::size_t>(c)]) * scale;
    }
    return m;
}

namespace {

void require_single_channel(const FilterBank& b) {
    b.validate();
    if (b.channels != 1) throw ValidationError("bank has multiple channels; collapse it first");
}

/// out[c] = bias + sum_ij w_ij * img[r+i][c+j] for one output row.
void correlate_row(const ImageMatrix& img, const FilterBank& b, int f, int r, float* out, int out_cols) {
    const float* w = b.filter(f);
    const float bias = b.biases[static_cast<std::size_t>(f)];
    for (int c = 0; c < out_cols; ++c) out[c] = bias;
    for (int i = 0; i < b.kh; ++i) {
        const float* src = img.data.data() + static_cast<std::size_t>(r + i) * img.cols;
        for (int j = 0; j < b.kw; ++j) {
            const float wij = w[i * b.kw + j];
            const float* s = src + j;
            for (int c = 0; c < out_cols; ++c) out[c] += wij * s[c];
        }
    }
}

std::vector<int> cell_index(int extent, int cells) {
    std::vector<int> idx(static_cast<std::size_t>(extent));
    const int base = extent / cells;
    for (int i = 0; i < extent; ++i) idx[static_cast<std::size_t>(i)] = std::min(i / base, cells - 1);
    return idx;
}

} // namespace

FeatureMaps correlate(const ImageMatrix& img, const FilterBank& b, bool relu) {
    require_single_channel(b);
    if (img.rows < b.kh || img.cols < b.kw) throw ValidationError("image smaller than kernel");
    FeatureMaps maps;
    maps.count = b.num_filters;
    maps.rows = img.rows - b.kh + 1;
    maps.cols = img.cols - b.kw + 1;
    maps.data.resize(static_cast<std::size_t>(maps.count) * maps.rows * maps.cols);
    for (int f = 0; f < maps.count; ++f) {
        for (int r = 0; r < maps.rows; ++r) {
            float* out = maps.data.data() + (static_cast<std::size_t>(f) * maps.rows + r) * maps.cols;
            correlate_row(img, b, f, r, out, maps.cols);
            if (relu)
                for (int c = 0; c < maps.cols; ++c) out[c] = out[c] > 0.0f ? out[c] : 0.0f;
        }
    }
    return maps;
}

FeatureVector grid_pool(const FeatureMaps& maps, int rows, int cols) {
    if (rows < 1 || cols < 1 || rows > maps.rows || cols > maps.cols) throw ValidationError("grid larger than map");
    const auto ri = cell_index(maps.rows, rows);
    const auto ci = cell_index(maps.cols, cols);
    std::vector<double> sums(static_cast<std::size_t>(maps.count) * rows * cols, 0.0);
    std::vector<double> counts(static_cast<std::size_t>(rows) * cols, 0.0);
    for (int r = 0; r < maps.rows; ++r)
        for (int c = 0; c < maps.cols; ++c) counts[static_cast<std::size_t>(ri[r] * cols + ci[c])] += 1.0;
    for (int f = 0; f < maps.count; ++f)
        for (int r = 0; r < maps.rows; ++r)
            for (int c = 0; c < maps.cols; ++c)
                sums[(static_cast<std::size_t>(f) * rows + ri[r]) * cols + ci[c]] += maps.at(f, r, c);
    FeatureVector v;
    v.values.resize(sums.size());
    for (std::size_t i = 0; i < sums.size(); ++i)
        v.values[i] = static_cast<float>(sums[i] / counts[i % counts.size()]);
    return v;
}

std::size_t feature_dim(const FilterBank& b, const FeatureConfig& cfg) {
    return static_cast<std::size_t>(b.num_filters) * cfg.pool_rows * cfg.pool_cols;
}

FilterBank resolve_bank(const std::string& spec, const FeatureConfig& cfg) {
    if (spec == "gabor") return make_gabor_bank(cfg.n_orient, cfg.n_wavelen, cfg.n_phase, cfg.kernel_size);
    return read_filterbank(spec);
}

Extractor::Extractor(const FilterBank& bank, const FeatureConfig& cfg)
    : bank_(collapse_channels(bank)), cfg_(cfg), dim_(feature_dim(bank, cfg)) {}

void Extractor::extract_into(const UltrasoundFrame& f, std::span<float> out) const {
    if (out.size() != dim_) throw ValidationError("feature buffer has wrong length");
    const ImageMatrix img = preprocess(f, cfg_);
    if (img.rows < bank_.kh || img.cols < bank_.kw) throw ValidationError("image smaller than kernel");
    const int orows = img.rows - bank_.kh + 1;
    const int ocols = img.cols - bank_.kw + 1;
    const int prow = cfg_.pool_rows, pcol = cfg_.pool_cols;
    if (prow > orows || pcol > ocols) throw ValidationError("grid larger than map");
    const auto ri = cell_index(orows, prow);
    const auto ci = cell_index(ocols, pcol);

    std::vector<double> counts(static_cast<std::size_t>(prow) * pcol, 0.0);
    for (int r = 0; r < orows; ++r)
        for (int c = 0; c < ocols; ++c) counts[static_cast<std::size_t>(ri[r] * pcol + ci[c])] += 1.0;

    std::vector<float> row(static_cast<std::size_t>(ocols));
    std::vector<double> cell(static_cast<std::size_t>(prow) * pcol);
    for (int fi = 0; fi < bank_.num_filters; ++fi) {
        std::fill(cell.begin(), cell.end(), 0.0);
        for (int r = 0; r < orows; ++r) {
            correlate_row(img, bank_, fi, r, row.data(), ocols);
            double* crow = cell.data() + static_cast<std::size_t>(ri[r]) * pcol;
            for (int c = 0; c < ocols; ++c)
                if (row[c] > 0.0f) crow[ci[c]] += row[c];
        }
        for (std::size_t k = 0; k < cell.size(); ++k)
            out[static_cast<std::size_t>(fi) * cell.size() + k] = static_cast<float>(cell[k] / counts[k]);
    }
}

FeatureVector Extractor::extract(const UltrasoundFrame& f) const {
    FeatureVector v;
    v.values.resize(dim_);
    extract_into(f, v.values);
    v.label = f.label;
    return v;
}

FeatureVector extract(const UltrasoundFrame& f, const FilterBank& b, const FeatureConfig& cfg) {
    auto v = grid_pool(convolve_relu(preprocess(f, cfg), collapse_channels(b)), cfg.pool_rows, cfg.pool_cols);
    v.label = f.label;
    return v;
}

FeatureMatrix extract_dataset(const LabeledDataset& d, const Extractor& ex, std::vector<int>* labels) {
    FeatureMatrix X(d.frames.size(), ex.dim());
    parallel_for(d.frames.size(), [&](std::size_t i) { ex.extract_into(d.frames[i], X.row(i)); });
    if (labels) {
        labels->resize(d.frames.size());
        for (std::size_t i = 0; i < d.frames.size(); ++i) (*labels)[i] = gesture_id(d.frames[i].label);
    }
    return X;
}

std::uint64_t feature_pipeline_hash(const FilterBank& b, const FeatureConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 0x100000001b3ull;
        }
    };
    const int ints[] = {cfg.downsample_factor, cfg.pool_rows, cfg.pool_cols, b.num_filters, b.channels, b.kh, b.kw};
    mix(ints, sizeof ints);
    mix(b.weights.data(), b.weights.size() * sizeof(float));
    mix(b.biases.data(), b.biases.size() * sizeof(float));
    return h;
}

} // namespace smg
