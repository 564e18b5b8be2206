#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "smg/gesture.hpp"

namespace smg {

/// One 8-bit B-mode image, row-major, `height` rows of `width` pixels.
struct UltrasoundFrame {
    std::uint16_t width = 384;
    std::uint16_t height = 400;
    std::vector<std::uint8_t> pixels;
    Gesture label = Gesture::Rest;
    std::uint64_t timestamp_ms = 0;

    std::uint8_t at(int row, int col) const {
        return pixels[static_cast<std::size_t>(row) * width + static_cast<std::size_t>(col)];
    }
    bool operator==(const UltrasoundFrame&) const = default;
};

struct LabeledDataset {
    std::vector<UltrasoundFrame> frames;
    /// Gesture-name table as written to disk; label bytes index into it.
    std::vector<std::string> names;
    /// Phantom seed or source path. Not persisted.
    std::string provenance;

    /// Structural equality: frames and name table.
    bool same_content(const LabeledDataset& o) const { return frames == o.frames && names == o.names; }
};

/// Registry names in id order, the table written by default.
std::vector<std::string> registry_names();

/// Convolution filter bank: `num_filters` x `channels` x `kh` x `kw` weights, filter-major.
struct FilterBank {
    int num_filters = 0;
    int channels = 1;
    int kh = 3;
    int kw = 3;
    std::vector<float> weights;
    std::vector<float> biases;
    std::string provenance = "gabor";

    std::size_t filter_size() const { return static_cast<std::size_t>(channels) * kh * kw; }
    const float* filter(int f) const { return weights.data() + static_cast<std::size_t>(f) * filter_size(); }
    /// Throws ValidationError if shape and coefficient counts disagree.
    void validate() const;
};

void write_dataset(const LabeledDataset& d, const std::filesystem::path& path);
LabeledDataset read_dataset(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_dataset(const LabeledDataset& d);
LabeledDataset decode_dataset(std::span<const std::uint8_t> bytes);

void write_filterbank(const FilterBank& b, const std::filesystem::path& path);
FilterBank read_filterbank(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_filterbank(const FilterBank& b);
FilterBank decode_filterbank(std::span<const std::uint8_t> bytes);

/// Container of an SMGM model file; the payload is interpreted by learn.
struct ModelBlob {
    std::uint8_t algo_id = 0;
    std::string hyper_json;
    std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> encode_model_blob(const ModelBlob& m);
ModelBlob decode_model_blob(std::span<const std::uint8_t> bytes);

} // namespace smg
