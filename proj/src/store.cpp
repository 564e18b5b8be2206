#include "smg/store.hpp"

#include <fstream>
#include <iterator>

#include "smg/binio.hpp"

namespace smg {

namespace {

constexpr std::uint16_t kVersion = 1;

void expect_magic(ByteReader& r, std::string_view magic) {
    if (r.remaining() < 4) throw FormatError("truncated");
    if (r.text(4) != magic) throw FormatError("bad magic");
}

void expect_version(ByteReader& r) {
    const auto v = r.u16();
    if (v != kVersion) throw FormatError("unknown version " + std::to_string(v));
}

} // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string> registry_names() {
    std::vector<std::string> names;
    for (auto g : kAllGestures) names.emplace_back(gesture_name(g));
    return names;
}

// ---- SMGD ----

std::vector<std::uint8_t> encode_dataset(const LabeledDataset& d) {
    if (d.frames.empty()) throw ValidationError("empty dataset");
    const auto w = d.frames.front().width;
    const auto h = d.frames.front().height;
    const std::vector<std::string> names = d.names.empty() ? registry_names() : d.names;
    if (names.size() > 255) throw ValidationError("name table too large");

    std::vector<int> label_index(kNumGestures, -1);
    for (std::size_t i = 0; i < names.size(); ++i) {
        auto g = gesture_from_name(names[i]);
        if (!g) throw ValidationError("name table entry '" + names[i] + "' not in registry");
        if (label_index[gesture_id(*g)] < 0) label_index[gesture_id(*g)] = static_cast<int>(i);
    }

    ByteWriter out;
    out.text("SMGD");
    out.u16(kVersion);
    out.u16(w);
    out.u16(h);
    out.u32(static_cast<std::uint32_t>(d.frames.size()));
    out.u8(static_cast<std::uint8_t>(names.size()));
    for (const auto& n : names) {
        if (n.size() > 255) throw ValidationError("gesture name too long");
        out.u8(static_cast<std::uint8_t>(n.size()));
        out.text(n);
    }
    const std::size_t npix = static_cast<std::size_t>(w) * h;
    for (const auto& f : d.frames) {
        if (f.width != w || f.height != h) throw ValidationError("frames differ in dimensions");
        if (f.pixels.size() != npix) throw ValidationError("pixel buffer does not match dimensions");
        const int idx = label_index[gesture_id(f.label)];
        if (idx < 0) throw ValidationError("label missing from name table");
        out.u8(static_cast<std::uint8_t>(idx));
        out.u64(f.timestamp_ms);
        out.bytes(f.pixels);
    }
    return out.take();
}

LabeledDataset decode_dataset(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    expect_magic(r, "SMGD");
    expect_version(r);
    const auto w = r.u16();
    const auto h = r.u16();
    const auto count = r.u32();
    const auto name_count = r.u8();
    if (count == 0) throw FormatError("empty dataset");
    if (w == 0 || h == 0) throw FormatError("zero frame dimensions");

    LabeledDataset d;
    std::vector<Gesture> table;
    for (int i = 0; i < name_count; ++i) {
        const auto len = r.u8();
        auto name = r.text(len);
        auto g = gesture_from_name(name);
        if (!g) throw FormatError("unknown gesture name '" + name + "'");
        table.push_back(*g);
        d.names.push_back(std::move(name));
    }
    const std::size_t npix = static_cast<std::size_t>(w) * h;
    if (r.remaining() < static_cast<std::size_t>(count) * (npix + 9)) throw FormatError("truncated");
    if (r.remaining() > static_cast<std::size_t>(count) * (npix + 9)) throw FormatError("trailing bytes");
    d.frames.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        UltrasoundFrame f;
        f.width = w;
        f.height = h;
        const auto label = r.u8();
        if (label >= table.size()) throw FormatError("label outside name table");
        f.label = table[label];
        f.timestamp_ms = r.u64();
        auto px = r.bytes(npix);
        f.pixels.assign(px.begin(), px.end());
        d.frames.push_back(std::move(f));
    }
    return d;
}

void write_dataset(const LabeledDataset& d, const std::filesystem::path& path) {
    write_file(path, encode_dataset(d));
}

LabeledDataset read_dataset(const std::filesystem::path& path) {
    auto d = decode_dataset(read_file(path));
    d.provenance = path.string();
    return d;
}

// ---- SMGF ----

void FilterBank::validate() const {
    if (num_filters <= 0 || channels <= 0 || kh <= 0 || kw <= 0) throw ValidationError("filter bank shape must be positive");
    if (weights.size() != static_cast<std::size_t>(num_filters) * filter_size())
        throw ValidationError("filter bank weight count does not match shape");
    if (biases.size() != static_cast<std::size_t>(num_filters))
        throw ValidationError("filter bank bias count does not match filter count");
}

std::vector<std::uint8_t> encode_filterbank(const FilterBank& b) {
    b.validate();
    if (b.num_filters > 0xFFFF || b.channels > 0xFFFF || b.kh > 0xFF || b.kw > 0xFF)
        throw ValidationError("filter bank shape exceeds format limits");
    ByteWriter out;
    out.text("SMGF");
    out.u16(kVersion);
    out.u16(static_cast<std::uint16_t>(b.num_filters));
    out.u16(static_cast<std::uint16_t>(b.channels));
    out.u8(static_cast<std::uint8_t>(b.kh));
    out.u8(static_cast<std::uint8_t>(b.kw));
    out.f32s(b.weights);
    out.f32s(b.biases);
    return out.take();
}

FilterBank decode_filterbank(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    expect_magic(r, "SMGF");
    expect_version(r);
    FilterBank b;
    b.num_filters = r.u16();
    b.channels = r.u16();
    b.kh = r.u8();
    b.kw = r.u8();
    b.provenance = "file";
    if (b.num_filters == 0 || b.channels == 0 || b.kh == 0 || b.kw == 0) throw FormatError("zero filter bank dimension");
    const std::size_t expected = (static_cast<std::size_t>(b.num_filters) * b.filter_size() + b.num_filters) * 4;
    if (r.remaining() != expected) throw FormatError("filter count/shape mismatch with header");
    b.weights.resize(static_cast<std::size_t>(b.num_filters) * b.filter_size());
    b.biases.resize(static_cast<std::size_t>(b.num_filters));
    r.f32s(b.weights);
    r.f32s(b.biases);
    return b;
}

void write_filterbank(const FilterBank& b, const std::filesystem::path& path) {
    write_file(path, encode_filterbank(b));
}

FilterBank read_filterbank(const std::filesystem::path& path) {
    auto b = decode_filterbank(read_file(path));
    b.provenance = "file:" + path.string();
    return b;
}

// ---- SMGM ----

std::vector<std::uint8_t> encode_model_blob(const ModelBlob& m) {
    ByteWriter out;
    out.text("SMGM");
    out.u16(kVersion);
    out.u8(m.algo_id);
    out.u32(static_cast<std::uint32_t>(m.hyper_json.size()));
    out.text(m.hyper_json);
    out.u64(m.payload.size());
    out.bytes(m.payload);
    return out.take();
}

ModelBlob decode_model_blob(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    expect_magic(r, "SMGM");
    expect_version(r);
    ModelBlob m;
    m.algo_id = r.u8();
    m.hyper_json = r.text(r.u32());
    const auto n = r.u64();
    if (n > r.remaining()) throw FormatError("truncated");
    auto p = r.bytes(static_cast<std::size_t>(n));
    m.payload.assign(p.begin(), p.end());
    if (r.remaining() != 0) throw FormatError("trailing bytes");
    return m;
}

} // namespace smg
