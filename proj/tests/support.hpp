#pragma once

#include <filesystem>
#include <string>
#include <unistd.h>

#include "smg/rng.hpp"
#include "smg/store.hpp"

namespace smg::test {

class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path() / "smg-test-XXXXXX";
        std::string s = base.string();
        if (!::mkdtemp(s.data())) throw std::runtime_error("mkdtemp failed");
        path_ = s;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline UltrasoundFrame random_frame(Rng& rng, std::uint16_t w, std::uint16_t h, Gesture g) {
    UltrasoundFrame f;
    f.width = w;
    f.height = h;
    f.label = g;
    f.timestamp_ms = rng.next() >> 20;
    f.pixels.resize(static_cast<std::size_t>(w) * h);
    for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    return f;
}

} // namespace smg::test
