#include "smg/gesture.hpp"

#include <charconv>
#include <string>

#include "smg/error.hpp"

namespace smg {

namespace {
constexpr std::array<std::string_view, kNumGestures> kNames{
    "rest", "thumb-flex", "index-flex", "middle-flex", "ring-flex", "little-flex", "fist", "pinch", "key-pinch",
};
}

std::string_view gesture_name(Gesture g) { return kNames.at(static_cast<std::size_t>(g)); }

std::optional<Gesture> gesture_from_id(int id) {
    if (id < 0 || id >= kNumGestures) return std::nullopt;
    return static_cast<Gesture>(id);
}

std::optional<Gesture> gesture_from_name(std::string_view name) {
    for (int i = 0; i < kNumGestures; ++i)
        if (kNames[static_cast<std::size_t>(i)] == name) return static_cast<Gesture>(i);
    return std::nullopt;
}

Gesture parse_gesture(std::string_view token) {
    if (auto g = gesture_from_name(token)) return *g;
    int id = -1;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), id);
    if (ec == std::errc{} && ptr == token.data() + token.size())
        if (auto g = gesture_from_id(id)) return *g;
    throw ValidationError("unknown gesture '" + std::string(token) + "'");
}

} // namespace smg
