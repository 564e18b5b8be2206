#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace smg {

/// Gesture registry. Ids are stable and appear verbatim in every file and packet.
enum class Gesture : std::uint8_t {
    Rest = 0,
    ThumbFlex = 1,
    IndexFlex = 2,
    MiddleFlex = 3,
    RingFlex = 4,
    LittleFlex = 5,
    Fist = 6,
    Pinch = 7,
    KeyPinch = 8,
};

inline constexpr int kNumGestures = 9;

inline constexpr std::array<Gesture, kNumGestures> kAllGestures{
    Gesture::Rest,       Gesture::ThumbFlex, Gesture::IndexFlex, Gesture::MiddleFlex, Gesture::RingFlex,
    Gesture::LittleFlex, Gesture::Fist,      Gesture::Pinch,     Gesture::KeyPinch,
};

/// The subset driven in the real-time sessions.
inline constexpr std::array<Gesture, 4> kRealtimeGestures{
    Gesture::Rest, Gesture::Fist, Gesture::Pinch, Gesture::KeyPinch,
};

constexpr int gesture_id(Gesture g) { return static_cast<int>(g); }

std::string_view gesture_name(Gesture g);
std::optional<Gesture> gesture_from_id(int id);
std::optional<Gesture> gesture_from_name(std::string_view name);

/// Parses either a registry name ("key-pinch") or a numeric id ("8"); throws ValidationError.
Gesture parse_gesture(std::string_view token);

} // namespace smg
