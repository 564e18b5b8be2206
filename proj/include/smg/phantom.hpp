#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smg/config.hpp"
#include "smg/store.hpp"

namespace smg {

struct MuscleRegion {
    std::string name;
    double cx = 0, cy = 0;         // px
    double semi_x = 1, semi_y = 1; // px
    std::uint8_t echo_lo = 40, echo_hi = 120;
    std::uint64_t texture_seed = 0;
};

/// Bright bone surface arc with an acoustic shadow beneath it.
struct BoneArc {
    double cx = 0, cy = 0, radius = 1;
    double brightness = 220;
};

struct PhantomModel {
    int width = 384;
    int height = 400;
    std::vector<MuscleRegion> regions;
    std::vector<BoneArc> bones;
    double bg_top = 70;
    double bg_bottom = 30;
    double speckle_sigma = 0.15;
    int probe_shift_max = 10;
    double fps = 20.0;
    double flip_period_s = 6.0;
    double drift_period_s = 40.0;
    DeformationTable deformation = default_deformation_table();

    /// Checks deformation bounds, distinct rows and that every deformed ellipse
    /// stays inside the image at the maximum probe shift.
    void validate() const;
};

/// Forearm cross-section with FDS (radial, central, ulnar), FDP (radial, ulnar)
/// and FPL sub-regions over the radius and ulna.
PhantomModel make_phantom(const PhantomParams& p = {});

struct AcquisitionProtocol {
    double hold_s = 5.0;
    double rest_s = 15.0;
    int reps = 3;
    double realtime_per_gesture_s = 120.0;
    double fps = 20.0;

    static AcquisitionProtocol from_config(const RunConfig& c);
    int frames_per_hold() const;
    int frames_per_realtime_gesture() const;
    void validate() const;
};

/// Noiseless intensity of every pixel before quantization (row-major, doubles).
std::vector<double> render_base(const PhantomModel& m, Gesture g, double depth, int shift);

/// pixel = clamp(round(base * (1 + sigma * n))), n ~ N(0,1) from `seed`.
UltrasoundFrame render_frame(const PhantomModel& m, Gesture g, double depth, int shift, std::uint64_t seed);

/// Noiseless, unshifted, fully deformed image of gesture g.
UltrasoundFrame mean_image(const PhantomModel& m, Gesture g);

/// Every gesture, `reps` holds of hold_s * fps frames, each hold with its own probe shift.
LabeledDataset generate_static_session(const PhantomModel& m, const AcquisitionProtocol& p, std::uint64_t seed);

/// Per gesture, realtime_per_gesture_s * fps frames with depth(t) = 0.5 + 0.5 sin(2 pi t / flip_period)
/// and a slowly drifting probe shift.
LabeledDataset generate_dynamic_session(const PhantomModel& m, std::span<const Gesture> gestures,
                                        const AcquisitionProtocol& p, std::uint64_t seed);

/// Depth and shift along the dynamic trajectory at session time t (seconds).
double dynamic_depth(const PhantomModel& m, double t);
int dynamic_shift(const PhantomModel& m, double t);

} // namespace smg
