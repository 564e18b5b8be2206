#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "smg/gesture.hpp"

namespace smg {

inline constexpr int kNumRegions = 6;

/// Per-gesture, per-region muscle deformation at full contraction.
struct Deformation {
    double thickness_scale = 1.0;
    double lateral_shift = 0.0; // px
    bool operator==(const Deformation&) const = default;
};

using DeformationTable = std::array<std::array<Deformation, kNumRegions>, kNumGestures>;

/// Default table: one dominant sub-region per finger, fist compresses all,
/// pinch and key-pinch mix the thumb and index patterns with different shifts.
DeformationTable default_deformation_table();

struct PhantomParams {
    int width = 384;
    int height = 400;
    double speckle_sigma = 0.15;
    int probe_shift_max = 10;
    double fps = 20.0;
    double flip_period_s = 6.0;   // depth(t) sinusoid period in dynamic sessions
    double drift_period_s = 40.0; // probe-shift drift period in dynamic sessions
    DeformationTable deformation = default_deformation_table();
    bool operator==(const PhantomParams&) const = default;
};

struct ProtocolParams {
    double hold_s = 5.0;
    double rest_s = 15.0;
    int reps = 3;
    double realtime_per_gesture_s = 120.0;
    bool operator==(const ProtocolParams&) const = default;
};

struct FeatureConfig {
    int downsample_factor = 4;
    int pool_rows = 6;
    int pool_cols = 6;
    int n_orient = 8;
    int n_wavelen = 4;
    int n_phase = 2;
    int kernel_size = 3;
    bool operator==(const FeatureConfig&) const = default;
};

struct LearnDefaults {
    int knn_k = 5;
    int nnr_k = 5;
    int rf_trees = 100;
    int rf_mtry = 0; // 0 = ceil(sqrt(d))
    int rf_max_depth = 0; // 0 = unlimited
    int rf_min_leaf = 1;
    bool rf_bootstrap = true;
    int dtc_min_leaf = 1;
    int dtc_max_depth = 0;
    int dtr_min_leaf = 5;
    int dtr_max_depth = 0;
    double svm_c = 1.0;
    double svm_tol = 1e-3;
    int svm_max_passes = 10;
    int poly_degree = 3;
    double poly_gamma = 1.0;
    double poly_coef0 = 1.0;
    double svr_epsilon = 0.1;
    bool standardize = false;
    bool operator==(const LearnDefaults&) const = default;
};

struct MotorSpec {
    double stall_torque = 0.0196;   // N·m (200 g·cm)
    double free_speed = 19.373154;  // rad/s (185 rpm)
    double roller_radius = 0.005;   // m
    bool operator==(const MotorSpec&) const = default;
};

struct RomSpec {
    double mcp_max = 90.0;
    double pip_max = 85.0;
    double thumb_abd_max = 64.0;
    bool operator==(const RomSpec&) const = default;
};

struct SensorSpec {
    double sensitivity = 0.00024 / 0.00980665; // V/N, 0.24 mV per gram-force
    double offset = 0.0;                        // V
    double amp_gain = 20.0;
    double vref = 5.0;
    int adc_bits = 10;
    bool operator==(const SensorSpec&) const = default;
};

struct HandSpec {
    MotorSpec motor;
    RomSpec rom;
    SensorSpec sensor;
    double transmission = 1.0;
    double palm_factor = 0.92;
    double contact_stiffness = 400.0; // N/m, k_f
    double spring_stiffness = 50.0;   // N/m, extension spring
    double flex_excursion = 0.015;    // m of tendon for full MCP/PIP flexion
    double abd_excursion = 0.010;     // m of tendon for full thumb abduction
    double max_substep_s = 0.001;
    double position_gain = 20.0;      // posture controller, duty per full excursion error
    bool operator==(const HandSpec&) const = default;
};

struct LinkParams {
    int queue_depth = 2;
    int debounce_k = 5;
    int debounce_m = 4;
    std::string host = "127.0.0.1";
    int frame_port = 0;   // 0 = OS-assigned
    int command_port = 0;
    double settle_s = 2.0;
    bool paced = false;   // live source sleeps to match fps
    bool operator==(const LinkParams&) const = default;
};

struct EvalParams {
    double train_fraction = 2.0 / 3.0;
    int k_folds = 5;
    int k_inner = 3;
    bool operator==(const EvalParams&) const = default;
};

struct RunConfig {
    PhantomParams phantom;
    ProtocolParams protocol;
    FeatureConfig features;
    LearnDefaults learn;
    HandSpec hand;
    LinkParams link;
    EvalParams eval;
    bool operator==(const RunConfig&) const = default;
};

/// Parses a JSON config. Missing keys keep defaults; unknown keys and
/// out-of-range values throw ValidationError.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string dump_config(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Range checks shared by the parser and programmatic callers.
void validate(const RunConfig& cfg);

} // namespace smg
