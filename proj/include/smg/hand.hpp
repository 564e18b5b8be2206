#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smg/config.hpp"
#include "smg/gesture.hpp"

namespace smg {

enum class Finger : std::uint8_t { Thumb = 0, Index, Middle, Ring, Little };
inline constexpr int kNumFingers = 5;
inline constexpr int kNumMotors = 6; // five flexion drives plus thumb abduction
inline constexpr int kAbdMotor = 5;

using Duties = std::array<double, kNumMotors>;

struct FingerState {
    double mcp = 0.0; // degrees
    double pip = 0.0;
    double dip = 0.0; // fixed joint
    double excursion = 0.0; // m of tendon
    bool contact = false;
    double contact_excursion = 0.0;
    /// Excursion at which the finger meets an object; nullopt when the path is free.
    std::optional<double> obstacle;

    bool operator==(const FingerState&) const = default;
};

struct HandState {
    std::array<FingerState, kNumFingers> fingers;
    double thumb_abd = 0.0; // degrees
    double abd_excursion = 0.0;
    std::array<double, kNumMotors> shaft{}; // rad
    Duties duty{};
    double time_s = 0.0;

    bool operator==(const HandState&) const = default;
};

/// Flexion fraction per finger and thumb abduction fraction, all in [0, 1].
struct PostureTarget {
    std::array<double, kNumFingers> flex{};
    double abd = 0.0;
};

PostureTarget gesture_target(Gesture g);

struct JointTargets {
    std::array<double, kNumFingers> mcp{};
    std::array<double, kNumFingers> pip{};
    double thumb_abd = 0.0;
};
JointTargets target_angles(const PostureTarget& t, const RomSpec& rom);

/// Places an object in every finger's path at `fraction` of full flexion excursion.
void place_object(HandState& s, const HandSpec& spec, double fraction);
void clear_object(HandState& s);

/// Advances the mechanics by dt seconds in substeps of at most spec.max_substep_s.
/// Shaft speed = free_speed * (duty - load / stall); load is the extension spring
/// before contact and fingertip force times roller radius after it.
HandState step(const HandState& s, const Duties& duties, double dt, const HandSpec& spec);

/// stall_torque / roller_radius * transmission.
double force_cap(const HandSpec& spec);
double fingertip_force(const HandState& s, Finger f, const HandSpec& spec);
double palmar_grip_force(const HandState& s, const HandSpec& spec);

/// Proportional excursion control with load feed-forward.
Duties posture_duties(const HandState& s, const PostureTarget& t, const HandSpec& spec);

int sensor_adc(double force_n, const SensorSpec& spec);
/// Force at the centre of an ADC count's bin.
double adc_to_newtons(double counts, const SensorSpec& spec);
/// Newtons per ADC count.
double adc_resolution(const SensorSpec& spec);

struct CalibrationSample {
    double counts = 0.0;
    double grams = 0.0;
};

struct ForceCalibration {
    double slope = 0.0;     // grams per count
    double intercept = 0.0; // grams
    double r_squared = 0.0;
    double mse = 0.0; // grams squared
    std::size_t n = 0;

    double grams(double counts) const { return slope * counts + intercept; }
};

/// Ordinary least squares of grams on counts.
ForceCalibration calibrate_sensor(const std::vector<CalibrationSample>& samples);

/// Reference loads evenly spaced over [0, max_grams]; counts come from the sensor chain,
/// the recorded reference carries Gaussian error of sigma_g grams.
std::vector<CalibrationSample> synthetic_calibration(const SensorSpec& spec, double max_grams, int points,
                                                     double sigma_g, std::uint64_t seed);

struct Telemetry {
    double t = 0.0;
    std::array<double, kNumFingers> mcp{}, pip{}, force{};
    std::array<int, kNumFingers> adc{};
    double thumb_abd = 0.0;
    Duties duty{};
};

Telemetry telemetry(const HandState& s, const HandSpec& spec);
std::string telemetry_csv_header();
std::string telemetry_csv_row(const Telemetry& t);

struct GripResult {
    HandState state;
    std::vector<Telemetry> trace;
    bool reached = false; // every participating finger latched
};

/// Closes the fingers of gesture g on the placed object. A finger latches once the force read
/// back through the ADC is certainly at or above the setpoint, and is then held with a
/// stall-free holding duty. Throws ValidationError if setpoint exceeds the force cap.
GripResult grip_until(const HandState& s, Gesture g, double force_setpoint, double dt, double max_s,
                      const HandSpec& spec);

/// Hand instance driven by gesture commands through the posture controller.
class Hand {
public:
    explicit Hand(HandSpec spec = {}) : spec_(spec) {}

    void command(Gesture g) {
        gesture_ = g;
        target_ = gesture_target(g);
    }
    std::optional<Gesture> gesture() const { return gesture_; }
    void advance(double dt);
    const HandState& state() const { return state_; }
    HandState& state() { return state_; }
    const HandSpec& spec() const { return spec_; }
    void set_trace(bool on) { tracing_ = on; }
    const std::vector<Telemetry>& trace() const { return trace_; }

private:
    HandSpec spec_;
    HandState state_;
    PostureTarget target_;
    std::optional<Gesture> gesture_;
    bool tracing_ = false;
    std::vector<Telemetry> trace_;
};

} // namespace smg
