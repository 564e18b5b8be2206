#include "smg/hand.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "smg/error.hpp"
#include "smg/rng.hpp"

namespace smg {

namespace {

constexpr std::array<const char*, kNumFingers> kFingerNames{"thumb", "index", "middle", "ring", "little"};

double clean_duty(double d) { return std::isnan(d) ? 0.0 : std::clamp(d, -1.0, 1.0); }

double contact_force(const FingerState& f, const HandSpec& spec) {
    if (!f.contact) return 0.0;
    return std::clamp(spec.contact_stiffness * (f.excursion - f.contact_excursion), 0.0, force_cap(spec));
}

// Load torque over stall torque.
double load_ratio(const FingerState& f, const HandSpec& spec) {
    const auto& m = spec.motor;
    const double tendon = f.contact ? contact_force(f, spec) / spec.transmission : spec.spring_stiffness * f.excursion;
    return tendon * m.roller_radius / m.stall_torque;
}

double abd_load_ratio(double excursion, const HandSpec& spec) {
    return spec.spring_stiffness * excursion * spec.motor.roller_radius / spec.motor.stall_torque;
}

void update_angles(FingerState& f, const HandSpec& spec) {
    const double e = f.contact ? f.contact_excursion : f.excursion;
    const double frac = std::clamp(e / spec.flex_excursion, 0.0, 1.0);
    f.mcp = spec.rom.mcp_max * frac;
    f.pip = spec.rom.pip_max * frac;
    f.dip = 0.0;
}

void substep(HandState& s, const Duties& duty, double h, const HandSpec& spec) {
    const double r = spec.motor.roller_radius;
    const double w = spec.motor.free_speed;
    for (int i = 0; i < kNumFingers; ++i) {
        auto& f = s.fingers[static_cast<std::size_t>(i)];
        const double omega = w * (duty[static_cast<std::size_t>(i)] - load_ratio(f, spec));
        double e = std::max(0.0, f.excursion + r * omega * h);
        if (!f.contact && f.obstacle && e >= *f.obstacle) {
            f.contact = true;
            f.contact_excursion = *f.obstacle;
        }
        if (f.contact) {
            e = std::min(e, f.contact_excursion + force_cap(spec) / spec.contact_stiffness);
            if (e < f.contact_excursion) f.contact = false;
        }
        f.excursion = std::min(e, spec.flex_excursion);
        s.shaft[static_cast<std::size_t>(i)] = f.excursion / r;
        update_angles(f, spec);
    }
    const double omega = w * (duty[kAbdMotor] - abd_load_ratio(s.abd_excursion, spec));
    s.abd_excursion = std::clamp(s.abd_excursion + r * omega * h, 0.0, spec.abd_excursion);
    s.shaft[kAbdMotor] = s.abd_excursion / r;
    s.thumb_abd = spec.rom.thumb_abd_max * s.abd_excursion / spec.abd_excursion;
}

} // namespace

PostureTarget gesture_target(Gesture g) {
    PostureTarget t;
    switch (g) {
    case Gesture::Rest: break;
    case Gesture::ThumbFlex: t.flex[0] = 1.0; break;
    case Gesture::IndexFlex: t.flex[1] = 1.0; break;
    case Gesture::MiddleFlex: t.flex[2] = 1.0; break;
    case Gesture::RingFlex: t.flex[3] = 1.0; break;
    case Gesture::LittleFlex: t.flex[4] = 1.0; break;
    case Gesture::Fist:
        t.flex.fill(1.0);
        t.abd = 1.0;
        break;
    case Gesture::Pinch:
        t.flex[0] = 1.0;
        t.flex[1] = 1.0;
        t.abd = 0.5;
        break;
    case Gesture::KeyPinch:
        t.flex[0] = 1.0;
        t.flex[1] = 0.6;
        t.abd = 0.0;
        break;
    }
    return t;
}

JointTargets target_angles(const PostureTarget& t, const RomSpec& rom) {
    JointTargets j;
    for (std::size_t f = 0; f < kNumFingers; ++f) {
        j.mcp[f] = rom.mcp_max * t.flex[f];
        j.pip[f] = rom.pip_max * t.flex[f];
    }
    j.thumb_abd = rom.thumb_abd_max * t.abd;
    return j;
}

void place_object(HandState& s, const HandSpec& spec, double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValidationError("out of range: object fraction must lie in [0, 1]");
    for (auto& f : s.fingers) f.obstacle = fraction * spec.flex_excursion;
}

void clear_object(HandState& s) {
    for (auto& f : s.fingers) {
        f.obstacle.reset();
        f.contact = false;
    }
}

HandState step(const HandState& s, const Duties& duties, double dt, const HandSpec& spec) {
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be finite and >= 0");
    if (dt == 0.0) return s;
    HandState n = s;
    for (std::size_t m = 0; m < kNumMotors; ++m) n.duty[m] = clean_duty(duties[m]);
    const int sub = std::max(1, static_cast<int>(std::ceil(dt / spec.max_substep_s - 1e-9)));
    const double h = dt / sub;
    for (int i = 0; i < sub; ++i) substep(n, n.duty, h, spec);
    n.time_s = s.time_s + dt;
    return n;
}

double force_cap(const HandSpec& spec) {
    return spec.motor.stall_torque / spec.motor.roller_radius * spec.transmission;
}

double fingertip_force(const HandState& s, Finger f, const HandSpec& spec) {
    return contact_force(s.fingers[static_cast<std::size_t>(f)], spec);
}

double palmar_grip_force(const HandState& s, const HandSpec& spec) {
    double sum = 0.0;
    for (const auto& f : s.fingers)
        if (f.contact) sum += contact_force(f, spec);
    return spec.palm_factor * sum;
}

Duties posture_duties(const HandState& s, const PostureTarget& t, const HandSpec& spec) {
    Duties d{};
    for (std::size_t i = 0; i < kNumFingers; ++i) {
        const auto& f = s.fingers[i];
        const double err = t.flex[i] - f.excursion / spec.flex_excursion;
        d[i] = std::clamp(spec.position_gain * err + load_ratio(f, spec), -1.0, 1.0);
    }
    const double err = t.abd - s.abd_excursion / spec.abd_excursion;
    d[kAbdMotor] = std::clamp(spec.position_gain * err + abd_load_ratio(s.abd_excursion, spec), -1.0, 1.0);
    return d;
}

int sensor_adc(double force_n, const SensorSpec& spec) {
    if (std::isnan(force_n)) throw ValidationError("force is NaN");
    const double v = std::clamp((spec.sensitivity * force_n + spec.offset) * spec.amp_gain, 0.0, spec.vref);
    const double full = std::ldexp(1.0, spec.adc_bits) - 1.0;
    return static_cast<int>(std::lround(v / spec.vref * full));
}

double adc_to_newtons(double counts, const SensorSpec& spec) {
    const double full = std::ldexp(1.0, spec.adc_bits) - 1.0;
    const double v = counts / full * spec.vref;
    return (v / spec.amp_gain - spec.offset) / spec.sensitivity;
}

double adc_resolution(const SensorSpec& spec) {
    const double full = std::ldexp(1.0, spec.adc_bits) - 1.0;
    return spec.vref / full / spec.amp_gain / spec.sensitivity;
}

ForceCalibration calibrate_sensor(const std::vector<CalibrationSample>& samples) {
    if (samples.size() < 2) throw ValidationError("calibration needs at least 2 samples");
    const auto n = static_cast<double>(samples.size());
    double mx = 0.0, my = 0.0;
    for (const auto& s : samples) {
        if (!std::isfinite(s.counts) || !std::isfinite(s.grams)) throw ValidationError("non-finite calibration sample");
        mx += s.counts;
        my += s.grams;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& s : samples) {
        sxx += (s.counts - mx) * (s.counts - mx);
        sxy += (s.counts - mx) * (s.grams - my);
        syy += (s.grams - my) * (s.grams - my);
    }
    if (sxx == 0.0) throw ValidationError("all counts identical");
    ForceCalibration c;
    c.n = samples.size();
    c.slope = sxy / sxx;
    c.intercept = my - c.slope * mx;
    double ss_res = 0.0;
    for (const auto& s : samples) {
        const double r = s.grams - c.grams(s.counts);
        ss_res += r * r;
    }
    c.mse = ss_res / n;
    c.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return c;
}

std::vector<CalibrationSample> synthetic_calibration(const SensorSpec& spec, double max_grams, int points,
                                                     double sigma_g, std::uint64_t seed) {
    if (points < 2) throw ValidationError("out of range: need at least 2 calibration points");
    if (!(max_grams > 0) || !(sigma_g >= 0)) throw ValidationError("out of range: calibration load or sigma");
    constexpr double kG = 0.00980665; // N per gram-force
    Rng rng(seed);
    std::vector<CalibrationSample> out;
    out.reserve(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        const double g = max_grams * i / (points - 1);
        out.push_back({static_cast<double>(sensor_adc(g * kG, spec)), g + sigma_g * rng.normal()});
    }
    return out;
}

Telemetry telemetry(const HandState& s, const HandSpec& spec) {
    Telemetry t;
    t.t = s.time_s;
    for (std::size_t i = 0; i < kNumFingers; ++i) {
        t.mcp[i] = s.fingers[i].mcp;
        t.pip[i] = s.fingers[i].pip;
        t.force[i] = contact_force(s.fingers[i], spec);
        t.adc[i] = sensor_adc(t.force[i], spec.sensor);
    }
    t.thumb_abd = s.thumb_abd;
    t.duty = s.duty;
    return t;
}

std::string telemetry_csv_header() {
    std::ostringstream os;
    os << "t";
    for (auto n : kFingerNames) os << ',' << n << "_mcp," << n << "_pip";
    os << ",thumb_abd";
    for (auto n : kFingerNames) os << ',' << n << "_force";
    for (auto n : kFingerNames) os << ',' << n << "_adc";
    for (int m = 0; m < kNumMotors; ++m) os << ",duty" << m;
    os << '\n';
    return os.str();
}

std::string telemetry_csv_row(const Telemetry& t) {
    std::ostringstream os;
    char buf[48];
    auto put = [&](double v, const char* fmt) {
        std::snprintf(buf, sizeof buf, fmt, v);
        os << buf;
    };
    put(t.t, "%.4f");
    for (std::size_t i = 0; i < kNumFingers; ++i) {
        put(t.mcp[i], ",%.4f");
        put(t.pip[i], ",%.4f");
    }
    put(t.thumb_abd, ",%.4f");
    for (double f : t.force) put(f, ",%.5f");
    for (int a : t.adc) os << ',' << a;
    for (double d : t.duty) put(d, ",%.5f");
    os << '\n';
    return os.str();
}

GripResult grip_until(const HandState& s, Gesture g, double force_setpoint, double dt, double max_s,
                      const HandSpec& spec) {
    if (!(force_setpoint >= 0.0)) throw ValidationError("out of range: force setpoint must be >= 0");
    if (force_setpoint > force_cap(spec)) throw ValidationError("setpoint exceeds force cap");
    if (!(dt > 0.0)) throw ValidationError("out of range: dt must be > 0");
    if (!(max_s >= 0.0)) throw ValidationError("out of range: max_s must be >= 0");

    const PostureTarget target = gesture_target(g);
    std::array<bool, kNumFingers> active{}, latched{};
    for (std::size_t i = 0; i < kNumFingers; ++i) active[i] = target.flex[i] > 0.0;

    GripResult res;
    res.state = s;
    res.trace.push_back(telemetry(res.state, spec));
    double elapsed = 0.0;
    for (;;) {
        Duties d = posture_duties(res.state, target, spec);
        bool settled = true;
        for (std::size_t i = 0; i < kNumFingers; ++i) {
            if (!active[i]) continue;
            auto& f = res.state.fingers[i];
            if (!latched[i] && f.contact) {
                const int counts = sensor_adc(contact_force(f, spec), spec.sensor);
                const double lowest = std::max(0.0, adc_to_newtons(counts - 0.5, spec.sensor));
                if (lowest >= force_setpoint) latched[i] = true;
            }
            if (latched[i]) {
                d[i] = load_ratio(f, spec);
            } else if (!f.contact && f.excursion >= spec.flex_excursion) {
                d[i] = load_ratio(f, spec); // closed without meeting the object
            } else {
                d[i] = 1.0;
                settled = false;
            }
        }
        if (settled || elapsed >= max_s - 1e-12) break;
        res.state = step(res.state, d, dt, spec);
        elapsed += dt;
        res.trace.push_back(telemetry(res.state, spec));
    }
    res.reached = true;
    bool any = false;
    for (std::size_t i = 0; i < kNumFingers; ++i) {
        if (!active[i]) continue;
        any = true;
        res.reached = res.reached && latched[i];
    }
    res.reached = res.reached && any;
    return res;
}

void Hand::advance(double dt) {
    if (!(dt >= 0.0)) throw ValidationError("dt must be >= 0");
    double left = dt;
    while (left > 0.0) {
        const double h = std::min(left, spec_.max_substep_s);
        state_ = step(state_, posture_duties(state_, target_, spec_), h, spec_);
        left -= h;
        if (left < 1e-12) left = 0.0;
    }
    if (tracing_) trace_.push_back(telemetry(state_, spec_));
}

} // namespace smg
