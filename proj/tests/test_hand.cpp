#include <doctest.h>

#include <cmath>

#include "smg/error.hpp"
#include "smg/hand.hpp"
#include "smg/rng.hpp"

using namespace smg;

namespace {

constexpr double kG = 0.00980665;

Duties all(double d) {
    Duties x;
    x.fill(d);
    return x;
}

HandState run(HandState s, const Duties& d, double seconds, const HandSpec& spec, double dt = 0.01) {
    for (int i = 0; i < static_cast<int>(std::lround(seconds / dt)); ++i) s = step(s, d, dt, spec);
    return s;
}

// Every finger pressed to the force cap on an object at half flexion.
HandState pressed(const HandSpec& spec, std::initializer_list<int> fingers) {
    HandState s;
    for (int i : fingers) {
        auto& f = s.fingers[static_cast<std::size_t>(i)];
        f.contact = true;
        f.contact_excursion = 0.5 * spec.flex_excursion;
        f.excursion = f.contact_excursion + force_cap(spec) / spec.contact_stiffness;
    }
    return s;
}

} // namespace

TEST_CASE("gesture posture targets") {
    const RomSpec rom;
    const auto rest = target_angles(gesture_target(Gesture::Rest), rom);
    for (int f = 0; f < kNumFingers; ++f) {
        CHECK(rest.mcp[f] == 0.0);
        CHECK(rest.pip[f] == 0.0);
    }
    const auto fist = target_angles(gesture_target(Gesture::Fist), rom);
    for (int f = 0; f < kNumFingers; ++f) {
        CHECK(fist.mcp[f] == 90.0);
        CHECK(fist.pip[f] == 85.0);
    }
    for (auto g : kAllGestures) CHECK(target_angles(gesture_target(g), rom).thumb_abd <= 64.0);
    const auto key = gesture_target(Gesture::KeyPinch);
    CHECK(key.flex[0] == 1.0);
    CHECK(key.flex[1] == 0.6);
    CHECK(key.abd == 0.0);
    const auto ring = gesture_target(Gesture::RingFlex);
    CHECK(ring.flex == std::array<double, 5>{0, 0, 0, 1, 0});
}

TEST_CASE("force chain arithmetic") {
    const HandSpec spec;
    CHECK(std::abs(force_cap(spec) - 3.92) <= 1e-6);
    CHECK(force_cap(spec) >= 2.7);
    CHECK(force_cap(spec) <= 5.0);

    const auto fist = pressed(spec, {0, 1, 2, 3, 4});
    CHECK(std::abs(palmar_grip_force(fist, spec) - 0.92 * 5 * 3.92) <= 1e-6);
    CHECK(std::abs(palmar_grip_force(fist, spec) - 18.032) <= 1e-6);
    CHECK(palmar_grip_force(fist, spec) >= 0.78 * 9.81);

    const auto precision = pressed(spec, {0, 1});
    CHECK(std::abs(palmar_grip_force(precision, spec) - 7.2128) <= 1e-6);
    CHECK(palmar_grip_force(precision, spec) <= 9.38);

    CHECK(palmar_grip_force(HandState{}, spec) == 0.0);
    CHECK(fingertip_force(HandState{}, Finger::Index, spec) == 0.0);
    CHECK(fingertip_force(fist, Finger::Ring, spec) == doctest::Approx(3.92));
}

TEST_CASE("driving a fist into an object approaches the force cap") {
    const HandSpec spec;
    HandState half;
    place_object(half, spec, 0.5);
    half = run(half, all(1.0), 3.0, spec);
    // tendon travel, not stall, limits the press on an object at half flexion
    CHECK(fingertip_force(half, Finger::Thumb, spec) ==
          doctest::Approx(spec.contact_stiffness * 0.5 * spec.flex_excursion));

    HandState s;
    place_object(s, spec, 0.3);
    s = run(s, all(1.0), 3.0, spec);
    for (int f = 0; f < kNumFingers; ++f) {
        CHECK(s.fingers[f].contact);
        CHECK(s.fingers[f].mcp == doctest::Approx(27.0));
        CHECK(fingertip_force(s, static_cast<Finger>(f), spec) <= force_cap(spec));
        CHECK(fingertip_force(s, static_cast<Finger>(f), spec) >= force_cap(spec) - 1e-3);
    }
    CHECK(palmar_grip_force(s, spec) == doctest::Approx(18.032).epsilon(1e-3));
    // backing off releases the contact
    s = run(s, all(-1.0), 2.0, spec);
    for (const auto& f : s.fingers) {
        CHECK_FALSE(f.contact);
        CHECK(f.mcp == 0.0);
    }
}

TEST_CASE("sensor chain") {
    const SensorSpec sp;
    CHECK(sensor_adc(0.0, sp) == 0);
    CHECK(sensor_adc(500 * kG, sp) == 491);
    CHECK(sensor_adc(100.0, sp) == 1023);
    int prev = 0;
    for (int i = 0; i <= 20000; ++i) {
        const int c = sensor_adc(i * 0.001, sp);
        REQUIRE(c >= prev);
        prev = c;
    }
    CHECK(adc_to_newtons(491, sp) == doctest::Approx(491.0 / 1023 * 5 / 20 / sp.sensitivity));
    CHECK(adc_resolution(sp) == doctest::Approx(adc_to_newtons(1, sp)));
    CHECK(adc_resolution(sp) < 0.011);
    SensorSpec off = sp;
    off.offset = -0.01;
    CHECK(sensor_adc(0.0, off) == 0);
}

TEST_CASE("calibration fits") {
    std::vector<CalibrationSample> line;
    for (int i = 0; i < 10; ++i) line.push_back({10.0 * i, 3.0 * 10.0 * i + 7.0});
    const auto c = calibrate_sensor(line);
    CHECK(c.slope == doctest::Approx(3.0));
    CHECK(c.intercept == doctest::Approx(7.0));
    CHECK(c.r_squared == doctest::Approx(1.0));
    CHECK(c.mse == doctest::Approx(0.0).epsilon(1e-12));

    const auto two = calibrate_sensor({{1, 5}, {3, 9}});
    CHECK(two.grams(2) == doctest::Approx(7));
    CHECK(two.r_squared == 1.0);

    CHECK_THROWS_WITH_AS(calibrate_sensor({{4, 1}, {4, 2}, {4, 3}}), doctest::Contains("all counts identical"),
                         ValidationError);

    // noiseless chain: positive slope
    const auto clean = calibrate_sensor(synthetic_calibration(SensorSpec{}, 1000, 50, 0.0, 1));
    CHECK(clean.slope > 0.0);
    CHECK(clean.r_squared > 0.9999);
}

TEST_CASE("calibration agrees with an uncentred normal-equation oracle") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = synthetic_calibration(SensorSpec{}, 500, 18, 37.0, seed);
        double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& p : s) {
            n += 1;
            sx += p.counts;
            sy += p.grams;
            sxx += p.counts * p.counts;
            sxy += p.counts * p.grams;
        }
        const double det = n * sxx - sx * sx;
        const double slope = (n * sxy - sx * sy) / det;
        const double icpt = (sxx * sy - sx * sxy) / det;
        double res = 0, tot = 0;
        for (const auto& p : s) {
            res += std::pow(p.grams - (slope * p.counts + icpt), 2);
            tot += std::pow(p.grams - sy / n, 2);
        }
        const auto c = calibrate_sensor(s);
        CHECK(c.slope == doctest::Approx(slope).epsilon(1e-9));
        CHECK(c.intercept == doctest::Approx(icpt).epsilon(1e-6));
        CHECK(c.r_squared == doctest::Approx(1 - res / tot).epsilon(1e-9));
        CHECK(c.mse == doctest::Approx(res / n).epsilon(1e-9));
    }
}

TEST_CASE("closed-loop grip") {
    const HandSpec spec;
    HandState s;
    place_object(s, spec, 0.5);
    const double dt = 0.001;
    const auto r = grip_until(s, Gesture::Fist, 2.0, dt, 5.0, spec);
    CHECK(r.reached);
    const double overshoot =
        spec.contact_stiffness * spec.motor.roller_radius * spec.motor.free_speed * dt + adc_resolution(spec.sensor);
    for (int f = 0; f < kNumFingers; ++f) {
        const double F = fingertip_force(r.state, static_cast<Finger>(f), spec);
        CHECK(F >= 2.0);
        CHECK(F <= 2.0 + overshoot);
        CHECK(F <= force_cap(spec));
    }
    CHECK(r.trace.size() >= 2);

    const auto z = grip_until(s, Gesture::Pinch, 0.0, dt, 5.0, spec);
    CHECK(z.reached);
    CHECK(z.state.fingers[0].contact);
    CHECK(z.state.fingers[1].contact);
    CHECK(fingertip_force(z.state, Finger::Index, spec) <= spec.contact_stiffness * spec.motor.roller_radius *
                                                                 spec.motor.free_speed * dt);
    CHECK_FALSE(z.state.fingers[2].contact);

    CHECK_THROWS_WITH_AS(grip_until(s, Gesture::Fist, 10.0, dt, 1.0, spec), doctest::Contains("exceeds force cap"),
                         ValidationError);
    CHECK_THROWS_AS(grip_until(s, Gesture::Fist, 1.0, 0.0, 1.0, spec), ValidationError);

    // no object: fingers close fully and nothing latches
    const auto free = grip_until(HandState{}, Gesture::Fist, 1.0, dt, 2.0, spec);
    CHECK_FALSE(free.reached);
    CHECK(free.state.fingers[3].mcp == doctest::Approx(90.0));
}

TEST_CASE("randomized duty fuzzing stays inside the range of motion") {
    const HandSpec spec;
    Rng rng(99);
    HandState s;
    for (int i = 0; i < 10000; ++i) {
        if (i % 2000 == 0) {
            if (rng.below(2)) place_object(s, spec, rng.uniform());
            else clear_object(s);
        }
        Duties d;
        for (auto& x : d) x = rng.uniform() * 2.4 - 1.2;
        if (i % 997 == 0) d[rng.below(6)] = std::nan("");
        const double dt = rng.below(10) == 0 ? 0.0 : rng.uniform() * 0.05;
        s = step(s, d, dt, spec);
        for (const auto& f : s.fingers) {
            REQUIRE(f.mcp >= 0.0);
            REQUIRE(f.mcp <= 90.0);
            REQUIRE(f.pip >= 0.0);
            REQUIRE(f.pip <= 85.0);
            REQUIRE(f.dip == 0.0);
            REQUIRE(f.excursion >= 0.0);
            REQUIRE(std::abs(f.mcp * 85.0 - f.pip * 90.0) < 1e-9);
        }
        REQUIRE(s.thumb_abd >= 0.0);
        REQUIRE(s.thumb_abd <= 64.0);
        for (double x : s.duty) REQUIRE(std::abs(x) <= 1.0);
    }
}

TEST_CASE("full flexion and return within two seconds") {
    const HandSpec spec;
    const auto s = run(HandState{}, all(1.0), 2.0, spec);
    for (const auto& f : s.fingers) {
        CHECK(f.mcp == doctest::Approx(90.0).epsilon(1e-9));
        CHECK(f.pip == doctest::Approx(85.0).epsilon(1e-9));
    }
    CHECK(s.thumb_abd == doctest::Approx(64.0));
    CHECK(s.time_s == doctest::Approx(2.0));
    const auto held = run(s, all(1.0), 1.0, spec);
    CHECK(held.fingers[2].mcp == doctest::Approx(90.0));

    const auto back = run(s, all(-1.0), 2.0, spec);
    for (const auto& f : back.fingers) {
        CHECK(f.mcp == 0.0);
        CHECK(f.pip == 0.0);
    }
    CHECK(back.thumb_abd == 0.0);
}

TEST_CASE("zero duty relaxes monotonically under the spring") {
    const HandSpec spec;
    auto s = run(HandState{}, all(1.0), 1.0, spec);
    double prev = s.fingers[0].excursion;
    for (int i = 0; i < 500; ++i) {
        s = step(s, all(0.0), 0.01, spec);
        REQUIRE(s.fingers[0].excursion <= prev);
        prev = s.fingers[0].excursion;
    }
    CHECK(prev < 0.01 * spec.flex_excursion);
}

TEST_CASE("dt = 0 is the identity") {
    const HandSpec spec;
    HandState s;
    place_object(s, spec, 0.3);
    s = run(s, all(0.7), 0.5, spec);
    CHECK(step(s, all(-1.0), 0.0, spec) == s);
    CHECK_THROWS_AS(step(s, all(0.0), -0.1, spec), ValidationError);
}

TEST_CASE("posture controller reaches gesture postures") {
    Hand hand;
    hand.set_trace(true);
    hand.command(Gesture::Pinch);
    for (int i = 0; i < 200; ++i) hand.advance(0.01);
    const auto& s = hand.state();
    CHECK(s.fingers[0].mcp == doctest::Approx(90.0).epsilon(0.01));
    CHECK(s.fingers[1].mcp == doctest::Approx(90.0).epsilon(0.01));
    CHECK(s.fingers[2].mcp < 1.0);
    CHECK(s.thumb_abd == doctest::Approx(32.0).epsilon(0.01));
    CHECK(hand.trace().size() == 200);

    hand.command(Gesture::KeyPinch);
    for (int i = 0; i < 200; ++i) hand.advance(0.01);
    CHECK(hand.state().fingers[1].mcp == doctest::Approx(54.0).epsilon(0.01));
    CHECK(hand.state().thumb_abd < 1.0);
    CHECK(hand.gesture() == Gesture::KeyPinch);
}

TEST_CASE("telemetry CSV") {
    const HandSpec spec;
    const auto s = pressed(spec, {1});
    const auto t = telemetry(s, spec);
    CHECK(t.force[1] == doctest::Approx(3.92));
    CHECK(t.adc[1] == sensor_adc(t.force[1], spec.sensor));
    const auto header = telemetry_csv_header();
    const auto row = telemetry_csv_row(t);
    CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
}
