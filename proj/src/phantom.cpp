#include "smg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "smg/error.hpp"
#include "smg/parallel.hpp"
#include "smg/rng.hpp"

namespace smg {

namespace {

constexpr double kFasciaPx = 2.5;
constexpr double kFasciaLevel = 190.0;
constexpr double kSkinLevel = 175.0;
constexpr double kFatLevel = 35.0;
constexpr double kShadowLevel = 8.0;
constexpr double kBoneHalfWidth = 3.0;

struct Texture {
    double f_row, p_row, f_oblique, p_oblique, tilt, w_row;
};

Texture texture_for(std::uint64_t seed) {
    Rng rng(seed);
    Texture t{};
    t.f_row = 3.0 + 4.0 * rng.uniform();
    t.p_row = 2.0 * std::numbers::pi * rng.uniform();
    t.f_oblique = 2.0 + 5.0 * rng.uniform();
    t.p_oblique = 2.0 * std::numbers::pi * rng.uniform();
    t.tilt = -0.6 + 1.2 * rng.uniform();
    t.w_row = 0.35 + 0.3 * rng.uniform();
    return t;
}

struct DeformedRegion {
    double cx, cy, rx, ry;
};

DeformedRegion deform(const MuscleRegion& r, const Deformation& d, double depth) {
    const double s = 1.0 + depth * (d.thickness_scale - 1.0);
    return {r.cx + depth * d.lateral_shift, r.cy, r.semi_x / std::sqrt(s), r.semi_y * s};
}

void check_depth_shift(const PhantomModel& m, double depth, int shift) {
    if (!(depth >= 0.0 && depth <= 1.0)) throw ValidationError("depth must lie in [0, 1]");
    if (std::abs(shift) > m.probe_shift_max) throw ValidationError("shift out of range");
}

} // namespace

PhantomModel make_phantom(const PhantomParams& p) {
    PhantomModel m;
    m.width = p.width;
    m.height = p.height;
    m.speckle_sigma = p.speckle_sigma;
    m.probe_shift_max = p.probe_shift_max;
    m.fps = p.fps;
    m.flip_period_s = p.flip_period_s;
    m.drift_period_s = p.drift_period_s;
    m.deformation = p.deformation;

    // Geometry is laid out on the 384 x 400 reference frame and scaled to the configured size.
    const double sx = p.width / 384.0;
    const double sy = p.height / 400.0;
    auto region = [&](const char* name, double cx, double cy, double ax, double ay, int lo, int hi, std::uint64_t seed) {
        m.regions.push_back({name, cx * sx, cy * sy, ax * sx, ay * sy, static_cast<std::uint8_t>(lo),
                             static_cast<std::uint8_t>(hi), seed});
    };
    region("FDS-radial", 100, 105, 50, 36, 55, 130, 11);
    region("FDS-central", 192, 95, 44, 38, 60, 140, 12);
    region("FDS-ulnar", 284, 105, 50, 36, 50, 125, 13);
    region("FDP-radial", 150, 210, 56, 40, 45, 115, 14);
    region("FDP-ulnar", 250, 210, 56, 40, 50, 120, 15);
    region("FPL", 72, 240, 34, 32, 40, 110, 16);
    m.bones.push_back({95 * sx, 350 * sy, 45 * std::min(sx, sy), 220});
    m.bones.push_back({285 * sx, 355 * sy, 42 * std::min(sx, sy), 210});
    m.validate();
    return m;
}

void PhantomModel::validate() const {
    if (width <= 0 || height <= 0 || width > 0xFFFF || height > 0xFFFF) throw ValidationError("bad phantom dimensions");
    if (static_cast<int>(regions.size()) != kNumRegions) throw ValidationError("phantom needs exactly 6 regions");
    if (speckle_sigma < 0) throw ValidationError("out of range: speckle_sigma");
    if (probe_shift_max < 0) throw ValidationError("out of range: probe_shift_max");
    if (fps <= 0) throw ValidationError("out of range: fps");
    for (const auto& r : regions)
        if (r.semi_x <= 0 || r.semi_y <= 0 || r.echo_lo > r.echo_hi) throw ValidationError("invalid muscle region " + r.name);
    for (std::size_t a = 0; a < deformation.size(); ++a) {
        for (std::size_t b = a + 1; b < deformation.size(); ++b)
            if (deformation[a] == deformation[b]) throw ValidationError("deformation rows must be pairwise distinct");
        for (std::size_t r = 0; r < regions.size(); ++r) {
            const auto& d = deformation[a][r];
            if (d.thickness_scale < 0.4 || d.thickness_scale > 1.6) throw ValidationError("thickness_scale outside [0.4, 1.6]");
            // Extremes over depth in [0,1] occur at the endpoints.
            for (double depth : {0.0, 1.0}) {
                const auto e = deform(regions[r], d, depth);
                if (e.cx - e.rx - probe_shift_max < 0 || e.cx + e.rx + probe_shift_max > width - 1 || e.cy - e.ry < 0 ||
                    e.cy + e.ry > height - 1)
                    throw ValidationError("region " + regions[r].name + " leaves the image for gesture " +
                                          std::string(gesture_name(static_cast<Gesture>(a))));
            }
        }
    }
}

AcquisitionProtocol AcquisitionProtocol::from_config(const RunConfig& c) {
    return {c.protocol.hold_s, c.protocol.rest_s, c.protocol.reps, c.protocol.realtime_per_gesture_s, c.phantom.fps};
}

int AcquisitionProtocol::frames_per_hold() const { return static_cast<int>(std::lround(hold_s * fps)); }

int AcquisitionProtocol::frames_per_realtime_gesture() const {
    return static_cast<int>(std::lround(realtime_per_gesture_s * fps));
}

void AcquisitionProtocol::validate() const {
    if (!(hold_s > 0 && rest_s > 0 && reps > 0 && realtime_per_gesture_s > 0 && fps > 0))
        throw ValidationError("protocol values must be strictly positive");
}

std::vector<double> render_base(const PhantomModel& m, Gesture g, double depth, int shift) {
    check_depth_shift(m, depth, shift);
    const int W = m.width, H = m.height;
    std::vector<double> img(static_cast<std::size_t>(W) * H);
    const double skin0 = 6.0 * H / 400.0, skin1 = 12.0 * H / 400.0, fat1 = 30.0 * H / 400.0;

    for (int y = 0; y < H; ++y) {
        double v = m.bg_top + (m.bg_bottom - m.bg_top) * y / std::max(1, H - 1);
        if (y >= skin0 && y < skin1)
            v = kSkinLevel;
        else if (y >= skin1 && y < fat1)
            v = kFatLevel;
        std::fill_n(img.begin() + static_cast<std::ptrdiff_t>(y) * W, W, v);
    }

    const auto& row = m.deformation[static_cast<std::size_t>(g)];
    for (std::size_t r = 0; r < m.regions.size(); ++r) {
        const auto& reg = m.regions[r];
        const auto e = deform(reg, row[r], depth);
        const Texture tex = texture_for(reg.texture_seed);
        const double cx = e.cx + shift;
        const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.ry)));
        const int y1 = std::min(H - 1, static_cast<int>(std::ceil(e.cy + e.ry)));
        const int x0 = std::max(0, static_cast<int>(std::floor(cx - e.rx)));
        const int x1 = std::min(W - 1, static_cast<int>(std::ceil(cx + e.rx)));
        const double lo = reg.echo_lo, span = reg.echo_hi - reg.echo_lo;
        const double rmin = std::min(e.rx, e.ry);
        for (int y = y0; y <= y1; ++y) {
            const double v = (y - e.cy) / e.ry;
            const double row_term = std::sin(std::numbers::pi * tex.f_row * v + tex.p_row);
            double* out = img.data() + static_cast<std::size_t>(y) * W;
            for (int x = x0; x <= x1; ++x) {
                const double u = (x - cx) / e.rx;
                const double rho = std::sqrt(u * u + v * v);
                if (rho > 1.0) continue;
                if ((1.0 - rho) * rmin < kFasciaPx) {
                    out[x] = kFasciaLevel;
                    continue;
                }
                const double ob = std::sin(std::numbers::pi * tex.f_oblique * (u + tex.tilt * v) + tex.p_oblique);
                const double t = 0.5 + 0.5 * (tex.w_row * row_term + (1.0 - tex.w_row) * ob);
                out[x] = lo + span * t;
            }
        }
    }

    for (const auto& b : m.bones) {
        const double cx = b.cx + shift;
        const int x0 = std::max(0, static_cast<int>(std::floor(cx - b.radius - kBoneHalfWidth)));
        const int x1 = std::min(W - 1, static_cast<int>(std::ceil(cx + b.radius + kBoneHalfWidth)));
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - cx;
            const double reach = b.radius + kBoneHalfWidth;
            if (std::abs(dx) > reach) continue;
            const double inner = b.radius * b.radius - dx * dx;
            const double surface = b.cy - std::sqrt(std::max(0.0, inner));
            const int ys = std::max(0, static_cast<int>(std::floor(surface - kBoneHalfWidth - 1)));
            for (int y = ys; y < H; ++y) {
                // Distance from the arc measured radially keeps the rim width constant.
                const double d = std::hypot(dx, y - b.cy);
                double& px = img[static_cast<std::size_t>(y) * W + x];
                if (y <= b.cy && std::abs(d - b.radius) <= kBoneHalfWidth)
                    px = b.brightness;
                else if (std::abs(dx) < b.radius && y > surface + kBoneHalfWidth)
                    px = kShadowLevel;
            }
        }
    }
    return img;
}

namespace {

UltrasoundFrame quantize(const PhantomModel& m, const std::vector<double>& base, double sigma, std::uint64_t seed,
                         Gesture g) {
    UltrasoundFrame f;
    f.width = static_cast<std::uint16_t>(m.width);
    f.height = static_cast<std::uint16_t>(m.height);
    f.label = g;
    f.pixels.resize(base.size());
    Rng rng(seed);
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double v = sigma > 0 ? base[i] * (1.0 + sigma * rng.normal()) : base[i];
        f.pixels[i] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
    }
    return f;
}

} // namespace

UltrasoundFrame render_frame(const PhantomModel& m, Gesture g, double depth, int shift, std::uint64_t seed) {
    return quantize(m, render_base(m, g, depth, shift), m.speckle_sigma, seed, g);
}

UltrasoundFrame mean_image(const PhantomModel& m, Gesture g) {
    return quantize(m, render_base(m, g, 1.0, 0), 0.0, 0, g);
}

LabeledDataset generate_static_session(const PhantomModel& m, const AcquisitionProtocol& p, std::uint64_t seed) {
    p.validate();
    const int per_hold = p.frames_per_hold();
    const int blocks = kNumGestures * p.reps;
    LabeledDataset d;
    d.names = registry_names();
    d.provenance = "phantom static seed " + std::to_string(seed);
    d.frames.resize(static_cast<std::size_t>(blocks) * per_hold);

    parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
        const int gi = static_cast<int>(b) / p.reps;
        const int rep = static_cast<int>(b) % p.reps;
        const auto g = static_cast<Gesture>(gi);
        Rng shift_rng(mix_seed({seed, static_cast<std::uint64_t>(gi), static_cast<std::uint64_t>(rep), 0xB10Cull}));
        const int shift = static_cast<int>(shift_rng.range(-m.probe_shift_max, m.probe_shift_max));
        const auto base = render_base(m, g, 1.0, shift);
        const double block_start_s = static_cast<double>(b) * (p.hold_s + p.rest_s);
        for (int i = 0; i < per_hold; ++i) {
            auto f = quantize(m, base, m.speckle_sigma,
                              mix_seed({seed, static_cast<std::uint64_t>(gi), static_cast<std::uint64_t>(rep),
                                        static_cast<std::uint64_t>(i)}),
                              g);
            f.timestamp_ms = static_cast<std::uint64_t>(std::llround((block_start_s + i / p.fps) * 1000.0));
            d.frames[b * static_cast<std::size_t>(per_hold) + static_cast<std::size_t>(i)] = std::move(f);
        }
    });
    return d;
}

double dynamic_depth(const PhantomModel& m, double t) {
    return std::clamp(0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * t / m.flip_period_s), 0.0, 1.0);
}

int dynamic_shift(const PhantomModel& m, double t) {
    return static_cast<int>(std::lround(m.probe_shift_max * std::sin(2.0 * std::numbers::pi * t / m.drift_period_s)));
}

LabeledDataset generate_dynamic_session(const PhantomModel& m, std::span<const Gesture> gestures,
                                        const AcquisitionProtocol& p, std::uint64_t seed) {
    p.validate();
    if (gestures.empty()) throw ValidationError("empty gesture subset");
    const int per_gesture = p.frames_per_realtime_gesture();
    LabeledDataset d;
    d.names = registry_names();
    d.provenance = "phantom dynamic seed " + std::to_string(seed);
    d.frames.resize(gestures.size() * static_cast<std::size_t>(per_gesture));

    parallel_for(d.frames.size(), [&](std::size_t idx) {
        const std::size_t gi = idx / static_cast<std::size_t>(per_gesture);
        const int i = static_cast<int>(idx % static_cast<std::size_t>(per_gesture));
        const Gesture g = gestures[gi];
        const double t_local = i / p.fps;
        const double t = static_cast<double>(idx) / p.fps;
        const double depth = dynamic_depth(m, t_local);
        const int shift = dynamic_shift(m, t);
        auto f = quantize(m, render_base(m, g, depth, shift), m.speckle_sigma,
                          mix_seed({seed, static_cast<std::uint64_t>(gesture_id(g)), gi, static_cast<std::uint64_t>(i),
                                    0xD1Aull}),
                          g);
        f.timestamp_ms = static_cast<std::uint64_t>(std::llround(t * 1000.0));
        d.frames[idx] = std::move(f);
    });
    return d;
}

} // namespace smg
