#include "smg/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "smg/error.hpp"

namespace smg {

using nlohmann::json;

DeformationTable default_deformation_table() {
    DeformationTable t{};
    auto set = [&](Gesture g, int region, double scale, double shift) {
        t[static_cast<std::size_t>(g)][static_cast<std::size_t>(region)] = {scale, shift};
    };
    // regions: 0 FDS radial, 1 FDS central, 2 FDS ulnar, 3 FDP radial, 4 FDP ulnar, 5 FPL
    set(Gesture::ThumbFlex, 5, 1.40, -4);
    set(Gesture::IndexFlex, 0, 1.35, 3);
    set(Gesture::IndexFlex, 3, 1.15, 0);
    set(Gesture::MiddleFlex, 1, 1.35, 0);
    set(Gesture::MiddleFlex, 3, 1.10, 3);
    set(Gesture::RingFlex, 2, 1.30, -3);
    set(Gesture::RingFlex, 4, 1.15, 0);
    set(Gesture::LittleFlex, 2, 1.12, 4);
    set(Gesture::LittleFlex, 4, 1.35, -2);
    for (int r = 0; r < 5; ++r) set(Gesture::Fist, r, 1.25, 0);
    set(Gesture::Fist, 5, 1.30, 0);
    set(Gesture::Pinch, 5, 1.35, -3);
    set(Gesture::Pinch, 0, 1.30, 2);
    set(Gesture::Pinch, 3, 1.15, 0);
    set(Gesture::KeyPinch, 5, 1.40, 5);
    set(Gesture::KeyPinch, 0, 1.15, -2);
    set(Gesture::KeyPinch, 3, 1.05, 0);
    return t;
}

namespace {

/// Reads known keys out of one JSON object and rejects whatever is left over.
class Section {
public:
    Section(const json& j, std::string name) : name_(std::move(name)) {
        if (!j.is_object()) throw ValidationError("config section '" + name_ + "' must be an object");
        obj_ = &j;
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = obj_->find(key);
        if (it == obj_->end()) return;
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw ValidationError("");
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer()) throw ValidationError("");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!it->is_number()) throw ValidationError("");
            } else {
                if (!it->is_string()) throw ValidationError("");
            }
            out = it->get<T>();
        } catch (const std::exception&) {
            throw ValidationError("config key '" + name_ + "." + key + "' has the wrong type");
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = obj_->find(key);
        return it == obj_->end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = obj_->begin(); it != obj_->end(); ++it)
            if (!seen_.contains(it.key()))
                throw ValidationError("unknown config key '" + (name_.empty() ? "" : name_ + ".") + it.key() + "'");
    }

private:
    const json* obj_ = nullptr;
    std::string name_;
    std::set<std::string, std::less<>> seen_;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError("out of range: " + what);
}

json deformation_to_json(const DeformationTable& t) {
    json rows = json::array();
    for (const auto& row : t) {
        json r = json::array();
        for (const auto& d : row) r.push_back(json::array({d.thickness_scale, d.lateral_shift}));
        rows.push_back(r);
    }
    return rows;
}

DeformationTable deformation_from_json(const json& j) {
    DeformationTable t{};
    if (!j.is_array() || j.size() != kNumGestures)
        throw ValidationError("phantom.deformation must be a 9 x 6 array of [scale, shift] pairs");
    for (std::size_t g = 0; g < kNumGestures; ++g) {
        if (!j[g].is_array() || j[g].size() != kNumRegions)
            throw ValidationError("phantom.deformation must be a 9 x 6 array of [scale, shift] pairs");
        for (std::size_t r = 0; r < kNumRegions; ++r) {
            const auto& p = j[g][r];
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
                throw ValidationError("phantom.deformation entries must be [scale, shift]");
            t[g][r] = {p[0].get<double>(), p[1].get<double>()};
        }
    }
    return t;
}

} // namespace

void validate(const RunConfig& c) {
    const auto& p = c.phantom;
    require(p.width > 0 && p.width <= 0xFFFF && p.height > 0 && p.height <= 0xFFFF, "phantom.width/height");
    require(p.speckle_sigma >= 0 && std::isfinite(p.speckle_sigma), "phantom.speckle_sigma");
    require(p.probe_shift_max >= 0, "phantom.probe_shift_max");
    require(p.fps > 0, "phantom.fps");
    require(p.flip_period_s > 0 && p.drift_period_s > 0, "phantom periods");
    for (std::size_t g = 0; g < kNumGestures; ++g)
        for (const auto& d : p.deformation[g])
            require(d.thickness_scale >= 0.4 && d.thickness_scale <= 1.6, "phantom.deformation thickness_scale");
    for (std::size_t a = 0; a < kNumGestures; ++a)
        for (std::size_t b = a + 1; b < kNumGestures; ++b)
            require(p.deformation[a] != p.deformation[b], "phantom.deformation rows must be pairwise distinct");

    const auto& pr = c.protocol;
    require(pr.hold_s > 0 && pr.rest_s > 0 && pr.reps > 0 && pr.realtime_per_gesture_s > 0, "protocol timings");

    const auto& f = c.features;
    require(f.downsample_factor >= 1, "features.downsample_factor");
    require(f.pool_rows >= 1 && f.pool_cols >= 1, "features.pool grid");
    require(f.n_orient >= 1 && f.n_wavelen >= 1 && f.n_phase >= 1, "features Gabor counts");
    require(f.kernel_size >= 1, "features.kernel_size");

    const auto& l = c.learn;
    require(l.knn_k >= 1 && l.nnr_k >= 1, "learn k");
    require(l.rf_trees >= 1 && l.rf_mtry >= 0 && l.rf_max_depth >= 0 && l.rf_min_leaf >= 1, "learn rf");
    require(l.dtc_min_leaf >= 1 && l.dtr_min_leaf >= 1 && l.dtc_max_depth >= 0 && l.dtr_max_depth >= 0, "learn trees");
    require(l.svm_c > 0 && l.svm_tol > 0 && l.svm_max_passes >= 1, "learn svm");
    require(l.poly_degree >= 1 && l.poly_gamma > 0, "learn polynomial kernel");
    require(l.svr_epsilon >= 0, "learn.svr_epsilon");

    const auto& h = c.hand;
    require(h.motor.stall_torque > 0 && h.motor.free_speed > 0 && h.motor.roller_radius > 0, "hand.motor");
    require(h.rom.mcp_max >= 0 && h.rom.pip_max >= 0 && h.rom.thumb_abd_max >= 0, "hand.rom");
    require(h.sensor.amp_gain > 0 && h.sensor.vref > 0 && h.sensor.adc_bits >= 1 && h.sensor.adc_bits <= 24 &&
                h.sensor.sensitivity > 0,
            "hand.sensor");
    require(h.transmission > 0 && h.palm_factor > 0 && h.contact_stiffness > 0 && h.spring_stiffness >= 0,
            "hand mechanics");
    require(h.flex_excursion > 0 && h.abd_excursion > 0 && h.max_substep_s > 0 && h.position_gain > 0,
            "hand excursions");

    const auto& k = c.link;
    require(k.queue_depth >= 1, "link.queue_depth");
    require(k.debounce_m >= 1 && k.debounce_m <= k.debounce_k, "link debounce (1 <= m <= k)");
    require(k.frame_port >= 0 && k.frame_port <= 65535 && k.command_port >= 0 && k.command_port <= 65535, "link ports");
    require(k.settle_s >= 0, "link.settle_s");

    const auto& e = c.eval;
    require(e.train_fraction > 0 && e.train_fraction < 1, "eval.train_fraction");
    require(e.k_folds >= 2 && e.k_inner >= 2, "eval folds");
}

RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config parse failure: ") + e.what());
    }
    RunConfig c;
    Section top(root, "");

    if (const json* j = top.child("phantom")) {
        Section s(*j, "phantom");
        auto& p = c.phantom;
        s.get("width", p.width);
        s.get("height", p.height);
        s.get("speckle_sigma", p.speckle_sigma);
        s.get("probe_shift_max", p.probe_shift_max);
        s.get("fps", p.fps);
        s.get("flip_period_s", p.flip_period_s);
        s.get("drift_period_s", p.drift_period_s);
        if (const json* d = s.child("deformation")) p.deformation = deformation_from_json(*d);
        s.finish();
    }
    if (const json* j = top.child("protocol")) {
        Section s(*j, "protocol");
        auto& p = c.protocol;
        s.get("hold_s", p.hold_s);
        s.get("rest_s", p.rest_s);
        s.get("reps", p.reps);
        s.get("realtime_per_gesture_s", p.realtime_per_gesture_s);
        s.finish();
    }
    if (const json* j = top.child("features")) {
        Section s(*j, "features");
        auto& f = c.features;
        s.get("downsample_factor", f.downsample_factor);
        s.get("pool_rows", f.pool_rows);
        s.get("pool_cols", f.pool_cols);
        s.get("n_orient", f.n_orient);
        s.get("n_wavelen", f.n_wavelen);
        s.get("n_phase", f.n_phase);
        s.get("kernel_size", f.kernel_size);
        s.finish();
    }
    if (const json* j = top.child("learn")) {
        Section s(*j, "learn");
        auto& l = c.learn;
        s.get("knn_k", l.knn_k);
        s.get("nnr_k", l.nnr_k);
        s.get("rf_trees", l.rf_trees);
        s.get("rf_mtry", l.rf_mtry);
        s.get("rf_max_depth", l.rf_max_depth);
        s.get("rf_min_leaf", l.rf_min_leaf);
        s.get("rf_bootstrap", l.rf_bootstrap);
        s.get("dtc_min_leaf", l.dtc_min_leaf);
        s.get("dtc_max_depth", l.dtc_max_depth);
        s.get("dtr_min_leaf", l.dtr_min_leaf);
        s.get("dtr_max_depth", l.dtr_max_depth);
        s.get("svm_c", l.svm_c);
        s.get("svm_tol", l.svm_tol);
        s.get("svm_max_passes", l.svm_max_passes);
        s.get("poly_degree", l.poly_degree);
        s.get("poly_gamma", l.poly_gamma);
        s.get("poly_coef0", l.poly_coef0);
        s.get("svr_epsilon", l.svr_epsilon);
        s.get("standardize", l.standardize);
        s.finish();
    }
    if (const json* j = top.child("hand")) {
        Section s(*j, "hand");
        auto& h = c.hand;
        if (const json* m = s.child("motor")) {
            Section sm(*m, "hand.motor");
            sm.get("stall_torque", h.motor.stall_torque);
            sm.get("free_speed", h.motor.free_speed);
            sm.get("roller_radius", h.motor.roller_radius);
            sm.finish();
        }
        if (const json* r = s.child("rom")) {
            Section sr(*r, "hand.rom");
            sr.get("mcp_max", h.rom.mcp_max);
            sr.get("pip_max", h.rom.pip_max);
            sr.get("thumb_abd_max", h.rom.thumb_abd_max);
            sr.finish();
        }
        if (const json* se = s.child("sensor")) {
            Section ss(*se, "hand.sensor");
            ss.get("sensitivity", h.sensor.sensitivity);
            ss.get("offset", h.sensor.offset);
            ss.get("amp_gain", h.sensor.amp_gain);
            ss.get("vref", h.sensor.vref);
            ss.get("adc_bits", h.sensor.adc_bits);
            ss.finish();
        }
        s.get("transmission", h.transmission);
        s.get("palm_factor", h.palm_factor);
        s.get("contact_stiffness", h.contact_stiffness);
        s.get("spring_stiffness", h.spring_stiffness);
        s.get("flex_excursion", h.flex_excursion);
        s.get("abd_excursion", h.abd_excursion);
        s.get("max_substep_s", h.max_substep_s);
        s.get("position_gain", h.position_gain);
        s.finish();
    }
    if (const json* j = top.child("link")) {
        Section s(*j, "link");
        auto& k = c.link;
        s.get("queue_depth", k.queue_depth);
        s.get("debounce_k", k.debounce_k);
        s.get("debounce_m", k.debounce_m);
        s.get("host", k.host);
        s.get("frame_port", k.frame_port);
        s.get("command_port", k.command_port);
        s.get("settle_s", k.settle_s);
        s.get("paced", k.paced);
        s.finish();
    }
    if (const json* j = top.child("eval")) {
        Section s(*j, "eval");
        auto& e = c.eval;
        s.get("train_fraction", e.train_fraction);
        s.get("k_folds", e.k_folds);
        s.get("k_inner", e.k_inner);
        s.finish();
    }
    top.finish();
    validate(c);
    return c;
}

std::string dump_config(const RunConfig& c) {
    json j;
    const auto& p = c.phantom;
    j["phantom"] = {{"width", p.width},
                    {"height", p.height},
                    {"speckle_sigma", p.speckle_sigma},
                    {"probe_shift_max", p.probe_shift_max},
                    {"fps", p.fps},
                    {"flip_period_s", p.flip_period_s},
                    {"drift_period_s", p.drift_period_s},
                    {"deformation", deformation_to_json(p.deformation)}};
    const auto& pr = c.protocol;
    j["protocol"] = {{"hold_s", pr.hold_s},
                     {"rest_s", pr.rest_s},
                     {"reps", pr.reps},
                     {"realtime_per_gesture_s", pr.realtime_per_gesture_s}};
    const auto& f = c.features;
    j["features"] = {{"downsample_factor", f.downsample_factor}, {"pool_rows", f.pool_rows},
                     {"pool_cols", f.pool_cols},                 {"n_orient", f.n_orient},
                     {"n_wavelen", f.n_wavelen},                 {"n_phase", f.n_phase},
                     {"kernel_size", f.kernel_size}};
    const auto& l = c.learn;
    j["learn"] = {{"knn_k", l.knn_k},
                  {"nnr_k", l.nnr_k},
                  {"rf_trees", l.rf_trees},
                  {"rf_mtry", l.rf_mtry},
                  {"rf_max_depth", l.rf_max_depth},
                  {"rf_min_leaf", l.rf_min_leaf},
                  {"rf_bootstrap", l.rf_bootstrap},
                  {"dtc_min_leaf", l.dtc_min_leaf},
                  {"dtc_max_depth", l.dtc_max_depth},
                  {"dtr_min_leaf", l.dtr_min_leaf},
                  {"dtr_max_depth", l.dtr_max_depth},
                  {"svm_c", l.svm_c},
                  {"svm_tol", l.svm_tol},
                  {"svm_max_passes", l.svm_max_passes},
                  {"poly_degree", l.poly_degree},
                  {"poly_gamma", l.poly_gamma},
                  {"poly_coef0", l.poly_coef0},
                  {"svr_epsilon", l.svr_epsilon},
                  {"standardize", l.standardize}};
    const auto& h = c.hand;
    j["hand"] = {{"motor",
                  {{"stall_torque", h.motor.stall_torque},
                   {"free_speed", h.motor.free_speed},
                   {"roller_radius", h.motor.roller_radius}}},
                 {"rom", {{"mcp_max", h.rom.mcp_max}, {"pip_max", h.rom.pip_max}, {"thumb_abd_max", h.rom.thumb_abd_max}}},
                 {"sensor",
                  {{"sensitivity", h.sensor.sensitivity},
                   {"offset", h.sensor.offset},
                   {"amp_gain", h.sensor.amp_gain},
                   {"vref", h.sensor.vref},
                   {"adc_bits", h.sensor.adc_bits}}},
                 {"transmission", h.transmission},
                 {"palm_factor", h.palm_factor},
                 {"contact_stiffness", h.contact_stiffness},
                 {"spring_stiffness", h.spring_stiffness},
                 {"flex_excursion", h.flex_excursion},
                 {"abd_excursion", h.abd_excursion},
                 {"max_substep_s", h.max_substep_s},
                 {"position_gain", h.position_gain}};
    const auto& k = c.link;
    j["link"] = {{"queue_depth", k.queue_depth}, {"debounce_k", k.debounce_k}, {"debounce_m", k.debounce_m},
                 {"host", k.host},               {"frame_port", k.frame_port}, {"command_port", k.command_port},
                 {"settle_s", k.settle_s},       {"paced", k.paced}};
    const auto& e = c.eval;
    j["eval"] = {{"train_fraction", e.train_fraction}, {"k_folds", e.k_folds}, {"k_inner", e.k_inner}};
    return j.dump(2) + "\n";
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write config " + path.string());
    out << dump_config(cfg);
}

} // namespace smg
