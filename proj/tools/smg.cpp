#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "smg/config.hpp"
#include "smg/error.hpp"
#include "smg/eval.hpp"
#include "smg/features.hpp"
#include "smg/hand.hpp"
#include "smg/learn.hpp"
#include "smg/link.hpp"
#include "smg/parallel.hpp"
#include "smg/phantom.hpp"
#include "smg/report.hpp"
#include "smg/rng.hpp"
#include "smg/stats.hpp"
#include "smg/store.hpp"

using namespace smg;
using ojson = nlohmann::ordered_json;

namespace {

struct Globals {
    std::string config;
    std::uint64_t seed = 0;
    unsigned jobs = 0;
};

RunConfig config_of(const Globals& g) { return g.config.empty() ? RunConfig{} : load_config(g.config); }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<Gesture> parse_gestures(const std::string& s) {
    std::vector<Gesture> out;
    for (const auto& t : split_list(s)) out.push_back(parse_gesture(t));
    if (out.empty()) throw ValidationError("empty gesture subset");
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ojson model_meta(const TrainedModel& m) {
    try {
        return ojson::parse(m.metadata);
    } catch (const ojson::parse_error&) {
        return ojson::object();
    }
}

// Rebuilds the feature pipeline a model was trained with, or the one named by --bank.
Extractor extractor_for(const TrainedModel& m, const std::string& bank_flag, const RunConfig& cfg) {
    const ojson meta = model_meta(m);
    const std::string bank = !bank_flag.empty() ? bank_flag : meta.value("bank", std::string("gabor"));
    Extractor ex(resolve_bank(bank, cfg.features), cfg.features);
    if (meta.contains("feature_hash")) {
        const auto h = hex64(feature_pipeline_hash(ex.bank(), cfg.features));
        if (meta["feature_hash"].get<std::string>() != h)
            throw ValidationError("feature pipeline mismatch: model was trained with " +
                                  meta["feature_hash"].get<std::string>() + ", current pipeline is " + h);
    }
    return ex;
}

std::vector<std::vector<double>> read_groups(const std::vector<std::string>& paths) {
    std::vector<std::vector<double>> groups;
    for (const auto& p : paths) {
        std::ifstream in(p);
        if (!in) throw IoError("cannot open " + p);
        std::vector<double> g;
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            for (char& c : line)
                if (c == ',' || c == ';' || c == '\t') c = ' ';
            std::istringstream ls(line);
            std::string tok;
            while (ls >> tok) {
                try {
                    std::size_t used = 0;
                    const double v = std::stod(tok, &used);
                    if (used != tok.size()) throw std::invalid_argument(tok);
                    g.push_back(v);
                } catch (const std::exception&) {
                    if (!first) throw ValidationError("non-numeric value '" + tok + "' in " + p);
                }
            }
            first = false;
        }
        groups.push_back(std::move(g));
    }
    return groups;
}

std::string confusion_text(const ConfusionMatrix& cm) {
    std::ostringstream os;
    char buf[32];
    os << "truth\\pred";
    for (int j = 0; j < cm.n; ++j) {
        std::snprintf(buf, sizeof buf, "%6d", j);
        os << buf;
    }
    os << '\n';
    for (int i = 0; i < cm.n; ++i) {
        std::snprintf(buf, sizeof buf, "%-10s", std::string(gesture_name(static_cast<Gesture>(i))).substr(0, 10).c_str());
        os << buf;
        for (int j = 0; j < cm.n; ++j) {
            std::snprintf(buf, sizeof buf, "%6zu", cm.at(i, j));
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

int run(int argc, char** argv) {
    CLI::App app{"Sonomyography gesture-recognition and prosthetic-hand toolkit", "smg"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Seed for every random choice");
    app.add_option("--jobs", g.jobs, "Worker thread cap (0 = all cores)");
    app.fallthrough();

    // gen
    auto* gen = app.add_subcommand("gen", "Render a synthetic dataset");
    std::string protocol = "static", gestures_arg, out;
    double duration = 0.0;
    gen->add_option("--protocol", protocol)->check(CLI::IsMember({"static", "dynamic"}));
    gen->add_option("--gestures", gestures_arg, "Comma-separated gesture names or ids (dynamic)");
    gen->add_option("--duration", duration, "Seconds per gesture (dynamic)")->check(CLI::PositiveNumber);
    gen->add_option("--out", out)->required();

    // train
    auto* train = app.add_subcommand("train", "Fit a learner on a dataset");
    std::string algo_arg, data, bank, model_path, hyper_arg;
    double split_frac = -1.0;
    train->add_option("--algo", algo_arg)->required();
    train->add_option("--data", data)->required()->check(CLI::ExistingFile);
    train->add_option("--bank", bank, "gabor or an SMGF path");
    train->add_option("--out", out)->required();
    train->add_option("--split", split_frac, "Training fraction (1 = all frames)")->check(CLI::Range(0.0, 1.0));
    train->add_option("--hyper", hyper_arg, "JSON object of hyperparameter overrides");

    // eval
    auto* eval = app.add_subcommand("eval", "Score a model on the validation part of a dataset");
    eval->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data)->required()->check(CLI::ExistingFile);
    eval->add_option("--bank", bank);
    eval->add_option("--split", split_frac, "Training fraction; the rest is scored (1 = score all)")
        ->check(CLI::Range(0.0, 1.0));
    eval->add_option("--out", out, "JSON result");

    // cv
    auto* cv = app.add_subcommand("cv", "k-fold, or with --grid non-nested and nested, cross-validation");
    int k = 0, k_inner = 0;
    std::string grid_arg;
    cv->add_option("--algo", algo_arg)->required();
    cv->add_option("--data", data)->required()->check(CLI::ExistingFile);
    cv->add_option("--bank", bank);
    cv->add_option("--k", k, "Outer folds")->check(CLI::Range(2, 1000000));
    cv->add_option("--k-inner", k_inner, "Inner folds")->check(CLI::Range(2, 1000000));
    cv->add_option("--grid", grid_arg, "JSON grid, e.g. {\"trees\":[50,100]}");
    cv->add_option("--out", out, "JSON result");

    // stats
    auto* stats = app.add_subcommand("stats", "One-way ANOVA and Kruskal-Wallis on numeric files");
    std::vector<std::string> group_files;
    std::string test = "both";
    stats->add_option("--groups", group_files)->required()->expected(2, -1)->check(CLI::ExistingFile);
    stats->add_option("--test", test)->check(CLI::IsMember({"anova", "kw", "both"}));
    stats->add_option("--out", out, "JSON result");

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "Fit the force-sensor calibration");
    std::string samples_path;
    int points = 101, trials = 100;
    double max_grams = 1000.0, sigma = 37.0;
    cal->add_option("--samples", samples_path, "CSV of counts,grams")->check(CLI::ExistingFile);
    cal->add_option("--points", points)->check(CLI::Range(2, 1000000));
    cal->add_option("--max-grams", max_grams)->check(CLI::PositiveNumber);
    cal->add_option("--sigma", sigma)->check(CLI::NonNegativeNumber);
    cal->add_option("--trials", trials)->check(CLI::Range(1, 1000000));
    cal->add_option("--out", out, "JSON result");

    // stream
    auto* stream = app.add_subcommand("stream", "Run the closed loop: frames -> classifier -> hand");
    std::string transport = "inproc", trace_path;
    bool paced = false;
    stream->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    stream->add_option("--bank", bank);
    stream->add_option("--data", data, "Replay this dataset instead of a live phantom")->check(CLI::ExistingFile);
    stream->add_option("--gestures", gestures_arg, "Live gestures, held in order");
    stream->add_option("--duration", duration, "Live session seconds in total")->check(CLI::PositiveNumber);
    stream->add_option("--transport", transport)->check(CLI::IsMember({"inproc", "tcp"}));
    stream->add_flag("--paced", paced, "Hold the live source to the phantom frame rate");
    stream->add_option("--trace", trace_path, "Hand telemetry CSV");
    stream->add_option("--out", out, "JSON session report");

    // report
    auto* report = app.add_subcommand("report", "Compare algorithms on one split; writes <out>.csv and <out>.json");
    bool no_timings = false;
    report->add_option("--data", data)->required()->check(CLI::ExistingFile);
    report->add_option("--bank", bank);
    report->add_option("--algo", algo_arg, "Comma-separated list (default all)");
    report->add_option("--split", split_frac)->check(CLI::Range(0.0, 1.0));
    report->add_option("--out", out)->required();
    report->add_flag("--no-timings", no_timings, "Omit timing columns");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Summarize an SMGD, SMGF, SMGM or config file");
    std::string inspect_path;
    inspect->add_option("path", inspect_path)->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    set_max_jobs(g.jobs);
    const RunConfig cfg = config_of(g);
    const double frac = split_frac >= 0.0 ? split_frac : cfg.eval.train_fraction;
    if (bank.empty() && (*train || *cv || *report)) bank = "gabor";

    if (*gen) {
        const PhantomModel m = make_phantom(cfg.phantom);
        m.validate();
        AcquisitionProtocol p = AcquisitionProtocol::from_config(cfg);
        LabeledDataset d;
        if (protocol == "static") {
            d = generate_static_session(m, p, g.seed);
        } else {
            if (duration > 0) p.realtime_per_gesture_s = duration;
            const auto gs = gestures_arg.empty()
                                ? std::vector<Gesture>(kRealtimeGestures.begin(), kRealtimeGestures.end())
                                : parse_gestures(gestures_arg);
            d = generate_dynamic_session(m, gs, p, g.seed);
        }
        write_dataset(d, out);
        std::cout << "wrote " << d.frames.size() << " frames to " << out << '\n';
        return 0;
    }

    if (*train) {
        const Algo a = parse_algo(algo_arg);
        AlgoSpec spec = AlgoSpec::make(a, cfg.learn, g.seed);
        if (!hyper_arg.empty()) spec.hyper = apply_hyper_json(a, hyper_arg, spec.hyper);
        const LabeledDataset d = read_dataset(data);
        const FilterBank b = resolve_bank(bank, cfg.features);
        const Extractor ex(b, cfg.features);
        std::vector<int> y;
        const FeatureMatrix X = extract_dataset(d, ex, &y);
        FeatureMatrix Xtr;
        std::vector<int> ytr;
        if (frac >= 1.0) {
            Xtr = X;
            ytr = y;
        } else {
            const Split s = split(y, frac, g.seed);
            gather(X, y, s.train, Xtr, ytr);
        }
        TrainedModel m = fit(spec, Xtr, ytr);
        ojson meta;
        meta["bank"] = bank;
        meta["feature_hash"] = hex64(feature_pipeline_hash(ex.bank(), cfg.features));
        meta["split"] = frac;
        meta["seed"] = g.seed;
        meta["n_train"] = ytr.size();
        m.metadata = meta.dump();
        save_model(m, out);
        std::cout << "trained " << algo_name(a) << " on " << ytr.size() << " frames, " << X.cols << " features -> "
                  << out << '\n';
        return 0;
    }

    if (*eval) {
        const TrainedModel m = load_model(model_path);
        const Extractor ex = extractor_for(m, bank, cfg);
        const LabeledDataset d = read_dataset(data);
        std::vector<int> y;
        const FeatureMatrix X = extract_dataset(d, ex, &y);
        FeatureMatrix Xv;
        std::vector<int> yv;
        if (frac >= 1.0) {
            Xv = X;
            yv = y;
        } else {
            const Split s = split(y, frac, g.seed);
            gather(X, y, s.val, Xv, yv);
        }
        const auto pred = m.predict_labels(Xv);
        const auto cm = confusion_matrix(yv, pred, kNumGestures);
        const double acc = accuracy(cm);
        std::printf("accuracy %.4f (%zu frames, %s)\n", acc, yv.size(), std::string(algo_name(m.algo())).c_str());
        std::cout << confusion_text(cm);
        if (!out.empty()) {
            ojson j;
            j["algorithm"] = algo_name(m.algo());
            j["accuracy"] = acc;
            j["n"] = yv.size();
            j["confusion"] = cm.counts;
            write_text(out, j.dump(2) + "\n");
        }
        return 0;
    }

    if (*cv) {
        const Algo a = parse_algo(algo_arg);
        const AlgoSpec spec = AlgoSpec::make(a, cfg.learn, g.seed);
        const LabeledDataset d = read_dataset(data);
        const Extractor ex(resolve_bank(bank, cfg.features), cfg.features);
        std::vector<int> y;
        const FeatureMatrix X = extract_dataset(d, ex, &y);
        const int ko = k ? k : cfg.eval.k_folds;
        const int ki = k_inner ? k_inner : cfg.eval.k_inner;
        ojson j = ojson::array();
        auto show = [&](const CvReport& r) {
            std::printf("%-10s mean %.4f  std %.4f  folds", r.scheme.c_str(), r.mean, r.std);
            for (double s : r.fold_scores) std::printf(" %.4f", s);
            std::printf("\n");
            for (std::size_t i = 0; i < r.chosen.size(); ++i) std::printf("  chosen[%zu] %s\n", i, r.chosen[i].c_str());
            j.push_back(ojson::parse(to_json(r, a, g.seed)));
        };
        if (grid_arg.empty()) {
            show(kfold_cv(spec, X, y, ko, g.seed));
        } else {
            const auto grid = parse_grid(a, grid_arg, spec.hyper);
            show(grid_search_cv(spec, X, y, ko, grid, g.seed));
            show(nested_cv(spec, X, y, ko, ki, grid, g.seed));
        }
        if (!out.empty()) write_text(out, j.dump(2) + "\n");
        return 0;
    }

    if (*stats) {
        const auto groups = read_groups(group_files);
        ojson j = ojson::array();
        auto show = [&](const std::string& name, const StatResult& r) {
            std::printf("%-6s statistic %.6g  p %.6g  df %g", name.c_str(), r.statistic, r.p_value, r.df1);
            if (name == "anova") std::printf(",%g", r.df2);
            std::printf("\n");
            j.push_back(ojson::parse(to_json(r, name, group_files)));
        };
        if (test != "kw") show("anova", anova_oneway(groups));
        if (test != "anova") show("kw", kruskal_wallis(groups));
        if (!out.empty()) write_text(out, j.dump(2) + "\n");
        return 0;
    }

    if (*cal) {
        ojson j;
        if (!samples_path.empty()) {
            const auto cols = read_groups({samples_path});
            const auto& v = cols.front();
            if (v.size() % 2) throw ValidationError("samples file must hold counts,grams pairs");
            std::vector<CalibrationSample> s;
            for (std::size_t i = 0; i < v.size(); i += 2) s.push_back({v[i], v[i + 1]});
            const auto c = calibrate_sensor(s);
            std::printf("slope %.6f g/count  intercept %.4f g  r2 %.6f  mse %.3f g^2 (n=%zu)\n", c.slope, c.intercept,
                        c.r_squared, c.mse, c.n);
            j = {{"slope", c.slope}, {"intercept", c.intercept}, {"r_squared", c.r_squared}, {"mse_g2", c.mse}, {"n", c.n}};
        } else {
            std::vector<double> r2, mse;
            for (int t = 0; t < trials; ++t) {
                const auto s = synthetic_calibration(cfg.hand.sensor, max_grams, points, sigma,
                                                     mix_seed({g.seed, static_cast<std::uint64_t>(t)}));
                const auto c = calibrate_sensor(s);
                r2.push_back(c.r_squared);
                mse.push_back(c.mse);
            }
            std::printf("r2 %.4f +/- %.4f  mse %.0f +/- %.0f g^2  (%d trials, %d points, 0-%g g, sigma %g g)\n",
                        mean_of(r2), sample_std(r2), mean_of(mse), sample_std(mse), trials, points, max_grams, sigma);
            j = {{"trials", trials},     {"points", points},           {"max_grams", max_grams},
                 {"sigma_g", sigma},     {"r_squared_mean", mean_of(r2)}, {"r_squared_std", sample_std(r2)},
                 {"mse_g2_mean", mean_of(mse)}, {"mse_g2_std", sample_std(mse)}};
        }
        if (!out.empty()) write_text(out, j.dump(2) + "\n");
        return 0;
    }

    if (*stream) {
        const TrainedModel m = load_model(model_path);
        const Extractor ex = extractor_for(m, bank, cfg);
        Hand hand(cfg.hand);
        hand.set_trace(!trace_path.empty());
        PipelineOptions opt;
        opt.link = cfg.link;
        opt.transport = parse_transport(transport);
        opt.fps = cfg.phantom.fps;
        SessionReport r;
        if (!data.empty()) {
            r = run_pipeline(read_dataset(data), ex, m, hand, opt);
        } else {
            const PhantomModel pm = make_phantom(cfg.phantom);
            LiveSource src;
            src.model = &pm;
            src.gestures = gestures_arg.empty() ? std::vector<Gesture>(kRealtimeGestures.begin(), kRealtimeGestures.end())
                                                : parse_gestures(gestures_arg);
            const double total = duration > 0 ? duration : cfg.protocol.realtime_per_gesture_s * src.gestures.size();
            src.seconds_per_gesture = total / static_cast<double>(src.gestures.size());
            src.seed = g.seed;
            src.paced = paced || cfg.link.paced;
            r = run_pipeline(src, ex, m, hand, opt);
        }
        std::printf("frames %zu processed %zu dropped %zu transitions %zu accuracy %.4f fps %.1f\n", r.received,
                    r.processed, r.dropped, r.transitions,
                    r.processed ? static_cast<double>(r.correct) / static_cast<double>(r.processed) : 0.0, r.fps);
        std::printf("latency p50/p95 ms: features %.2f/%.2f predict %.3f/%.3f command %.3f/%.3f\n",
                    r.capture_to_features.p50_ms, r.capture_to_features.p95_ms, r.features_to_predict.p50_ms,
                    r.features_to_predict.p95_ms, r.predict_to_command.p50_ms, r.predict_to_command.p95_ms);
        if (r.final_command) std::printf("final command %s\n", std::string(gesture_name(*r.final_command)).c_str());
        if (!out.empty()) write_text(out, to_json(r));
        if (!trace_path.empty()) {
            std::string csv = telemetry_csv_header();
            for (const auto& t : hand.trace()) csv += telemetry_csv_row(t);
            write_text(trace_path, csv);
        }
        return 0;
    }

    if (*report) {
        std::vector<Algo> algos;
        if (algo_arg.empty()) algos.assign(kAllAlgos.begin(), kAllAlgos.end());
        else
            for (const auto& s : split_list(algo_arg)) algos.push_back(parse_algo(s));
        const LabeledDataset d = read_dataset(data);
        const Extractor ex(resolve_bank(bank, cfg.features), cfg.features);
        std::vector<int> y;
        const FeatureMatrix X = extract_dataset(d, ex, &y);
        ComparisonReport r = compare_algorithms(X, y, algos, cfg.learn, frac >= 1.0 ? cfg.eval.train_fraction : frac, g.seed);
        r.feature_hash = feature_pipeline_hash(ex.bank(), cfg.features);
        r.dataset = std::filesystem::path(data).filename().string();
        r.include_timings = !no_timings;
        emit_report(r, out);
        std::cout << to_text(r);
        return 0;
    }

    if (*inspect) {
        const auto bytes = read_file(inspect_path);
        const std::string magic(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(4, bytes.size())));
        if (magic == "SMGD") {
            const auto d = decode_dataset(bytes);
            std::array<std::size_t, kNumGestures> counts{};
            for (const auto& f : d.frames) ++counts[static_cast<std::size_t>(gesture_id(f.label))];
            std::printf("SMGD dataset: %zu frames, %ux%u\n", d.frames.size(), d.frames.front().width, d.frames.front().height);
            for (int i = 0; i < kNumGestures; ++i)
                if (counts[static_cast<std::size_t>(i)])
                    std::printf("  %-12s %zu\n", std::string(gesture_name(static_cast<Gesture>(i))).c_str(),
                                counts[static_cast<std::size_t>(i)]);
        } else if (magic == "SMGF") {
            const auto b = decode_filterbank(bytes);
            std::printf("SMGF filter bank: %d filters x %d channels x %dx%d\n", b.num_filters, b.channels, b.kh, b.kw);
        } else if (magic == "SMGM") {
            const auto m = deserialize_model(bytes);
            std::printf("SMGM model: %s, %d classes, %zu features\n  hyper %s\n  meta %s\n",
                        std::string(algo_name(m.algo())).c_str(), m.n_classes(), m.feature_dim(),
                        hyper_to_json(m.algo(), m.spec().hyper).c_str(), m.metadata.c_str());
        } else {
            const auto c = parse_config(std::string(bytes.begin(), bytes.end()));
            std::cout << dump_config(c);
        }
        return 0;
    }
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
