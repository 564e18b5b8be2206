#include "smg/report.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "smg/binio.hpp"
#include "smg/error.hpp"

namespace smg {

using ojson = nlohmann::ordered_json;

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

ojson rows_json(const ComparisonReport& r) {
    ojson rows = ojson::array();
    for (const auto& a : r.rows) {
        ojson e;
        e["algorithm"] = algo_name(a.algo);
        e["accuracy"] = a.accuracy;
        if (r.include_timings) {
            e["fit_seconds"] = a.fit_s;
            e["predict_us_per_frame"] = a.predict_us;
        }
        e["n_train"] = a.n_train;
        e["n_val"] = a.n_val;
        e["hyper"] = ojson::parse(a.hyper_json);
        rows.push_back(std::move(e));
    }
    return rows;
}

} // namespace

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

const AlgoResult* ComparisonReport::find(Algo a) const {
    for (const auto& r : rows)
        if (r.algo == a) return &r;
    return nullptr;
}

ComparisonReport compare_algorithms(const FeatureMatrix& X, std::span<const int> y, std::span<const Algo> algos,
                                    const LearnDefaults& defaults, double split_fraction, std::uint64_t seed) {
    if (algos.empty()) throw ValidationError("no algorithms requested");
    using clock = std::chrono::steady_clock;
    const Split s = split(y, split_fraction, seed);
    FeatureMatrix Xtr, Xva;
    std::vector<int> ytr, yva;
    gather(X, y, s.train, Xtr, ytr);
    gather(X, y, s.val, Xva, yva);

    ComparisonReport rep;
    rep.seed = seed;
    rep.split = split_fraction;
    for (Algo a : algos) {
        const AlgoSpec spec = AlgoSpec::make(a, defaults, seed);
        const auto t0 = clock::now();
        const TrainedModel m = fit(spec, Xtr, ytr);
        const auto t1 = clock::now();
        const auto pred = m.predict_labels(Xva);
        const auto t2 = clock::now();
        int n = m.n_classes();
        for (int v : yva) n = std::max(n, v + 1);
        AlgoResult r;
        r.algo = a;
        r.accuracy = accuracy(confusion_matrix(yva, pred, n));
        r.fit_s = std::chrono::duration<double>(t1 - t0).count();
        r.predict_us = std::chrono::duration<double, std::micro>(t2 - t1).count() / static_cast<double>(yva.size());
        r.n_train = ytr.size();
        r.n_val = yva.size();
        r.hyper_json = hyper_to_json(a, spec.hyper);
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

std::string to_csv(const ComparisonReport& r) {
    std::ostringstream os;
    os << "algorithm,accuracy";
    if (r.include_timings) os << ",fit_seconds,predict_us_per_frame";
    os << ",n_train,n_val,feature_hash,seed\n";
    for (const auto& a : r.rows) {
        os << algo_name(a.algo) << ',' << fixed(a.accuracy, 6);
        if (r.include_timings) os << ',' << fixed(a.fit_s, 6) << ',' << fixed(a.predict_us, 3);
        os << ',' << a.n_train << ',' << a.n_val << ',' << hex64(r.feature_hash) << ',' << r.seed << '\n';
    }
    return os.str();
}

std::string to_json(const ComparisonReport& r) {
    ojson j;
    j["dataset"] = r.dataset;
    j["feature_hash"] = hex64(r.feature_hash);
    j["seed"] = r.seed;
    j["split"] = r.split;
    j["rows"] = rows_json(r);
    return j.dump(2) + "\n";
}

std::string to_text(const ComparisonReport& r) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-8s %9s", "algo", "accuracy");
    os << line;
    if (r.include_timings) {
        std::snprintf(line, sizeof line, " %10s %14s", "fit [s]", "predict [us]");
        os << line;
    }
    os << '\n';
    for (const auto& a : r.rows) {
        std::snprintf(line, sizeof line, "%-8s %8.2f%%", std::string(algo_name(a.algo)).c_str(), 100.0 * a.accuracy);
        os << line;
        if (r.include_timings) {
            std::snprintf(line, sizeof line, " %10.3f %14.1f", a.fit_s, a.predict_us);
            os << line;
        }
        os << '\n';
    }
    return os.str();
}

void emit_report(const ComparisonReport& r, const std::filesystem::path& stem) {
    if (r.rows.empty()) throw ValidationError("report has no rows");
    auto csv = stem;
    csv += ".csv";
    auto js = stem;
    js += ".json";
    const auto c = to_csv(r);
    const auto j = to_json(r);
    write_file(csv, std::span(reinterpret_cast<const std::uint8_t*>(c.data()), c.size()));
    write_file(js, std::span(reinterpret_cast<const std::uint8_t*>(j.data()), j.size()));
}

std::string to_json(const CvReport& r, Algo algo, std::uint64_t seed) {
    ojson j;
    j["scheme"] = r.scheme;
    j["algorithm"] = algo_name(algo);
    j["seed"] = seed;
    j["k_outer"] = r.k_outer;
    if (r.scheme == "nested") j["k_inner"] = r.k_inner;
    j["fold_scores"] = r.fold_scores;
    j["mean"] = r.mean;
    j["std"] = r.std;
    if (!r.chosen.empty()) {
        ojson c = ojson::array();
        for (const auto& s : r.chosen) c.push_back(ojson::parse(s));
        j["chosen"] = c;
    }
    return j.dump(2) + "\n";
}

std::string to_json(const StatResult& r, const std::string& test, std::span<const std::string> groups) {
    ojson j;
    j["test"] = test;
    j["groups"] = std::vector<std::string>(groups.begin(), groups.end());
    j["statistic"] = r.statistic;
    j["p_value"] = r.p_value;
    j["df1"] = r.df1;
    if (test == "anova") j["df2"] = r.df2;
    return j.dump(2) + "\n";
}

} // namespace smg
