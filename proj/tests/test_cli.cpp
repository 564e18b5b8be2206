#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "support.hpp"

namespace {

const std::string kCli = SMG_CLI_PATH;

int run(const std::string& args, const std::filesystem::path& log) {
    const std::string cmd = "'" + kCli + "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

struct Workspace {
    smg::test::TempDir dir;
    std::filesystem::path cfg = dir / "small.json";
    std::filesystem::path data = dir / "d.smgd";
    std::filesystem::path log = dir / "log.txt";

    Workspace() {
        write(cfg, R"({"phantom": {"width": 96, "height": 100, "probe_shift_max": 3},
                       "protocol": {"hold_s": 0.5}, "learn": {"rf_trees": 15}})");
    }
    std::string base() const { return "--config '" + cfg.string() + "' --seed 3 "; }
};

} // namespace

TEST_CASE("usage errors exit with 1") {
    Workspace w;
    CHECK(run("", w.log) == 1);
    CHECK(run("frobnicate", w.log) == 1);
    CHECK(run("train --algo nope --data /dev/null --out x", w.log) == 1);
    CHECK(run("--help", w.log) == 0);
    CHECK(slurp(w.log).find("train") != std::string::npos);
    write(w.dir / "bad.json", R"({"phantom": {"colour": 1}})");
    CHECK(run("--config '" + (w.dir / "bad.json").string() + "' gen --out '" + w.data.string() + "'", w.log) == 1);
    CHECK(slurp(w.log).find("colour") != std::string::npos);
}

TEST_CASE("generate, train, evaluate and inspect") {
    Workspace w;
    REQUIRE(run(w.base() + "gen --out '" + w.data.string() + "'", w.log) == 0);
    CHECK(std::filesystem::file_size(w.data) > 0);
    const auto model = w.dir / "rf.smgm";
    REQUIRE(run(w.base() + "train --algo rf --data '" + w.data.string() + "' --out '" + model.string() + "'", w.log) ==
            0);
    const auto res = w.dir / "eval.json";
    REQUIRE(run(w.base() + "eval --model '" + model.string() + "' --data '" + w.data.string() + "' --out '" +
                    res.string() + "'",
                w.log) == 0);
    const auto j = nlohmann::json::parse(slurp(res));
    CHECK(j["accuracy"].get<double>() >= 0.9);
    CHECK(slurp(w.log).find("accuracy") != std::string::npos);

    CHECK(run("inspect '" + model.string() + "'", w.log) == 0);
    CHECK(slurp(w.log).find("rf") != std::string::npos);
    CHECK(run("inspect '" + w.data.string() + "'", w.log) == 0);
    CHECK(slurp(w.log).find("270") != std::string::npos);

    // a model trained on another feature pipeline is refused
    write(w.dir / "other.json", R"({"phantom": {"width": 96, "height": 100, "probe_shift_max": 3},
                                   "features": {"pool_rows": 3}})");
    CHECK(run("--config '" + (w.dir / "other.json").string() + "' eval --model '" + model.string() + "' --data '" +
                  w.data.string() + "'",
              w.log) != 0);

    write(w.dir / "junk.smgm", "not a model");
    CHECK(run("eval --model '" + (w.dir / "junk.smgm").string() + "' --data '" + w.data.string() + "'", w.log) == 1);
    CHECK(slurp(w.log).find("magic") != std::string::npos);

    // an unwritable output is a runtime failure
    CHECK(run(w.base() + "gen --out '" + (w.dir / "missing" / "d.smgd").string() + "'", w.log) == 2);
}

TEST_CASE("stats on identical groups") {
    Workspace w;
    write(w.dir / "a.txt", "accuracy\n1\n2\n3\n");
    write(w.dir / "b.txt", "1,2,3\n");
    const auto out = w.dir / "s.json";
    REQUIRE(run("stats --groups '" + (w.dir / "a.txt").string() + "' '" + (w.dir / "b.txt").string() + "' --out '" +
                    out.string() + "'",
                w.log) == 0);
    const auto j = nlohmann::json::parse(slurp(out));
    REQUIRE(j.size() == 2);
    for (const auto& r : j) {
        CHECK(r["statistic"].get<double>() == 0.0);
        CHECK(r["p_value"].get<double>() == 1.0);
    }
    write(w.dir / "c.txt", "5\n5\n");
    write(w.dir / "d.txt", "5\n5\n");
    CHECK(run("stats --test anova --groups '" + (w.dir / "c.txt").string() + "' '" + (w.dir / "d.txt").string() + "'",
              w.log) == 1);
    CHECK(slurp(w.log).find("zero variance") != std::string::npos);
}

TEST_CASE("report without timings is byte-identical across runs") {
    Workspace w;
    REQUIRE(run(w.base() + "gen --out '" + w.data.string() + "'", w.log) == 0);
    const auto a = w.dir / "a", b = w.dir / "b";
    const std::string common = w.base() + "report --data '" + w.data.string() + "' --algo knn,dtc,rf --no-timings --out ";
    REQUIRE(run(common + "'" + a.string() + "'", w.log) == 0);
    REQUIRE(run(common + "'" + b.string() + "'", w.log) == 0);
    const auto csv = slurp(a.string() + ".csv");
    CHECK(csv == slurp(b.string() + ".csv"));
    CHECK(slurp(a.string() + ".json") == slurp(b.string() + ".json"));
    CHECK(csv.rfind("algorithm,accuracy,n_train", 0) == 0);
    CHECK(csv.find("fit_seconds") == std::string::npos);
}

TEST_CASE("calibration and streaming commands") {
    Workspace w;
    const auto cal = w.dir / "cal.json";
    REQUIRE(run("--seed 1 calibrate --trials 20 --out '" + cal.string() + "'", w.log) == 0);
    const auto j = nlohmann::json::parse(slurp(cal));
    CHECK(j.dump().find("r_squared") != std::string::npos);

    REQUIRE(run(w.base() + "gen --out '" + w.data.string() + "'", w.log) == 0);
    const auto model = w.dir / "knn.smgm";
    REQUIRE(run(w.base() + "train --algo knn --data '" + w.data.string() + "' --out '" + model.string() + "'", w.log) ==
            0);
    const auto rep = w.dir / "stream.json";
    REQUIRE(run(w.base() + "stream --model '" + model.string() + "' --data '" + w.data.string() +
                    "' --transport tcp --out '" + rep.string() + "'",
                w.log) == 0);
    const auto s = nlohmann::json::parse(slurp(rep));
    CHECK(s["processed"].get<int>() == 270);
    CHECK(s["dropped"].get<int>() == 0);
}
