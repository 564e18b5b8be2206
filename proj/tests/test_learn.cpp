#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "smg/error.hpp"
#include "smg/learn.hpp"
#include "smg/rng.hpp"
#include "smg/store.hpp"
#include "smg/svm.hpp"
#include "smg/tree.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace smg;

namespace {

FeatureMatrix matrix(std::size_t rows, std::size_t cols, std::vector<float> v) {
    FeatureMatrix m(rows, cols);
    m.data = std::move(v);
    return m;
}

/// Gaussian blobs around well separated class centres.
FeatureMatrix blobs(Rng& rng, int n_classes, int per_class, std::size_t d, double spread, std::vector<int>& y) {
    std::vector<std::vector<double>> centre(static_cast<std::size_t>(n_classes), std::vector<double>(d));
    for (auto& c : centre)
        for (auto& v : c) v = 4.0 * rng.normal();
    FeatureMatrix X(static_cast<std::size_t>(n_classes * per_class), d);
    y.clear();
    for (int i = 0; i < n_classes * per_class; ++i) {
        const int cls = i % n_classes;
        y.push_back(cls);
        for (std::size_t j = 0; j < d; ++j)
            X.row(static_cast<std::size_t>(i))[j] = static_cast<float>(centre[cls][j] + spread * rng.normal());
    }
    return X;
}

AlgoSpec quick(Algo a) {
    auto s = AlgoSpec::make(a, {}, 3);
    s.hyper.trees = 10;
    return s;
}

} // namespace

TEST_CASE("algorithm names round trip") {
    for (auto a : kAllAlgos) CHECK(parse_algo(algo_name(a)) == a);
    CHECK(algo_name(Algo::SVM_P) == "svm-p");
    CHECK_THROWS_AS(parse_algo("svm"), ValidationError);
    CHECK(is_regressor(Algo::NNR));
    CHECK_FALSE(is_regressor(Algo::RF));
}

TEST_CASE("1-NN memorizes distinct training points") {
    Rng rng(1);
    std::vector<int> y;
    const auto X = blobs(rng, 5, 20, 6, 3.0, y);
    auto s = AlgoSpec::make(Algo::KNN);
    s.hyper.k = 1;
    const auto m = fit(s, X, y);
    CHECK(m.predict_labels(X) == y);
}

TEST_CASE("3-NN majority example") {
    const auto X = matrix(5, 1, {0.0f, 1.0f, 2.0f, 10.0f, 11.0f});
    const std::vector<int> y{0, 1, 1, 2, 2};
    auto s = AlgoSpec::make(Algo::KNN);
    s.hyper.k = 3;
    const auto m = fit(s, X, y);
    const float q0[] = {0.2f}, q1[] = {10.4f};
    const auto p = m.predict(q0);
    CHECK(p.label == 1);
    CHECK(p.scores[0] == doctest::Approx(1.0 / 3));
    CHECK(p.scores[1] == doctest::Approx(2.0 / 3));
    CHECK(m.predict(q1).label == 2);

    s = AlgoSpec::make(Algo::NNR);
    s.hyper.k = 3;
    const auto r = fit(s, X, y);
    CHECK(r.predict(q0).raw == doctest::Approx(2.0 / 3));
    CHECK(r.predict(q0).label == 1);
    CHECK(r.predict(q1).raw == doctest::Approx(5.0 / 3));
    CHECK(r.predict(q1).label == 2);
}

TEST_CASE("k-NN agrees with an exhaustive scan") {
    Rng rng(2);
    for (int trial = 0; trial < 4; ++trial) {
        const int n = 50 + static_cast<int>(rng.below(450));
        const std::size_t d = 1 + rng.below(32);
        const int nc = 2 + static_cast<int>(rng.below(7));
        FeatureMatrix X(static_cast<std::size_t>(n), d);
        std::vector<int> y(static_cast<std::size_t>(n));
        for (auto& v : X.data) v = static_cast<float>(rng.normal());
        for (auto& v : y) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(nc)));
        y[0] = nc - 1;
        for (int k : {1, 3, 5, 7}) {
            auto s = AlgoSpec::make(Algo::KNN);
            s.hyper.k = k;
            const auto m = fit(s, X, y);
            for (int q = 0; q < 40; ++q) {
                std::vector<float> x(d);
                for (auto& v : x) v = static_cast<float>(rng.normal());
                REQUIRE(m.predict(x).label == oracle::knn_label(X, y, x, k, nc));
            }
        }
    }
}

TEST_CASE("a depth-1 tree finds the separating threshold") {
    FeatureMatrix X(10, 1);
    std::vector<int> y(10);
    for (int i = 0; i < 10; ++i) {
        X.data[static_cast<std::size_t>(i)] = static_cast<float>(i);
        y[static_cast<std::size_t>(i)] = i < 4 ? 0 : 1;
    }
    const std::vector<double> t(y.begin(), y.end());
    std::vector<std::size_t> all(10);
    std::iota(all.begin(), all.end(), 0);
    DecisionTree::Params p;
    p.n_classes = 2;
    const auto tree = DecisionTree::grow(X, t, all, p);
    REQUIRE(tree.nodes().size() == 3);
    const auto& root = tree.nodes()[0];
    CHECK(root.feature == 0);
    CHECK(root.threshold >= 3.0f);
    CHECK(root.threshold < 4.0f);
    CHECK(tree.depth() == 1);
    CHECK(fit(AlgoSpec::make(Algo::DTC), X, y).predict_labels(X) == y);
}

TEST_CASE("tree leaves hold the majority or mean of their partition") {
    Rng rng(4);
    FeatureMatrix X(300, 4);
    for (auto& v : X.data) v = static_cast<float>(rng.below(20));
    std::vector<double> cls(300), reg(300);
    for (std::size_t i = 0; i < 300; ++i) {
        cls[i] = static_cast<double>(rng.below(4));
        reg[i] = rng.normal();
    }
    std::vector<std::size_t> all(300);
    std::iota(all.begin(), all.end(), 0);
    for (int min_leaf : {1, 5, 20}) {
        DecisionTree::Params pc;
        pc.n_classes = 4;
        pc.min_leaf = min_leaf;
        pc.max_depth = 6;
        const auto tc = DecisionTree::grow(X, cls, all, pc);
        DecisionTree::Params pr = pc;
        pr.criterion = DecisionTree::Criterion::Variance;
        const auto tr = DecisionTree::grow(X, reg, all, pr);

        std::map<int, std::vector<std::size_t>> lc, lr;
        for (std::size_t i = 0; i < 300; ++i) {
            lc[tc.leaf_index(X.row(i))].push_back(i);
            lr[tr.leaf_index(X.row(i))].push_back(i);
        }
        CHECK(tc.depth() <= 6);
        for (const auto& [leaf, rows] : lc) {
            const auto& node = tc.nodes()[static_cast<std::size_t>(leaf)];
            REQUIRE(node.is_leaf());
            REQUIRE(static_cast<int>(rows.size()) >= min_leaf);
            REQUIRE(node.samples == static_cast<int>(rows.size()));
            std::array<int, 4> votes{};
            for (auto i : rows) ++votes[static_cast<std::size_t>(cls[i])];
            REQUIRE(node.value == double(std::max_element(votes.begin(), votes.end()) - votes.begin()));
        }
        for (const auto& [leaf, rows] : lr) {
            const auto& node = tr.nodes()[static_cast<std::size_t>(leaf)];
            REQUIRE(static_cast<int>(rows.size()) >= min_leaf);
            double mean = 0;
            for (auto i : rows) mean += reg[i];
            REQUIRE(node.value == doctest::Approx(mean / double(rows.size())));
        }
    }
}

TEST_CASE("one-tree forest without bootstrap or feature sampling equals the tree") {
    Rng rng(9);
    FeatureMatrix X(50, 5);
    std::vector<int> y(50);
    for (auto& v : X.data) v = static_cast<float>(rng.normal());
    for (auto& v : y) v = static_cast<int>(rng.below(3));
    y[0] = 2;
    auto rf = AlgoSpec::make(Algo::RF);
    rf.hyper.trees = 1;
    rf.hyper.bootstrap = false;
    rf.hyper.mtry = 5;
    const auto a = fit(rf, X, y);
    const auto b = fit(AlgoSpec::make(Algo::DTC), X, y);
    for (int q = 0; q < 500; ++q) {
        std::vector<float> x(5);
        for (auto& v : x) v = static_cast<float>(rng.normal());
        REQUIRE(a.predict(x).label == b.predict(x).label);
    }
    CHECK(a.predict_labels(X) == y);
}

TEST_CASE("linear SVM on separable data satisfies the KKT conditions") {
    Rng rng(12);
    FeatureMatrix X(80, 2);
    std::vector<std::int8_t> y(80);
    for (std::size_t i = 0; i < 80; ++i) {
        const int s = i % 2 ? 1 : -1;
        X.row(i)[0] = static_cast<float>(s * (1.5 + rng.uniform()));
        X.row(i)[1] = static_cast<float>(3.0 * rng.normal());
        y[i] = static_cast<std::int8_t>(s);
    }
    const Kernel k;
    const auto gram = kernel_matrix(X, k);
    const double C = 10.0, tol = 1e-4;
    SmoResult info;
    const auto f = train_svc(X, gram, y, k, C, tol, 1000000, &info);
    CHECK(info.converged);
    double sum_ay = 0;
    for (std::size_t i = 0; i < 80; ++i) {
        const double a = info.alpha[i];
        const double m = y[i] * f.decision(X.row(i), k);
        sum_ay += a * y[i];
        REQUIRE(a >= 0.0);
        REQUIRE(a <= C);
        REQUIRE(m > 0.0);
        if (a < 1e-9) REQUIRE(m >= 1.0 - 1e-3);
        else if (a < C - 1e-9) REQUIRE(std::abs(m - 1.0) <= 1e-3);
        else REQUIRE(m <= 1.0 + 1e-3);
    }
    CHECK(std::abs(sum_ay) < 1e-9);

    auto s = AlgoSpec::make(Algo::SVM_L);
    std::vector<int> yl(80);
    for (std::size_t i = 0; i < 80; ++i) yl[i] = y[i] > 0 ? 1 : 0;
    CHECK(fit(s, X, yl).predict_labels(X) == yl);
}

TEST_CASE("SVR recovers a noiseless linear function") {
    Rng rng(13);
    FeatureMatrix X(20, 3);
    std::vector<double> z(20);
    for (std::size_t i = 0; i < 20; ++i) {
        for (auto& v : X.row(i)) v = static_cast<float>(rng.uniform() * 2 - 1);
        z[i] = 0.5 * X.row(i)[0] - 1.2 * X.row(i)[1] + 2.0 * X.row(i)[2] + 0.3;
    }
    const Kernel k;
    const auto gram = kernel_matrix(X, k);
    const auto f = train_svr(X, gram, z, k, 1000.0, 0.01, 1e-5, 1000000);
    double mse = 0;
    for (std::size_t i = 0; i < 20; ++i) mse += std::pow(f.decision(X.row(i), k) - z[i], 2);
    CHECK(mse / 20 <= 1e-3);
}

TEST_CASE("every algorithm learns a clustered problem and survives serialization") {
    Rng rng(21);
    std::vector<int> y;
    const auto X = blobs(rng, 4, 30, 8, 0.5, y);
    FeatureMatrix Q(100, 8);
    for (auto& v : Q.data) v = static_cast<float>(4.0 * rng.normal());
    test::TempDir tmp;
    for (auto a : kAllAlgos) {
        CAPTURE(algo_name(a));
        auto s = quick(a);
        if (a == Algo::SVM_P || a == Algo::SVR_P) s.hyper.gamma = 0.05;
        s.hyper.standardize = a == Algo::SVM_P;
        auto m = fit(s, X, y);
        m.metadata = R"({"note":"x"})";
        if (!is_regressor(a)) CHECK(m.predict_labels(X) == y);
        const auto bytes = serialize_model(m);
        const auto back = deserialize_model(bytes);
        CHECK(back.algo() == a);
        CHECK(hyper_to_json(a, back.spec().hyper) == hyper_to_json(a, m.spec().hyper));
        CHECK(back.spec().seed == m.spec().seed);
        CHECK(back.metadata == m.metadata);
        CHECK(serialize_model(back) == bytes);
        for (std::size_t i = 0; i < Q.rows; ++i) {
            const auto p = m.predict(Q.row(i)), q = back.predict(Q.row(i));
            REQUIRE(p.label == q.label);
            REQUIRE(p.raw == q.raw);
        }
        save_model(m, tmp / "m.smgm");
        CHECK(serialize_model(load_model(tmp / "m.smgm")) == bytes);
    }
}

TEST_CASE("model decoding rejects corrupt input") {
    Rng rng(22);
    std::vector<int> y;
    const auto X = blobs(rng, 3, 10, 4, 0.5, y);
    const auto m = fit(quick(Algo::DTC), X, y);
    const auto bytes = serialize_model(m);
    auto blob = decode_model_blob(bytes);
    blob.algo_id = static_cast<std::uint8_t>(Algo::KNN);
    CHECK_THROWS_WITH_AS(deserialize_model(encode_model_blob(blob)), doctest::Contains("algo_id mismatch"),
                         FormatError);
    blob = decode_model_blob(bytes);
    blob.algo_id = 42;
    CHECK_THROWS_AS(deserialize_model(encode_model_blob(blob)), FormatError);
    blob = decode_model_blob(bytes);
    blob.payload.push_back(0);
    CHECK_THROWS_WITH_AS(deserialize_model(encode_model_blob(blob)), doctest::Contains("trailing"), FormatError);
    blob = decode_model_blob(bytes);
    blob.payload.resize(blob.payload.size() - 3);
    CHECK_THROWS_AS(deserialize_model(encode_model_blob(blob)), FormatError);
    blob = decode_model_blob(bytes);
    blob.hyper_json = "{not json";
    CHECK_THROWS_AS(deserialize_model(encode_model_blob(blob)), FormatError);
}

TEST_CASE("dimension and data errors") {
    Rng rng(23);
    std::vector<int> y;
    const auto X = blobs(rng, 3, 10, 4, 0.5, y);
    const auto m = fit(quick(Algo::KNN), X, y);
    const std::vector<float> short_x(3, 0.0f);
    CHECK_THROWS_WITH_AS(m.predict(short_x), doctest::Contains("dimension mismatch"), ValidationError);
    CHECK_THROWS_AS(m.predict_labels(FeatureMatrix(2, 5)), ValidationError);
    const std::vector<int> fewer(y.begin(), y.end() - 1);
    CHECK_THROWS_WITH_AS(fit(quick(Algo::KNN), X, fewer), doctest::Contains("dimension mismatch"), ValidationError);
    CHECK_THROWS_AS(fit(quick(Algo::KNN), FeatureMatrix{}, std::vector<int>{}), ValidationError);
    const std::vector<int> classes{0, 1, 2, 5};
    CHECK_THROWS_WITH_AS(fit(quick(Algo::DTC), X, y, classes), doctest::Contains("class 5 has zero samples"),
                         ValidationError);
    CHECK(fit(quick(Algo::DTR), X, y, classes).n_classes() == 6);
    CHECK_THROWS_AS(TrainedModel{}.predict(short_x), ValidationError);
}

TEST_CASE("training is deterministic to the byte") {
    Rng rng(31);
    std::vector<int> y;
    const auto X = blobs(rng, 3, 25, 6, 1.5, y);
    for (auto a : kAllAlgos) {
        CAPTURE(algo_name(a));
        const auto s = quick(a);
        CHECK(serialize_model(fit(s, X, y)) == serialize_model(fit(s, X, y)));
    }
    auto s = quick(Algo::RF);
    const auto a = serialize_model(fit(s, X, y));
    s.seed = 4;
    CHECK(serialize_model(fit(s, X, y)) != a);
}

TEST_CASE("classifiers are equivariant under label permutation") {
    Rng rng(41);
    std::vector<int> y;
    const auto X = blobs(rng, 5, 20, 6, 0.8, y);
    const std::vector<int> perm{3, 0, 4, 1, 2};
    std::vector<int> py(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) py[i] = perm[static_cast<std::size_t>(y[i])];
    FeatureMatrix Q(200, 6);
    for (auto& v : Q.data) v = static_cast<float>(4.0 * rng.normal());
    for (auto a : {Algo::KNN, Algo::DTC, Algo::RF, Algo::SVM_L}) {
        CAPTURE(algo_name(a));
        auto s = quick(a);
        s.hyper.k = 1;
        const auto p0 = fit(s, X, y).predict_labels(Q);
        const auto p1 = fit(s, X, py).predict_labels(Q);
        std::size_t agree = 0;
        for (std::size_t i = 0; i < Q.rows; ++i) agree += p1[i] == perm[static_cast<std::size_t>(p0[i])];
        if (a == Algo::RF)
            CHECK(agree >= 190); // vote ties far from the data may resolve differently
        else
            CHECK(agree == Q.rows);
    }
}

TEST_CASE("regression outputs decode by round-half-even and clamping") {
    CHECK(decode_regression(2.5, 9) == 2);
    CHECK(decode_regression(3.5, 9) == 4);
    CHECK(decode_regression(3.49, 9) == 3);
    CHECK(decode_regression(-0.7, 9) == 0);
    CHECK(decode_regression(12.0, 9) == 8);
    CHECK(decode_regression(0.5, 9) == 0);
    CHECK_THROWS_AS(decode_regression(std::nan(""), 9), ValidationError);
    CHECK_THROWS_AS(decode_regression(INFINITY, 9), ValidationError);
}

TEST_CASE("hyperparameter JSON") {
    const auto h = default_hyper(Algo::RF);
    CHECK(h.trees == 100);
    CHECK(apply_hyper_json(Algo::RF, hyper_to_json(Algo::RF, h), Hyper{}) == h);
    CHECK(apply_hyper_json(Algo::KNN, R"({"k": 9})", h).k == 9);
    CHECK_THROWS_WITH_AS(apply_hyper_json(Algo::KNN, R"({"trees": 9})", h), doctest::Contains("does not apply"),
                         ValidationError);
    CHECK_THROWS_WITH_AS(apply_hyper_json(Algo::KNN, R"({"k": "nine"})", h), doctest::Contains("wrong type"),
                         ValidationError);
    CHECK_THROWS_AS(apply_hyper_json(Algo::KNN, R"({"k": 0})", h), ValidationError);
    CHECK_THROWS_AS(apply_hyper_json(Algo::KNN, "[1]", h), ValidationError);
    CHECK_THROWS_AS(apply_hyper_json(Algo::KNN, "{", h), ValidationError);
    CHECK_THROWS_AS(apply_hyper_json(Algo::SVR_L, R"({"epsilon": -1})", h), ValidationError);
    CHECK(apply_hyper_json(Algo::SVM_P, R"({"degree": 2, "gamma": 0.5})", h).degree == 2);
    CHECK_THROWS_AS(apply_hyper_json(Algo::SVM_L, R"({"degree": 2})", h), ValidationError);
}
