#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "semform/classifier.hpp"
#include "semform/error.hpp"
#include "semform/providers.hpp"
#include "semform/reference.hpp"
#include "oracles.hpp"

using namespace semform;
using namespace semform::testing;
namespace st = semform::testing;

TEST_CASE("class weights") {
    std::vector<Group> y(23, Group::AD);
    y.insert(y.end(), 116, Group::Control);
    const auto w = class_weights(y);
    CHECK(w.at(Group::AD) == doctest::Approx(3.0217).epsilon(1e-4));
    CHECK(w.at(Group::Control) == doctest::Approx(0.5991).epsilon(1e-4));
    CHECK(w.at(Group::AD) == 139.0 / 46.0);
    double total = 0;
    for (Group g : y) total += w.at(g);
    CHECK(total == doctest::Approx(139.0).epsilon(1e-14));

    std::vector<Group> b(78, Group::AD);
    b.insert(b.end(), 78, Group::Control);
    CHECK(class_weights(b).at(Group::AD) == 1.0);
    CHECK(class_weights(b).at(Group::Control) == 1.0);
    CHECK_THROWS_AS(class_weights(std::vector<Group>(5, Group::AD)), DataError);
}

TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(31337);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> uw(0.2, 3.0);
    for (int inst = 0; inst < 20; ++inst) {
        const std::size_t dim = 3 + inst % 6, n = 5 + inst;
        LinearHead h;
        for (std::size_t j = 0; j < dim; ++j) h.weights.push_back(nd(rng));
        h.bias = nd(rng);
        std::vector<EmbeddingVector> x(n);
        std::vector<Group> y(n);
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < dim; ++j) x[i].values.push_back(nd(rng));
            y[i] = i % 3 == 0 ? Group::AD : Group::Control;
            w[i] = uw(rng);
        }
        const double l2 = 0.01 * (inst % 4);
        const auto g = loss_and_gradient(h, x, y, w, l2);
        const double step = 1e-5;
        auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); };
        for (std::size_t j = 0; j < dim; ++j) {
            auto hp = h, hm = h;
            hp.weights[j] += step;
            hm.weights[j] -= step;
            const double fd = (loss_and_gradient(hp, x, y, w, l2).loss - loss_and_gradient(hm, x, y, w, l2).loss) / (2 * step);
            CHECK(rel(g.grad_weights[j], fd) < 1e-4);
        }
        auto hp = h, hm = h;
        hp.bias += step;
        hm.bias -= step;
        const double fd = (loss_and_gradient(hp, x, y, w, l2).loss - loss_and_gradient(hm, x, y, w, l2).loss) / (2 * step);
        CHECK(rel(g.grad_bias, fd) < 1e-4);
    }
}

TEST_CASE("separable toy set is learned perfectly") {
    const auto toy = separable(30, 4);
    const CoordinateEmbedder e;
    std::vector<EmbeddingVector> x;
    for (const auto& t : toy.dataset.transcripts) x.push_back(e.embed(t.text));
    const auto y = toy.dataset.labels();
    TrainConfig cfg;
    cfg.max_epochs = 200;
    const auto head = train(x, y, cfg);
    const auto p = predict(head, x);
    CHECK(p.labels == y);
    CHECK(macro_f1(p.labels, y) == 1.0);
}

TEST_CASE("class weighting raises minority recall on imbalanced blobs") {
    const auto b = load_blobs();
    REQUIRE(b.x.size() == 240);
    TrainConfig weighted;
    weighted.seed = 15;
    TrainConfig plain = weighted;
    plain.class_weighting = false;
    const double rw = recall_ad(train(b.x, b.y, weighted), b);
    const double rp = recall_ad(train(b.x, b.y, plain), b);
    CAPTURE(rw);
    CAPTURE(rp);
    CHECK(rw > rp);
}

TEST_CASE("prediction rules") {
    LinearHead zero;
    zero.weights.assign(3, 0.0);
    const std::vector<EmbeddingVector> x{{{1, 2, 3}}, {{-4, 0, 2}}};
    const auto p = predict(zero, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(p.scores[i] == 0.5);
        CHECK(p.labels[i] == Group::AD);
    }
    CHECK_THROWS(predict(zero, std::vector<EmbeddingVector>{{{1, 2}}}));
}

TEST_CASE("macro-F1 and per-class accuracy") {
    using enum Group;
    const std::vector<Group> gold{AD, AD, Control, Control};
    CHECK(macro_f1(gold, gold) == 1.0);
    const auto perfect = per_class_accuracy(gold, gold);
    CHECK(perfect.ad == 1.0);
    CHECK(perfect.control == 1.0);
    const std::vector<Group> all_c(4, Control);
    CHECK(macro_f1(all_c, gold) == doctest::Approx(1.0 / 3.0));
    const auto acc = per_class_accuracy(all_c, gold);
    CHECK(acc.ad == 0.0);
    CHECK(acc.control == 1.0);
    CHECK_THROWS_AS(macro_f1(all_c, std::vector<Group>{AD, Control}), DataError);
    CHECK_THROWS_AS(macro_f1(all_c, all_c), DataError);
}

TEST_CASE("non-finite training input") {
    std::vector<EmbeddingVector> x{{{1.0, std::nan("")}}, {{0.0, 1.0}}, {{1.0, 1.0}}, {{2.0, 0.0}}};
    const std::vector<Group> y{Group::AD, Group::Control, Group::AD, Group::Control};
    CHECK_THROWS_AS(train(x, y, TrainConfig{}), TrainingError);
}

TEST_CASE("cross-validation") {
    const auto toy = separable(20, 9);
    const CoordinateEmbedder e;
    const auto seeds = run_seeds(3, 4);
    TrainConfig cfg;
    cfg.max_epochs = 30;
    SUBCASE("seeds are distinct and reproducible") {
        const auto s = run_seeds(0);
        CHECK(s.size() == 10);
        CHECK(std::set<std::uint64_t>(s.begin(), s.end()).size() == 10);
        CHECK(run_seeds(0) == s);
    }
    SUBCASE("fold pairing across corpora of one dataset") {
        auto other = toy.corpus;
        other.kind = TransformationKind::Storyboard;
        for (auto& it : other.items) it.text = coords({1.0, 2.0});
        const auto a = cross_validate(toy.corpus, toy.dataset, 5, seeds, e, cfg);
        const auto b = cross_validate(other, toy.dataset, 5, seeds, e, cfg);
        REQUIRE(a.size() == seeds.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].seed == seeds[i]);
            CHECK(a[i].assignment == b[i].assignment);
            CHECK(a[i].folds.size() == 5);
            CHECK(a[i].macro_f1 == 1.0);
        }
    }
    SUBCASE("parallel equals the serial reference") {
        const auto par = cross_validate(toy.corpus, toy.dataset, 5, seeds, e, cfg);
        const auto ser = reference::cross_validate_serial(toy.corpus, toy.dataset, 5, seeds, e, cfg);
        REQUIRE(par.size() == ser.size());
        for (std::size_t i = 0; i < par.size(); ++i) CHECK(par[i].to_json() == ser[i].to_json());
    }
    SUBCASE("run json round trip") {
        const auto runs = cross_validate(toy.corpus, toy.dataset, 4, seeds, e, cfg);
        for (const auto& r : runs) CHECK(ClassificationRun::from_json(r.to_json()).to_json() == r.to_json());
    }
}

TEST_CASE("constant text collapses to the majority class") {
    st::TempDir dir("constant");
    ProviderConfig pc;
    pc.kind = ProviderKind::Embed;
    const Provider embedder(pc, std::make_shared<ResponseCache>(dir / "cache"), std::make_shared<DisabledTransport>());
    Dataset d;
    d.name = "constant";
    TransformedCorpus c;
    for (int i = 0; i < 40; ++i) {
        const std::string id = "c" + std::to_string(i);
        d.transcripts.push_back({id, "x", i < 10 ? Group::AD : Group::Control, std::nullopt, "en"});
        c.items.push_back({id, "the same description for everyone", {}});
    }
    TrainConfig cfg;
    cfg.class_weighting = false;
    const auto runs = cross_validate(c, d, 5, run_seeds(1, 3), embedder, cfg);
    // Every held-out fold holds 2 AD and 6 C; predicting all C gives
    // F1_C = 12/14 and F1_AD = 0.
    for (const auto& r : runs) {
        CHECK(r.degenerate);
        CHECK(r.macro_f1 == doctest::Approx(6.0 / 14.0).epsilon(1e-12));
        CHECK(r.acc_ad == 0.0);
        CHECK(r.acc_c == 1.0);
    }
}

TEST_CASE("fixed split evaluation") {
    const auto toy = separable(20, 12);
    const CoordinateEmbedder e;
    TrainConfig cfg;
    cfg.max_epochs = 50;
    const auto runs = fixed_split_evaluate(toy.corpus, toy.dataset, e, cfg, run_seeds(0));
    REQUIRE(runs.size() == 10);
    std::size_t test_count = 0;
    for (const auto& t : toy.dataset.transcripts) test_count += t.split == Split::Test;
    for (const auto& r : runs) {
        REQUIRE(r.folds.size() == 1);
        CHECK(r.folds[0].test_size == test_count);
        CHECK(r.macro_f1 == 1.0);
        CHECK_FALSE(r.assignment.has_value());
    }
    auto untagged = toy.dataset;
    untagged.transcripts[0].split.reset();
    CHECK_THROWS_AS(fixed_split_evaluate(toy.corpus, untagged, e, cfg, run_seeds(0)), DataError);
    auto all_train = toy.dataset;
    for (auto& t : all_train.transcripts) t.split = Split::Train;
    CHECK_THROWS_AS(fixed_split_evaluate(toy.corpus, all_train, e, cfg, run_seeds(0)), DataError);
}
