#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "semform/error.hpp"
#include "semform/providers.hpp"
#include "semform/reference.hpp"
#include "semform/textmetrics.hpp"
#include "oracles.hpp"

using namespace semform;
using namespace semform::testing;

namespace {

TransformedCorpus corpus(TransformationKind k, std::vector<std::pair<std::string, std::string>> items) {
    TransformedCorpus c;
    c.kind = k;
    c.dataset_name = "t";
    c.language = "en";
    for (auto& [id, text] : items) c.items.push_back({id, text, {}});
    return c;
}

}  // namespace

TEST_CASE("bleu and chrf match brute-force oracles on fuzz pairs") {
    for (const auto& [c, r] : fuzz_pairs(100, 2024)) {
        CAPTURE(c);
        CAPTURE(r);
        CHECK(std::abs(bleu(c, r) - oracle_bleu(c, r)) < 1e-9);
        CHECK(std::abs(chrf(c, r) - oracle_chrf(c, r)) < 1e-9);
    }
}

TEST_CASE("bleu examples") {
    CHECK(bleu("the boy saw the puppy", "the boy saw the puppy") == doctest::Approx(1.0));
    CHECK(bleu("quick", "quickly") == 0.0);
    CHECK(bleu("the cat sat", "the cat sat down") == doctest::Approx(std::exp(1.0 - 4.0 / 3.0)).epsilon(1e-12));
    CHECK_THROWS_AS(bleu("...", "the cat"), DomainError);
    BleuOptions smooth;
    smooth.smoothing = true;
    CHECK(bleu("quick", "quickly", smooth) > 0.0);
}

TEST_CASE("chrf examples") {
    CHECK(chrf("quick", "quickly") > 0.0);
    CHECK(chrf("a b c", "a b c") == doctest::Approx(1.0));
    ChrfOptions two;
    two.max_n = 2;
    CHECK(chrf("ab", "ab", two) == doctest::Approx(1.0));
    CHECK(chrf("ab", "ba", two) == doctest::Approx(0.5));
    CHECK(chrf("the  boy   ran", "theboy ran") == doctest::Approx(chrf("the boy ran", "the boy ran")));
    CHECK_THROWS_AS(chrf("   ", "x"), DomainError);
}

TEST_CASE("cosine") {
    const std::vector<double> v{0.3, -1.2, 4.0};
    CHECK(cosine(v, v) == doctest::Approx(1.0));
    CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
    CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 1}) == doctest::Approx(0.70710678).epsilon(1e-8));
    const std::vector<double> w{2.0, 0.5, -1.0};
    std::vector<double> w7;
    for (double x : w) w7.push_back(7.5 * x);
    CHECK(std::abs(cosine(v, w) - cosine(v, w7)) < 1e-12);
    CHECK_THROWS_AS(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 1}), DomainError);
    CHECK_THROWS_AS(cosine(std::vector<double>{1}, std::vector<double>{1, 1}), DomainError);
}

TEST_CASE("corpus means and id pairing") {
    const auto a = corpus(TransformationKind::Original, {{"x", "the boy ran home"}, {"y", "a dog"}});
    const auto b = corpus(TransformationKind::ShortSummary, {{"y", "mother"}, {"x", "the boy ran home"}});
    CHECK(mean_similarity(a, a, Metric::Bleu) == doctest::Approx(1.0));
    CHECK(mean_similarity(a, a, Metric::Chrf) == doctest::Approx(1.0));
    CHECK(mean_similarity(a, b, Metric::Bleu) == doctest::Approx(0.5));
    const auto c = corpus(TransformationKind::LongSummary, {{"x", "the boy"}, {"z", "other"}});
    try {
        mean_similarity(a, c, Metric::Bleu);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("y") != std::string::npos);
    }
}

TEST_CASE("mock embeddings through cosine") {
    auto cache = std::make_shared<ResponseCache>(std::filesystem::temp_directory_path() / "semform_tm_cache");
    ProviderConfig cfg;
    cfg.kind = ProviderKind::Embed;
    Provider p(cfg, cache, std::make_shared<DisabledTransport>());
    const auto a = corpus(TransformationKind::Original, {{"x", "the boy ran home"}, {"y", "a dog"}});
    CHECK(mean_similarity(a, a, Metric::Cosine, &p) == doctest::Approx(1.0));
    CHECK(cosine(p.embed("abcdefgh"), p.embed("xyzuvwqr")) < 0.2);
    std::filesystem::remove_all(cache->root());
}

TEST_CASE("pairwise matrices") {
    const auto fuzz = fuzz_pairs(30, 77);
    std::vector<std::pair<std::string, std::string>> longer, shorter, other;
    for (std::size_t i = 0; i < fuzz.size(); ++i) {
        const auto id = "d" + std::to_string(i);
        longer.emplace_back(id, fuzz[i].first + " and the dog ran home");
        shorter.emplace_back(id, fuzz[i].first);
        other.emplace_back(id, fuzz[i].second);
    }
    const std::vector<TransformedCorpus> corpora{corpus(TransformationKind::Original, longer),
                                                 corpus(TransformationKind::ShortSummary, shorter),
                                                 corpus(TransformationKind::Storyboard, other)};
    const auto bl = pairwise_matrix(corpora, Metric::Bleu);
    const auto cs = pairwise_matrix(corpora, Metric::Chrf);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(bl.values[i][i] == doctest::Approx(1.0));
        CHECK(cs.values[i][i] == doctest::Approx(1.0));
    }
    // Brevity penalty applies in one direction only.
    CHECK(bl.values[0][1] != doctest::Approx(bl.values[1][0]));

    auto cache = std::make_shared<ResponseCache>(std::filesystem::temp_directory_path() / "semform_pm_cache");
    ProviderConfig cfg;
    cfg.kind = ProviderKind::Embed;
    Provider p(cfg, cache, std::make_shared<DisabledTransport>());
    const auto cm = pairwise_matrix(corpora, Metric::Cosine, &p);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(cm.values[i][j] - cm.values[j][i]) < 1e-12);

    for (Metric m : {Metric::Bleu, Metric::Chrf}) {
        const auto par = pairwise_matrix(corpora, m);
        const auto ser = reference::pairwise_matrix_serial(corpora, m);
        CHECK(par.values == ser.values);
    }
    CHECK(cm.values == reference::pairwise_matrix_serial(corpora, Metric::Cosine, &p).values);
    std::filesystem::remove_all(cache->root());
}

TEST_CASE("parallel pair scores equal the serial reference") {
    std::vector<std::string> c, r;
    for (const auto& [a, b] : fuzz_pairs(200, 5)) {
        c.push_back(a);
        r.push_back(b);
    }
    for (Metric m : {Metric::Bleu, Metric::Chrf}) CHECK(pair_scores(c, r, m) == reference::pair_scores_serial(c, r, m));
}
