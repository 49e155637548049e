#include <doctest.h>

#include <atomic>
#include <cstdlib>

#include <fmt/format.h>

#include "semform/cli.hpp"
#include "semform/error.hpp"
#include "support.hpp"

using namespace semform;
using nlohmann::json;
namespace fs = std::filesystem;
namespace st = semform::testing;

namespace {

/// OpenAI-style embeddings endpoint: letter counts of the input, plus one.
class EmbeddingTransport final : public Transport {
public:
    HttpResponse post(const std::string& url, const std::string& body, const std::map<std::string, std::string>& headers,
                      std::chrono::seconds) override {
        ++calls;
        if (!url.ends_with("/embeddings")) return {404, "{}"};
        if (headers.at("Authorization") != "Bearer cli-test-secret") return {401, "{}"};
        std::vector<double> v(26, 1.0);
        for (char ch : json::parse(body).at("input").get<std::string>())
            if (ch >= 'a' && ch <= 'z') v[static_cast<std::size_t>(ch - 'a')] += 1.0;
        return {200, json{{"data", json::array({json{{"embedding", v}}})}}.dump()};
    }
    std::atomic<std::size_t> calls{0};
};

CommandContext context(const fs::path& dir, const std::string& dataset) {
    CommandContext ctx;
    ctx.run_dir = dir;
    ctx.config.set("dataset", st::fixture(dataset).string());
    return ctx;
}

int run(const std::string& command, CommandContext& ctx, std::string* err = nullptr) {
    std::ostringstream e;
    const int code = run_command(command, ctx, e);
    if (err) *err = e.str();
    return code;
}

}  // namespace

TEST_CASE("config parsing") {
    std::istringstream ok("# comment\ndataset = d.jsonl\nk = 3\nkinds = ShortSummary, Storyboard\nchat.model = m\n");
    const auto cfg = RunConfig::parse(ok);
    CHECK(cfg.dataset == "d.jsonl");
    CHECK(cfg.k == 3);
    CHECK(cfg.kinds == std::set<TransformationKind>{TransformationKind::Original, TransformationKind::ShortSummary,
                                                    TransformationKind::Storyboard});
    CHECK(cfg.providers.at(ProviderKind::Chat).model == "m");
    CHECK(cfg.digest() == RunConfig::parse(*std::make_unique<std::istringstream>(ok.str())).digest());

    for (const char* bad : {"nonsense = 1\n", "k = 1\n", "k = x\n", "kinds = Poem\n", "no equals sign\n",
                            "mode = sloppy\n", "chat.colour = red\n", "formats = xlsx\n", "prompt.Original = hi\n"}) {
        CAPTURE(bad);
        std::istringstream in(bad);
        CHECK_THROWS_AS(RunConfig::parse(in), UsageError);
    }
    CHECK_THROWS_AS(RunConfig::load("/nonexistent/semform.conf"), UsageError);
    CHECK(RunConfig().run_seeds().size() == 10);
}

TEST_CASE("stages check their inputs") {
    st::TempDir dir("cli_order");
    auto ctx = context(dir.path(), "english40.jsonl");
    std::string err;
    CHECK(run("transform", ctx, &err) == kExitData);
    CHECK(err.find("semform ingest") != std::string::npos);
    CHECK(run("bogus", ctx) == kExitUsage);

    CommandContext empty;
    empty.run_dir = dir.path();
    CHECK(run("ingest", empty, &err) == kExitUsage);

    CHECK(run("ingest", ctx) == kExitOk);
    CHECK(run("report", ctx, &err) == kExitData);
    CHECK(err.find("semform similarity") != std::string::npos);
}

TEST_CASE("missing credential exits with the provider status") {
    st::TempDir dir("cli_cred");
    auto ctx = context(dir.path(), "english40.jsonl");
    ctx.config.set("kinds", "ShortSummary");
    ctx.config.set("embed.endpoint", "https://embed.invalid/v1");
    ctx.config.set("embed.credential_env", "SEMFORM_TEST_UNSET_KEY");
    ::unsetenv("SEMFORM_TEST_UNSET_KEY");
    auto transport = std::make_shared<EmbeddingTransport>();
    ctx.transport = transport;
    REQUIRE(run("ingest", ctx) == kExitOk);
    REQUIRE(run("transform", ctx) == kExitOk);
    CHECK(run("similarity", ctx) == kExitProvider);
    CHECK(transport->calls == 0);
}

TEST_CASE("warm cache serves similarity without network calls") {
    st::TempDir dir("cli_cache");
    ::setenv("SEMFORM_TEST_CLI_KEY", "cli-test-secret", 1);
    auto configure = [&] {
        auto ctx = context(dir.path(), "english40.jsonl");
        ctx.config.set("kinds", "ShortSummary");
        ctx.config.set("embed.endpoint", "https://embed.invalid/v1");
        ctx.config.set("embed.model", "letters");
        ctx.config.set("embed.dimension", "26");
        ctx.config.set("embed.credential_env", "SEMFORM_TEST_CLI_KEY");
        return ctx;
    };
    auto transport = std::make_shared<EmbeddingTransport>();

    auto cold = configure();
    cold.transport = transport;
    REQUIRE(run("ingest", cold) == kExitOk);
    REQUIRE(run("transform", cold) == kExitOk);
    REQUIRE(run("similarity", cold) == kExitOk);
    CHECK(cold.network_calls == 80);
    CHECK(transport->calls == 80);
    const std::string first = st::slurp(dir / "similarity.json");

    auto warm = configure();
    warm.transport = transport;
    REQUIRE(run("similarity", warm) == kExitOk);
    CHECK(warm.network_calls == 0);
    CHECK(transport->calls == 80);
    CHECK(st::slurp(dir / "similarity.json") == first);

    auto offline = configure();
    offline.offline = true;
    REQUIRE(run("similarity", offline) == kExitOk);
    CHECK(st::slurp(dir / "similarity.json") == first);

    for (const auto& entry : fs::recursive_directory_iterator(dir / "cache"))
        if (entry.is_regular_file()) CHECK(st::slurp(entry.path()).find("cli-test-secret") == std::string::npos);
}

TEST_CASE("full run on mock providers") {
    SUBCASE("Portuguese source") {
        st::TempDir dir("cli_pt");
        auto ctx = context(dir.path(), "bilingual40.jsonl");
        REQUIRE(run("run", ctx) == kExitOk);
        CHECK(ctx.network_calls == 0);
        for (const char* name : {"datasets", "similarity", "classification", "back_translation", "lexical", "pos",
                                 "correlation"})
            for (const char* ext : {"md", "csv", "json"}) {
                CAPTURE(name);
                CHECK(fs::exists(dir / "reports" / fmt::format("table_{}.{}", name, ext)));
            }
        for (const char* m : {"bleu", "chrf", "cosine"})
            CHECK(fs::exists(dir / "reports" / fmt::format("matrix_{}.csv", m)));
        const std::string cls = st::slurp(dir / "reports" / "table_classification.md");
        CHECK(cls.find("| Translated English | 1 |") != std::string::npos);
        CHECK(cls.find("| Back Translated | 1 |") != std::string::npos);
        const std::string sim = st::slurp(dir / "reports" / "table_similarity.md");
        CHECK(sim.find("- Reference corpus: Translated English") != std::string::npos);
        CHECK(sim.find("Back Translated vs Original") != std::string::npos);
        const auto manifest = json::parse(st::slurp(dir / "manifest.json"));
        CHECK(manifest.at("stages").size() == 7);
        CHECK(manifest.at("stages").at("transform").at("kinds").size() == 7);
    }
    SUBCASE("English source skips translation") {
        st::TempDir dir("cli_en");
        auto ctx = context(dir.path(), "english40.jsonl");
        ctx.config.set("formats", "md");
        ctx.config.set("seeds", "3");
        REQUIRE(run("run", ctx) == kExitOk);
        CHECK_FALSE(fs::exists(dir / "corpora" / "Translated.jsonl"));
        CHECK_FALSE(fs::exists(dir / "corpora" / "BackTranslated.jsonl"));
        CHECK_FALSE(fs::exists(dir / "reports" / "table_back_translation.md"));
        CHECK_FALSE(fs::exists(dir / "reports" / "table_similarity.csv"));
        const std::string sim = st::slurp(dir / "reports" / "table_similarity.md");
        CHECK(sim.find("- Reference corpus: Original") != std::string::npos);
        const std::string cls = st::slurp(dir / "reports" / "table_classification.md");
        CHECK(cls.find("Translated") == std::string::npos);
        CHECK(cls.find("across 3 runs") != std::string::npos);
    }
}
