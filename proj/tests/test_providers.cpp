#include <doctest.h>

#include <httplib.h>
#include <zlib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "semform/digest.hpp"
#include "semform/error.hpp"
#include "semform/providers.hpp"
#include "semform/textmetrics.hpp"
#include "support.hpp"

using namespace semform;
using nlohmann::json;
namespace st = semform::testing;

namespace {

ProviderConfig mock_config(ProviderKind kind) {
    ProviderConfig c;
    c.kind = kind;
    return c;
}

struct Fixture {
    st::TempDir dir{"providers"};
    std::shared_ptr<ResponseCache> cache = std::make_shared<ResponseCache>(dir / "cache");
    std::shared_ptr<Transport> offline = std::make_shared<DisabledTransport>();

    Provider mock(ProviderKind kind) const { return Provider(mock_config(kind), cache, offline); }
};

/// Local OpenAI-style server. `status` is returned for every call until
/// `failures` calls have been answered, then 200.
class FakeServer {
public:
    FakeServer() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const int n = ++calls_;
            last_auth_ = req.get_header_value("Authorization");
            last_body_ = req.body;
            if (n <= failures_) {
                res.status = status_;
                res.set_content("{\"error\":\"busy\"}", "application/json");
                return;
            }
            const auto body = json::parse(req.body);
            const std::string user = body.at("messages").back().at("content").get<std::string>();
            json reply{{"choices", json::array({json{{"message", {{"role", "assistant"}, {"content", "echo: " + user}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        server_.Post("/v1/embeddings", [this](const httplib::Request&, httplib::Response& res) {
            ++calls_;
            res.set_content(R"({"data":[{"embedding":[0.1,0.2,0.3]}]})", "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    void fail_next(int count, int status) {
        failures_ = calls_ + count;
        status_ = status;
    }
    int calls() const { return calls_; }
    std::string last_auth() const { return last_auth_; }
    std::string last_body() const { return last_body_; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> calls_{0};
    std::atomic<int> failures_{0};
    int status_ = 500;
    std::string last_auth_;
    std::string last_body_;
};

// Decodes the single RGB pixel of an 8-bit truecolor 1x1 PNG.
std::array<std::uint8_t, 3> first_pixel(const Bytes& png) {
    std::size_t pos = 8;
    Bytes idat;
    while (pos + 8 <= png.size()) {
        const std::uint32_t len = (png[pos] << 24) | (png[pos + 1] << 16) | (png[pos + 2] << 8) | png[pos + 3];
        const std::string type(png.begin() + static_cast<std::ptrdiff_t>(pos + 4),
                               png.begin() + static_cast<std::ptrdiff_t>(pos + 8));
        if (type == "IDAT")
            idat.insert(idat.end(), png.begin() + static_cast<std::ptrdiff_t>(pos + 8),
                        png.begin() + static_cast<std::ptrdiff_t>(pos + 8 + len));
        pos += 12 + len;
    }
    Bytes raw(4);
    uLongf raw_len = raw.size();
    REQUIRE(uncompress(raw.data(), &raw_len, idat.data(), idat.size()) == Z_OK);
    REQUIRE(raw_len == 4);
    return {raw[1], raw[2], raw[3]};
}

}  // namespace

TEST_CASE("mock chat is a deterministic function of prompt and input") {
    Fixture f;
    const auto p = f.mock(ProviderKind::Chat);
    const std::string text = "the boy saw a puppy and called it and the puppy followed him home";
    CHECK(chat_generate(p, "prompt A", text) == mock::chat("prompt A", text, 0));
    CHECK(chat_generate(p, "prompt A", text) == chat_generate(p, "prompt A", text));
    std::set<std::string> outs;
    for (const char* prompt : {"prompt A", "prompt B", "prompt C", "prompt D"}) outs.insert(mock::chat(prompt, text, 0));
    CHECK(outs.size() > 1);
}

TEST_CASE("second identical request is served from the cache") {
    Fixture f;
    const auto p = f.mock(ProviderKind::Chat);
    const auto first = p.chat("sys", "hello there");
    const auto second = p.chat("sys", "hello there");
    CHECK_FALSE(first.from_cache);
    CHECK(second.from_cache);
    CHECK(first.text == second.text);
    CHECK(first.cache_key == second.cache_key);
    CHECK(p.cache_hits() == 1);
}

TEST_CASE("response cache") {
    Fixture f;
    GenerationRecord r;
    r.request = json{{"op", "chat"}, {"x", 1}};
    r.cache_key = cache_key_for(r.request);
    r.response = "text";
    r.created_at = "2026-01-01T00:00:00Z";
    r.provider = json{{"model", "m"}};
    SUBCASE("store then lookup") {
        f.cache->store(r);
        CHECK(f.cache->lookup(r.cache_key) == r);
    }
    SUBCASE("absent key") { CHECK_FALSE(f.cache->lookup(std::string(64, 'a')).has_value()); }
    SUBCASE("corrupted record is a miss") {
        f.cache->store(r);
        st::spit(f.cache->record_path(r.cache_key), "{ not json");
        CHECK_FALSE(f.cache->lookup(r.cache_key).has_value());
    }
    SUBCASE("concurrent stores of one key leave one complete record") {
        std::vector<std::thread> writers;
        for (int i = 0; i < 8; ++i)
            writers.emplace_back([&] {
                for (int k = 0; k < 20; ++k) f.cache->store(r);
            });
        for (auto& w : writers) w.join();
        CHECK(f.cache->lookup(r.cache_key) == r);
        std::size_t files = 0;
        for (const auto& e : std::filesystem::recursive_directory_iterator(f.cache->root()))
            files += e.is_regular_file();
        CHECK(files == 1);
    }
    SUBCASE("malformed key") {
        r.cache_key = "short";
        CHECK_THROWS_AS(f.cache->store(r), DataError);
    }
}

TEST_CASE("mock translate, embed, image and caption contracts") {
    Fixture f;
    const auto tr = f.mock(ProviderKind::Translate);
    CHECK(translate(tr, "O menino viu. Ele correu!", "pt", "en") == "[pt→en] O menino viu. [pt→en] Ele correu!");
    CHECK_THROWS_AS(translate(tr, "x", "en", "en"), ProviderError);

    const auto em = f.mock(ProviderKind::Embed);
    CHECK(embed(em, "a boy and a dog") == embed(em, "a boy and a dog"));
    CHECK(embed(em, "a boy").dimension() == 256);
    CHECK(cosine(embed(em, "same text"), embed(em, "same text")) == doctest::Approx(1.0));
    CHECK(cosine(embed(em, "aaaa bbbb cccc"), embed(em, "xyz qrs tuv")) < 0.2);

    const auto t2i = f.mock(ProviderKind::TextToImage);
    const auto png = text_to_image(t2i, "1. The boy finds a puppy.");
    const auto info = parse_png(png);
    CHECK(info.width == 1);
    CHECK(info.height == 1);
    const auto digest = sha256(std::string_view("1. The boy finds a puppy."));
    CHECK(first_pixel(png) == std::array<std::uint8_t, 3>{digest[0], digest[1], digest[2]});
    CHECK(text_to_image(t2i, "1. The boy finds a puppy.") == png);
    CHECK(t2i.text_to_image("1. The boy finds a puppy.").from_cache);
    CHECK_THROWS_AS(text_to_image(t2i, "  "), ProviderError);

    const auto i2t = f.mock(ProviderKind::ImageToText);
    const auto caption = image_to_text(i2t, png, "Describe.");
    CHECK(caption.find(sha256_hex(png).substr(0, 16)) != std::string::npos);
    const Bytes junk{1, 2, 3, 4};
    CHECK_THROWS_AS(image_to_text(i2t, junk, "Describe."), DataError);
}

TEST_CASE("a provider only serves its own kind") {
    Fixture f;
    const auto p = f.mock(ProviderKind::Embed);
    CHECK_THROWS_AS(p.chat("a", "b"), ProviderError);
}

TEST_CASE("http provider: retries, fail-fast, credentials and offline replay") {
    FakeServer server;
    Fixture f;
    std::vector<std::chrono::milliseconds> sleeps;
    RetryPolicy retry;
    retry.attempts = 3;
    retry.initial_backoff = std::chrono::milliseconds(1000);
    retry.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d); };
    ProviderConfig cfg;
    cfg.kind = ProviderKind::Chat;
    cfg.endpoint = server.endpoint();
    cfg.model = "test-model";
    cfg.credential_env = "SEMFORM_TEST_API_KEY";
    ::setenv("SEMFORM_TEST_API_KEY", "sk-test-secret-value", 1);
    const Provider p(cfg, f.cache, std::make_shared<HttpTransport>(), retry);

    SUBCASE("HTTP 500 three times exhausts the retry budget") {
        server.fail_next(3, 500);
        try {
            p.chat("sys", "hello");
            FAIL("expected TransportError");
        } catch (const TransportError& e) {
            CHECK(e.attempts() == 3);
            CHECK(e.last_status() == 500);
        }
        CHECK(server.calls() == 3);
        CHECK(sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1000), std::chrono::milliseconds(2000)});
    }
    SUBCASE("transient failure then success") {
        server.fail_next(2, 503);
        CHECK(p.chat("sys", "hello").text == "echo: hello");
        CHECK(server.calls() == 3);
    }
    SUBCASE("4xx fails without retrying") {
        server.fail_next(1, 401);
        try {
            p.chat("sys", "hello");
            FAIL("expected TransportError");
        } catch (const TransportError& e) {
            CHECK(e.attempts() == 1);
            CHECK(e.last_status() == 401);
        }
        CHECK(server.calls() == 1);
        CHECK(sleeps.empty());
    }
    SUBCASE("credential goes to the header only") {
        const auto g = p.chat("sys", "hi");
        CHECK(g.text == "echo: hi");
        CHECK(server.last_auth() == "Bearer sk-test-secret-value");
        CHECK(json::parse(server.last_body()).at("model") == "test-model");
        for (const auto& e : std::filesystem::recursive_directory_iterator(f.cache->root()))
            if (e.is_regular_file()) CHECK(st::slurp(e.path()).find("sk-test-secret-value") == std::string::npos);

        // Offline replay of the same request needs no network.
        const Provider offline(cfg, f.cache, std::make_shared<DisabledTransport>(), retry);
        const auto replay = offline.chat("sys", "hi");
        CHECK(replay.from_cache);
        CHECK(replay.text == g.text);
        CHECK(offline.network_calls() == 0);
        CHECK_THROWS_AS(offline.chat("sys", "not cached"), ProviderError);
    }
    SUBCASE("missing credential variable") {
        ::unsetenv("SEMFORM_TEST_API_KEY");
        CHECK_THROWS_AS(p.chat("sys", "hello"), ProviderError);
        CHECK(server.calls() == 0);
    }
    SUBCASE("embedding dimension mismatch") {
        ProviderConfig ec = cfg;
        ec.kind = ProviderKind::Embed;
        ec.dimension = 4;
        const Provider e(ec, f.cache, std::make_shared<HttpTransport>(), retry);
        CHECK_THROWS_AS(e.embed("text"), ProviderError);
        ec.dimension = 3;
        const Provider ok(ec, f.cache, std::make_shared<HttpTransport>(), retry);
        CHECK(ok.embed("text").dimension() == 3);
    }
}

TEST_CASE("cache keys separate backends") {
    Fixture f;
    ProviderConfig a = mock_config(ProviderKind::Chat);
    ProviderConfig b = a;
    b.model = "other";
    const Provider pa(a, f.cache, f.offline), pb(b, f.cache, f.offline);
    CHECK(pa.chat("s", "u").cache_key != pb.chat("s", "u").cache_key);
}

TEST_CASE("config validation") {
    ProviderConfig c;
    c.endpoint = "ftp://nowhere";
    CHECK_THROWS_AS(c.validate(), DataError);
    c.endpoint = "https://api.example.com/v1";
    CHECK_NOTHROW(c.validate());
    c.temperature = -1;
    CHECK_THROWS_AS(c.validate(), DataError);
}
