#include "semform/providers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>

#include "semform/error.hpp"

namespace semform {

using nlohmann::json;

std::string_view to_string(ProviderKind k) {
    switch (k) {
        case ProviderKind::Chat: return "chat";
        case ProviderKind::Translate: return "translate";
        case ProviderKind::Embed: return "embed";
        case ProviderKind::TextToImage: return "text_to_image";
        case ProviderKind::ImageToText: return "image_to_text";
    }
    return "unknown";
}

std::optional<ProviderKind> parse_provider_kind(std::string_view s) {
    for (auto k : {ProviderKind::Chat, ProviderKind::Translate, ProviderKind::Embed, ProviderKind::TextToImage,
                   ProviderKind::ImageToText})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

bool ProviderConfig::is_mock() const { return endpoint == "mock" || endpoint.starts_with("mock://"); }

void ProviderConfig::validate() const {
    if (!(temperature >= 0.0)) throw DataError(fmt::format("provider {}: temperature {} must be >= 0", to_string(kind), temperature));
    if (max_in_flight < 1) throw DataError(fmt::format("provider {}: max_in_flight must be >= 1", to_string(kind)));
    if (kind == ProviderKind::Embed && dimension == 0) throw DataError("embed provider: dimension must be > 0");
    if (is_mock()) return;
    const bool http = endpoint.starts_with("http://") || endpoint.starts_with("https://");
    const auto host_start = endpoint.find("://");
    if (!http || host_start == std::string::npos || endpoint.size() <= host_start + 3 ||
        endpoint.find_first_of(" \t\r\n") != std::string::npos)
        throw DataError(fmt::format("provider {}: malformed endpoint \"{}\"", to_string(kind), endpoint));
}

json ProviderConfig::summary() const {
    json j{{"kind", to_string(kind)}, {"endpoint", endpoint}, {"model", model}};
    return j;
}

json GenerationRecord::to_json() const {
    return json{{"cache_key", cache_key},   {"request", request},   {"response", response},
                {"created_at", created_at}, {"provider", provider}};
}

GenerationRecord GenerationRecord::from_json(const json& j) {
    GenerationRecord r;
    r.cache_key = j.at("cache_key").get<std::string>();
    r.request = j.at("request");
    r.response = j.at("response");
    r.created_at = j.at("created_at").get<std::string>();
    r.provider = j.at("provider");
    return r;
}

std::string cache_key_for(const json& request) { return sha256_hex(request.dump()); }

namespace {

void log_warning(const std::string& msg) {
    static std::mutex mu;
    std::lock_guard lock(mu);
    std::cerr << "warning: " << msg << '\n';
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(now));
}

std::string unique_suffix() {
    static std::atomic<std::uint64_t> counter{0};
    const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    return fmt::format("{:x}.{:x}.{}", tid, counter.fetch_add(1),
                       std::chrono::steady_clock::now().time_since_epoch().count());
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

std::filesystem::path ResponseCache::record_path(std::string_view key) const {
    return root_ / std::string(key.substr(0, 2)) / (std::string(key) + ".json");
}

std::filesystem::path ResponseCache::image_path(std::string_view key) const {
    return root_ / std::string(key.substr(0, 2)) / (std::string(key) + ".png");
}

void ResponseCache::write_atomic(const std::filesystem::path& target, std::span<const char> bytes) const {
    std::filesystem::create_directories(target.parent_path());
    auto tmp = target;
    tmp += ".tmp." + unique_suffix();
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error(fmt::format("cache: cannot write {}", tmp.string()));
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error(fmt::format("cache: short write to {}", tmp.string()));
    }
    std::filesystem::rename(tmp, target);
}

std::optional<GenerationRecord> ResponseCache::lookup(std::string_view key) const {
    if (!is_hex_digest(key)) throw DataError(fmt::format("cache key \"{}\" is not 64 hex chars", key));
    const auto path = record_path(key);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    try {
        const json j = json::parse(in);
        GenerationRecord r = GenerationRecord::from_json(j);
        if (r.cache_key != key || cache_key_for(r.request) != key) {
            log_warning(fmt::format("cache record {} does not match its key; ignoring", path.string()));
            return std::nullopt;
        }
        return r;
    } catch (const json::exception& e) {
        log_warning(fmt::format("corrupted cache record {} ({}); treating as a miss", path.string(), e.what()));
        return std::nullopt;
    }
}

void ResponseCache::store(const GenerationRecord& record) {
    if (!is_hex_digest(record.cache_key))
        throw DataError(fmt::format("cache key \"{}\" is not 64 hex chars", record.cache_key));
    const std::string text = record.to_json().dump(2) + "\n";
    write_atomic(record_path(record.cache_key), text);
}

void ResponseCache::store_image(std::string_view key, std::span<const std::uint8_t> png) {
    write_atomic(image_path(key), std::span<const char>(reinterpret_cast<const char*>(png.data()), png.size()));
}

std::optional<Bytes> ResponseCache::load_image(std::string_view key) const {
    std::ifstream in(image_path(key), std::ios::binary);
    if (!in) return std::nullopt;
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!is_png(data)) {
        log_warning(fmt::format("cached image for {} is not a valid PNG; treating as a miss", key));
        return std::nullopt;
    }
    return data;
}

HttpResponse DisabledTransport::post(const std::string& url, const std::string&, const std::map<std::string, std::string>&,
                                     std::chrono::seconds) {
    throw ProviderError(fmt::format("network disabled (offline mode): request to {} not served by cache", url));
}

Provider::Provider(ProviderConfig cfg, std::shared_ptr<ResponseCache> cache, std::shared_ptr<Transport> transport,
                   RetryPolicy retry)
    : cfg_(std::move(cfg)),
      cache_(std::move(cache)),
      transport_(std::move(transport)),
      retry_(std::move(retry)),
      in_flight_(std::clamp(cfg_.max_in_flight, 1, 256)) {
    cfg_.validate();
    if (!cache_) throw std::invalid_argument("Provider needs a cache");
    if (!transport_) transport_ = std::make_shared<DisabledTransport>();
    if (!retry_.sleep) retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (retry_.attempts < 1) retry_.attempts = 1;
}

void Provider::require_kind(ProviderKind k) const {
    if (cfg_.kind != k)
        throw ProviderError(fmt::format("provider configured as {} cannot serve {}", to_string(cfg_.kind), to_string(k)));
}

json Provider::request_envelope(std::string_view op, json input) const {
    json params{{"temperature", cfg_.temperature}, {"max_tokens", cfg_.max_tokens}};
    params["seed"] = cfg_.seed ? json(*cfg_.seed) : json(nullptr);
    if (cfg_.kind == ProviderKind::Embed) params["dimension"] = cfg_.dimension;
    return json{{"op", op}, {"provider", cfg_.summary()}, {"params", params}, {"input", std::move(input)}};
}

json Provider::post_json(const std::string& path, const json& payload) const {
    std::map<std::string, std::string> headers{{"Content-Type", "application/json"}};
    if (!cfg_.credential_env.empty()) {
        const char* key = std::getenv(cfg_.credential_env.c_str());
        if (!key || !*key)
            throw ProviderError(fmt::format("credential environment variable {} is not set", cfg_.credential_env));
        headers["Authorization"] = std::string("Bearer ") + key;
    }
    std::string url = cfg_.endpoint;
    while (!url.empty() && url.back() == '/') url.pop_back();
    url += path;
    const std::string body = payload.dump();

    auto backoff = retry_.initial_backoff;
    int last_status = 0;
    std::string last_error;
    for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
        std::optional<HttpResponse> resp;
        {
            in_flight_.acquire();
            struct Release {
                std::counting_semaphore<256>& s;
                ~Release() { s.release(); }
            } release{in_flight_};
            ++network_calls_;
            try {
                resp = transport_->post(url, body, headers, cfg_.timeout);
            } catch (const TransportError& e) {
                last_error = e.what();
                last_status = 0;
            }
        }
        if (resp) {
            last_status = resp->status;
            if (resp->status >= 200 && resp->status < 300) {
                try {
                    return json::parse(resp->body);
                } catch (const json::exception& e) {
                    throw ProviderError(fmt::format("{}: response is not JSON ({})", url, e.what()));
                }
            }
            if (resp->status >= 400 && resp->status < 500)
                throw TransportError(fmt::format("{}: HTTP {} ({})", url, resp->status, resp->body.substr(0, 300)),
                                     attempt, resp->status);
            last_error = fmt::format("HTTP {}", resp->status);
        }
        if (attempt < retry_.attempts) {
            retry_.sleep(backoff);
            backoff = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(backoff.count()) * retry_.multiplier));
        }
    }
    throw TransportError(fmt::format("{}: failed after {} attempts (last: {})", url, retry_.attempts, last_error),
                         retry_.attempts, last_status);
}

GenerationRecord Provider::cached(const json& request, const std::function<json()>& compute, bool& from_cache) const {
    const std::string key = cache_key_for(request);
    if (auto hit = cache_->lookup(key)) {
        ++cache_hits_;
        from_cache = true;
        return *hit;
    }
    from_cache = false;
    GenerationRecord r;
    r.cache_key = key;
    r.request = request;
    r.response = compute();
    r.created_at = utc_now();
    r.provider = cfg_.summary();
    cache_->store(r);
    return r;
}

namespace {

std::string chat_content(const json& resp, std::string_view what) {
    try {
        const auto& content = resp.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw ProviderError(fmt::format("{}: completion content is not text", what));
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(fmt::format("{}: unexpected response shape ({})", what, e.what()));
    }
}

std::string require_text(const json& response, std::string_view what) {
    if (!response.is_string()) throw ProviderError(fmt::format("{}: cached response is not text", what));
    std::string text = response.get<std::string>();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw ProviderError(fmt::format("{}: empty completion", what));
    return text;
}

}  // namespace

Generation Provider::chat(std::string_view system_prompt, std::string_view user_text) const {
    require_kind(ProviderKind::Chat);
    const json request = request_envelope("chat", {{"system", system_prompt}, {"user", user_text}});
    bool hit = false;
    const auto rec = cached(
        request,
        [&]() -> json {
            if (cfg_.is_mock()) return mock::chat(system_prompt, user_text, cfg_.seed.value_or(0));
            json payload{{"model", cfg_.model},
                         {"messages", json::array({json{{"role", "system"}, {"content", system_prompt}},
                                                   json{{"role", "user"}, {"content", user_text}}})},
                         {"temperature", cfg_.temperature},
                         {"max_tokens", cfg_.max_tokens}};
            if (cfg_.seed) payload["seed"] = *cfg_.seed;
            auto text = chat_content(post_json("/chat/completions", payload), "chat");
            require_text(text, "chat");
            return text;
        },
        hit);
    return {require_text(rec.response, "chat"), rec.cache_key, hit};
}

std::string translation_instruction(std::string_view source, std::string_view target) {
    return fmt::format(
        "Translate the following text from {} to {}. Just output the translation and no other information.", source,
        target);
}

Generation Provider::translate(std::string_view text, std::string_view source, std::string_view target) const {
    require_kind(ProviderKind::Translate);
    if (source == target) throw ProviderError(fmt::format("translate: source and target are both \"{}\"", source));
    const json request = request_envelope("translate", {{"text", text}, {"source", source}, {"target", target}});
    bool hit = false;
    const auto rec = cached(
        request,
        [&]() -> json {
            if (cfg_.is_mock()) return mock::translate(text, source, target);
            json payload{{"model", cfg_.model},
                         {"messages", json::array({json{{"role", "system"}, {"content", translation_instruction(source, target)}},
                                                   json{{"role", "user"}, {"content", text}}})},
                         {"source_language", source},
                         {"target_language", target},
                         {"temperature", cfg_.temperature},
                         {"max_tokens", cfg_.max_tokens}};
            if (cfg_.seed) payload["seed"] = *cfg_.seed;
            auto out = chat_content(post_json("/chat/completions", payload), "translate");
            require_text(out, "translate");
            return out;
        },
        hit);
    return {require_text(rec.response, "translate"), rec.cache_key, hit};
}

std::string Provider::embed_key(std::string_view text) const {
    return cache_key_for(request_envelope("embed", {{"text", text}}));
}

EmbeddingVector Provider::embed(std::string_view text) const {
    require_kind(ProviderKind::Embed);
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) throw ProviderError("embed: empty text");
    const json request = request_envelope("embed", {{"text", text}});
    bool hit = false;
    const auto rec = cached(
        request,
        [&]() -> json {
            if (cfg_.is_mock()) return mock::embed(text, cfg_.dimension, cfg_.seed.value_or(0)).values;
            const json resp = post_json("/embeddings", {{"model", cfg_.model}, {"input", text}});
            try {
                return resp.at("data").at(0).at("embedding");
            } catch (const json::exception& e) {
                throw ProviderError(fmt::format("embed: unexpected response shape ({})", e.what()));
            }
        },
        hit);
    EmbeddingVector v;
    try {
        v.values = rec.response.get<std::vector<double>>();
    } catch (const json::exception&) {
        throw ProviderError("embed: response is not a numeric vector");
    }
    if (v.dimension() != cfg_.dimension)
        throw ProviderError(fmt::format("embed: got dimension {}, provider declares {}", v.dimension(), cfg_.dimension));
    if (!std::all_of(v.values.begin(), v.values.end(), [](double x) { return std::isfinite(x); }))
        throw ProviderError("embed: non-finite entries");
    return v;
}

ImageGeneration Provider::text_to_image(std::string_view prompt) const {
    require_kind(ProviderKind::TextToImage);
    if (prompt.find_first_not_of(" \t\r\n") == std::string_view::npos) throw ProviderError("text_to_image: empty prompt");
    const json request = request_envelope("text_to_image", {{"prompt", prompt}});
    const std::string key = cache_key_for(request);
    bool hit = false;
    Bytes png;
    const auto rec = cached(
        request,
        [&]() -> json {
            if (cfg_.is_mock()) {
                png = mock::text_to_image(prompt);
            } else {
                const json resp = post_json("/images/generations", {{"model", cfg_.model},
                                                                    {"prompt", prompt},
                                                                    {"n", 1},
                                                                    {"response_format", "b64_json"}});
                try {
                    png = base64_decode(resp.at("data").at(0).at("b64_json").get<std::string>());
                } catch (const json::exception& e) {
                    throw ProviderError(fmt::format("text_to_image: unexpected response shape ({})", e.what()));
                } catch (const DataError& e) {
                    throw ProviderError(fmt::format("text_to_image: {}", e.what()));
                }
            }
            if (!is_png(png)) throw ProviderError("text_to_image: backend did not return a PNG");
            cache_->store_image(key, png);
            return json{{"image", key + ".png"}};
        },
        hit);
    if (hit) {
        auto img = cache_->load_image(key);
        if (!img) throw ProviderError(fmt::format("text_to_image: cached record {} has no image payload", key));
        png = std::move(*img);
    }
    return {std::move(png), rec.cache_key, hit};
}

Generation Provider::image_to_text(std::span<const std::uint8_t> png, std::string_view prompt) const {
    require_kind(ProviderKind::ImageToText);
    try {
        parse_png(png);
    } catch (const DataError& e) {
        throw DataError(fmt::format("image_to_text: {}", e.what()));
    }
    const json request = request_envelope("image_to_text", {{"image_sha256", sha256_hex(png)}, {"prompt", prompt}});
    bool hit = false;
    const auto rec = cached(
        request,
        [&]() -> json {
            if (cfg_.is_mock()) return mock::image_to_text(png, prompt);
            const json content = json::array(
                {json{{"type", "text"}, {"text", prompt}},
                 json{{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + base64_encode(png)}}}}});
            json payload{{"model", cfg_.model},
                         {"messages", json::array({json{{"role", "user"}, {"content", content}}})},
                         {"temperature", cfg_.temperature},
                         {"max_tokens", cfg_.max_tokens}};
            if (cfg_.seed) payload["seed"] = *cfg_.seed;
            auto text = chat_content(post_json("/chat/completions", payload), "image_to_text");
            require_text(text, "image_to_text");
            return text;
        },
        hit);
    return {require_text(rec.response, "image_to_text"), rec.cache_key, hit};
}

std::string chat_generate(const Provider& p, std::string_view system_prompt, std::string_view user_text) {
    return p.chat(system_prompt, user_text).text;
}
std::string translate(const Provider& p, std::string_view text, std::string_view source, std::string_view target) {
    return p.translate(text, source, target).text;
}
EmbeddingVector embed(const Provider& p, std::string_view text) { return p.embed(text); }
Bytes text_to_image(const Provider& p, std::string_view prompt) { return p.text_to_image(prompt).png; }
std::string image_to_text(const Provider& p, std::span<const std::uint8_t> png, std::string_view prompt) {
    return p.image_to_text(png, prompt).text;
}

namespace mock {

namespace {
std::uint64_t load_u64(const std::array<std::uint8_t, 32>& d, std::size_t at) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | d[at + i];
    return v;
}

std::u32string lowercase_codepoints(std::string_view text) {
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    u.toLower(icu::Locale::getRoot());
    std::u32string out;
    for (int32_t i = 0; i < u.length();) {
        const UChar32 c = u.char32At(i);
        out.push_back(static_cast<char32_t>(c));
        i += U16_LENGTH(c);
    }
    return out;
}
}  // namespace

std::string chat(std::string_view system_prompt, std::string_view user_text, std::int64_t seed) {
    const auto digest = sha256(json{{"system", system_prompt}, {"user", user_text}, {"seed", seed}}.dump());
    std::mt19937_64 rng(load_u64(digest, 0));
    const double keep = 0.25 + 0.6 * (digest[8] / 255.0);
    std::istringstream words{std::string(user_text)};
    std::string word, first, out;
    while (words >> word) {
        if (first.empty()) first = word;
        if (static_cast<double>(rng() % 1000) < keep * 1000.0) {
            if (!out.empty()) out.push_back(' ');
            out += word;
        }
    }
    return out.empty() ? first : out;
}

std::string translate(std::string_view text, std::string_view source, std::string_view target) {
    const std::string marker = fmt::format("[{}→{}] ", source, target);
    std::string out;
    std::string sentence;
    auto flush = [&] {
        const auto b = sentence.find_first_not_of(" \t\r\n");
        if (b != std::string::npos) {
            if (!out.empty()) out.push_back(' ');
            out += marker + sentence.substr(b);
        }
        sentence.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        sentence.push_back(text[i]);
        const char c = text[i];
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))))
            flush();
    }
    flush();
    return out;
}

EmbeddingVector embed(std::string_view text, std::size_t dimension, std::int64_t seed) {
    if (dimension == 0) throw DomainError("mock embed: zero dimension");
    const auto cps = lowercase_codepoints(text);
    EmbeddingVector v;
    v.values.assign(dimension, 0.0);
    auto bucket = [&](std::size_t begin, std::size_t len) {
        std::uint64_t h = 1469598103934665603ULL ^ static_cast<std::uint64_t>(seed);
        for (std::size_t i = begin; i < begin + len; ++i) {
            for (int shift = 0; shift < 32; shift += 8) {
                h ^= (static_cast<std::uint32_t>(cps[i]) >> shift) & 0xFF;
                h *= 1099511628211ULL;
            }
        }
        return static_cast<std::size_t>(h % dimension);
    };
    if (cps.size() < 3) {
        if (cps.empty()) throw DomainError("mock embed: empty text");
        v.values[bucket(0, cps.size())] += 1.0;
    } else {
        for (std::size_t i = 0; i + 3 <= cps.size(); ++i) v.values[bucket(i, 3)] += 1.0;
    }
    double norm = 0.0;
    for (double x : v.values) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v.values) x /= norm;
    return v;
}

Bytes text_to_image(std::string_view prompt) {
    const auto d = sha256(prompt);
    const std::uint8_t pixel[3] = {d[0], d[1], d[2]};
    return encode_png_rgb(1, 1, pixel);
}

std::string image_to_text(std::span<const std::uint8_t> png, std::string_view) {
    const std::string digest = sha256_hex(png);
    return fmt::format("The image shows a single scene rendered from storyboard image {}.", digest.substr(0, 16));
}

}  // namespace mock

}  // namespace semform
