#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>

#include <json.hpp>

#include "semform/digest.hpp"
#include "semform/embedding.hpp"

namespace semform {

enum class ProviderKind { Chat, Translate, Embed, TextToImage, ImageToText };

std::string_view to_string(ProviderKind k);
std::optional<ProviderKind> parse_provider_kind(std::string_view s);

struct ProviderConfig {
    ProviderKind kind = ProviderKind::Chat;
    /// Base URL ("https://host/v1") or "mock" for the offline backend.
    std::string endpoint = "mock";
    std::string model = "mock";
    double temperature = 0.0;
    int max_tokens = 1024;
    std::optional<std::int64_t> seed = 0;
    /// Environment variable holding the API key; empty for no auth.
    std::string credential_env;
    /// Declared embedding dimension (embed providers only).
    std::size_t dimension = 256;
    /// Maximum concurrent network requests through this provider.
    int max_in_flight = 4;
    std::chrono::seconds timeout{120};

    bool is_mock() const;
    /// Throws DataError on malformed endpoint or negative temperature.
    void validate() const;
    /// Fields that identify the backend; part of every cache key.
    nlohmann::json summary() const;
};

struct GenerationRecord {
    std::string cache_key;
    nlohmann::json request;
    /// Text (string), embedding (array of numbers) or {"image": "<key>.png"}.
    nlohmann::json response;
    std::string created_at;
    nlohmann::json provider;

    nlohmann::json to_json() const;
    static GenerationRecord from_json(const nlohmann::json& j);
    friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

/// Digest of the canonical (key-sorted, compact) serialization.
std::string cache_key_for(const nlohmann::json& request);

/// Content-addressed store: <root>/<first 2 hex>/<key>.json, image payloads
/// as sibling <key>.png. Writes go to a temporary file and are renamed into
/// place, so concurrent writers of one key leave one complete record.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path root);

    std::optional<GenerationRecord> lookup(std::string_view key) const;
    void store(const GenerationRecord& record);
    void store_image(std::string_view key, std::span<const std::uint8_t> png);
    std::optional<Bytes> load_image(std::string_view key) const;

    std::filesystem::path record_path(std::string_view key) const;
    std::filesystem::path image_path(std::string_view key) const;
    const std::filesystem::path& root() const { return root_; }

private:
    void write_atomic(const std::filesystem::path& target, std::span<const char> bytes) const;
    std::filesystem::path root_;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    /// Returns the response, or throws TransportError(attempts = 1) when no
    /// response could be obtained.
    virtual HttpResponse post(const std::string& url, const std::string& body,
                              const std::map<std::string, std::string>& headers,
                              std::chrono::seconds timeout) = 0;
};

/// cpp-httplib client (HTTPS via OpenSSL).
class HttpTransport final : public Transport {
public:
    HttpResponse post(const std::string& url, const std::string& body,
                      const std::map<std::string, std::string>& headers, std::chrono::seconds timeout) override;
};

/// Refuses every request; used for --offline runs.
class DisabledTransport final : public Transport {
public:
    HttpResponse post(const std::string& url, const std::string& body,
                      const std::map<std::string, std::string>& headers, std::chrono::seconds timeout) override;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
    std::function<void(std::chrono::milliseconds)> sleep;
};

struct Generation {
    std::string text;
    std::string cache_key;
    bool from_cache = false;
};

struct ImageGeneration {
    Bytes png;
    std::string cache_key;
    bool from_cache = false;
};

/// One configured backend with caching, retries and an in-flight bound.
/// Thread-safe.
class Provider final : public Embedder {
public:
    Provider(ProviderConfig cfg, std::shared_ptr<ResponseCache> cache, std::shared_ptr<Transport> transport,
             RetryPolicy retry = {});

    Generation chat(std::string_view system_prompt, std::string_view user_text) const;
    Generation translate(std::string_view text, std::string_view source, std::string_view target) const;
    EmbeddingVector embed(std::string_view text) const override;
    ImageGeneration text_to_image(std::string_view prompt) const;
    Generation image_to_text(std::span<const std::uint8_t> png, std::string_view prompt) const;

    /// Cache key embed(text) would use.
    std::string embed_key(std::string_view text) const;

    const ProviderConfig& config() const { return cfg_; }
    std::size_t network_calls() const { return network_calls_.load(); }
    std::size_t cache_hits() const { return cache_hits_.load(); }

private:
    nlohmann::json request_envelope(std::string_view op, nlohmann::json input) const;
    void require_kind(ProviderKind k) const;
    nlohmann::json post_json(const std::string& path, const nlohmann::json& payload) const;
    /// Lookup-or-compute for a request; `compute` returns the response value.
    GenerationRecord cached(const nlohmann::json& request, const std::function<nlohmann::json()>& compute,
                            bool& from_cache) const;

    ProviderConfig cfg_;
    std::shared_ptr<ResponseCache> cache_;
    std::shared_ptr<Transport> transport_;
    RetryPolicy retry_;
    mutable std::counting_semaphore<256> in_flight_;
    mutable std::atomic<std::size_t> network_calls_{0};
    mutable std::atomic<std::size_t> cache_hits_{0};
};

// Free-function forms of the provider calls.
std::string chat_generate(const Provider& p, std::string_view system_prompt, std::string_view user_text);
std::string translate(const Provider& p, std::string_view text, std::string_view source, std::string_view target);
EmbeddingVector embed(const Provider& p, std::string_view text);
Bytes text_to_image(const Provider& p, std::string_view prompt);
std::string image_to_text(const Provider& p, std::span<const std::uint8_t> png, std::string_view prompt);

/// Deterministic offline backend. Every function is pure in its arguments.
namespace mock {
/// Keeps a digest-seeded subset of the input words; the keep ratio depends
/// on the system prompt, so different prompts give different outputs.
std::string chat(std::string_view system_prompt, std::string_view user_text, std::int64_t seed);
/// Prefixes every sentence with "[src→tgt] ".
std::string translate(std::string_view text, std::string_view source, std::string_view target);
/// L2-normalized hashed character-trigram counts of the lowercased text.
EmbeddingVector embed(std::string_view text, std::size_t dimension, std::int64_t seed);
/// 1x1 PNG whose pixel is the first three bytes of SHA-256(prompt).
Bytes text_to_image(std::string_view prompt);
/// Caption naming the image digest.
std::string image_to_text(std::span<const std::uint8_t> png, std::string_view prompt);
}  // namespace mock

/// Text used as the system prompt for chat-backed translation requests.
std::string translation_instruction(std::string_view source, std::string_view target);

}  // namespace semform
