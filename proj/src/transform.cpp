#include "semform/transform.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <regex>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "semform/parallel.hpp"

namespace semform {

using nlohmann::json;

PromptSet PromptSet::defaults() {
    PromptSet p;
    p.prompts_[TransformationKind::ShortSummary] = std::string(kShortSummaryPrompt);
    p.prompts_[TransformationKind::MediumSummary] = std::string(kMediumSummaryPrompt);
    p.prompts_[TransformationKind::LongSummary] = std::string(kLongSummaryPrompt);
    p.prompts_[TransformationKind::Storyboard] = std::string(kStoryboardPrompt);
    p.prompts_[TransformationKind::ImageDescription] = std::string(kImageCaptionPrompt);
    return p;
}

const std::string& PromptSet::prompt(TransformationKind k) const {
    auto it = prompts_.find(k);
    if (it == prompts_.end()) throw DataError(fmt::format("no prompt defined for {}", to_string(k)));
    return it->second;
}

void PromptSet::override_prompt(TransformationKind k, std::string text) {
    if (!prompts_.contains(k)) throw DataError(fmt::format("{} does not use a prompt", to_string(k)));
    if (text.empty()) throw DataError(fmt::format("empty prompt override for {}", to_string(k)));
    prompts_[k] = std::move(text);
    overridden_.insert(k);
}

json PromptSet::to_json() const {
    json j = json::object();
    for (const auto& [k, text] : prompts_) j[std::string(to_string(k))] = text;
    return j;
}

TransformationKind summary_kind(SummaryLength len) {
    switch (len) {
        case SummaryLength::Short: return TransformationKind::ShortSummary;
        case SummaryLength::Medium: return TransformationKind::MediumSummary;
        case SummaryLength::Long: return TransformationKind::LongSummary;
    }
    return TransformationKind::ShortSummary;
}

namespace {

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

std::string describe_current_exception() {
    try {
        throw;
    } catch (const std::exception& e) {
        return e.what();
    } catch (...) {
        return "unknown error";
    }
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(now));
}

const Provider& require(const Provider* p, std::string_view role) {
    if (!p) throw DataError(fmt::format("no {} provider configured", role));
    return *p;
}

}  // namespace

Generation summarize(std::string_view text, SummaryLength length, const Provider& chat, const PromptSet& prompts) {
    if (blank(text)) throw DataError("summarize: empty input text");
    return chat.chat(prompts.prompt(summary_kind(length)), text);
}

Generation storyboard(std::string_view text, const Provider& chat, const PromptSet& prompts) {
    if (blank(text)) throw DataError("storyboard: empty input text");
    return chat.chat(prompts.prompt(TransformationKind::Storyboard), text);
}

std::vector<std::string> split_scenes(std::string_view storyboard_text) {
    static const std::regex numbered(R"(^\s*\d+[.)]\s+)");
    std::vector<std::string> scenes;
    std::string current;
    std::size_t start = 0;
    bool any_numbered = false;
    while (start <= storyboard_text.size()) {
        auto end = storyboard_text.find('\n', start);
        if (end == std::string_view::npos) end = storyboard_text.size();
        const std::string line(storyboard_text.substr(start, end - start));
        if (std::regex_search(line, numbered)) {
            any_numbered = true;
            if (!blank(current)) scenes.push_back(current);
            current = line;
        } else if (!blank(line)) {
            if (!current.empty()) current.push_back('\n');
            current += line;
        }
        if (end == storyboard_text.size()) break;
        start = end + 1;
    }
    if (!blank(current)) scenes.push_back(current);
    if (!any_numbered) return {std::string(storyboard_text)};
    return scenes;
}

RoundTrip image_roundtrip(std::string_view storyboard_text, const Provider& t2i, const Provider& i2t,
                          const PromptSet& prompts, ImageMode mode) {
    if (blank(storyboard_text)) throw DataError("image_roundtrip: empty storyboard text");
    const std::vector<std::string> scenes =
        mode == ImageMode::PerScene ? split_scenes(storyboard_text) : std::vector<std::string>{std::string(storyboard_text)};
    RoundTrip out;
    for (const auto& scene : scenes) {
        ImageGeneration image;
        try {
            image = t2i.text_to_image(scene);
        } catch (const std::exception& e) {
            throw StageError("text_to_image", e.what());
        }
        Generation caption;
        try {
            caption = i2t.image_to_text(image.png, prompts.prompt(TransformationKind::ImageDescription));
        } catch (const std::exception& e) {
            throw StageError("image_to_text", e.what());
        }
        if (!out.caption.empty()) out.caption += "\n\n";
        out.caption += caption.text;
        out.provenance.push_back(image.cache_key);
        out.provenance.push_back(caption.cache_key);
    }
    return out;
}

namespace {

struct KindRun {
    TransformedCorpus corpus;
    std::vector<ItemFailure> failures;
};

template <class MakeItem>
KindRun run_items(TransformationKind kind, const std::string& dataset_name, const std::string& language,
                  const std::vector<TransformedItem>& inputs, int max_in_flight, MakeItem&& make_item) {
    std::vector<std::optional<TransformedItem>> produced(inputs.size());
    const auto errors = parallel_for_collect(
        inputs.size(), [&](std::size_t i) { produced[i] = make_item(inputs[i]); }, max_in_flight);
    KindRun run;
    run.corpus = {kind, dataset_name, language, {}};
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (errors[i]) {
            std::string msg;
            try {
                std::rethrow_exception(errors[i]);
            } catch (...) {
                msg = describe_current_exception();
            }
            run.failures.push_back({kind, inputs[i].source_id, msg});
        } else {
            run.corpus.items.push_back(std::move(*produced[i]));
        }
    }
    return run;
}

KindRun strict_or_throw(KindRun run) {
    if (!run.failures.empty()) {
        const auto& f = run.failures.front();
        throw ItemError(std::string(to_string(f.kind)), f.id, f.error);
    }
    return run;
}

}  // namespace

TransformedCorpus translate_corpus(const Dataset& d, std::string_view target, const Provider& translator,
                                   int max_in_flight) {
    if (same_language(d.source_language, target))
        throw DataError(fmt::format("dataset \"{}\" is already in {}; skip the translation step", d.name, target));
    const auto inputs = original_corpus(d).items;
    const std::string tgt(target);
    auto run = run_items(TransformationKind::Translated, d.name, tgt, inputs, max_in_flight, [&](const TransformedItem& in) {
        auto g = translator.translate(in.text, d.source_language, tgt);
        return TransformedItem{in.source_id, std::move(g.text), {std::move(g.cache_key)}};
    });
    return strict_or_throw(std::move(run)).corpus;
}

TransformedCorpus back_translate(const TransformedCorpus& corpus, std::string_view target, const Provider& translator,
                                 int max_in_flight) {
    if (corpus.kind != TransformationKind::Translated)
        throw DataError(fmt::format("back_translate expects a Translated corpus, got {}", to_string(corpus.kind)));
    const std::string tgt(target);
    auto run = run_items(TransformationKind::BackTranslated, corpus.dataset_name, tgt, corpus.items, max_in_flight,
                         [&](const TransformedItem& in) {
                             auto g = translator.translate(in.text, corpus.language, tgt);
                             return TransformedItem{in.source_id, std::move(g.text), {std::move(g.cache_key)}};
                         });
    return strict_or_throw(std::move(run)).corpus;
}

bool same_language(std::string_view a, std::string_view b) {
    auto primary = [](std::string_view tag) {
        std::string p(tag.substr(0, tag.find('-')));
        std::transform(p.begin(), p.end(), p.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return p;
    };
    return primary(a) == primary(b);
}

json PipelineConfig::to_json() const {
    json providers_json = json::object();
    auto add = [&](const char* role, const Provider* p) {
        if (!p) return;
        json s = p->config().summary();
        s["temperature"] = p->config().temperature;
        s["max_tokens"] = p->config().max_tokens;
        s["seed"] = p->config().seed ? json(*p->config().seed) : json(nullptr);
        providers_json[role] = s;
    };
    add("chat", providers.chat);
    add("translate", providers.translate);
    add("text_to_image", providers.text_to_image);
    add("image_to_text", providers.image_to_text);
    json kinds = json::array();
    for (auto k : enabled) kinds.push_back(to_string(k));
    json overrides = json::array();
    for (const auto& [k, _] : prompts.prompts())
        if (prompts.is_overridden(k)) overrides.push_back(to_string(k));
    return json{{"enabled", kinds},
                {"providers", providers_json},
                {"prompts", prompts.to_json()},
                {"prompt_overrides", overrides},
                {"target_language", target_language},
                {"failure_mode", failure_mode == FailureMode::Strict ? "strict" : "lenient"},
                {"lenient_threshold", lenient_threshold},
                {"image_mode", image_mode == ImageMode::PerScene ? "per_scene" : "per_storyboard"}};
}

PipelineResult run_pipeline(const Dataset& d, const PipelineConfig& cfg) {
    if (d.empty()) throw DataError(fmt::format("dataset \"{}\" is empty", d.name));
    PipelineResult result;
    const std::string started = utc_now();
    const bool needs_translation = !same_language(d.source_language, cfg.target_language);
    auto enabled = [&](TransformationKind k) { return cfg.enabled.contains(k); };

    json kinds_manifest = json::object();
    auto finish_kind = [&](KindRun run, bool keep) -> TransformedCorpus {
        const std::size_t expected = run.corpus.items.size() + run.failures.size();
        if (!run.failures.empty()) {
            const double done = static_cast<double>(run.corpus.items.size()) / static_cast<double>(expected);
            if (cfg.failure_mode == FailureMode::Strict || done < cfg.lenient_threshold) {
                const auto& f = run.failures.front();
                throw ItemError(std::string(to_string(f.kind)), f.id,
                                fmt::format("{} ({} of {} items failed)", f.error, run.failures.size(), expected));
            }
        }
        result.failures.insert(result.failures.end(), run.failures.begin(), run.failures.end());
        json items = json::object();
        for (const auto& it : run.corpus.items) items[it.source_id] = it.provenance;
        kinds_manifest[std::string(to_string(run.corpus.kind))] = {
            {"items", items}, {"completed", run.corpus.items.size()}, {"failed", run.failures.size()},
            {"included", keep}, {"finished_at", utc_now()}};
        if (keep) result.corpora[run.corpus.kind] = run.corpus;
        return std::move(run.corpus);
    };

    const TransformedCorpus original = original_corpus(d);
    if (enabled(TransformationKind::Original)) result.corpora[TransformationKind::Original] = original;

    const bool wants_step2 = enabled(TransformationKind::ShortSummary) || enabled(TransformationKind::MediumSummary) ||
                             enabled(TransformationKind::LongSummary) || enabled(TransformationKind::Storyboard) ||
                             enabled(TransformationKind::ImageDescription);

    TransformedCorpus base = original;
    std::optional<TransformedCorpus> translated;
    if (needs_translation && (enabled(TransformationKind::Translated) || enabled(TransformationKind::BackTranslated) || wants_step2)) {
        const Provider& tr = require(cfg.providers.translate, "translate");
        translated = finish_kind(
            run_items(TransformationKind::Translated, d.name, cfg.target_language, original.items, cfg.max_in_flight,
                      [&](const TransformedItem& in) {
                          auto g = tr.translate(in.text, d.source_language, cfg.target_language);
                          return TransformedItem{in.source_id, std::move(g.text), {std::move(g.cache_key)}};
                      }),
            enabled(TransformationKind::Translated));
        base = *translated;
    }
    const std::string base_language = needs_translation ? cfg.target_language : d.source_language;

    auto chat_kind = [&](TransformationKind kind, const TransformedCorpus& input, bool keep) {
        const Provider& chat = require(cfg.providers.chat, "chat");
        const std::string& prompt = cfg.prompts.prompt(kind);
        return finish_kind(run_items(kind, d.name, base_language, input.items, cfg.max_in_flight,
                                     [&](const TransformedItem& in) {
                                         if (blank(in.text)) throw DataError("empty input text");
                                         auto g = chat.chat(prompt, in.text);
                                         return TransformedItem{in.source_id, std::move(g.text), {std::move(g.cache_key)}};
                                     }),
                           keep);
    };

    for (auto k : {TransformationKind::ShortSummary, TransformationKind::MediumSummary, TransformationKind::LongSummary})
        if (enabled(k)) chat_kind(k, base, true);

    if (enabled(TransformationKind::Storyboard) || enabled(TransformationKind::ImageDescription)) {
        const TransformedCorpus boards = chat_kind(TransformationKind::Storyboard, base, enabled(TransformationKind::Storyboard));
        if (enabled(TransformationKind::ImageDescription)) {
            const Provider& t2i = require(cfg.providers.text_to_image, "text_to_image");
            const Provider& i2t = require(cfg.providers.image_to_text, "image_to_text");
            finish_kind(run_items(TransformationKind::ImageDescription, d.name, base_language, boards.items,
                                  cfg.max_in_flight,
                                  [&](const TransformedItem& in) {
                                      auto rt = image_roundtrip(in.text, t2i, i2t, cfg.prompts, cfg.image_mode);
                                      std::vector<std::string> prov = in.provenance;
                                      prov.insert(prov.end(), rt.provenance.begin(), rt.provenance.end());
                                      return TransformedItem{in.source_id, std::move(rt.caption), std::move(prov)};
                                  }),
                        true);
        }
    }

    if (needs_translation && enabled(TransformationKind::BackTranslated)) {
        const Provider& tr = require(cfg.providers.translate, "translate");
        finish_kind(run_items(TransformationKind::BackTranslated, d.name, d.source_language, translated->items,
                              cfg.max_in_flight,
                              [&](const TransformedItem& in) {
                                  auto g = tr.translate(in.text, cfg.target_language, d.source_language);
                                  return TransformedItem{in.source_id, std::move(g.text), {std::move(g.cache_key)}};
                              }),
                    true);
    }

    const json config_json = cfg.to_json();
    json failures = json::array();
    for (const auto& f : result.failures) failures.push_back({{"kind", to_string(f.kind)}, {"id", f.id}, {"error", f.error}});
    json skipped = json::array();
    if (!needs_translation) {
        for (auto k : {TransformationKind::Translated, TransformationKind::BackTranslated})
            if (enabled(k)) skipped.push_back(to_string(k));
    }
    result.manifest = {{"dataset", d.name},
                       {"source_language", d.source_language},
                       {"target_language", cfg.target_language},
                       {"config", config_json},
                       {"config_digest", sha256_hex(config_json.dump())},
                       {"prompts", cfg.prompts.to_json()},
                       {"kinds", kinds_manifest},
                       {"skipped_kinds", skipped},
                       {"failures", failures},
                       {"started_at", started},
                       {"finished_at", utc_now()}};
    return result;
}

}  // namespace semform
