#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "semform/corpus.hpp"
#include "semform/error.hpp"
#include "semform/providers.hpp"
#include "semform/transformed_corpus.hpp"

namespace semform {

/// System prompts per generated kind.
class PromptSet {
public:
    static PromptSet defaults();

    const std::string& prompt(TransformationKind k) const;
    void override_prompt(TransformationKind k, std::string text);
    bool is_overridden(TransformationKind k) const { return overridden_.contains(k); }
    const std::map<TransformationKind, std::string>& prompts() const { return prompts_; }
    nlohmann::json to_json() const;

private:
    std::map<TransformationKind, std::string> prompts_;
    std::set<TransformationKind> overridden_;
};

inline constexpr std::string_view kShortSummaryPrompt =
    "Summarise the following text into a one sentence summary. Just output the summary and no other information.";
inline constexpr std::string_view kMediumSummaryPrompt =
    "Summarise the following text into a concise summary. Just output the summary and no other information.";
inline constexpr std::string_view kLongSummaryPrompt =
    "Summarise the following text into a long summary containing as much information as possible. Just output the "
    "summary and no other information.";
inline constexpr std::string_view kStoryboardPrompt =
    "Transform any text you are given into key story scenes. Focus on the most important story moments. Break down "
    "complex actions into separate scenes if needed. Just output the storyboard and no other information.";
inline constexpr std::string_view kImageCaptionPrompt = "Describe in detail what is happening in the image.";

enum class SummaryLength { Short, Medium, Long };

TransformationKind summary_kind(SummaryLength len);

/// Failure in one stage of a multi-provider chain; `stage()` names it
/// ("text_to_image", "image_to_text", ...).
class StageError : public ProviderError {
public:
    StageError(std::string stage, const std::string& what)
        : ProviderError(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Provider failure for one corpus item; keeps the item id.
class ItemError : public ProviderError {
public:
    ItemError(std::string kind, std::string id, const std::string& what)
        : ProviderError(fmt_message(kind, id, what)), kind_(std::move(kind)), id_(std::move(id)) {}
    const std::string& kind() const noexcept { return kind_; }
    const std::string& id() const noexcept { return id_; }

private:
    static std::string fmt_message(const std::string& kind, const std::string& id, const std::string& what) {
        return kind + " failed for item \"" + id + "\": " + what;
    }
    std::string kind_;
    std::string id_;
};

Generation summarize(std::string_view text, SummaryLength length, const Provider& chat,
                     const PromptSet& prompts = PromptSet::defaults());
Generation storyboard(std::string_view text, const Provider& chat, const PromptSet& prompts = PromptSet::defaults());

enum class ImageMode { PerStoryboard, PerScene };

struct RoundTrip {
    std::string caption;
    /// text_to_image key, image_to_text key (repeated per scene).
    std::vector<std::string> provenance;
};

/// Splits numbered storyboard text ("1. ...", "2. ...") into scenes. Text
/// without numbered lines is one scene.
std::vector<std::string> split_scenes(std::string_view storyboard_text);

RoundTrip image_roundtrip(std::string_view storyboard_text, const Provider& text_to_image,
                          const Provider& image_to_text, const PromptSet& prompts = PromptSet::defaults(),
                          ImageMode mode = ImageMode::PerStoryboard);

TransformedCorpus translate_corpus(const Dataset& d, std::string_view target, const Provider& translator,
                                   int max_in_flight = 4);
TransformedCorpus back_translate(const TransformedCorpus& corpus, std::string_view target,
                                 const Provider& translator, int max_in_flight = 4);

enum class FailureMode { Strict, Lenient };

struct PipelineProviders {
    const Provider* chat = nullptr;
    const Provider* translate = nullptr;
    const Provider* text_to_image = nullptr;
    const Provider* image_to_text = nullptr;
};

struct PipelineConfig {
    std::set<TransformationKind> enabled{kAllKinds.begin(), kAllKinds.end()};
    PipelineProviders providers;
    PromptSet prompts = PromptSet::defaults();
    std::string target_language = "en";
    FailureMode failure_mode = FailureMode::Strict;
    /// Minimum completed fraction per kind in lenient mode.
    double lenient_threshold = 0.9;
    int max_in_flight = 4;
    ImageMode image_mode = ImageMode::PerStoryboard;

    nlohmann::json to_json() const;
};

struct ItemFailure {
    TransformationKind kind;
    std::string id;
    std::string error;
};

struct PipelineResult {
    std::map<TransformationKind, TransformedCorpus> corpora;
    std::vector<ItemFailure> failures;
    /// Dataset name, config digest, prompt set, per-item cache keys, timestamps.
    nlohmann::json manifest;
};

/// True when the dataset's primary language subtag equals the target's.
bool same_language(std::string_view a, std::string_view b);

/// Runs every enabled transformation. Translation and back-translation only
/// apply to datasets whose language differs from the target; summaries and
/// storyboards read the translated text in that case; image descriptions
/// read the storyboards.
PipelineResult run_pipeline(const Dataset& d, const PipelineConfig& cfg);

}  // namespace semform
