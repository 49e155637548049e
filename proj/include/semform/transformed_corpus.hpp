#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "semform/corpus.hpp"

namespace semform {

enum class TransformationKind {
    Original,
    Translated,
    ShortSummary,
    MediumSummary,
    LongSummary,
    Storyboard,
    ImageDescription,
    BackTranslated,
};

inline constexpr std::array<TransformationKind, 8> kAllKinds = {
    TransformationKind::Original,      TransformationKind::Translated,  TransformationKind::ShortSummary,
    TransformationKind::MediumSummary, TransformationKind::LongSummary, TransformationKind::Storyboard,
    TransformationKind::ImageDescription, TransformationKind::BackTranslated,
};

/// Identifier form, e.g. "ShortSummary".
std::string_view to_string(TransformationKind k);
/// Human-readable row label, e.g. "Short Summaries".
std::string_view display_name(TransformationKind k);
/// Pipeline step number (0 original, 1 translation, 2 text-to-text, 3 image).
int pipeline_step(TransformationKind k);
std::optional<TransformationKind> parse_kind(std::string_view name);

struct TransformedItem {
    std::string source_id;
    std::string text;
    /// Cache keys of every generation that produced this text, in order.
    std::vector<std::string> provenance;

    friend bool operator==(const TransformedItem&, const TransformedItem&) = default;
};

struct TransformedCorpus {
    TransformationKind kind = TransformationKind::Original;
    std::string dataset_name;
    std::string language;
    std::vector<TransformedItem> items;

    std::vector<std::string> ids() const;
    std::vector<std::string> texts() const;
    const TransformedItem* find(std::string_view id) const;
    friend bool operator==(const TransformedCorpus&, const TransformedCorpus&) = default;
};

/// Wraps the untouched transcripts as the Original corpus.
TransformedCorpus original_corpus(const Dataset& d);

/// JSONL in the corpus schema plus "kind" and "provenance"; group and split
/// are taken from `source`.
void write_corpus_jsonl(const TransformedCorpus& c, const Dataset& source, std::ostream& out);
TransformedCorpus read_corpus_jsonl(std::istream& in, std::string dataset_name);

/// Returns a copy restricted to `ids`, in `ids` order.
TransformedCorpus restrict_to(const TransformedCorpus& c, const std::vector<std::string>& ids);

}  // namespace semform
