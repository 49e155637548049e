#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semform/corpus.hpp"
#include "semform/stattests.hpp"

namespace semform {

/// Unicode word segmentation (UAX #29) with punctuation and whitespace
/// segments dropped. Apostrophes inside words stay attached ("don't").
class Tokenizer {
public:
    explicit Tokenizer(bool lowercase = true) : lowercase_(lowercase) {}

    std::vector<std::string> tokenize(std::string_view text) const;
    std::size_t count(std::string_view text) const { return tokenize(text).size(); }
    bool lowercase() const { return lowercase_; }
    std::string describe() const;

private:
    bool lowercase_;
};

/// Convenience wrapper over a default (lowercasing) tokenizer.
std::vector<std::string> tokenize(std::string_view text);

/// Type-token ratio. Throws DomainError on an empty list.
double ttr(std::span<const std::string> tokens);

/// Word -> relative frequency. Loaded from "word<TAB>probability" lines.
class FrequencyTable {
public:
    FrequencyTable() = default;
    FrequencyTable(std::unordered_map<std::string, double> probabilities, std::string language);

    static FrequencyTable load(const std::filesystem::path& path, std::string language);
    static FrequencyTable parse(std::istream& in, std::string language);

    std::optional<double> probability(std::string_view word) const;
    /// log10(p * 1e9); nullopt for out-of-vocabulary words.
    std::optional<double> zipf(std::string_view word) const;
    const std::string& language() const { return language_; }
    std::size_t size() const { return probabilities_.size(); }
    double min_zipf() const;
    double max_zipf() const;

private:
    std::unordered_map<std::string, double> probabilities_;
    std::string language_;
};

double zipf_from_probability(double p);

/// Mean Zipf frequency over tokens. OOV tokens contribute `oov_zipf`.
double avg_zipf(std::span<const std::string> tokens, const FrequencyTable& table,
                double oov_zipf = 0.0);

enum class PosTag { NOUN, PRON, VERB, VERB_PART, ADV, ADJ, DET, ADP, CONJ, NUM, PRT, X };

std::string_view to_string(PosTag t);
std::optional<PosTag> parse_pos_tag(std::string_view s);

class Tagger {
public:
    virtual ~Tagger() = default;
    /// One tag per token. `doc_id` identifies the document for taggers
    /// backed by external annotations.
    virtual std::vector<PosTag> tag(std::string_view doc_id,
                                    std::span<const std::string> tokens) const = 0;
    virtual std::string describe() const = 0;
};

/// Lexicon lookup, then suffix rules, then X:
///   digits -> NUM; "-ly" -> ADV; "-ing"/"-ed" -> VERB_PART unless the word
///   is a lexicon noun; "-tion"/"-ness"/"-ment" -> NOUN.
class LexiconTagger final : public Tagger {
public:
    explicit LexiconTagger(std::unordered_map<std::string, PosTag> lexicon);
    static LexiconTagger load(const std::filesystem::path& path);
    static LexiconTagger parse(std::istream& in);

    PosTag tag_word(std::string_view word) const;
    std::vector<PosTag> tag(std::string_view doc_id,
                            std::span<const std::string> tokens) const override;
    std::string describe() const override;

private:
    std::unordered_map<std::string, PosTag> lexicon_;
};

/// Pre-tagged documents from JSONL lines {"id": str, "tags": [str]}.
class AnnotationTagger final : public Tagger {
public:
    explicit AnnotationTagger(std::map<std::string, std::vector<PosTag>> annotations);
    static AnnotationTagger load(const std::filesystem::path& path);
    static AnnotationTagger parse(std::istream& in);

    std::vector<PosTag> tag(std::string_view doc_id,
                            std::span<const std::string> tokens) const override;
    std::string describe() const override;

private:
    std::map<std::string, std::vector<PosTag>> annotations_;
};

std::vector<PosTag> pos_tag(std::span<const std::string> tokens, const Tagger& tagger,
                            std::string_view doc_id = {});

struct PosRatios {
    /// Pronouns per noun; nullopt when the document has no nouns.
    std::optional<double> pnr;
    /// Adverbs per token.
    double adv_ratio = 0.0;
    /// Participles per token.
    double part_ratio = 0.0;
};

PosRatios pos_ratios(std::span<const PosTag> tags);

struct GroupComparison {
    double mean_control = 0.0;
    double mean_ad = 0.0;
    double p_value = 1.0;
    std::string test;
    StatTestResult detail;
    /// Documents dropped because their measure was undefined.
    std::size_t excluded = 0;
};

/// Welch comparison of a per-document measure between groups. Undefined
/// values (nullopt) are excluded and counted.
GroupComparison group_compare(std::span<const std::optional<double>> values,
                              std::span<const Group> groups);
GroupComparison group_compare(std::span<const double> values, std::span<const Group> groups);

struct DocumentMeasures {
    std::string id;
    Group group = Group::Control;
    std::size_t tokens = 0;
    double ttr = 0.0;
    double zipf = 0.0;
    PosRatios pos;
};

/// Per-document lexical and POS measures; documents are processed in
/// parallel and returned in input order.
std::vector<DocumentMeasures> measure_documents(std::span<const std::string> ids,
                                                std::span<const std::string> texts,
                                                std::span<const Group> groups,
                                                const Tokenizer& tokenizer,
                                                const FrequencyTable& table,
                                                const Tagger& tagger, double oov_zipf = 0.0);

}  // namespace semform
