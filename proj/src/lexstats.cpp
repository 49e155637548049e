#include "semform/lexstats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <memory>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>
#include <unicode/brkiter.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>

#include "semform/error.hpp"
#include "semform/parallel.hpp"

namespace semform {

namespace {

icu::BreakIterator& word_breaker() {
    thread_local std::unique_ptr<icu::BreakIterator> it = [] {
        UErrorCode status = U_ZERO_ERROR;
        std::unique_ptr<icu::BreakIterator> bi(icu::BreakIterator::createWordInstance(icu::Locale::getRoot(), status));
        if (U_FAILURE(status)) throw std::runtime_error(fmt::format("ICU word break iterator: {}", u_errorName(status)));
        return bi;
    }();
    return *it;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::vector<std::string> Tokenizer::tokenize(std::string_view text) const {
    std::vector<std::string> tokens;
    if (text.empty()) return tokens;
    icu::UnicodeString ustr = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    icu::BreakIterator& bi = word_breaker();
    bi.setText(ustr);
    int32_t start = bi.first();
    for (int32_t end = bi.next(); end != icu::BreakIterator::DONE; start = end, end = bi.next()) {
        if (bi.getRuleStatus() < UBRK_WORD_NONE_LIMIT) continue;
        icu::UnicodeString word(ustr, start, end - start);
        if (lowercase_) word.toLower(icu::Locale::getRoot());
        std::string utf8;
        word.toUTF8String(utf8);
        tokens.push_back(std::move(utf8));
    }
    return tokens;
}

std::string Tokenizer::describe() const {
    return lowercase_ ? "unicode_words (UAX #29, lowercased)" : "unicode_words (UAX #29)";
}

std::vector<std::string> tokenize(std::string_view text) { return Tokenizer{}.tokenize(text); }

double ttr(std::span<const std::string> tokens) {
    if (tokens.empty()) throw DomainError("ttr: empty token list");
    std::unordered_set<std::string_view> unique(tokens.begin(), tokens.end());
    return static_cast<double>(unique.size()) / static_cast<double>(tokens.size());
}

FrequencyTable::FrequencyTable(std::unordered_map<std::string, double> probabilities, std::string language)
    : probabilities_(std::move(probabilities)), language_(std::move(language)) {
    if (probabilities_.empty()) throw DataError("frequency table is empty");
    for (const auto& [w, p] : probabilities_)
        if (!(p > 0.0 && p <= 1.0)) throw DataError(fmt::format("frequency table: probability {} for \"{}\" outside (0, 1]", p, w));
}

FrequencyTable FrequencyTable::parse(std::istream& in, std::string language) {
    std::unordered_map<std::string, double> probs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw DataError(fmt::format("frequency table line {}: expected word<TAB>probability", lineno));
        double p = 0.0;
        try {
            std::size_t used = 0;
            p = std::stod(line.substr(tab + 1), &used);
        } catch (const std::exception&) {
            throw DataError(fmt::format("frequency table line {}: bad probability", lineno));
        }
        probs[line.substr(0, tab)] = p;
    }
    return FrequencyTable(std::move(probs), std::move(language));
}

FrequencyTable FrequencyTable::load(const std::filesystem::path& path, std::string language) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open frequency table {}", path.string()));
    return parse(in, std::move(language));
}

std::optional<double> FrequencyTable::probability(std::string_view word) const {
    auto it = probabilities_.find(std::string(word));
    if (it == probabilities_.end()) return std::nullopt;
    return it->second;
}

std::optional<double> FrequencyTable::zipf(std::string_view word) const {
    auto p = probability(word);
    if (!p) return std::nullopt;
    return zipf_from_probability(*p);
}

double FrequencyTable::min_zipf() const {
    double m = INFINITY;
    for (const auto& [w, p] : probabilities_) m = std::min(m, zipf_from_probability(p));
    return m;
}

double FrequencyTable::max_zipf() const {
    double m = -INFINITY;
    for (const auto& [w, p] : probabilities_) m = std::max(m, zipf_from_probability(p));
    return m;
}

double zipf_from_probability(double p) { return std::log10(p * 1e9); }

double avg_zipf(std::span<const std::string> tokens, const FrequencyTable& table, double oov_zipf) {
    if (tokens.empty()) throw DomainError("avg_zipf: empty token list");
    double sum = 0.0;
    for (const auto& t : tokens) sum += table.zipf(t).value_or(oov_zipf);
    return sum / static_cast<double>(tokens.size());
}

namespace {
constexpr std::pair<PosTag, std::string_view> kTagNames[] = {
    {PosTag::NOUN, "NOUN"}, {PosTag::PRON, "PRON"}, {PosTag::VERB, "VERB"}, {PosTag::VERB_PART, "VERB_PART"},
    {PosTag::ADV, "ADV"},   {PosTag::ADJ, "ADJ"},   {PosTag::DET, "DET"},   {PosTag::ADP, "ADP"},
    {PosTag::CONJ, "CONJ"}, {PosTag::NUM, "NUM"},   {PosTag::PRT, "PRT"},   {PosTag::X, "X"},
};
}  // namespace

std::string_view to_string(PosTag t) {
    for (const auto& [tag, name] : kTagNames)
        if (tag == t) return name;
    return "X";
}

std::optional<PosTag> parse_pos_tag(std::string_view s) {
    for (const auto& [tag, name] : kTagNames)
        if (name == s) return tag;
    // Penn-style aliases used in the lexical literature.
    if (s == "RB") return PosTag::ADV;
    if (s == "VBG" || s == "VBN") return PosTag::VERB_PART;
    return std::nullopt;
}

LexiconTagger::LexiconTagger(std::unordered_map<std::string, PosTag> lexicon) : lexicon_(std::move(lexicon)) {}

LexiconTagger LexiconTagger::parse(std::istream& in) {
    std::unordered_map<std::string, PosTag> lex;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw DataError(fmt::format("POS lexicon line {}: expected word<TAB>TAG", lineno));
        auto tag = parse_pos_tag(line.substr(tab + 1));
        if (!tag) throw DataError(fmt::format("POS lexicon line {}: unknown tag \"{}\"", lineno, line.substr(tab + 1)));
        lex[line.substr(0, tab)] = *tag;
    }
    return LexiconTagger(std::move(lex));
}

LexiconTagger LexiconTagger::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open POS lexicon {}", path.string()));
    return parse(in);
}

PosTag LexiconTagger::tag_word(std::string_view word) const {
    if (auto it = lexicon_.find(std::string(word)); it != lexicon_.end()) return it->second;
    if (!word.empty() && std::all_of(word.begin(), word.end(), [](unsigned char c) { return std::isdigit(c) || c == '.' || c == ','; }))
        return PosTag::NUM;
    if (word.size() > 4 && ends_with(word, "ly")) return PosTag::ADV;
    if (word.size() > 4 && (ends_with(word, "ing") || ends_with(word, "ed"))) return PosTag::VERB_PART;
    if (word.size() > 5 && (ends_with(word, "tion") || ends_with(word, "ness") || ends_with(word, "ment")))
        return PosTag::NOUN;
    return PosTag::X;
}

std::vector<PosTag> LexiconTagger::tag(std::string_view, std::span<const std::string> tokens) const {
    std::vector<PosTag> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(tag_word(t));
    return out;
}

std::string LexiconTagger::describe() const {
    return fmt::format("lexicon+suffix baseline ({} entries)", lexicon_.size());
}

AnnotationTagger::AnnotationTagger(std::map<std::string, std::vector<PosTag>> annotations)
    : annotations_(std::move(annotations)) {}

AnnotationTagger AnnotationTagger::parse(std::istream& in) {
    std::map<std::string, std::vector<PosTag>> ann;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(fmt::format("POS annotation line {}: {}", lineno, e.what()));
        }
        if (!obj.contains("id") || !obj.contains("tags") || !obj["tags"].is_array())
            throw DataError(fmt::format("POS annotation line {}: need \"id\" and \"tags\"", lineno));
        std::vector<PosTag> tags;
        for (const auto& t : obj["tags"]) {
            auto tag = parse_pos_tag(t.get<std::string>());
            if (!tag) throw DataError(fmt::format("POS annotation line {}: unknown tag {}", lineno, t.dump()));
            tags.push_back(*tag);
        }
        ann[obj["id"].get<std::string>()] = std::move(tags);
    }
    return AnnotationTagger(std::move(ann));
}

AnnotationTagger AnnotationTagger::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open POS annotations {}", path.string()));
    return parse(in);
}

std::vector<PosTag> AnnotationTagger::tag(std::string_view doc_id, std::span<const std::string> tokens) const {
    auto it = annotations_.find(std::string(doc_id));
    if (it == annotations_.end()) throw DataError(fmt::format("no POS annotation for document \"{}\"", doc_id));
    if (it->second.size() != tokens.size())
        throw DataError(fmt::format("POS annotation for \"{}\" has {} tags for {} tokens", doc_id, it->second.size(),
                                    tokens.size()));
    return it->second;
}

std::string AnnotationTagger::describe() const {
    return fmt::format("external annotations ({} documents)", annotations_.size());
}

std::vector<PosTag> pos_tag(std::span<const std::string> tokens, const Tagger& tagger, std::string_view doc_id) {
    auto tags = tagger.tag(doc_id, tokens);
    if (tags.size() != tokens.size()) throw DataError("tagger returned a tag count different from the token count");
    return tags;
}

PosRatios pos_ratios(std::span<const PosTag> tags) {
    if (tags.empty()) throw DomainError("pos_ratios: empty tag list");
    std::size_t nouns = 0, pronouns = 0, adverbs = 0, participles = 0;
    for (PosTag t : tags) {
        nouns += t == PosTag::NOUN;
        pronouns += t == PosTag::PRON;
        adverbs += t == PosTag::ADV;
        participles += t == PosTag::VERB_PART;
    }
    const double n = static_cast<double>(tags.size());
    PosRatios r;
    if (nouns > 0) r.pnr = static_cast<double>(pronouns) / static_cast<double>(nouns);
    r.adv_ratio = static_cast<double>(adverbs) / n;
    r.part_ratio = static_cast<double>(participles) / n;
    return r;
}

GroupComparison group_compare(std::span<const std::optional<double>> values, std::span<const Group> groups) {
    if (values.size() != groups.size())
        throw DataError(fmt::format("group_compare: {} values for {} group labels", values.size(), groups.size()));
    std::vector<double> ad, control;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!values[i]) {
            ++excluded;
            continue;
        }
        (groups[i] == Group::AD ? ad : control).push_back(*values[i]);
    }
    if (ad.size() < 2 || control.size() < 2)
        throw DomainError(fmt::format("group_compare: need >= 2 defined values per group (AD {}, C {})", ad.size(),
                                      control.size()));
    GroupComparison g;
    g.detail = welch_t(control, ad);
    g.mean_control = mean(control);
    g.mean_ad = mean(ad);
    g.p_value = g.detail.p_value;
    g.test = std::string(to_string(g.detail.method));
    g.excluded = excluded;
    return g;
}

GroupComparison group_compare(std::span<const double> values, std::span<const Group> groups) {
    std::vector<std::optional<double>> wrapped(values.begin(), values.end());
    return group_compare(std::span<const std::optional<double>>(wrapped), groups);
}

std::vector<DocumentMeasures> measure_documents(std::span<const std::string> ids, std::span<const std::string> texts,
                                                std::span<const Group> groups, const Tokenizer& tokenizer,
                                                const FrequencyTable& table, const Tagger& tagger, double oov_zipf) {
    if (ids.size() != texts.size() || ids.size() != groups.size())
        throw DataError("measure_documents: ids, texts and groups differ in length");
    std::vector<DocumentMeasures> out(ids.size());
    parallel_for(ids.size(), [&](std::size_t i) {
        const auto tokens = tokenizer.tokenize(texts[i]);
        if (tokens.empty()) throw DataError(fmt::format("document \"{}\" has no word tokens", ids[i]));
        DocumentMeasures& m = out[i];
        m.id = ids[i];
        m.group = groups[i];
        m.tokens = tokens.size();
        m.ttr = ttr(tokens);
        m.zipf = avg_zipf(tokens, table, oov_zipf);
        m.pos = pos_ratios(pos_tag(tokens, tagger, ids[i]));
    });
    return out;
}

}  // namespace semform
