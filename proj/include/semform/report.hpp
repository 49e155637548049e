#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "semform/classifier.hpp"
#include "semform/corpus.hpp"
#include "semform/lexstats.hpp"
#include "semform/textmetrics.hpp"
#include "semform/transformed_corpus.hpp"

namespace semform {

struct ReportCell {
    /// Missing values render as an em-dash placeholder.
    std::optional<double> value;
    /// Digits after the point for display; CSV and JSON keep full precision.
    int precision = 3;
    bool significant = false;
    bool bold = false;
    /// Rendered after the value, e.g. "**" significance stars.
    std::string annotation;
    /// Displays values below 0.001 as "<0.001".
    bool p_value = false;

    friend bool operator==(const ReportCell&, const ReportCell&) = default;
};

struct ReportRow {
    std::string label;
    std::vector<ReportCell> cells;

    friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct ReportTable {
    /// File stem: reports/table_<name>.<ext>.
    std::string name;
    std::string title;
    std::string row_header = "Transformation";
    std::vector<std::string> columns;
    std::vector<ReportRow> rows;
    std::vector<std::string> footer;
    /// Columns where the per-column maximum is bolded.
    std::vector<std::size_t> maxima_columns;

    /// Rectangular rows; a bold cell is significant or a column maximum.
    void validate() const;
    nlohmann::json to_json() const;
    static ReportTable from_json(const nlohmann::json& j);
    friend bool operator==(const ReportTable&, const ReportTable&) = default;
};

enum class ReportFormat { Markdown, Csv, Json };

std::string_view extension(ReportFormat f);
std::optional<ReportFormat> parse_report_format(std::string_view s);

/// Deterministic bytes for a given table. Throws on stream failure.
void emit(const ReportTable& table, ReportFormat format, std::ostream& out);
std::string render(const ReportTable& table, ReportFormat format);

/// Notes appended to every table footer.
struct ReportNotes {
    MetricOptions metrics;
    std::string tokenizer;
    std::string tagger;

    std::vector<std::string> lines() const;
};

inline constexpr std::string_view kClassifierNote =
    "Classifier: class-weighted logistic-regression head over provider embeddings (stands in for transformer "
    "fine-tuning); absolute scores are not comparable with fine-tuned models.";

/// Kinds compared against the reference corpus, in pipeline order.
inline constexpr std::array<TransformationKind, 5> kSimilarityKinds = {
    TransformationKind::ShortSummary, TransformationKind::MediumSummary, TransformationKind::LongSummary,
    TransformationKind::Storyboard, TransformationKind::ImageDescription};

/// Columns Step, chrF, BLEU, Cosine; 2 decimals. Kinds without scores are
/// listed in the footer.
ReportTable similarity_table(const std::map<TransformationKind, SimilarityScore>& scores,
                             TransformationKind reference, const ReportNotes& notes);

struct SignificanceResult {
    double p_value = 1.0;
    std::string method;
    bool improves = false;
};

/// Paired Wilcoxon on per-seed macro-F1. Throws DataError when the seeds
/// of the two run lists differ.
SignificanceResult compare_runs(const std::vector<ClassificationRun>& baseline,
                                const std::vector<ClassificationRun>& candidate);

/// Columns Step, macro-F1, Acc AD, Acc C, p; 3 decimals. Stars on macro-F1
/// when the mean improves on the baseline (* p < 0.05, ** p < 0.01); bold
/// per-column maxima of the three metric columns, ties included.
ReportTable classification_table(const std::map<TransformationKind, std::vector<ClassificationRun>>& runs,
                                 TransformationKind baseline, const ReportNotes& notes,
                                 std::string name = "classification");

/// Original vs Translated vs BackTranslated; bold maxima, no stars.
ReportTable back_translation_table(const std::map<TransformationKind, std::vector<ClassificationRun>>& runs,
                                   std::string_view source_language, const ReportNotes& notes);

/// One C mean / AD mean / p triple per measure; the triple is bold when
/// p < 0.05. A nullopt comparison renders as placeholders with a footnote
/// quoting `reasons[kind][measure]` when given.
using MeasureComparisons = std::map<TransformationKind, std::map<std::string, std::optional<GroupComparison>>>;
using MeasureReasons = std::map<TransformationKind, std::map<std::string, std::string>>;
ReportTable group_measure_table(std::string name, std::string title, const std::vector<std::string>& measures,
                                const MeasureComparisons& comparisons, const ReportNotes& notes,
                                const MeasureReasons& reasons = {});

/// Table of group sizes and mean (sd) token counts.
ReportTable dataset_table(const std::vector<std::pair<std::string, DatasetStats>>& datasets,
                          const std::string& tokenizer);

/// CSV with reference kinds as rows and candidate kinds as columns.
void write_matrix_csv(const PairwiseMatrix& m, std::ostream& out);

}  // namespace semform
