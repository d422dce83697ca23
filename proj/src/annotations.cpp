#include "brsent/annotations.hpp"

#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace brsent {

Label parse_label(std::string_view text) {
  if (text == "0") return Label::negative;
  if (text == "1") return Label::positive;
  if (text == "A") return Label::ambiguous;
  throw DataError("unknown label '" + std::string(text) + "' (expected 0, 1 or A)");
}

std::string_view format_label(Label label) {
  switch (label) {
    case Label::negative:
      return "0";
    case Label::positive:
      return "1";
    case Label::ambiguous:
      return "A";
  }
  return "?";
}

LabelColumn parse_label_column(std::string_view text) {
  if (text == "label1" || text == "1") return LabelColumn::first;
  if (text == "label2" || text == "2") return LabelColumn::second;
  throw std::invalid_argument("unknown label column '" + std::string(text) + "'");
}

std::string_view format_label_column(LabelColumn column) {
  return column == LabelColumn::first ? "label1" : "label2";
}

LabelMod parse_label_mod(std::string_view tag) {
  if (tag == "ra") return LabelMod::remove_ambiguous;
  if (tag == "ato2") return LabelMod::ambiguous_to_two;
  throw std::invalid_argument("unknown label modification '" + std::string(tag) + "'");
}

std::string_view format_label_mod(LabelMod mod) {
  return mod == LabelMod::remove_ambiguous ? "ra" : "ato2";
}

LabelTransform apply_ra(std::span<const Label> labels) {
  if (labels.empty()) throw DataError("ra: empty dataset");
  LabelTransform out;
  out.num_classes = 2;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] == Label::ambiguous) continue;
    out.kept_rows.push_back(r);
    out.classes.push_back(static_cast<int>(labels[r]));
  }
  if (out.kept_rows.empty()) throw DataError("ra: every sample is Ambiguous, nothing left");
  return out;
}

LabelTransform apply_ato2(std::span<const Label> labels) {
  if (labels.empty()) throw DataError("ato2: empty dataset");
  LabelTransform out;
  out.num_classes = 3;
  out.kept_rows.reserve(labels.size());
  out.classes.reserve(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    out.kept_rows.push_back(r);
    out.classes.push_back(static_cast<int>(labels[r]));
  }
  return out;
}

LabelTransform apply_label_mod(std::span<const Label> labels, LabelMod mod) {
  return mod == LabelMod::remove_ambiguous ? apply_ra(labels) : apply_ato2(labels);
}

Label ato2_class_label(int cls) {
  switch (cls) {
    case 0:
      return Label::negative;
    case 1:
      return Label::positive;
    case 2:
      return Label::ambiguous;
    default:
      throw std::out_of_range("ato2 class must be 0, 1 or 2");
  }
}

LabeledSequences apply_label_mod(const EncodedDataset& dataset, LabelColumn column,
                                 LabelMod mod) {
  const auto& labels = column == LabelColumn::first ? dataset.labels1 : dataset.labels2;
  LabelTransform t = apply_label_mod(labels, mod);
  LabeledSequences out;
  out.num_classes = t.num_classes;
  out.classes = std::move(t.classes);
  out.sequences.reserve(t.kept_rows.size());
  for (auto r : t.kept_rows) out.sequences.push_back(dataset.sequences.at(r));
  return out;
}

std::size_t agreement_index(Label label) {
  switch (label) {
    case Label::positive:
      return 0;
    case Label::negative:
      return 1;
    case Label::ambiguous:
      return 2;
  }
  return 2;
}

AgreementReport confusion_matrix(std::span<const Label> first, std::span<const Label> second) {
  if (first.size() != second.size()) {
    throw std::invalid_argument("label arrays differ in length: " +
                                std::to_string(first.size()) + " vs " +
                                std::to_string(second.size()));
  }
  if (first.empty()) throw std::invalid_argument("confusion matrix of zero samples");
  AgreementReport report;
  for (std::size_t k = 0; k < first.size(); ++k) {
    ++report.matrix[agreement_index(first[k])][agreement_index(second[k])];
  }
  report.total = first.size();
  for (std::size_t k = 0; k < 3; ++k) report.agreed += report.matrix[k][k];
  const double n = static_cast<double>(report.total);
  report.agreement_rate = static_cast<double>(report.agreed) / n;

  double expected = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      row += static_cast<double>(report.matrix[k][j]);
      col += static_cast<double>(report.matrix[j][k]);
    }
    expected += (row / n) * (col / n);
  }
  report.kappa = expected < 1.0 ? (report.agreement_rate - expected) / (1.0 - expected) : 1.0;
  return report;
}

std::string AgreementReport::to_json() const {
  nlohmann::json j;
  j["order"] = {"Positive", "Negative", "Ambiguous"};
  j["matrix"] = matrix;
  j["total"] = total;
  j["agreed"] = agreed;
  j["agreement_rate"] = agreement_rate;
  j["kappa"] = kappa;
  j["kappa_note"] = "Cohen's kappa is an extension; raw agreement is trace/total";
  return j.dump(2);
}

std::string AgreementReport::to_table() const {
  static constexpr const char* kNames[] = {"Positive", "Negative", "Ambiguous"};
  std::ostringstream out;
  out << std::left << std::setw(18) << "First Validation" << "Second Validation\n";
  out << std::setw(18) << "";
  for (const char* name : kNames) out << std::right << std::setw(11) << name;
  out << '\n';
  for (std::size_t r = 0; r < 3; ++r) {
    out << std::left << std::setw(18) << kNames[r];
    for (std::size_t c = 0; c < 3; ++c) out << std::right << std::setw(11) << matrix[r][c];
    out << '\n';
  }
  out << "\nagreed " << agreed << " / " << total << " = " << std::fixed << std::setprecision(4)
      << agreement_rate << '\n';
  out << "kappa (extension) = " << std::setprecision(4) << kappa << '\n';
  return out.str();
}

}  // namespace brsent
