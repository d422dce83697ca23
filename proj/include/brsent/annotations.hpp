#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brsent/corpus.hpp"
#include "brsent/label.hpp"

namespace brsent {

// `ra` drops Ambiguous rows; `ato2` keeps every row and maps Ambiguous to 2.
enum class LabelMod { remove_ambiguous, ambiguous_to_two };

LabelMod parse_label_mod(std::string_view tag);
std::string_view format_label_mod(LabelMod mod);

// Result of a label transform over one label column.
struct LabelTransform {
  std::vector<std::size_t> kept_rows;  // indices into the input, in order
  std::vector<int> classes;            // parallel to kept_rows
  int num_classes = 0;
};

// Throws DataError on empty input or when every row is dropped.
LabelTransform apply_ra(std::span<const Label> labels);
LabelTransform apply_ato2(std::span<const Label> labels);
LabelTransform apply_label_mod(std::span<const Label> labels, LabelMod mod);

// Inverse of the ato2 class mapping.
Label ato2_class_label(int cls);

// Sequences with integer class targets, the unit the trainer consumes.
struct LabeledSequences {
  std::vector<Sequence> sequences;
  std::vector<int> classes;
  int num_classes = 0;

  std::size_t size() const { return sequences.size(); }
};

LabeledSequences apply_label_mod(const EncodedDataset& dataset, LabelColumn column,
                                 LabelMod mod);

// Rows and columns ordered Positive, Negative, Ambiguous.
struct AgreementReport {
  std::array<std::array<std::uint64_t, 3>, 3> matrix{};
  std::uint64_t total = 0;
  std::uint64_t agreed = 0;  // trace
  double agreement_rate = 0.0;
  // Cohen's kappa; an extension beyond raw agreement.
  double kappa = 0.0;

  std::string to_json() const;
  std::string to_table() const;
};

// Matrix index of a label in Positive, Negative, Ambiguous order.
std::size_t agreement_index(Label label);

// Throws std::invalid_argument on a length mismatch or empty input.
AgreementReport confusion_matrix(std::span<const Label> first, std::span<const Label> second);

}  // namespace brsent
