#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace brsent {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Annotator judgement for one post. Serialized as "0", "1", "A".
enum class Label { negative = 0, positive = 1, ambiguous = 2 };

Label parse_label(std::string_view text);
std::string_view format_label(Label label);

// Which of the two independent annotations a step reads.
enum class LabelColumn { first, second };

LabelColumn parse_label_column(std::string_view text);
std::string_view format_label_column(LabelColumn column);

}  // namespace brsent
