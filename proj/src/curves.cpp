#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "brsent/experiment.hpp"

namespace brsent {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_curve_svg(std::string_view title, std::string_view y_label,
                             std::span<const CurveSeries> series) {
  if (series.empty() || series.front().values.empty()) {
    throw std::invalid_argument("cannot plot an empty series");
  }
  const std::size_t epochs = series.front().values.size();
  double lo = series.front().values.front(), hi = lo;
  for (const auto& s : series) {
    if (s.values.size() != epochs) throw std::invalid_argument("series differ in length");
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto x_of = [&](std::size_t k) {
    return epochs == 1 ? kLeft + plot_w / 2
                       : kLeft + plot_w * static_cast<double>(k) / static_cast<double>(epochs - 1);
  };
  auto y_of = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << escape_xml(title) << "</text>\n"
      << "<g stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w
      << "\" y2=\"" << kTop + plot_h << "\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kTop + plot_h << "\"/>\n"
      << "</g>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = lo + (hi - lo) * tick / 4.0;
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(y_of(v) + 4)
        << "\" text-anchor=\"end\" font-size=\"10\">" << num(v) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">epoch (1.." << epochs << ")</text>\n"
      << "<text x=\"16\" y=\"" << kTop + plot_h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
      << kTop + plot_h / 2 << ")\" text-anchor=\"middle\">" << escape_xml(y_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    svg << "<polyline class=\"series\" data-name=\"" << escape_xml(series[s].name)
        << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < epochs; ++k) {
      svg << (k ? " " : "") << num(x_of(k)) << ',' << num(y_of(series[s].values[k]));
    }
    svg << "\"/>\n";
    for (std::size_t k = 0; k < epochs; ++k) {
      svg << "<circle cx=\"" << num(x_of(k)) << "\" cy=\"" << num(y_of(series[s].values[k]))
          << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
  }

  svg << "<g class=\"legend\" font-size=\"12\">\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = kTop + 10 + 20.0 * static_cast<double>(s);
    svg << "<rect x=\"" << kWidth - kRight + 15 << "\" y=\"" << y - 8
        << "\" width=\"14\" height=\"4\" fill=\"" << kColors[s % std::size(kColors)] << "\"/>\n"
        << "<text x=\"" << kWidth - kRight + 35 << "\" y=\"" << y << "\">"
        << escape_xml(series[s].name) << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

void emit_curves(const TrainingHistory& history, const std::filesystem::path& out_dir,
                 std::string_view title, std::string_view prefix) {
  if (history.empty()) throw std::invalid_argument("cannot plot an empty history");
  std::filesystem::create_directories(out_dir);
  const std::string p(prefix);
  {
    std::ofstream csv(out_dir / (p + "history.csv"), std::ios::binary);
    write_history_csv(history, csv);
  }
  auto column = [&](double EpochRecord::*field) {
    std::vector<double> v;
    for (const auto& r : history.records) v.push_back(r.*field);
    return v;
  };
  const CurveSeries loss[] = {{"loss", column(&EpochRecord::loss)},
                              {"val_loss", column(&EpochRecord::val_loss)}};
  const CurveSeries acc[] = {{"acc", column(&EpochRecord::acc)},
                             {"val_acc", column(&EpochRecord::val_acc)}};
  std::ofstream(out_dir / (p + "loss.svg"), std::ios::binary)
      << render_curve_svg(std::string(title) + ": loss / val_loss", "loss", loss);
  std::ofstream(out_dir / (p + "acc.svg"), std::ios::binary)
      << render_curve_svg(std::string(title) + ": acc / val_acc", "accuracy", acc);
}

}  // namespace brsent
