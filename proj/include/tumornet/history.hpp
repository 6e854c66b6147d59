#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tumornet/error.hpp"
#include "tumornet/text.hpp"

namespace tumornet {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double train_accuracy = 0;
  double val_loss = 0;
  double val_accuracy = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

enum class StopReason { MaxEpochs, EarlyStopping };

inline const char* stop_reason_name(StopReason r) {
  return r == StopReason::EarlyStopping ? "early_stopping" : "max_epochs";
}

struct TrainingHistory {
  std::vector<EpochRecord> records;
  std::size_t best_epoch = 0;  // 1-based, 0 when empty
  StopReason stop_reason = StopReason::MaxEpochs;

  friend bool operator==(const TrainingHistory&, const TrainingHistory&) = default;
};

inline std::string history_csv(const TrainingHistory& h) {
  std::ostringstream os;
  os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& r : h.records) {
    os << r.epoch << ',' << text::format_double(r.train_loss) << ',' << text::format_double(r.train_accuracy)
       << ',' << text::format_double(r.val_loss) << ',' << text::format_double(r.val_accuracy) << '\n';
  }
  return os.str();
}

namespace detail {

struct Series {
  const char* label;
  const char* color;
  std::vector<double> values;
};

// One chart panel. The y axis spans [0, 1.05 * max] of the plotted values;
// the bounds are recorded as data-y-min / data-y-max on the panel group.
inline void svg_panel(std::ostringstream& os, const char* id, const char* title, double x0, double y0,
                      double w, double h, const std::vector<Series>& series, std::size_t epochs) {
  double top = 0;
  for (const auto& s : series)
    for (double v : s.values) top = std::max(top, v);
  top *= 1.05;
  if (top <= 0) top = 1;
  const double left = 50, right = 15, upper = 30, lower = 35;
  const double pw = w - left - right, ph = h - upper - lower;
  auto px = [&](std::size_t e) {
    return x0 + left + (epochs > 1 ? pw * static_cast<double>(e - 1) / static_cast<double>(epochs - 1) : pw / 2);
  };
  auto py = [&](double v) { return y0 + upper + ph * (1.0 - v / top); };
  auto f = [](double v) { return text::fixed(v, 2); };

  os << "<g id=\"" << id << "\" data-y-min=\"0\" data-y-max=\"" << text::format_double(top) << "\">\n";
  os << "<text x=\"" << f(x0 + w / 2) << "\" y=\"" << f(y0 + 18) << "\" text-anchor=\"middle\">" << title
     << "</text>\n";
  os << "<line x1=\"" << f(x0 + left) << "\" y1=\"" << f(y0 + upper) << "\" x2=\"" << f(x0 + left) << "\" y2=\""
     << f(y0 + upper + ph) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << f(x0 + left) << "\" y1=\"" << f(y0 + upper + ph) << "\" x2=\"" << f(x0 + left + pw)
     << "\" y2=\"" << f(y0 + upper + ph) << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = top * t / 4.0;
    os << "<text x=\"" << f(x0 + left - 4) << "\" y=\"" << f(py(v) + 4)
       << "\" text-anchor=\"end\" font-size=\"10\">" << text::fixed(v, 3) << "</text>\n";
  }
  os << "<text x=\"" << f(x0 + left + pw / 2) << "\" y=\"" << f(y0 + h - 8)
     << "\" text-anchor=\"middle\" font-size=\"11\">epoch</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" points=\"";
    for (std::size_t e = 1; e <= s.values.size(); ++e) {
      if (e > 1) os << ' ';
      os << f(px(e)) << ',' << f(py(s.values[e - 1]));
    }
    os << "\"/>\n";
    os << "<text x=\"" << f(x0 + w - right - 4) << "\" y=\"" << f(y0 + upper + 14 + 14 * static_cast<double>(k))
       << "\" text-anchor=\"end\" font-size=\"10\" fill=\"" << s.color << "\">" << s.label << "</text>\n";
  }
  os << "</g>\n";
}

} // namespace detail

/// Line chart with a loss panel and an accuracy panel.
inline std::string history_svg(const TrainingHistory& h) {
  std::vector<double> tl, vl, ta, va;
  for (const auto& r : h.records) {
    tl.push_back(r.train_loss);
    vl.push_back(r.val_loss);
    ta.push_back(r.train_accuracy);
    va.push_back(r.val_accuracy);
  }
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"840\" height=\"320\" viewBox=\"0 0 840 320\">\n";
  os << "<rect width=\"840\" height=\"320\" fill=\"white\"/>\n";
  detail::svg_panel(os, "loss", "loss", 0, 0, 420, 320,
                    {{"train", "#1f77b4", tl}, {"validation", "#d62728", vl}}, h.records.size());
  detail::svg_panel(os, "accuracy", "accuracy", 420, 0, 420, 320,
                    {{"train", "#1f77b4", ta}, {"validation", "#d62728", va}}, h.records.size());
  os << "</svg>\n";
  return os.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << body;
  if (!out) throw DataError("cannot write " + path.string());
}

/// Writes history.csv and history.svg into `dir`.
inline void export_history(const TrainingHistory& h, const std::filesystem::path& dir) {
  if (h.records.empty()) throw DataError("cannot export an empty training history");
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw DataError("not a writable directory: " + dir.string());
  write_text_file(dir / "history.csv", history_csv(h));
  write_text_file(dir / "history.svg", history_svg(h));
}

} // namespace tumornet
