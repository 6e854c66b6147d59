#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "tumornet/error.hpp"
#include "tumornet/text.hpp"

namespace tumornet {

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;
};

/// Confusion-matrix based summary. Rows of `confusion` are true classes,
/// columns predicted classes.
struct EvaluationReport {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<ClassMetrics> per_class;
  double loss = 0;
  double accuracy = 0;
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  double incorrect_percentage = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
};

/// Builds the report from aligned truth / prediction lists. Ratios with a
/// zero denominator are reported as 0.
inline EvaluationReport make_report(const std::vector<std::size_t>& truth,
                                    const std::vector<std::size_t>& predicted,
                                    std::vector<std::string> class_names, double loss) {
  const std::size_t c = class_names.size();
  if (truth.size() != predicted.size()) throw ShapeError("truth and prediction lists differ in length");
  if (truth.empty()) throw DataError("cannot evaluate an empty partition");
  EvaluationReport r;
  r.class_names = std::move(class_names);
  r.loss = loss;
  r.confusion.assign(c, std::vector<std::size_t>(c, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= c || predicted[i] >= c) throw DataError("label outside the class range");
    ++r.confusion[truth[i]][predicted[i]];
  }
  r.total = truth.size();
  for (std::size_t k = 0; k < c; ++k) r.correct += r.confusion[k][k];
  r.incorrect = r.total - r.correct;
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  r.incorrect_percentage = 100.0 * static_cast<double>(r.incorrect) / static_cast<double>(r.total);

  r.per_class.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t col = 0, row = 0;
    for (std::size_t j = 0; j < c; ++j) {
      col += r.confusion[j][k];
      row += r.confusion[k][j];
    }
    auto& m = r.per_class[k];
    const double tp = static_cast<double>(r.confusion[k][k]);
    m.support = row;
    m.precision = col ? tp / static_cast<double>(col) : 0.0;
    m.recall = row ? tp / static_cast<double>(row) : 0.0;
    m.f1 = (m.precision + m.recall) > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.macro_precision += m.precision / static_cast<double>(c);
    r.macro_recall += m.recall / static_cast<double>(c);
    r.macro_f1 += m.f1 / static_cast<double>(c);
  }
  return r;
}

// "18 (1.258%)"
inline std::string format_incorrect(const EvaluationReport& r) {
  return std::to_string(r.incorrect) + " (" + text::fixed(r.incorrect_percentage, 3) + "%)";
}

inline std::string format_report(const EvaluationReport& r) {
  std::size_t width = 12;
  for (const auto& n : r.class_names) width = std::max(width, n.size() + 2);
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "class" << std::right << std::setw(10)
     << "precision" << std::setw(10) << "recall" << std::setw(10) << "f1" << std::setw(10) << "support"
     << '\n';
  for (std::size_t k = 0; k < r.class_names.size(); ++k) {
    const auto& m = r.per_class[k];
    os << std::left << std::setw(static_cast<int>(width)) << r.class_names[k] << std::right
       << std::setw(10) << text::fixed(m.precision, 4) << std::setw(10) << text::fixed(m.recall, 4)
       << std::setw(10) << text::fixed(m.f1, 4) << std::setw(10) << m.support << '\n';
  }
  os << std::left << std::setw(static_cast<int>(width)) << "macro avg" << std::right << std::setw(10)
     << text::fixed(r.macro_precision, 4) << std::setw(10) << text::fixed(r.macro_recall, 4)
     << std::setw(10) << text::fixed(r.macro_f1, 4) << std::setw(10) << r.total << '\n';
  os << '\n';
  os << "loss: " << text::fixed(r.loss, 6) << '\n';
  os << "accuracy: " << text::fixed(100.0 * r.accuracy, 3) << "% (" << r.correct << "/" << r.total << ")\n";
  os << "incorrect predictions: " << format_incorrect(r) << '\n';
  return os.str();
}

// Per-class metrics table with a trailing macro-average row.
inline std::string report_csv(const EvaluationReport& r) {
  std::ostringstream os;
  os << "class,precision,recall,f1,support\n";
  for (std::size_t k = 0; k < r.class_names.size(); ++k) {
    const auto& m = r.per_class[k];
    os << r.class_names[k] << ',' << text::fixed(m.precision, 6) << ',' << text::fixed(m.recall, 6) << ','
       << text::fixed(m.f1, 6) << ',' << m.support << '\n';
  }
  os << "macro_avg," << text::fixed(r.macro_precision, 6) << ',' << text::fixed(r.macro_recall, 6) << ','
     << text::fixed(r.macro_f1, 6) << ',' << r.total << '\n';
  return os.str();
}

inline std::string summary_csv(const EvaluationReport& r) {
  std::ostringstream os;
  os << "metric,value\n";
  os << "loss," << text::format_double(r.loss) << '\n';
  os << "accuracy," << text::format_double(r.accuracy) << '\n';
  os << "total," << r.total << '\n';
  os << "correct," << r.correct << '\n';
  os << "incorrect," << r.incorrect << '\n';
  os << "incorrect_percentage," << text::format_double(r.incorrect_percentage) << '\n';
  return os.str();
}

// Confusion matrix with a header row of predicted classes.
inline std::string confusion_csv(const EvaluationReport& r) {
  std::ostringstream os;
  os << "true\\predicted";
  for (const auto& n : r.class_names) os << ',' << n;
  os << '\n';
  for (std::size_t k = 0; k < r.class_names.size(); ++k) {
    os << r.class_names[k];
    for (auto v : r.confusion[k]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

} // namespace tumornet
