#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "neuroframe/common.hpp"
#include "neuroframe/tensor.hpp"

namespace neuroframe {

inline double rmse(const Tensor& pred, const Tensor& truth) {
  if (!pred.same_shape(truth)) throw std::invalid_argument("rmse: shape mismatch");
  double acc = 0.0;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.data[static_cast<std::size_t>(i)]) -
                     static_cast<double>(truth.data[static_cast<std::size_t>(i)]);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

// Pooled RMSE over a set of equally-shaped tensors (e.g. per-utterance
// predictions of one subject).
inline double rmse_pooled(const std::vector<Tensor>& pred, const std::vector<Tensor>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument("rmse_pooled: set size mismatch or empty");
  double acc = 0.0;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred[i].same_shape(truth[i])) throw std::invalid_argument("rmse_pooled: shape mismatch");
    for (std::int64_t j = 0; j < pred[i].size(); ++j) {
      const double d = static_cast<double>(pred[i].data[static_cast<std::size_t>(j)]) -
                       static_cast<double>(truth[i].data[static_cast<std::size_t>(j)]);
      acc += d * d;
    }
    count += pred[i].size();
  }
  return std::sqrt(acc / static_cast<double>(count));
}

// Mean item over every tick of the training targets ([T, ...] tensors).
inline std::vector<double> mean_item(const std::vector<Tensor>& train_targets) {
  if (train_targets.empty()) throw std::invalid_argument("mean_item: empty training set");
  std::int64_t item = 1;
  for (int i = 1; i < train_targets.front().rank(); ++i)
    item *= train_targets.front().shape[static_cast<std::size_t>(i)];
  std::vector<double> mean(static_cast<std::size_t>(item), 0.0);
  std::int64_t ticks = 0;
  for (const auto& t : train_targets) {
    const int rows = t.shape.front();
    for (int r = 0; r < rows; ++r)
      for (std::int64_t j = 0; j < item; ++j)
        mean[static_cast<std::size_t>(j)] += t.data[static_cast<std::size_t>(r * item + j)];
    ticks += rows;
  }
  for (auto& v : mean) v /= static_cast<double>(ticks);
  return mean;
}

// RMSE of predicting the training-set mean frame / mean feature vector for
// every test tick.
inline double mean_baseline(const std::vector<Tensor>& train_targets,
                            const std::vector<Tensor>& test_targets) {
  if (test_targets.empty()) throw std::invalid_argument("mean_baseline: empty test set");
  const auto mean = mean_item(train_targets);
  const std::int64_t item = static_cast<std::int64_t>(mean.size());
  double acc = 0.0;
  std::int64_t count = 0;
  for (const auto& t : test_targets) {
    const int rows = t.shape.front();
    for (int r = 0; r < rows; ++r)
      for (std::int64_t j = 0; j < item; ++j) {
        const double d = static_cast<double>(t.data[static_cast<std::size_t>(r * item + j)]) -
                         mean[static_cast<std::size_t>(j)];
        acc += d * d;
      }
    count += rows * item;
  }
  return std::sqrt(acc / static_cast<double>(count));
}

struct SubjectResult {
  std::string subject;
  std::string direction;  // "e2v" | "v2e"
  double model_rmse = 0.0;
  double baseline_rmse = 0.0;
};

inline void save_report_csv(const std::vector<SubjectResult>& results, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "subject,direction,model_rmse,baseline_rmse\n";
  char buf[160];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.10g,%.10g\n", r.subject.c_str(), r.direction.c_str(),
                  r.model_rmse, r.baseline_rmse);
    os << buf;
  }
}

inline std::vector<SubjectResult> load_report_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  std::getline(is, line);  // header
  std::vector<SubjectResult> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    SubjectResult r;
    std::size_t p0 = line.find(',');
    std::size_t p1 = line.find(',', p0 + 1);
    std::size_t p2 = line.find(',', p1 + 1);
    r.subject = line.substr(0, p0);
    r.direction = line.substr(p0 + 1, p1 - p0 - 1);
    r.model_rmse = std::stod(line.substr(p1 + 1, p2 - p1 - 1));
    r.baseline_rmse = std::stod(line.substr(p2 + 1));
    out.push_back(std::move(r));
  }
  return out;
}

// Static per-subject bar chart, one panel per direction, model vs baseline.
inline void save_report_svg(const std::vector<SubjectResult>& results, const std::string& path) {
  std::vector<std::string> subjects;
  for (const auto& r : results)
    if (std::find(subjects.begin(), subjects.end(), r.subject) == subjects.end())
      subjects.push_back(r.subject);

  const std::vector<std::string> directions{"e2v", "v2e"};
  const int panel_w = 80 + static_cast<int>(subjects.size()) * 90;
  const int panel_h = 220;
  const int width = std::max(panel_w, 300);
  const int height = panel_h * 2 + 40;

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t d = 0; d < directions.size(); ++d) {
    const int oy = static_cast<int>(d) * (panel_h + 20) + 20;
    double max_val = 1e-12;
    for (const auto& r : results)
      if (r.direction == directions[d]) max_val = std::max({max_val, r.model_rmse, r.baseline_rmse});
    os << "<text x=\"10\" y=\"" << oy - 4 << "\" font-weight=\"bold\">RMSE per subject ("
       << directions[d] << ")</text>\n";
    for (std::size_t s = 0; s < subjects.size(); ++s) {
      const SubjectResult* row = nullptr;
      for (const auto& r : results)
        if (r.direction == directions[d] && r.subject == subjects[s]) row = &r;
      if (!row) continue;
      const int x0 = 50 + static_cast<int>(s) * 90;
      const int model_h = static_cast<int>(150.0 * row->model_rmse / max_val);
      const int base_h = static_cast<int>(150.0 * row->baseline_rmse / max_val);
      os << "<rect x=\"" << x0 << "\" y=\"" << oy + 160 - model_h << "\" width=\"30\" height=\""
         << model_h << "\" fill=\"#4878cf\"/>\n";
      os << "<rect x=\"" << x0 + 34 << "\" y=\"" << oy + 160 - base_h << "\" width=\"30\" height=\""
         << base_h << "\" fill=\"#b8b8b8\"/>\n";
      char label[64];
      std::snprintf(label, sizeof(label), "%.3g", row->model_rmse);
      os << "<text x=\"" << x0 << "\" y=\"" << oy + 160 - model_h - 3 << "\">" << label
         << "</text>\n";
      os << "<text x=\"" << x0 << "\" y=\"" << oy + 175 << "\">" << subjects[s] << "</text>\n";
    }
  }
  os << "<rect x=\"10\" y=\"" << height - 16 << "\" width=\"12\" height=\"12\" fill=\"#4878cf\"/>"
     << "<text x=\"26\" y=\"" << height - 6 << "\">model</text>"
     << "<rect x=\"80\" y=\"" << height - 16 << "\" width=\"12\" height=\"12\" fill=\"#b8b8b8\"/>"
     << "<text x=\"96\" y=\"" << height - 6 << "\">mean baseline</text>\n</svg>\n";
}

}  // namespace neuroframe
