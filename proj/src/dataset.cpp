#include "tvq/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace tvq {

int TimeSeriesDataset::n_classes() const {
  int c = 0;
  for (int l : labels) c = std::max(c, l + 1);
  return c;
}

std::vector<int> TimeSeriesDataset::class_counts() const {
  std::vector<int> counts(n_classes(), 0);
  for (int l : labels) ++counts[l];
  return counts;
}

namespace {

bool parse_field(const std::string& tok, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(tok, &used);
    return used == tok.size();
  } catch (...) {
    return false;
  }
}

/// Fill NaN gaps by linear interpolation between nearest finite neighbors;
/// leading/trailing gaps copy the nearest finite value.
void repair_row(XVec& row, int line_no) {
  const int L = static_cast<int>(row.size());
  int first = -1;
  for (int i = 0; i < L; ++i)
    if (std::isfinite(row[i])) {
      first = i;
      break;
    }
  if (first < 0) throw TvqError("load_ucr: line " + std::to_string(line_no) + " has no finite values");
  for (int i = 0; i < first; ++i) row[i] = row[first];
  int prev = first;
  for (int i = first + 1; i < L; ++i) {
    if (!std::isfinite(row[i])) continue;
    for (int j = prev + 1; j < i; ++j) {
      const double f = static_cast<double>(j - prev) / (i - prev);
      row[j] = (1.0 - f) * row[prev] + f * row[i];
    }
    prev = i;
  }
  for (int i = prev + 1; i < L; ++i) row[i] = row[prev];
}

}  // namespace

TimeSeriesDataset load_ucr(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw TvqError("load_ucr: cannot open " + path);

  std::vector<std::vector<double>> rows;
  std::vector<double> raw_labels;
  std::string line;
  int line_no = 0;
  int expect_fields = -1;
  std::vector<int> row_lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> fields;
    std::string tok;
    while (ss >> tok) {
      double v;
      if (!parse_field(tok, v)) {
        // UCR pads variable-length records with NaN; accept the token forms.
        if (tok == "NaN" || tok == "nan" || tok == "NAN" || tok == "?")
          v = std::nan("");
        else
          throw TvqError("load_ucr: line " + std::to_string(line_no) + ": bad field '" + tok + "'");
      }
      fields.push_back(v);
    }
    if (fields.empty()) continue;
    if (expect_fields < 0) expect_fields = static_cast<int>(fields.size());
    if (static_cast<int>(fields.size()) != expect_fields)
      throw TvqError("load_ucr: line " + std::to_string(line_no) + ": expected " +
                     std::to_string(expect_fields) + " fields, got " + std::to_string(fields.size()));
    if (expect_fields < 2)
      throw TvqError("load_ucr: line " + std::to_string(line_no) + ": record has no values");
    if (!std::isfinite(fields[0]))
      throw TvqError("load_ucr: line " + std::to_string(line_no) + ": non-finite label");
    raw_labels.push_back(fields[0]);
    rows.emplace_back(fields.begin() + 1, fields.end());
    row_lines.push_back(line_no);
  }
  if (rows.empty()) throw TvqError("load_ucr: empty dataset in " + path);

  TimeSeriesDataset ds;
  const int N = static_cast<int>(rows.size());
  const int L = static_cast<int>(rows[0].size());
  if (L < 2) throw TvqError("load_ucr: series length must be >= 2");
  ds.samples.resize(N, L);
  XVec row(L);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < L; ++j) row[j] = rows[i][j];
    repair_row(row, row_lines[i]);
    ds.samples.row(i) = row.transpose();
  }

  // Remap labels to contiguous 0-based indices in sorted order.
  std::map<double, int> remap;
  for (double l : raw_labels) remap.emplace(l, 0);
  int next = 0;
  for (auto& kv : remap) kv.second = next++;
  ds.labels.reserve(N);
  for (double l : raw_labels) ds.labels.push_back(remap.at(l));

  ds.split = split;
  return ds;
}

TimeSeriesDataset load_ucr_dir(const std::string& data_dir, const std::string& name, Split split) {
  const std::string suffix = split == Split::train ? "_TRAIN.tsv" : "_TEST.tsv";
  TimeSeriesDataset ds = load_ucr(data_dir + "/" + name + "/" + name + suffix, split);
  ds.name = name;
  return ds;
}

void save_ucr(const std::string& path, const XMat& samples, const std::vector<int>& labels,
              const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw TvqError("save_ucr: cannot write " + path);
  if (!comment.empty()) {
    std::istringstream ss(comment);
    std::string line;
    while (std::getline(ss, line)) out << "# " << line << "\n";
  }
  out.precision(10);
  for (int i = 0; i < samples.rows(); ++i) {
    out << (i < static_cast<int>(labels.size()) ? labels[i] : -1);
    for (int j = 0; j < samples.cols(); ++j) out << '\t' << samples(i, j);
    out << '\n';
  }
}

std::pair<double, double> global_stats(const XMat& samples) {
  const double mean = samples.mean();
  const double var = (samples.array() - mean).square().mean();
  return {mean, std::sqrt(var)};
}

TimeSeriesDataset normalize(const TimeSeriesDataset& ds) {
  if (ds.samples.size() < 2) throw TvqError("normalize: need at least 2 values");
  auto [mean, sd] = global_stats(ds.samples);
  if (sd <= 0.0) throw TvqError("normalize: constant dataset");
  return normalize_with(ds, mean, sd);
}

TimeSeriesDataset normalize_with(const TimeSeriesDataset& ds, double mean, double sd) {
  if (sd <= 0.0) throw TvqError("normalize: constant dataset");
  TimeSeriesDataset out = ds;
  out.samples = (ds.samples.array() - mean) / sd;
  out.mean = mean;
  out.std = sd;
  out.normalized = true;
  return out;
}

TimeSeriesDataset normalize_per_series(const TimeSeriesDataset& ds) {
  TimeSeriesDataset out = ds;
  for (int i = 0; i < ds.n(); ++i) {
    const double m = ds.samples.row(i).mean();
    const double sd = std::sqrt((ds.samples.row(i).array() - m).square().mean());
    if (sd <= 0.0) throw TvqError("normalize: constant series at row " + std::to_string(i));
    out.samples.row(i) = (ds.samples.row(i).array() - m) / sd;
  }
  out.mean = 0.0;
  out.std = 1.0;
  out.normalized = true;
  return out;
}

XMat denormalize(const XMat& samples, double mean, double sd) {
  return (samples.array() * sd + mean).matrix();
}

BatchIterator::BatchIterator(const TimeSeriesDataset& ds, int batch_size, bool shuffle,
                             std::uint64_t seed)
    : ds_(ds), batch_size_(batch_size) {
  if (batch_size < 1) throw TvqError("batches: batch_size must be >= 1");
  order_.resize(ds.n());
  std::iota(order_.begin(), order_.end(), 0);
  if (shuffle) {
    Rng rng(seed);
    std::shuffle(order_.begin(), order_.end(), rng.engine());
  }
}

bool BatchIterator::next(XMat& xb, std::vector<int>& yb) {
  if (pos_ >= order_.size()) return false;
  const std::size_t end = std::min(pos_ + batch_size_, order_.size());
  const int b = static_cast<int>(end - pos_);
  xb.resize(b, ds_.length());
  yb.resize(b);
  for (int i = 0; i < b; ++i) {
    const int idx = order_[pos_ + i];
    xb.row(i) = ds_.samples.row(idx);
    yb[i] = ds_.labels[idx];
  }
  pos_ = end;
  return true;
}

BatchIterator batches(const TimeSeriesDataset& ds, int batch_size, bool shuffle, std::uint64_t seed) {
  return BatchIterator(ds, batch_size, shuffle, seed);
}

}  // namespace tvq
