// SPDX-License-Identifier: Apache-2.0
#include "qgrl/analysis.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include "qgrl/error.hpp"

namespace qgrl {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& f : out) {
    f.erase(0, f.find_first_not_of(" \t\r"));
    const auto end = f.find_last_not_of(" \t\r");
    f.erase(end == std::string::npos ? 0 : end + 1);
  }
  return out;
}

std::optional<double> parse_field(const std::string& text, const char* name, RatingScale scale,
                                  std::size_t row) {
  if (text.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v))
    throw IngestionError(std::string("field '") + name + "' is not a number: '" + text + "'", row);
  if (v < scale.low || v > scale.high) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s %g outside [%g, %g]", name, v, scale.low, scale.high);
    throw IngestionError(buf, row);
  }
  return v;
}

struct Accumulator {
  double sum = 0.0;
  double weight = 0.0;
  void add(const std::optional<double>& v, double w) {
    if (!v) return;
    sum += *v * w;
    weight += w;
  }
  std::optional<double> mean() const {
    if (weight == 0.0) return std::nullopt;
    return sum / weight;
  }
};

}  // namespace

HumanRatings read_human_ratings(std::istream& in) {
  static const std::vector<std::string> kHeader = {"id",           "fluency",    "relevance",
                                                   "answerability", "complexity", "raters"};
  std::string line;
  std::size_t row = 0;
  bool header_seen = false;
  std::map<std::string, std::array<Accumulator, 4>> acc;
  std::map<std::string, double> raters;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv(line);
    if (!header_seen) {
      if (fields != kHeader)
        throw IngestionError("ratings header must be id,fluency,relevance,answerability,complexity,raters", row);
      header_seen = true;
      continue;
    }
    if (fields.size() != kHeader.size())
      throw IngestionError("expected 6 fields, got " + std::to_string(fields.size()), row);
    if (fields[0].empty()) throw IngestionError("missing field 'id'", row);
    const auto flu = parse_field(fields[1], "fluency", kFluencyScale, row);
    if (!flu) throw IngestionError("missing field 'fluency'", row);
    const auto rel = parse_field(fields[2], "relevance", kRelevanceScale, row);
    const auto ans = parse_field(fields[3], "answerability", kAnswerabilityScale, row);
    const auto cpx = parse_field(fields[4], "complexity", kComplexityScale, row);
    double w = 1.0;
    if (!fields[5].empty()) {
      const auto res = std::from_chars(fields[5].data(), fields[5].data() + fields[5].size(), w);
      if (res.ec != std::errc() || res.ptr != fields[5].data() + fields[5].size() || !(w > 0.0) ||
          !std::isfinite(w))
        throw IngestionError("field 'raters' must be a positive number", row);
    }
    auto& a = acc[fields[0]];
    a[0].add(flu, w);
    a[1].add(rel, w);
    a[2].add(ans, w);
    a[3].add(cpx, w);
    raters[fields[0]] += w;
  }
  if (!header_seen) throw IngestionError("ratings file is empty", row == 0 ? 1 : row);
  HumanRatings out;
  for (const auto& [id, a] : acc) {
    HumanRating r;
    r.fluency = a[0].mean();
    r.relevance = a[1].mean();
    r.answerability = a[2].mean();
    r.complexity = a[3].mean();
    r.raters = raters[id];
    out.emplace(id, r);
  }
  return out;
}

HumanRatings load_human_ratings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ratings file " + path);
  return read_human_ratings(in);
}

int rating_level(double rating, RatingScale scale) {
  const double level = std::floor(rating + 0.5);
  return static_cast<int>(std::clamp(level, scale.low, scale.high));
}

double median_of_sorted(const std::vector<double>& s) {
  if (s.empty()) throw InvalidArgument("median of an empty set");
  const std::size_t n = s.size();
  return n % 2 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2.0;
}

RatingLevelSummary reward_rating_distribution(const std::map<std::string, double>& rewards,
                                              const std::map<std::string, double>& ratings,
                                              RatingScale scale) {
  RatingLevelSummary summary;
  const int lo = static_cast<int>(std::ceil(scale.low));
  const int hi = static_cast<int>(std::floor(scale.high));
  for (int level = lo; level <= hi; ++level) {
    RatingBucket b;
    b.level = level;
    summary.buckets.push_back(std::move(b));
  }
  for (const auto& [id, rating] : ratings) {
    auto it = rewards.find(id);
    if (it == rewards.end()) continue;
    const int level = rating_level(rating, scale);
    summary.buckets[static_cast<std::size_t>(level - lo)].scores.push_back(it->second);
  }
  for (auto& b : summary.buckets) {
    std::sort(b.scores.begin(), b.scores.end());
    b.count = b.scores.size();
    if (b.count == 0) continue;
    b.min = b.scores.front();
    b.max = b.scores.back();
    b.median = median_of_sorted(b.scores);
  }
  return summary;
}

std::optional<double> pearson(const std::vector<std::optional<double>>& x,
                              const std::vector<std::optional<double>>& y) {
  if (x.size() != y.size()) throw InvalidArgument("pearson: series differ in length");
  std::vector<double> a, b;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] && y[i]) {
      a.push_back(*x[i]);
      b.push_back(*y[i]);
    }
  if (a.size() < 2) return std::nullopt;
  // Constant series have no variance, though rounding in the mean can hide it.
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(a) || constant(b)) return std::nullopt;
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

CorrelationMatrix pearson_matrix(const std::vector<NamedSeries>& columns) {
  CorrelationMatrix m;
  for (const auto& c : columns) {
    if (c.values.size() != columns.front().values.size())
      throw InvalidArgument("pearson_matrix: series differ in length");
    m.names.push_back(c.name);
  }
  if (!columns.empty() && columns.front().values.size() < 2)
    throw InvalidArgument("pearson_matrix: need at least two observations");
  const std::size_t k = columns.size();
  m.r.assign(k, std::vector<std::optional<double>>(k));
  for (std::size_t i = 0; i < k; ++i) {
    // The diagonal is 1 exactly when the column has variance.
    const auto self = pearson(columns[i].values, columns[i].values);
    m.r[i][i] = self ? std::optional<double>(1.0) : std::nullopt;
    for (std::size_t j = i + 1; j < k; ++j) {
      m.r[i][j] = pearson(columns[i].values, columns[j].values);
      m.r[j][i] = m.r[i][j];
    }
  }
  return m;
}

namespace {

std::string num(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

void write_rating_distribution(const RatingLevelSummary& summary, const std::string& reward,
                               const std::string& rating, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "reward\trating\tlevel\tcount\tmin\tmedian\tmax\tscores\n";
  for (const auto& b : summary.buckets) {
    out << reward << '\t' << rating << '\t' << b.level << '\t' << b.count << '\t' << num(b.min)
        << '\t' << num(b.median) << '\t' << num(b.max) << '\t';
    for (std::size_t i = 0; i < b.scores.size(); ++i) out << (i ? "," : "") << num(b.scores[i]);
    out << '\n';
  }
}

void write_correlation(const CorrelationMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "variable";
  for (const auto& n : m.names) out << '\t' << n;
  out << '\n';
  for (std::size_t i = 0; i < m.names.size(); ++i) {
    out << m.names[i];
    for (const auto& v : m.r[i]) out << '\t' << num(v);
    out << '\n';
  }
}

}  // namespace qgrl
