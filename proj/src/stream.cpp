#include "ramol/stream.hpp"

#include "ramol/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string_view>

namespace ramol {

StandardizerState StandardizerState::empty(std::size_t dim) {
  StandardizerState s;
  s.mean = Vector::Zero(static_cast<Eigen::Index>(dim));
  s.sum_sq_dev = Vector::Zero(static_cast<Eigen::Index>(dim));
  return s;
}

Vector StandardizerState::variance() const {
  return sum_sq_dev / static_cast<double>(std::max<std::size_t>(count, 1));
}

Vector standardize(StandardizerState& state, const Vector& x) {
  if (x.size() != state.mean.size()) {
    throw DimensionError("standardize: expected dimension " + std::to_string(state.mean.size()) +
                         ", got " + std::to_string(x.size()));
  }
  Vector out = (x - state.mean).array() / (state.variance().array() + kStandardizeEpsilon).sqrt();

  // Welford update.
  ++state.count;
  const Vector delta = x - state.mean;
  state.mean += delta / static_cast<double>(state.count);
  state.sum_sq_dev += (delta.array() * (x - state.mean).array()).matrix();
  return out;
}

std::pair<Vector, StandardizerState> standardize(const StandardizerState& state, const Vector& x) {
  StandardizerState next = state;
  Vector out = standardize(next, x);
  return {std::move(out), std::move(next)};
}

std::vector<Example> materialize(ExampleSource& source) {
  std::vector<Example> out;
  while (auto ex = source.next()) out.push_back(std::move(*ex));
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool blank(std::string_view line) { return trim(line).empty(); }

}  // namespace

CsvSource::CsvSource(const std::filesystem::path& path, CsvSchema schema)
    : path_(path), schema_(std::move(schema)) {
  if (!std::filesystem::exists(path_)) throw DataError("no such file: " + path_.string());
  in_.open(path_);
  if (!in_) throw DataError("cannot open " + path_.string());

  std::string header;
  if (!std::getline(in_, header) || blank(header)) throw DataError("missing header row in " + path_.string());
  const auto names = split(header, schema_.delimiter);
  column_count_ = names.size();

  auto find_column = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    throw DataError("column '" + name + "' not found in header of " + path_.string());
  };

  label_index_ = schema_.label_column.empty() ? column_count_ - 1 : find_column(schema_.label_column);
  if (schema_.feature_columns.empty()) {
    for (std::size_t i = 0; i < column_count_; ++i) {
      if (i == label_index_) continue;
      feature_index_.push_back(i);
      feature_names_.emplace_back(names[i]);
    }
  } else {
    for (const auto& name : schema_.feature_columns) {
      const auto idx = find_column(name);
      if (idx == label_index_) throw DataError("label column '" + name + "' also listed as a feature");
      feature_index_.push_back(idx);
      feature_names_.push_back(name);
    }
  }
  if (feature_index_.empty()) throw DataError("no feature columns in " + path_.string());

  if (!schema_.labels.empty()) {
    label_names_ = schema_.labels;
  } else {
    // Only the label column is read ahead, to fix the class count and the
    // first-seen mapping. Feature values are never looked at here.
    std::ifstream scan(path_);
    std::string line;
    std::getline(scan, line);
    std::size_t row = 0;
    while (std::getline(scan, line)) {
      ++row;
      if (blank(line)) continue;
      const auto cells = split(line, schema_.delimiter);
      if (cells.size() != column_count_) {
        throw DataError("expected " + std::to_string(column_count_) + " columns, got " +
                            std::to_string(cells.size()),
                        row);
      }
      std::string label(cells[label_index_]);
      if (std::find(label_names_.begin(), label_names_.end(), label) == label_names_.end()) {
        label_names_.push_back(std::move(label));
      }
    }
  }
  for (std::size_t i = 0; i < label_names_.size(); ++i) label_lookup_[label_names_[i]] = static_cast<int>(i);
}

std::optional<Example> CsvSource::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++row_;
    if (blank(line)) continue;
    const auto cells = split(line, schema_.delimiter);
    if (cells.size() != column_count_) {
      throw DataError("expected " + std::to_string(column_count_) + " columns, got " +
                          std::to_string(cells.size()),
                      row_);
    }
    Example ex;
    ex.features.resize(static_cast<Eigen::Index>(feature_index_.size()));
    for (std::size_t j = 0; j < feature_index_.size(); ++j) {
      double v = 0.0;
      if (!parse_double(cells[feature_index_[j]], v)) {
        throw DataError("non-numeric value '" + std::string(cells[feature_index_[j]]) + "' in column '" +
                            feature_names_[j] + "'",
                        row_);
      }
      ex.features[static_cast<Eigen::Index>(j)] = v;
    }
    const auto it = label_lookup_.find(std::string(cells[label_index_]));
    if (it == label_lookup_.end()) {
      throw DataError("unknown label '" + std::string(cells[label_index_]) + "'", row_);
    }
    ex.label = it->second;
    ex.step = step_count_++;
    return ex;
  }
  return std::nullopt;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace ramol
