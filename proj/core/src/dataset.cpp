#include "sif/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sif/error.hpp"

namespace sif {

namespace {

constexpr std::array<std::string_view, 3> kSplitNames{"train", "validation", "test"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> tokenize(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + sep.size();
  }
  return out;
}

std::int64_t parse_int(std::string_view s, std::size_t line) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError("expected integer, got '" + std::string(s) + "'", line);
  return v;
}

double parse_real(std::string_view s, std::size_t line) {
  // from_chars for double is unavailable on older libstdc++; strtod needs a
  // terminated buffer.
  std::string buf(s);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || !std::isfinite(v))
    throw ParseError("expected finite number, got '" + buf + "'", line);
  return v;
}

bool is_blank_or_comment(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  return in;
}

}  // namespace

std::string_view split_name(Split split) { return kSplitNames[static_cast<std::size_t>(split)]; }

Split parse_split(std::string_view name) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i)
    if (kSplitNames[i] == name) return static_cast<Split>(i);
  if (name == "val") return Split::validation;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

IdMap::IdMap(std::vector<std::int64_t> raw_ids) : raw_(std::move(raw_ids)) {
  std::sort(raw_.begin(), raw_.end());
  raw_.erase(std::unique(raw_.begin(), raw_.end()), raw_.end());
  index_.reserve(raw_.size());
  for (std::size_t i = 0; i < raw_.size(); ++i) index_.emplace(raw_[i], static_cast<std::uint32_t>(i));
}

std::uint32_t IdMap::dense(std::int64_t raw) const {
  const auto it = index_.find(raw);
  if (it == index_.end()) throw ConfigError("unknown raw id " + std::to_string(raw));
  return it->second;
}

RatingDataset::RatingDataset(std::vector<RatingRecord> records, std::array<std::size_t, 3> dims,
                             int order)
    : records_(std::move(records)), dims_(dims), order_(order) {
  if (order != 2 && order != 3) throw ConfigError("dataset order must be 2 or 3");
  if (order == 2) dims_[2] = 1;
  for (const auto& r : records_) {
    if (r.row >= dims_[0] || r.col >= dims_[1] || r.depth >= dims_[2])
      throw ConfigError("record index outside declared dimensions");
    if (!std::isfinite(r.value)) throw ConfigError("record value is not finite");
  }
}

std::span<const std::size_t> RatingDataset::indices(Split split) const {
  if (!has_split()) throw ConfigError("dataset has no split assignment");
  return by_split_[static_cast<std::size_t>(split)];
}

RatingDataset RatingDataset::with_labels(std::vector<Split> labels) const {
  if (labels.size() != records_.size()) throw ConfigError("split label count does not match records");
  RatingDataset out = *this;
  out.labels_ = std::move(labels);
  for (auto& v : out.by_split_) v.clear();
  for (std::size_t i = 0; i < out.labels_.size(); ++i)
    out.by_split_[static_cast<std::size_t>(out.labels_[i])].push_back(i);
  return out;
}

MatrixFormat parse_matrix_format(std::string_view name) {
  if (name == "auto") return MatrixFormat::automatic;
  if (name == "tsv" || name == "tab" || name == "u.data") return MatrixFormat::tab;
  if (name == "dat" || name == "::" || name == "ratings.dat") return MatrixFormat::double_colon;
  throw ConfigError("unknown matrix format '" + std::string(name) + "'");
}

RatingDataset load_matrix(const std::filesystem::path& path, MatrixFormat format) {
  auto in = open_input(path);
  struct Raw {
    std::int64_t user, item;
    double value;
  };
  std::vector<Raw> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank_or_comment(line)) continue;
    if (format == MatrixFormat::automatic)
      format = line.find("::") != std::string::npos ? MatrixFormat::double_colon : MatrixFormat::tab;
    const auto fields = format == MatrixFormat::tab ? tokenize(line, "\t") : tokenize(line, "::");
    if (fields.size() < 3 || fields.size() > 4)
      throw ParseError("expected 'user item rating [timestamp]', got " + std::to_string(fields.size()) +
                           " fields",
                       lineno);
    raw.push_back({parse_int(fields[0], lineno), parse_int(fields[1], lineno), parse_real(fields[2], lineno)});
  }
  if (raw.empty()) throw ParseError("'" + path.string() + "' contains no ratings", 0);

  std::vector<std::int64_t> users, items;
  users.reserve(raw.size());
  items.reserve(raw.size());
  for (const auto& r : raw) {
    users.push_back(r.user);
    items.push_back(r.item);
  }
  IdMap user_map(std::move(users)), item_map(std::move(items));

  std::vector<RatingRecord> records;
  records.reserve(raw.size());
  for (const auto& r : raw) records.push_back({user_map.dense(r.user), item_map.dense(r.item), 0, r.value});
  RatingDataset ds(std::move(records), {user_map.size(), item_map.size(), 1}, 2);
  ds.set_id_maps({std::move(user_map), std::move(item_map), IdMap{}});
  return ds;
}

RatingDataset load_tensor(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<RatingRecord> records;
  std::array<std::size_t, 3> dims{0, 0, 0};
  bool declared = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.starts_with("# dims")) {
      if (!records.empty()) throw ParseError("dims header must precede the entries", lineno);
      declared = true;
      std::istringstream hs{std::string(t.substr(6))};
      std::size_t r = 0, c = 0, d = 0;
      if (!(hs >> r >> c >> d)) throw ParseError("malformed dims header", lineno);
      dims = {std::max(dims[0], r), std::max(dims[1], c), std::max(dims[2], d)};
      continue;
    }
    if (is_blank_or_comment(line)) continue;
    const auto fields = tokenize(t, t.find(',') != std::string_view::npos ? "," : "\t");
    if (fields.size() != 4)
      throw ParseError("expected 'row col depth value', got " + std::to_string(fields.size()) + " fields",
                       lineno);
    std::array<std::int64_t, 3> idx{};
    for (std::size_t m = 0; m < 3; ++m) {
      idx[m] = parse_int(fields[m], lineno);
      if (idx[m] < 0 || idx[m] > std::int64_t{UINT32_MAX - 1}) throw ParseError("index out of range", lineno);
      if (declared && static_cast<std::size_t>(idx[m]) >= dims[m])
        throw ParseError("index exceeds the declared dims", lineno);
      dims[m] = std::max(dims[m], static_cast<std::size_t>(idx[m]) + 1);
    }
    records.push_back({static_cast<std::uint32_t>(idx[0]), static_cast<std::uint32_t>(idx[1]),
                       static_cast<std::uint32_t>(idx[2]), parse_real(fields[3], lineno)});
  }
  if (records.empty()) throw ParseError("'" + path.string() + "' contains no entries", 0);
  return RatingDataset(std::move(records), dims, 3);
}

RatingDataset split(const RatingDataset& dataset, const SplitRatios& ratios, std::uint64_t seed) {
  for (double r : {ratios.train, ratios.validation, ratios.test})
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("split ratios must lie in [0, 1]");
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(ratios.train * n)));
  const auto n_val =
      std::min<std::size_t>(n - n_train, static_cast<std::size_t>(std::llround(ratios.validation * n)));
  std::vector<Split> labels(n, Split::test);
  for (std::size_t i = 0; i < n_train; ++i) labels[order[i]] = Split::train;
  for (std::size_t i = n_train; i < n_train + n_val; ++i) labels[order[i]] = Split::validation;
  return dataset.with_labels(std::move(labels));
}

void write_split_manifest(const std::filesystem::path& path, const RatingDataset& dataset) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "record-index,split-label\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) out << i << ',' << split_name(dataset.label(i)) << '\n';
}

RatingDataset apply_split_manifest(const std::filesystem::path& path, const RatingDataset& dataset) {
  auto in = open_input(path);
  std::vector<Split> labels(dataset.size());
  std::vector<bool> seen(dataset.size(), false);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank_or_comment(line) || line.starts_with("record-index")) continue;
    const auto fields = tokenize(line, ",");
    if (fields.size() != 2) throw ParseError("expected 'record-index,split-label'", lineno);
    const auto idx = parse_int(fields[0], lineno);
    if (idx < 0 || static_cast<std::size_t>(idx) >= dataset.size())
      throw ParseError("record index out of range", lineno);
    try {
      labels[static_cast<std::size_t>(idx)] = parse_split(fields[1]);
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), lineno);
    }
    seen[static_cast<std::size_t>(idx)] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw ParseError("manifest does not cover every record", 0);
  return dataset.with_labels(std::move(labels));
}

void write_id_maps(const std::filesystem::path& path, const RatingDataset& dataset) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "mode,dense,raw\n";
  for (std::size_t m = 0; m < 3; ++m) {
    const auto& map = dataset.id_maps()[m];
    for (std::size_t i = 0; i < map.size(); ++i) out << m << ',' << i << ',' << map.raw_ids()[i] << '\n';
  }
}

BatchSampler::BatchSampler(const RatingDataset& dataset, Split split, std::size_t batch_size,
                           std::uint64_t seed)
    : dataset_(&dataset), split_(split), batch_size_(batch_size), rng_(seed) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  const auto idx = dataset.indices(split);
  if (idx.empty()) throw ConfigError("split '" + std::string(split_name(split)) + "' is empty");
  order_.assign(idx.begin(), idx.end());
  reshuffle();
}

void BatchSampler::reshuffle() { std::shuffle(order_.begin(), order_.end(), rng_); }

std::size_t BatchSampler::batches_per_epoch() const noexcept {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

Batch BatchSampler::next() {
  Batch batch{split_, {}};
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  batch.records.reserve(end - cursor_);
  for (std::size_t i = cursor_; i < end; ++i) batch.records.push_back(dataset_->record(order_[i]));
  cursor_ = end;
  if (cursor_ == order_.size()) {
    cursor_ = 0;
    ++epoch_;
    reshuffle();
  }
  return batch;
}

Batch sample_batch(const RatingDataset& dataset, Split split, std::size_t size, std::mt19937_64& rng) {
  if (size == 0) throw ConfigError("batch size must be at least 1");
  const auto idx = dataset.indices(split);
  if (idx.empty()) throw ConfigError("split '" + std::string(split_name(split)) + "' is empty");
  std::vector<std::size_t> chosen;
  std::sample(idx.begin(), idx.end(), std::back_inserter(chosen), std::min(size, idx.size()), rng);
  std::shuffle(chosen.begin(), chosen.end(), rng);
  Batch batch{split, {}};
  batch.records.reserve(chosen.size());
  for (auto i : chosen) batch.records.push_back(dataset.record(i));
  return batch;
}

Batch whole_split(const RatingDataset& dataset, Split split) {
  Batch batch{split, {}};
  const auto idx = dataset.indices(split);
  batch.records.reserve(idx.size());
  for (auto i : idx) batch.records.push_back(dataset.record(i));
  return batch;
}

}  // namespace sif
