#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sif {

enum class Split : std::uint8_t { train = 0, validation = 1, test = 2 };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

/// One observed entry. `depth` is only meaningful for third-order data.
struct RatingRecord {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::uint32_t depth = 0;
  double value = 0.0;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

/// Bijection between raw integer IDs found in a file and dense 0-based indices.
/// Dense indices follow ascending raw-ID order.
class IdMap {
 public:
  IdMap() = default;
  explicit IdMap(std::vector<std::int64_t> raw_ids);

  std::size_t size() const noexcept { return raw_.size(); }
  std::uint32_t dense(std::int64_t raw) const;
  std::int64_t raw(std::uint32_t dense) const { return raw_.at(dense); }
  bool contains(std::int64_t raw) const { return index_.contains(raw); }
  const std::vector<std::int64_t>& raw_ids() const noexcept { return raw_; }

 private:
  std::vector<std::int64_t> raw_;
  std::unordered_map<std::int64_t, std::uint32_t> index_;
};

struct SplitRatios {
  double train = 0.5;
  double validation = 0.25;
  double test = 0.25;
};

/// Observed entries of a user-item matrix or a third-order tensor, together
/// with the split label of every record once `split` has been applied.
/// Immutable after construction.
class RatingDataset {
 public:
  RatingDataset() = default;
  /// `order` is 2 (matrix) or 3 (tensor). Throws ConfigError if a record falls
  /// outside `dims` or has a non-finite value.
  RatingDataset(std::vector<RatingRecord> records, std::array<std::size_t, 3> dims,
                int order);

  int order() const noexcept { return order_; }
  const std::array<std::size_t, 3>& dims() const noexcept { return dims_; }
  std::size_t dim(int mode) const { return dims_.at(static_cast<std::size_t>(mode)); }
  std::size_t size() const noexcept { return records_.size(); }
  std::span<const RatingRecord> records() const noexcept { return records_; }
  const RatingRecord& record(std::size_t i) const { return records_.at(i); }

  bool has_split() const noexcept { return !labels_.empty(); }
  Split label(std::size_t i) const { return labels_.at(i); }
  std::span<const Split> labels() const noexcept { return labels_; }
  /// Record indices carrying `split`, in ascending order.
  std::span<const std::size_t> indices(Split split) const;
  std::size_t split_size(Split split) const { return indices(split).size(); }

  /// Copy with the given per-record labels attached.
  RatingDataset with_labels(std::vector<Split> labels) const;

  /// Raw-ID maps per mode (empty when indices were read verbatim).
  const std::array<IdMap, 3>& id_maps() const noexcept { return id_maps_; }
  void set_id_maps(std::array<IdMap, 3> maps) { id_maps_ = std::move(maps); }

 private:
  std::vector<RatingRecord> records_;
  std::array<std::size_t, 3> dims_{0, 0, 1};
  int order_ = 2;
  std::vector<Split> labels_;
  std::array<std::vector<std::size_t>, 3> by_split_;
  std::array<IdMap, 3> id_maps_;
};

enum class MatrixFormat {
  automatic,     ///< Chosen per file from the first data line.
  tab,           ///< MovieLens-100K `u.data`: user \t item \t rating \t timestamp
  double_colon,  ///< MovieLens-1M `ratings.dat`: user::item::rating::timestamp
};

MatrixFormat parse_matrix_format(std::string_view name);

/// Reads a rating matrix, densely re-indexing raw user and item IDs.
RatingDataset load_matrix(const std::filesystem::path& path,
                          MatrixFormat format = MatrixFormat::automatic);

/// Reads "row col depth value" quads separated by commas or tabs. Indices are
/// 0-based and kept verbatim; an optional leading "# dims R C D" line declares
/// the dimensions (which may exceed the observed maxima; larger indices are rejected).
RatingDataset load_tensor(const std::filesystem::path& path);

/// Uniform random by-record assignment. Deterministic for a fixed seed.
RatingDataset split(const RatingDataset& dataset, const SplitRatios& ratios,
                    std::uint64_t seed);

/// Manifest lines are `record-index,split-label`.
void write_split_manifest(const std::filesystem::path& path, const RatingDataset& dataset);
RatingDataset apply_split_manifest(const std::filesystem::path& path,
                                   const RatingDataset& dataset);

/// Writes raw-ID maps as `mode,dense,raw` lines.
void write_id_maps(const std::filesystem::path& path, const RatingDataset& dataset);

/// A sampled subset of one split.
struct Batch {
  Split split = Split::train;
  std::vector<RatingRecord> records;

  std::size_t size() const noexcept { return records.size(); }
};

/// Cycles through one split in shuffled epoch order. Every record of the split
/// appears exactly once per epoch; the last batch of an epoch may be short.
class BatchSampler {
 public:
  BatchSampler(const RatingDataset& dataset, Split split, std::size_t batch_size,
               std::uint64_t seed);

  Batch next();

  Split split() const noexcept { return split_; }
  std::size_t batch_size() const noexcept { return batch_size_; }
  std::size_t batches_per_epoch() const noexcept;
  /// Number of completed epochs.
  std::size_t epoch() const noexcept { return epoch_; }
  /// True when the previous call to next() returned the last batch of an epoch.
  bool at_epoch_boundary() const noexcept { return cursor_ == 0; }

 private:
  void reshuffle();

  const RatingDataset* dataset_;
  Split split_;
  std::size_t batch_size_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

/// One-shot helper matching the sampler contract.
Batch sample_batch(const RatingDataset& dataset, Split split, std::size_t size,
                   std::mt19937_64& rng);

/// All records of a split as a single batch.
Batch whole_split(const RatingDataset& dataset, Split split);

}  // namespace sif
