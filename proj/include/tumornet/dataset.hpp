#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tumornet/error.hpp"
#include "tumornet/image.hpp"
#include "tumornet/rng.hpp"
#include "tumornet/tensor.hpp"

namespace tumornet {

namespace fs = std::filesystem;

struct DatasetEntry {
  fs::path path;
  std::size_t class_id = 0;

  friend bool operator==(const DatasetEntry&, const DatasetEntry&) = default;
};

/// (path, class) list with a fixed, lexicographic class ordering.
struct DatasetIndex {
  std::vector<DatasetEntry> entries;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return entries.size(); }
  std::size_t class_count() const noexcept { return class_names.size(); }

  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> c(class_names.size(), 0);
    for (const auto& e : entries) ++c.at(e.class_id);
    return c;
  }

  friend bool operator==(const DatasetIndex&, const DatasetIndex&) = default;
};

struct ScanResult {
  DatasetIndex index;
  std::vector<std::string> warnings;  // one per skipped file
};

inline bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp";
}

// Signature check for PNG, JPEG and BMP.
inline bool has_image_signature(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return false;
  std::array<unsigned char, 8> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  const auto got = static_cast<std::size_t>(in.gcount());
  static constexpr std::array<unsigned char, 8> png{0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (got >= 8 && head == png) return true;
  if (got >= 3 && head[0] == 0xFF && head[1] == 0xD8 && head[2] == 0xFF) return true;
  if (got >= 2 && head[0] == 'B' && head[1] == 'M') return true;
  return false;
}

/// Scans root/<class>/<image> into an index sorted by (class, filename).
/// Files that are not recognizable images are skipped and reported.
inline ScanResult scan_dataset(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw DataError("dataset root is not a readable directory: " + root.string());

  std::vector<fs::path> class_dirs;
  ScanResult r;
  try {
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory()) class_dirs.push_back(e.path());
      else r.warnings.push_back("ignored non-directory " + e.path().string());
    }
  } catch (const fs::filesystem_error& e) {
    throw DataError("cannot read dataset root " + root.string() + ": " + e.what());
  }
  std::sort(class_dirs.begin(), class_dirs.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  if (class_dirs.empty()) throw DataError("dataset root has no class directories: " + root.string());

  for (std::size_t cid = 0; cid < class_dirs.size(); ++cid) {
    const auto& dir = class_dirs[cid];
    r.index.class_names.push_back(dir.filename().string());
    std::vector<fs::path> files;
    try {
      for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) {
          r.warnings.push_back("ignored " + e.path().string());
        } else if (!has_image_extension(e.path())) {
          r.warnings.push_back("not an image: " + e.path().string());
        } else if (!has_image_signature(e.path())) {
          r.warnings.push_back("unreadable image: " + e.path().string());
        } else {
          files.push_back(e.path());
        }
      }
    } catch (const fs::filesystem_error& e) {
      throw DataError("cannot read class directory " + dir.string() + ": " + e.what());
    }
    if (files.empty()) throw DataError("class directory has no images: " + dir.string());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    for (auto& f : files) r.index.entries.push_back({std::move(f), cid});
  }
  return r;
}

// ----------------------------------------------------------------- split

struct SplitSpec {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
  std::uint64_t seed = 42;

  void validate() const {
    if (train < 0 || validation < 0 || test < 0)
      throw ConfigError("split ratios must be nonnegative", "split.train");
    if (std::abs(train + validation + test - 1.0) > 1e-9)
      throw ConfigError("split ratios must sum to 1", "split.train");
  }
};

struct SplitResult {
  DatasetIndex train;
  DatasetIndex validation;
  DatasetIndex test;
};

/// Per-class allocation of n items to ratios by largest remainder: floors
/// first, then the leftover items to the largest fractional parts (ties go
/// train, validation, test). Every count is within 1 of n * ratio.
inline std::array<std::size_t, 3> allocate_counts(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> out{};
  std::array<double, 3> frac{};
  std::size_t used = 0;
  for (int p = 0; p < 3; ++p) {
    const double q = static_cast<double>(n) * ratios[p];
    out[p] = static_cast<std::size_t>(std::floor(q + 1e-9));
    frac[p] = q - static_cast<double>(out[p]);
    used += out[p];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b] + 1e-12; });
  for (std::size_t k = 0; used < n; ++k, ++used) ++out[order[k % 3]];
  return out;
}

inline SplitResult stratified_split(const DatasetIndex& index, const SplitSpec& spec) {
  spec.validate();
  const std::array<double, 3> ratios{spec.train, spec.validation, spec.test};

  SplitResult out;
  for (auto* part : {&out.train, &out.validation, &out.test}) part->class_names = index.class_names;
  std::array<DatasetIndex*, 3> parts{&out.train, &out.validation, &out.test};

  for (std::size_t cid = 0; cid < index.class_count(); ++cid) {
    std::vector<DatasetEntry> members;
    for (const auto& e : index.entries)
      if (e.class_id == cid) members.push_back(e);
    Rng rng(derive_seed(spec.seed, cid));
    rng.shuffle(std::span<DatasetEntry>(members));
    const auto counts = allocate_counts(members.size(), ratios);
    for (int p = 0; p < 3; ++p) {
      if (ratios[p] > 0 && counts[p] == 0) {
        throw DataError("class '" + index.class_names[cid] + "' has " + std::to_string(members.size()) +
                        " entries, too few to appear in every partition");
      }
    }
    std::size_t at = 0;
    for (int p = 0; p < 3; ++p)
      for (std::size_t k = 0; k < counts[p]; ++k) parts[p]->entries.push_back(members[at++]);
  }
  auto by_class_then_name = [](const DatasetEntry& a, const DatasetEntry& b) {
    if (a.class_id != b.class_id) return a.class_id < b.class_id;
    return a.path.filename().string() < b.path.filename().string();
  };
  for (auto* p : parts) std::sort(p->entries.begin(), p->entries.end(), by_class_then_name);
  return out;
}

// ---------------------------------------------------------------- labels

template <class T = float>
Tensor<T> one_hot(std::size_t class_id, std::size_t class_count) {
  if (class_id >= class_count) {
    throw DataError("class id " + std::to_string(class_id) + " out of range for " +
                    std::to_string(class_count) + " classes");
  }
  Tensor<T> t(Shape{class_count});
  t[class_id] = T{1};
  return t;
}

// --------------------------------------------------------------- batches

/// Decodes each image once and keeps the preprocessed tensor.
template <class T>
class ImageStore {
public:
  using Loader = std::function<Tensor<T>(const fs::path&)>;

  ImageStore(std::size_t height, std::size_t width)
      : loader_([height, width](const fs::path& p) { return load_and_preprocess<T>(p, height, width); }) {}
  explicit ImageStore(Loader loader) : loader_(std::move(loader)) {}

  const Tensor<T>& get(const fs::path& path) {
    auto it = cache_.find(path.string());
    if (it == cache_.end()) it = cache_.emplace(path.string(), loader_(path)).first;
    return it->second;
  }

private:
  Loader loader_;
  std::map<std::string, Tensor<T>> cache_;
};

template <class T>
struct Batch {
  Tensor<T> images;  // B,H,W,C
  Tensor<T> labels;  // B,C one-hot
  std::vector<std::size_t> class_ids;
};

/// One epoch of batches over an index. Sample order comes from
/// `shuffle_seed`; each sample's augmentation stream is derived from
/// (augment_seed, position in the index), so batch assembly order cannot
/// change the pixels.
template <class T>
class BatchStream {
public:
  BatchStream(const DatasetIndex& index, std::size_t batch_size, bool shuffle, std::uint64_t shuffle_seed,
              std::optional<AugmentParams> augment, std::uint64_t augment_seed, ImageStore<T>& store)
      : index_(&index), batch_size_(batch_size), augment_(std::move(augment)),
        augment_seed_(augment_seed), store_(&store) {
    if (batch_size == 0) throw ConfigError("batch size must be >= 1", "train.batch_size");
    if (index.entries.empty()) throw DataError("cannot batch an empty dataset partition");
    if (augment_) augment_->validate();
    order_.resize(index.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (shuffle) {
      Rng rng(shuffle_seed);
      rng.shuffle(std::span<std::size_t>(order_));
    }
  }

  std::size_t size() const noexcept { return (order_.size() + batch_size_ - 1) / batch_size_; }
  const std::vector<std::size_t>& order() const noexcept { return order_; }

  std::size_t batch_length(std::size_t b) const {
    return std::min(batch_size_, order_.size() - b * batch_size_);
  }

  Batch<T> operator[](std::size_t b) const {
    if (b >= size()) throw DataError("batch index out of range");
    const std::size_t len = batch_length(b);
    const std::size_t classes = index_->class_count();
    Batch<T> out;
    out.labels = Tensor<T>({len, classes});
    std::vector<T> pixels;
    Shape sample_shape;
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t idx = order_[b * batch_size_ + k];
      const auto& entry = index_->entries[idx];
      const Tensor<T>* img = &store_->get(entry.path);
      Tensor<T> augmented;
      if (augment_) {
        Rng rng(derive_seed(augment_seed_, idx));
        augmented = augment(*img, *augment_, rng);
        img = &augmented;
      }
      if (k == 0) {
        sample_shape = img->shape();
        pixels.reserve(len * img->size());
      } else if (img->shape() != sample_shape) {
        throw ShapeError("images in one batch differ in shape: " + entry.path.string());
      }
      pixels.insert(pixels.end(), img->data().begin(), img->data().end());
      out.labels[k * classes + entry.class_id] = T{1};
      out.class_ids.push_back(entry.class_id);
    }
    Shape shape{len};
    shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
    out.images = Tensor<T>(std::move(shape), std::move(pixels));
    return out;
  }

private:
  const DatasetIndex* index_;
  std::size_t batch_size_;
  std::optional<AugmentParams> augment_;
  std::uint64_t augment_seed_;
  ImageStore<T>* store_;
  std::vector<std::size_t> order_;
};

template <class T>
BatchStream<T> make_batches(const DatasetIndex& index, std::size_t batch_size, bool shuffle,
                            std::uint64_t shuffle_seed, ImageStore<T>& store,
                            std::optional<AugmentParams> augment = std::nullopt,
                            std::uint64_t augment_seed = 0) {
  return BatchStream<T>(index, batch_size, shuffle, shuffle_seed, std::move(augment), augment_seed, store);
}

} // namespace tumornet
