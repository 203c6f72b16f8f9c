// Copyright 2026 The Nigra Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NIGRA_CORE_HPP_
#define NIGRA_CORE_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nigra {

// Raised for malformed inputs. The CLI maps it to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ClassId = std::uint8_t;

struct ClassEntry {
  ClassId id;
  std::string name;
};

// Ordered list of segmentation classes. Id 0 is always background.
class ClassCatalog {
 public:
  // Throws ValidationError unless ids are 0..n-1 in order and names are unique.
  explicit ClassCatalog(std::vector<ClassEntry> entries);

  // background / SNr / SNCD
  static ClassCatalog Default();

  std::size_t size() const { return entries_.size(); }
  const std::vector<ClassEntry>& entries() const { return entries_; }
  const std::string& name(ClassId id) const;
  std::optional<ClassId> find(const std::string& name) const;
  bool contains(int id) const { return id >= 0 && static_cast<std::size_t>(id) < entries_.size(); }

  // Every class except background, in id order.
  std::vector<ClassId> foreground() const;

 private:
  std::vector<ClassEntry> entries_;
};

// 8-bit interleaved RGB raster, row-major.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, std::uint8_t fill = 0);
  RasterImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  static constexpr int channels() { return 3; }
  bool empty() const { return data_.empty(); }

  std::uint8_t at(int x, int y, int c) const { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
  std::uint8_t& at(int x, int y, int c) { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  std::optional<double> resolution_microns_per_pixel;

  friend bool operator==(const RasterImage& a, const RasterImage& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Per-pixel class ids, row-major.
class LabelMask {
 public:
  LabelMask() = default;
  LabelMask(int width, int height, ClassId fill = 0);
  LabelMask(int width, int height, std::vector<ClassId> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return data_.size(); }

  ClassId at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  ClassId& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const ClassId> data() const { return data_; }
  std::span<ClassId> data() { return data_; }

  // Throws ValidationError naming the first offending pixel.
  void validate(const ClassCatalog& catalog) const;

  friend bool operator==(const LabelMask&, const LabelMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<ClassId> data_;
};

// Per-pixel class probabilities, pixel-major: data[(y*w + x)*C + c].
class ProbabilityMap {
 public:
  static constexpr double kSumTolerance = 1e-6;

  ProbabilityMap() = default;
  ProbabilityMap(int width, int height, int classes);
  ProbabilityMap(int width, int height, int classes, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int classes() const { return classes_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  std::span<const double> pixel(std::size_t index) const {
    return std::span<const double>(data_).subspan(index * classes_, classes_);
  }
  std::span<double> pixel(std::size_t index) {
    return std::span<double>(data_).subspan(index * classes_, classes_);
  }
  double at(int x, int y, int c) const { return data_[(static_cast<std::size_t>(y) * width_ + x) * classes_ + c]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  // Entries in [0,1] and each pixel summing to 1 within kSumTolerance.
  void validate() const;

 private:
  int width_ = 0;
  int height_ = 0;
  int classes_ = 0;
  std::vector<double> data_;
};

struct ClassCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

// One-vs-rest pixel tallies, indexed by class id.
struct ConfusionCounts {
  std::vector<ClassCounts> per_class;

  ConfusionCounts& operator+=(const ConfusionCounts& other);
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

enum class Split { kTrain, kVal, kTest, kBlind };

std::string to_string(Split split);
Split parse_split(const std::string& text);

struct AnnotatedSample {
  std::string image_path;
  std::string mask_path;
  std::string sample_id;
  Split split = Split::kTrain;

  friend bool operator==(const AnnotatedSample&, const AnnotatedSample&) = default;
};

ProbabilityMap one_hot(const LabelMask& mask, const ClassCatalog& catalog);

// Lowest class id wins ties.
LabelMask argmax_decode(const ProbabilityMap& probs);

}  // namespace nigra

#endif  // NIGRA_CORE_HPP_
