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

#include "nigra/core.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace nigra {

ClassCatalog::ClassCatalog(std::vector<ClassEntry> entries) : entries_(std::move(entries)) {
  if (entries_.size() < 2) {
    throw ValidationError("class catalog needs background plus at least one foreground class");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].id != i) {
      std::ostringstream msg;
      msg << "class ids must be contiguous from 0; entry " << i << " has id " << int(entries_[i].id);
      throw ValidationError(msg.str());
    }
    if (!names.insert(entries_[i].name).second) {
      throw ValidationError("duplicate class name '" + entries_[i].name + "'");
    }
  }
}

ClassCatalog ClassCatalog::Default() {
  return ClassCatalog({{0, "background"}, {1, "SNr"}, {2, "SNCD"}});
}

const std::string& ClassCatalog::name(ClassId id) const {
  if (!contains(id)) throw ValidationError("class id " + std::to_string(int(id)) + " not in catalog");
  return entries_[id].name;
}

std::optional<ClassId> ClassCatalog::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.id;
  }
  return std::nullopt;
}

std::vector<ClassId> ClassCatalog::foreground() const {
  std::vector<ClassId> ids;
  for (std::size_t i = 1; i < entries_.size(); ++i) ids.push_back(static_cast<ClassId>(i));
  return ids;
}

RasterImage::RasterImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) throw ValidationError("negative image dimensions");
  data_.assign(static_cast<std::size_t>(width) * height * 3, fill);
}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0) throw ValidationError("negative image dimensions");
  if (data_.size() != static_cast<std::size_t>(width) * height * 3) {
    throw ValidationError("image data length " + std::to_string(data_.size()) + " != width*height*3");
  }
}

void RasterImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  auto* p = &data_[(static_cast<std::size_t>(y) * width_ + x) * 3];
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

LabelMask::LabelMask(int width, int height, ClassId fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw ValidationError("negative mask dimensions");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

LabelMask::LabelMask(int width, int height, std::vector<ClassId> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0) throw ValidationError("negative mask dimensions");
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw ValidationError("mask data length " + std::to_string(data_.size()) + " != width*height");
  }
}

void LabelMask::validate(const ClassCatalog& catalog) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!catalog.contains(data_[i])) {
      std::ostringstream msg;
      msg << "mask value " << int(data_[i]) << " at pixel (" << i % width_ << ", " << i / width_
          << ") is not a class id of the catalog (size " << catalog.size() << ")";
      throw ValidationError(msg.str());
    }
  }
}

ProbabilityMap::ProbabilityMap(int width, int height, int classes)
    : width_(width), height_(height), classes_(classes) {
  if (width < 0 || height < 0 || classes < 1) throw ValidationError("invalid probability map shape");
  data_.assign(static_cast<std::size_t>(width) * height * classes, 0.0);
}

ProbabilityMap::ProbabilityMap(int width, int height, int classes, std::vector<double> data)
    : width_(width), height_(height), classes_(classes), data_(std::move(data)) {
  if (width < 0 || height < 0 || classes < 1) throw ValidationError("invalid probability map shape");
  if (data_.size() != static_cast<std::size_t>(width) * height * classes) {
    throw ValidationError("probability data length does not match width*height*classes");
  }
}

void ProbabilityMap::validate() const {
  for (std::size_t p = 0; p < pixel_count(); ++p) {
    double sum = 0.0;
    for (double v : pixel(p)) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError("probability outside [0,1] at pixel index " + std::to_string(p));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      throw ValidationError("probabilities at pixel index " + std::to_string(p) + " sum to " +
                            std::to_string(sum));
    }
  }
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  if (per_class.empty()) per_class.resize(other.per_class.size());
  if (per_class.size() != other.per_class.size()) {
    throw ValidationError("cannot accumulate confusion counts over different class counts");
  }
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    per_class[c].tp += other.per_class[c].tp;
    per_class[c].fp += other.per_class[c].fp;
    per_class[c].fn += other.per_class[c].fn;
    per_class[c].tn += other.per_class[c].tn;
  }
  return *this;
}

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kBlind: return "blind";
  }
  return "train";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  if (text == "blind") return Split::kBlind;
  throw ValidationError("unknown split '" + text + "' (expected train, val, test or blind)");
}

ProbabilityMap one_hot(const LabelMask& mask, const ClassCatalog& catalog) {
  mask.validate(catalog);
  const int classes = static_cast<int>(catalog.size());
  ProbabilityMap out(mask.width(), mask.height(), classes);
  auto labels = mask.data();
  for (std::size_t p = 0; p < labels.size(); ++p) out.pixel(p)[labels[p]] = 1.0;
  return out;
}

LabelMask argmax_decode(const ProbabilityMap& probs) {
  LabelMask out(probs.width(), probs.height());
  auto labels = out.data();
  for (std::size_t p = 0; p < probs.pixel_count(); ++p) {
    auto v = probs.pixel(p);
    int best = 0;
    for (int c = 1; c < probs.classes(); ++c) {
      if (v[c] > v[best]) best = c;
    }
    labels[p] = static_cast<ClassId>(best);
  }
  return out;
}

}  // namespace nigra
