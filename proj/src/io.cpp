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

#include "nigra/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace nigra::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
}

void write_mat(const cv::Mat& mat, const fs::path& path) {
  ensure_parent(path);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception& e) {
    throw IoError("failed to write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("failed to write " + path.string());
}

}  // namespace

RasterImage read_image(const fs::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (mat.empty()) throw IoError("cannot read image " + path.string());
  if (mat.depth() != CV_8U) throw IoError("image is not 8-bit: " + path.string());
  RasterImage image(mat.cols, mat.rows);
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < mat.cols; ++x) image.set(x, y, row[x][2], row[x][1], row[x][0]);
  }
  return image;
}

void write_image(const RasterImage& image, const fs::path& path) {
  cv::Mat mat(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width(); ++x) {
      row[x] = cv::Vec3b(image.at(x, y, 2), image.at(x, y, 1), image.at(x, y, 0));
    }
  }
  write_mat(mat, path);
}

LabelMask read_mask(const fs::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw IoError("cannot read mask " + path.string());
  if (mat.type() != CV_8UC1) throw IoError("mask is not single-channel 8-bit: " + path.string());
  LabelMask mask(mat.cols, mat.rows);
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<std::uint8_t>(y);
    std::copy(row, row + mat.cols, mask.data().begin() + static_cast<std::ptrdiff_t>(y) * mat.cols);
  }
  return mask;
}

void write_mask(const LabelMask& mask, const fs::path& path) {
  cv::Mat mat(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y) {
    auto src = mask.data().subspan(static_cast<std::size_t>(y) * mask.width(), mask.width());
    std::copy(src.begin(), src.end(), mat.ptr<std::uint8_t>(y));
  }
  write_mat(mat, path);
}

std::vector<AnnotatedSample> read_manifest(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_array()) throw ValidationError("manifest " + path.string() + " must be a JSON array");
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path candidate(p);
    return candidate.is_absolute() ? candidate.string() : (base / candidate).string();
  };
  std::vector<AnnotatedSample> samples;
  std::set<std::string> ids;
  for (const auto& item : doc) {
    for (const char* key : {"sample_id", "image_path", "mask_path", "split"}) {
      if (!item.contains(key) || !item[key].is_string()) {
        throw ValidationError("manifest entry missing string field '" + std::string(key) + "'");
      }
    }
    AnnotatedSample s;
    s.sample_id = item["sample_id"].get<std::string>();
    s.image_path = resolve(item["image_path"].get<std::string>());
    s.mask_path = resolve(item["mask_path"].get<std::string>());
    s.split = parse_split(item["split"].get<std::string>());
    if (!ids.insert(s.sample_id).second) {
      throw ValidationError("duplicate sample_id '" + s.sample_id + "' in manifest");
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

void write_manifest(const std::vector<AnnotatedSample>& samples, const fs::path& path) {
  const fs::path base = path.parent_path();
  auto relative = [&](const std::string& p) {
    fs::path candidate(p);
    if (base.empty()) return candidate.generic_string();
    auto rel = candidate.lexically_relative(base);
    return rel.empty() ? candidate.generic_string() : rel.generic_string();
  };
  json doc = json::array();
  for (const auto& s : samples) {
    doc.push_back({{"sample_id", s.sample_id},
                   {"image_path", relative(s.image_path)},
                   {"mask_path", relative(s.mask_path)},
                   {"split", to_string(s.split)}});
  }
  write_text(path, doc.dump(2) + "\n");
}

std::vector<AnnotatedSample> select_split(const std::vector<AnnotatedSample>& samples, Split split) {
  std::vector<AnnotatedSample> out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out),
               [split](const AnnotatedSample& s) { return s.split == split; });
  return out;
}

std::string format_double(double value) {
  char buf[64];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
    if (std::strtod(buf, nullptr) == value) break;
  }
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError("CSV column '" + name + "' not found");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  CsvTable table;
  std::string line;
  auto split_line = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (table.header.empty()) {
      table.header = split_line(line);
      continue;
    }
    auto cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw ValidationError("CSV row in " + path.string() + " has " + std::to_string(cells.size()) +
                            " cells, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

}  // namespace nigra::io
