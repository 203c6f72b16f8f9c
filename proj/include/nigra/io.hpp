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

#ifndef NIGRA_IO_HPP_
#define NIGRA_IO_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "nigra/core.hpp"

namespace nigra::io {

// RGB PNG/TIFF. Grayscale inputs are expanded to three channels.
RasterImage read_image(const std::filesystem::path& path);
void write_image(const RasterImage& image, const std::filesystem::path& path);

// Single-channel 8-bit PNG whose values are class ids.
LabelMask read_mask(const std::filesystem::path& path);
void write_mask(const LabelMask& mask, const std::filesystem::path& path);

// Manifest: JSON array of {sample_id, image_path, mask_path, split}. Relative
// paths are resolved against the manifest's directory on read.
std::vector<AnnotatedSample> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<AnnotatedSample>& samples, const std::filesystem::path& path);

std::vector<AnnotatedSample> select_split(const std::vector<AnnotatedSample>& samples, Split split);

// Shortest round-trippable decimal form ("%.17g" trimmed by trial).
std::string format_double(double value);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Minimal CSV reader for files this project writes: comma separated, no quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace nigra::io

#endif  // NIGRA_IO_HPP_
