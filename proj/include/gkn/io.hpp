// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats. All integers and reals are little-endian.
//
// Dataset ("GKND"):
//   magic, version u32, d u32, s u32, N u32,
//   forcing (u32 length + bytes),
//   GRF spec (shift f64, exponent f64, boundary u32, kmax u32, seed u64),
//   RNG seed u64, then N coefficient fields and N solution fields (f64, row-major).
//
// Model ("GKNM"):
//   magic, version u32,
//   config (n u32, T u32, d u32, activation u32, local term u32, width count u32, widths u32...),
//   tensor count u32, then per tensor: rank u32, dims u32..., values f64,
//   normalization (channel count u32, (mean, std) f64 pairs, target mean/std f64),
//   training record (see ModelRecord).
//
// Tables: CSV with a header row, reals printed with 17 significant digits.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "gkn/dataset.hpp"
#include "gkn/training.hpp"

namespace gkn {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kModelVersion = 1;

void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

// Everything a saved model needs to be evaluated again.
struct ModelRecord {
  TrainedModel model;
  std::size_t train_res = 0;
  std::size_t n_train = 0;
  SamplingPlan plan;
  std::size_t epochs = 0;
  double lr = 0.0;
  std::uint64_t seed = 0;
};

void write_model(std::ostream& out, const ModelRecord& record);
ModelRecord read_model(std::istream& in);
void save_model(const std::filesystem::path& path, const ModelRecord& record);
ModelRecord load_model(const std::filesystem::path& path);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string format_real(double v);  // %.17g
void write_csv(std::ostream& out, const Table& table);
void save_csv(const std::filesystem::path& path, const Table& table);

}  // namespace gkn
