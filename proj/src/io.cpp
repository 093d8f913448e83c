// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0

#include "gkn/io.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace gkn {

namespace {

constexpr std::array<char, 4> kDatasetMagic{'G', 'K', 'N', 'D'};
constexpr std::array<char, 4> kModelMagic{'G', 'K', 'N', 'M'};
// Upper bounds that reject corrupt headers before allocating.
constexpr std::uint32_t kMaxResolution = 1u << 14;
constexpr std::uint32_t kMaxCount = 1u << 24;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void size(std::size_t v) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw FormatError("value does not fit in u32");
    u32(static_cast<std::uint32_t>(v));
  }
  void str(const std::string& s) {
    size(s.size());
    bytes(s.data(), s.size());
  }
  void reals(std::span<const double> v) {
    for (double x : v) f64(x);
  }

 private:
  void le(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out_.write(buf, n);
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("unexpected end of file");
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::uint32_t bounded(std::uint32_t limit, const char* what) {
    const std::uint32_t v = u32();
    if (v > limit) throw FormatError(std::string("implausible ") + what + ": " + std::to_string(v));
    return v;
  }
  std::string str() {
    std::string s(bounded(1u << 16, "string length"), '\0');
    bytes(s.data(), s.size());
    return s;
  }
  std::vector<double> reals(std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = f64();
    return v;
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after the payload");
  }

 private:
  std::uint64_t le(int n) {
    unsigned char buf[8];
    bytes(reinterpret_cast<char*>(buf), static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
};

void check_magic(Reader& r, const std::array<char, 4>& magic, std::uint32_t version, const char* kind) {
  std::array<char, 4> got{};
  r.bytes(got.data(), got.size());
  if (got != magic) throw FormatError(std::string("not a ") + kind + " file (bad magic)");
  const std::uint32_t v = r.u32();
  if (v != version) {
    throw FormatError(std::string(kind) + " format version " + std::to_string(v) + " is not supported (expected " +
                      std::to_string(version) + ")");
  }
}

void write_tensor(Writer& w, const ad::Tensor& t) {
  w.size(t.rank());
  for (auto d : t.shape()) w.size(d);
  w.reals(t.values());
}

ad::Tensor read_tensor(Reader& r) {
  const std::uint32_t rank = r.bounded(4, "tensor rank");
  ad::Shape shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = r.bounded(kMaxCount, "tensor dimension");
    count *= d;
    if (count > kMaxCount) throw FormatError("tensor too large");
  }
  return ad::Tensor(shape, r.reals(count));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& data) {
  data.validate();
  Writer w(out);
  w.bytes(kDatasetMagic.data(), kDatasetMagic.size());
  w.u32(kDatasetVersion);
  w.size(static_cast<std::size_t>(data.dim));
  w.size(data.resolution);
  w.size(data.size());
  w.str(data.forcing);
  w.f64(data.grf.shift);
  w.f64(data.grf.exponent);
  w.u32(static_cast<std::uint32_t>(data.grf.boundary));
  w.size(data.grf.kmax);
  w.u64(data.grf.seed);
  w.u64(data.seed);
  for (const auto& a : data.coefficients) w.reals(a.values());
  for (const auto& u : data.solutions) w.reals(u.values());
  if (!out) throw std::runtime_error("dataset write failed");
}

Dataset read_dataset(std::istream& in) {
  Reader r(in);
  check_magic(r, kDatasetMagic, kDatasetVersion, "GKND dataset");
  Dataset data;
  data.dim = static_cast<int>(r.bounded(3, "dimension"));
  data.resolution = r.bounded(kMaxResolution, "resolution");
  const std::size_t n = r.bounded(kMaxCount, "sample count");
  data.forcing = r.str();
  data.grf.shift = r.f64();
  data.grf.exponent = r.f64();
  const std::uint32_t boundary = r.u32();
  if (boundary > 1) throw FormatError("unknown boundary condition " + std::to_string(boundary));
  data.grf.boundary = static_cast<Boundary>(boundary);
  data.grf.kmax = r.u32();
  data.grf.seed = r.u64();
  data.seed = r.u64();
  if (data.dim != 2 || data.resolution < 3) throw FormatError("dataset header describes an unsupported grid");
  const std::size_t points = data.resolution * data.resolution;
  for (std::size_t i = 0; i < n; ++i) data.coefficients.emplace_back(data.resolution, 2, r.reals(points));
  for (std::size_t i = 0; i < n; ++i) data.solutions.emplace_back(data.resolution, 2, r.reals(points));
  r.expect_end();
  return data;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  auto out = open_out(path);
  write_dataset(out, data);
}

Dataset load_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dataset(in);
}

void write_model(std::ostream& out, const ModelRecord& record) {
  const GknParams& p = record.model.params;
  const ModelConfig& c = p.config;
  Writer w(out);
  w.bytes(kModelMagic.data(), kModelMagic.size());
  w.u32(kModelVersion);
  w.size(c.width);
  w.size(c.depth);
  w.size(static_cast<std::size_t>(c.dim));
  w.u32(static_cast<std::uint32_t>(c.activation));
  w.u32(c.local_term ? 1 : 0);
  const auto widths = c.kappa_widths();
  w.size(widths.size());
  for (auto v : widths) w.size(v);

  const auto tensors = p.tensors();
  w.size(tensors.size());
  for (const auto* t : tensors) write_tensor(w, *t);

  const NormStats& s = record.model.stats;
  w.size(s.channels.size());
  for (const auto& ch : s.channels) {
    w.f64(ch.mean);
    w.f64(ch.std);
  }
  w.f64(s.target.mean);
  w.f64(s.target.std);

  w.size(record.train_res);
  w.size(record.n_train);
  w.size(record.plan.m);
  w.size(record.plan.l);
  w.size(record.plan.m_test);
  w.size(record.plan.l_test);
  w.f64(record.plan.r);
  w.f64(record.plan.r_test);
  w.u64(record.plan.seed);
  w.size(record.epochs);
  w.f64(record.lr);
  w.u64(record.seed);
  w.f64(record.model.mean_edges);
  w.size(record.model.loss_history.size());
  w.reals(record.model.loss_history);
  if (!out) throw std::runtime_error("model write failed");
}

ModelRecord read_model(std::istream& in) {
  Reader r(in);
  check_magic(r, kModelMagic, kModelVersion, "GKNM model");
  ModelConfig c;
  c.width = r.bounded(1u << 12, "width");
  c.depth = r.bounded(1u << 12, "depth");
  c.dim = static_cast<int>(r.bounded(3, "dimension"));
  const std::uint32_t act = r.u32();
  if (act > 1) throw FormatError("unknown activation " + std::to_string(act));
  c.activation = static_cast<Activation>(act);
  c.local_term = r.u32() != 0;
  const std::uint32_t nw = r.bounded(64, "kappa layer count");
  if (nw < 2) throw FormatError("kappa needs at least input and output widths");
  std::vector<std::size_t> widths(nw);
  for (auto& v : widths) v = r.bounded(kMaxCount, "kappa width");
  c.kappa_hidden.assign(widths.begin() + 1, widths.end() - 1);
  if (c.kappa_widths() != widths) throw FormatError("kappa widths inconsistent with the model config");
  c.validate();

  ModelRecord rec;
  GknParams& p = rec.model.params;
  p.config = c;
  p.kappa.resize(widths.size() - 1);
  const auto tensors = p.tensors();
  const std::uint32_t count = r.u32();
  if (count != tensors.size()) throw FormatError("tensor count does not match the model config");
  for (auto* t : tensors) *t = read_tensor(r);
  // shapes must agree with a freshly initialized model of the same config
  const GknParams ref = init_params(c, 0);
  const auto ref_tensors = ref.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i]->shape() != ref_tensors[i]->shape()) throw FormatError("tensor shape does not match the config");
  }

  NormStats& s = rec.model.stats;
  s.channels.resize(r.bounded(16, "channel count"));
  for (auto& ch : s.channels) {
    ch.mean = r.f64();
    ch.std = r.f64();
  }
  s.target.mean = r.f64();
  s.target.std = r.f64();

  rec.train_res = r.u32();
  rec.n_train = r.u32();
  rec.plan.m = r.u32();
  rec.plan.l = r.u32();
  rec.plan.m_test = r.u32();
  rec.plan.l_test = r.u32();
  rec.plan.r = r.f64();
  rec.plan.r_test = r.f64();
  rec.plan.seed = r.u64();
  rec.epochs = r.u32();
  rec.lr = r.f64();
  rec.seed = r.u64();
  rec.model.mean_edges = r.f64();
  rec.model.loss_history = r.reals(r.bounded(kMaxCount, "loss history length"));
  r.expect_end();
  return rec;
}

void save_model(const std::filesystem::path& path, const ModelRecord& record) {
  auto out = open_out(path);
  write_model(out, record);
}

ModelRecord load_model(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_model(in);
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const Table& table) {
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw std::invalid_argument("csv: row width differs from the header");
    line(row);
  }
}

void save_csv(const std::filesystem::path& path, const Table& table) {
  auto out = open_out(path);
  write_csv(out, table);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace gkn
