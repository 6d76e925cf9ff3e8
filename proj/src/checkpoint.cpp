#include "hoi/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_map>

namespace hoi::ckpt {
namespace {

constexpr char kMagic[8] = {'H', 'O', 'I', 'C', 'K', 'P', 'T', '1'};

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error("checkpoint format error: " + what);
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f32(std::string& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double read_f32(const std::string& buf, std::size_t at) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i)
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
  float f;
  std::memcpy(&f, &bits, 4);
  return static_cast<double>(f);
}

}  // namespace

const Mat* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["meta"] = ckpt.meta;
  nlohmann::json table = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    table.push_back({{"name", name},
                     {"rows", t.rows()},
                     {"cols", t.cols()},
                     {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.size());
  }
  header["tensors"] = std::move(table);
  const std::string header_text = header.dump();

  std::string out;
  out.reserve(16 + header_text.size() + 4 * offset);
  out.append(kMagic, 8);
  append_u64(out, header_text.size());
  out += header_text;
  for (const auto& [name, t] : ckpt.tensors)
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) append_f32(out, t(r, c));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (buf.size() < 16) fail("file shorter than the fixed header");
  if (std::memcmp(buf.data(), kMagic, 8) != 0) fail("bad magic");
  std::uint64_t header_len = 0;
  for (int i = 0; i < 8; ++i)
    header_len |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[8 + i])) << (8 * i);
  if (16 + header_len > buf.size()) fail("truncated JSON header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("unreadable JSON header: ") + e.what());
  }
  if (!header.contains("meta") || !header.contains("tensors") || !header["tensors"].is_array())
    fail("header is missing the meta or tensor table");

  const std::size_t blob_at = 16 + header_len;
  const std::size_t blob_floats = (buf.size() - blob_at) / 4;
  if ((buf.size() - blob_at) % 4 != 0) fail("tensor blob is not a whole number of float32s");

  Checkpoint ckpt;
  ckpt.meta = header["meta"];
  std::uint64_t expected_end = 0;
  for (const nlohmann::json& entry : header["tensors"]) {
    if (!entry.contains("name") || !entry.contains("rows") || !entry.contains("cols") ||
        !entry.contains("offset"))
      fail("tensor table entry is missing a field");
    const std::string name = entry["name"].get<std::string>();
    const auto rows = entry["rows"].get<Eigen::Index>();
    const auto cols = entry["cols"].get<Eigen::Index>();
    const auto offset = entry["offset"].get<std::uint64_t>();
    if (rows < 0 || cols < 0) fail("tensor '" + name + "' has a negative shape");
    const std::uint64_t count = static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols);
    if (offset + count > blob_floats) fail("tensor '" + name + "' runs past the end of the blob");
    Mat t(rows, cols);
    std::size_t at = blob_at + 4 * offset;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c, at += 4) t(r, c) = read_f32(buf, at);
    ckpt.tensors.emplace_back(name, std::move(t));
    expected_end = std::max(expected_end, offset + count);
  }
  if (expected_end != blob_floats) fail("tensor blob size does not match the tensor table");
  return ckpt;
}

Checkpoint snapshot_params(const std::vector<nn::Param*>& params, nlohmann::json meta) {
  Checkpoint ckpt;
  ckpt.meta = std::move(meta);
  for (const nn::Param* p : params) ckpt.tensors.emplace_back(p->name, p->value);
  return ckpt;
}

void restore_params(const Checkpoint& ckpt, const std::vector<nn::Param*>& params) {
  if (ckpt.tensors.size() != params.size())
    fail("parameter count mismatch: file has " + std::to_string(ckpt.tensors.size()) +
         ", model has " + std::to_string(params.size()));
  std::unordered_map<std::string, const Mat*> by_name;
  for (const auto& [name, t] : ckpt.tensors)
    if (!by_name.emplace(name, &t).second) fail("duplicate tensor '" + name + "'");
  for (nn::Param* p : params) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) fail("model parameter '" + p->name + "' not present in file");
    const Mat& t = *it->second;
    if (t.rows() != p->value.rows() || t.cols() != p->value.cols())
      fail("tensor '" + p->name + "' has shape " + std::to_string(t.rows()) + "x" +
           std::to_string(t.cols()) + ", expected " + std::to_string(p->value.rows()) + "x" +
           std::to_string(p->value.cols()));
    p->value = t;
  }
}

}  // namespace hoi::ckpt
