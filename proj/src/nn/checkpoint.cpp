#include "matformer/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace matformer::nn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'M', 'F', 'C', 'K'};
constexpr std::uint8_t kFloat32 = 0;
const std::string kMomentM = "opt.m/";
const std::string kMomentV = "opt.v/";

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_tensor(std::ostream& out, const std::string& name, const Mat<float>& m) {
  put_string(out, name);
  out.put(static_cast<char>(kFloat32));
  put_u32(out, 2);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  void need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void floats(float* dst, size_t n) {
    need(n * sizeof(float));
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (ckpt.adam_m.has_value() != ckpt.adam_v.has_value()) throw CheckpointError("both optimizer moments or neither");
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(kMagic, 4);
    put_u32(out, kCheckpointVersion);
    put_string(out, ckpt.config_json);
    put_string(out, ckpt.quantizer_json);
    put_string(out, ckpt.meta_json);
    const int moments = ckpt.adam_m ? ckpt.adam_m->size() + ckpt.adam_v->size() : 0;
    put_u32(out, static_cast<std::uint32_t>(ckpt.params.size() + moments));
    for (int i = 0; i < ckpt.params.size(); ++i) put_tensor(out, ckpt.params.names()[i], ckpt.params.at(i));
    if (ckpt.adam_m) {
      for (int i = 0; i < ckpt.adam_m->size(); ++i) put_tensor(out, kMomentM + ckpt.adam_m->names()[i], ckpt.adam_m->at(i));
      for (int i = 0; i < ckpt.adam_v->size(); ++i) put_tensor(out, kMomentV + ckpt.adam_v->names()[i], ckpt.adam_v->at(i));
    }
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));
  r.need(4);
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError(path.string() + " is not a checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config_json = r.str();
  ckpt.quantizer_json = r.str();
  ckpt.meta_json = r.str();
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    if (r.u8() != kFloat32) throw CheckpointError("unsupported dtype in tensor " + name);
    const auto rank = r.u32();
    if (rank != 2) throw CheckpointError("tensor " + name + " has rank " + std::to_string(rank));
    const auto rows = r.u32(), cols = r.u32();
    ParamSet<float>* target = &ckpt.params;
    if (name.rfind(kMomentM, 0) == 0) {
      if (!ckpt.adam_m) ckpt.adam_m.emplace();
      target = &*ckpt.adam_m;
      name = name.substr(kMomentM.size());
    } else if (name.rfind(kMomentV, 0) == 0) {
      if (!ckpt.adam_v) ckpt.adam_v.emplace();
      target = &*ckpt.adam_v;
      name = name.substr(kMomentV.size());
    }
    auto& m = target->add(name, static_cast<int>(rows), static_cast<int>(cols));
    r.floats(m.data(), static_cast<size_t>(m.size()));
  }
  if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");
  if (ckpt.adam_m.has_value() != ckpt.adam_v.has_value()) throw CheckpointError("incomplete optimizer state");
  return ckpt;
}

}  // namespace matformer::nn
