/*
 * Copyright (c) 2026, The davit-logo Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "davit/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "davit/error.hpp"

namespace davit {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'V', 'T', 'F'};
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxNameLength = 4096;

// u64 metadata travels as four 16-bit chunks, each exactly representable in f32.
Tensorf encode_u64(std::uint64_t v) {
  Tensorf t({4});
  for (std::size_t i = 0; i < 4; ++i) t[i] = static_cast<float>((v >> (16 * i)) & 0xFFFF);
  return t;
}

std::uint64_t decode_u64(const Tensorf& t, const std::string& name) {
  if (t.shape() != Shape{4}) throw CheckpointCorruptError("metadata tensor " + name + " has the wrong shape");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const float f = t[i];
    if (!(f >= 0.0f && f <= 65535.0f) || f != static_cast<float>(static_cast<std::uint32_t>(f))) {
      throw CheckpointCorruptError("metadata tensor " + name + " holds a non-integer chunk");
    }
    v |= std::uint64_t(static_cast<std::uint32_t>(f)) << (16 * i);
  }
  return v;
}

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

class Reader {
 public:
  Reader(std::ifstream& in, std::uint64_t size, const std::filesystem::path& path)
      : in_(in), remaining_(size), path_(path) {}

  void bytes(void* dst, std::uint64_t n, const char* what) {
    if (n > remaining_) throw CheckpointCorruptError("corrupt checkpoint " + path_.string() + ": truncated " + what);
    in_.read(static_cast<char*>(dst), std::streamsize(n));
    if (std::uint64_t(in_.gcount()) != n) {
      throw CheckpointCorruptError("corrupt checkpoint " + path_.string() + ": truncated " + what);
    }
    remaining_ -= n;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    bytes(&v, 4, what);
    return v;
  }
  std::uint64_t remaining() const { return remaining_; }

 private:
  std::ifstream& in_;
  std::uint64_t remaining_;
  const std::filesystem::path& path_;
};

const std::string kMetaEpoch = "meta.epoch", kMetaCorrect = "meta.val_correct", kMetaTotal = "meta.val_total",
                  kMetaHash = "meta.config_hash", kOptimStep = "optim.step";

}  // namespace

const Tensorf* CheckpointFile::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

void write_tensor_file(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, Tensorf>>& tensors) {
  std::filesystem::path partial = path;
  partial += ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + partial.string());
    out.write(kMagic, 4);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
      put_u32(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), std::streamsize(name.size()));
      put_u32(out, static_cast<std::uint32_t>(t.rank()));
      for (std::size_t e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
      const auto d = t.data();
      out.write(reinterpret_cast<const char*>(d.data()), std::streamsize(d.size() * sizeof(float)));
    }
    out.flush();
    if (!out) throw Error("failed writing checkpoint " + partial.string());
  }
  std::filesystem::rename(partial, path);
}

std::vector<std::pair<std::string, Tensorf>> read_tensor_file(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw Error("cannot open checkpoint " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  Reader r(in, size, path);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw CheckpointCorruptError("corrupt checkpoint " + path.string() + ": bad magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointCorruptError("corrupt checkpoint " + path.string() + ": unsupported version " +
                                 std::to_string(version));
  }
  const std::uint32_t count = r.u32("tensor count");
  std::vector<std::pair<std::string, Tensorf>> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32("name length");
    if (len == 0 || len > kMaxNameLength) {
      throw CheckpointCorruptError("corrupt checkpoint " + path.string() + ": bad name length " + std::to_string(len));
    }
    std::string name(len, '\0');
    r.bytes(name.data(), len, "tensor name");
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > kMaxRank) {
      throw CheckpointCorruptError("corrupt checkpoint " + path.string() + ": tensor " + name + " has rank " +
                                   std::to_string(rank));
    }
    Shape shape(rank);
    std::uint64_t numel = 1;
    for (auto& e : shape) {
      e = r.u32("extent");
      if (e == 0) throw CheckpointCorruptError("corrupt checkpoint " + path.string() + ": zero extent in " + name);
      numel *= e;
      if (numel * sizeof(float) > r.remaining()) {
        throw CheckpointCorruptError("corrupt checkpoint " + path.string() + ": truncated data for " + name);
      }
    }
    Tensorf t(shape);
    r.bytes(t.data().data(), numel * sizeof(float), "tensor data");
    out.emplace_back(std::move(name), std::move(t));
  }
  if (r.remaining() != 0) {
    throw CheckpointCorruptError("corrupt checkpoint " + path.string() + ": " + std::to_string(r.remaining()) +
                                 " trailing bytes");
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, const CheckpointMeta& meta,
                     const OptimizerState<float>* state) {
  auto tensors = model.named_parameters();
  const std::size_t n_params = tensors.size();
  tensors.emplace_back(kMetaEpoch, encode_u64(meta.epoch));
  tensors.emplace_back(kMetaCorrect, encode_u64(meta.val_correct));
  tensors.emplace_back(kMetaTotal, encode_u64(meta.val_total));
  tensors.emplace_back(kMetaHash, encode_u64(meta.config_hash));
  if (state && state->initialized()) {
    if (state->m.size() != n_params) throw ShapeError("optimizer state does not match the model parameters");
    tensors.emplace_back(kOptimStep, encode_u64(state->step));
    for (std::size_t i = 0; i < n_params; ++i) {
      const Shape shape = tensors[i].second.shape();
      const std::string name = tensors[i].first;
      tensors.emplace_back("optim.m/" + name, Tensorf::from_values(shape, state->m[i]));
      tensors.emplace_back("optim.v/" + name, Tensorf::from_values(shape, state->v[i]));
    }
  }
  write_tensor_file(path, tensors);
}

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
  CheckpointFile f;
  f.tensors = read_tensor_file(path);
  const auto meta = [&](const std::string& name) {
    const Tensorf* t = f.find(name);
    if (!t) throw CheckpointCorruptError("corrupt checkpoint " + path.string() + ": missing " + name);
    return decode_u64(*t, name);
  };
  f.meta = {meta(kMetaEpoch), meta(kMetaCorrect), meta(kMetaTotal), meta(kMetaHash)};
  f.has_optimizer = f.find(kOptimStep) != nullptr;
  return f;
}

void load_into(Model<float>& model, const CheckpointFile& ckpt, bool force, OptimizerState<float>* state) {
  const auto params = model.named_parameters();
  std::map<std::string, const Tensorf*> stored;
  for (const auto& [name, t] : ckpt.tensors) stored[name] = &t;
  // check everything before touching the model so a failed load leaves it intact
  for (const auto& [name, t] : params) {
    auto it = stored.find(name);
    if (it == stored.end()) throw CheckpointMismatchError("checkpoint has no tensor " + name);
    if (it->second->shape() != t.shape()) {
      throw CheckpointMismatchError("tensor " + name + " has shape " + shape_str(it->second->shape()) +
                                    " in the checkpoint, model expects " + shape_str(t.shape()));
    }
  }
  for (const auto& [name, t] : ckpt.tensors) {
    const bool known = name.rfind("meta.", 0) == 0 || name.rfind("optim.", 0) == 0 ||
                       std::any_of(params.begin(), params.end(), [&](const auto& p) { return p.first == name; });
    if (!known) throw CheckpointMismatchError("checkpoint tensor " + name + " has no counterpart in the model");
  }
  if (ckpt.meta.config_hash != model.config.hash() && !force) {
    throw CheckpointHashError("checkpoint config hash differs from the model config (use --force to load anyway)");
  }
  for (const auto& [name, t] : params) {
    auto src = stored[name]->data();
    Tensorf dst = t;
    std::copy(src.begin(), src.end(), dst.data().begin());
  }
  if (state) {
    *state = OptimizerState<float>{};
    if (ckpt.has_optimizer) {
      state->step = decode_u64(*ckpt.find(kOptimStep), kOptimStep);
      for (const auto& [name, t] : params) {
        const Tensorf* m = ckpt.find("optim.m/" + name);
        const Tensorf* v = ckpt.find("optim.v/" + name);
        if (!m || !v || m->shape() != t.shape() || v->shape() != t.shape()) {
          throw CheckpointMismatchError("optimizer state for " + name + " is missing or mis-shaped");
        }
        state->m.emplace_back(m->data().begin(), m->data().end());
        state->v.emplace_back(v->data().begin(), v->data().end());
      }
    }
  }
}

}  // namespace davit
