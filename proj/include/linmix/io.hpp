// Copyright 2026 The linmix Authors. All Rights Reserved.
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

// Config documents, model checkpoints and training histories.
//
// Checkpoint layout (all integers little-endian):
//   8 bytes   magic "LINMIXCK"
//   u32       format version (kCheckpointVersion)
//   u32       length L of the config document
//   L bytes   config as a flat JSON object (same keys as config files)
//   u32       tensor count T
//   T times:  u32 name length, name bytes, u32 rank, rank x u64 dims,
//             prod(dims) x f64 values
// Tensors appear in Model::visit order with dotted names such as
// "layers.0.f1.weight".

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "linmix/train.hpp"

namespace linmix {

using ojson = nlohmann::ordered_json;

inline constexpr char kCheckpointMagic[8] = {'L', 'I', 'N', 'M',
                                             'I', 'X', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline ojson config_to_json(const ModelConfig& cfg) {
  ojson j;
  j["arch"] = arch_name(cfg.arch);
  j["height"] = cfg.height;
  j["width"] = cfg.width;
  j["channels"] = cfg.channels;
  j["P"] = cfg.patch;
  j["C"] = cfg.embed_dim;
  j["depth"] = cfg.depth;
  j["D_S"] = cfg.token_hidden;
  j["D_C"] = cfg.channel_hidden;
  j["S_mem"] = cfg.memory;
  j["H"] = cfg.heads;
  j["classes"] = cfg.classes;
  j["seed"] = cfg.seed;
  return j;
}

/// Overlays the keys present in `j` onto `base`. Unknown keys are errors.
inline ModelConfig config_from_json(const ojson& j, ModelConfig base = {}) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  auto size_field = [](const ojson& v, const std::string& key) -> std::size_t {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError("config: field '" + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "arch") {
      if (!v.is_string()) throw ConfigError("config: field 'arch' must be a string");
      base.arch = parse_arch(v.get<std::string>());
    } else if (key == "height") {
      base.height = size_field(v, key);
    } else if (key == "width") {
      base.width = size_field(v, key);
    } else if (key == "channels") {
      base.channels = size_field(v, key);
    } else if (key == "P") {
      base.patch = size_field(v, key);
    } else if (key == "C") {
      base.embed_dim = size_field(v, key);
    } else if (key == "depth") {
      base.depth = size_field(v, key);
    } else if (key == "D_S") {
      base.token_hidden = size_field(v, key);
    } else if (key == "D_C") {
      base.channel_hidden = size_field(v, key);
    } else if (key == "S_mem") {
      base.memory = size_field(v, key);
    } else if (key == "H") {
      base.heads = size_field(v, key);
    } else if (key == "classes") {
      base.classes = size_field(v, key);
    } else if (key == "seed") {
      base.seed = static_cast<std::uint64_t>(size_field(v, key));
    } else {
      throw ConfigError("config: unknown field '" + key + "'");
    }
  }
  return base;
}

inline ModelConfig load_config_file(const std::string& path,
                                    ModelConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return config_from_json(j, base);
}

namespace detail {

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  const std::vector<unsigned char>& buffer() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  ByteReader(std::vector<unsigned char> buf, std::string path)
      : buf_(std::move(buf)), path_(std::move(path)) {}

  const unsigned char* take(std::size_t n) {
    if (pos_ + n > buf_.size()) {
      throw FormatError("checkpoint '" + path_ + "': truncated at offset " +
                        std::to_string(pos_));
    }
    const unsigned char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() {
    const unsigned char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }
  std::uint64_t u64() {
    const unsigned char* p = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == buf_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::vector<unsigned char> buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

inline void write_bytes(const std::string& path,
                        const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace detail

inline std::vector<unsigned char> checkpoint_bytes(const Model<>& m) {
  detail::ByteWriter w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  const std::string cfg = config_to_json(m.cfg).dump();
  w.u32(static_cast<std::uint32_t>(cfg.size()));
  w.bytes(cfg.data(), cfg.size());
  std::uint32_t count = 0;
  Model<>::visit(m, "", [&](const std::string&, const Tensor&) { ++count; });
  w.u32(count);
  Model<>::visit(m, "", [&](const std::string& name, const Tensor& t) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.dims()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  });
  return w.buffer();
}

inline void save_checkpoint(const Model<>& m, const std::string& path) {
  detail::write_bytes(path, checkpoint_bytes(m));
}

inline Model<> load_checkpoint(const std::string& path) {
  detail::ByteReader r(detail::read_file(path), path);
  if (std::memcmp(r.take(8), kCheckpointMagic, 8) != 0) {
    throw FormatError("checkpoint '" + path + "': bad magic at offset 0");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint '" + path + "': unsupported version " +
                      std::to_string(version) + " at offset 8");
  }
  const std::uint32_t cfg_len = r.u32();
  const std::size_t cfg_offset = r.offset();
  const unsigned char* cfg_bytes = r.take(cfg_len);
  ModelConfig cfg;
  try {
    cfg = config_from_json(
        ojson::parse(std::string(reinterpret_cast<const char*>(cfg_bytes), cfg_len)));
  } catch (const nlohmann::json::parse_error&) {
    throw FormatError("checkpoint '" + path + "': malformed config at offset " +
                      std::to_string(cfg_offset));
  }
  Model<> m = build_model(cfg);
  std::vector<std::pair<std::string, Tensor*>> slots;
  Model<>::visit(m, "", [&](const std::string& name, Tensor& t) {
    slots.emplace_back(name, &t);
  });
  const std::uint32_t count = r.u32();
  if (count != slots.size()) {
    throw FormatError("checkpoint '" + path + "': holds " + std::to_string(count) +
                      " tensors, config implies " + std::to_string(slots.size()));
  }
  for (auto& [expected, slot] : slots) {
    const std::size_t at = r.offset();
    const std::uint32_t name_len = r.u32();
    const unsigned char* name_bytes = r.take(name_len);
    const std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
    if (name != expected) {
      throw FormatError("checkpoint '" + path + "': tensor '" + name +
                        "' at offset " + std::to_string(at) + ", expected '" +
                        expected + "'");
    }
    const std::uint32_t rank = r.u32();
    Dims dims;
    for (std::uint32_t i = 0; i < rank; ++i) dims.push_back(r.u64());
    if (dims != slot->dims()) {
      throw FormatError("checkpoint '" + path + "': tensor '" + name + "' dims " +
                        dims_string(dims) + ", expected " +
                        dims_string(slot->dims()));
    }
    for (auto& v : slot->data()) v = r.f64();
  }
  if (!r.done()) {
    throw FormatError("checkpoint '" + path + "': trailing bytes at offset " +
                      std::to_string(r.offset()));
  }
  return m;
}

/// One JSON object per line: {"epoch": int, "loss": real, "acc": real}.
inline std::string history_ndjson(const std::vector<EpochRecord>& history) {
  std::string out;
  for (const auto& rec : history) {
    ojson j;
    j["epoch"] = rec.epoch;
    j["loss"] = rec.loss;
    j["acc"] = rec.acc;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline void write_history(const std::vector<EpochRecord>& history,
                          const std::string& path) {
  const std::string text = history_ndjson(history);
  detail::write_bytes(path, {text.begin(), text.end()});
}

inline std::vector<EpochRecord> read_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open history '" + path + "'");
  std::vector<EpochRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const ojson j = ojson::parse(line);
    out.push_back({j.at("epoch").get<std::size_t>(), j.at("loss").get<double>(),
                   j.at("acc").get<double>()});
  }
  return out;
}

}  // namespace linmix
