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

// Closed-form parameter and forward-FLOP counts per architecture. The FLOP
// formulas use the same per-element constants as the instrumented kernels
// (flops.hpp), so a counted forward pass must agree exactly.

#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "linmix/flops.hpp"
#include "linmix/model.hpp"

namespace linmix {

struct CostPart {
  std::string name;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;

  friend bool operator==(const CostPart&, const CostPart&) = default;
};

struct CostReport {
  Arch arch = Arch::mixer;
  std::uint64_t S = 0, C = 0, P = 0, depth = 0, D_S = 0, D_C = 0, S_mem = 0,
                H = 0;
  std::uint64_t params = 0;
  std::uint64_t flops_forward = 0;
  // embed, token_mixing, channel_mixing, pool, head; token_mixing is the
  // attention half for ext_attn. Summed over all layers.
  std::vector<CostPart> breakdown;

  friend bool operator==(const CostReport&, const CostReport&) = default;
};

namespace cost {

using u64 = std::uint64_t;
namespace fc = flop_cost;

inline u64 linear_params(u64 in, u64 out) { return out * in + out; }
inline u64 linear_flops(u64 rows, u64 in, u64 out) { return fc::kMac * rows * in * out; }

/// Parameters of one head's key and value memories.
inline u64 memory_params_per_head(u64 memory, u64 d) { return 2 * memory * d; }

/// Cost of the N x S_mem external-attention map: F Mk^T plus double norm.
inline u64 external_attention_map_flops(u64 n, u64 d, u64 memory) {
  return fc::kMac * n * d * memory + fc::kDoubleNorm * n * memory;
}

/// Cost of the N x N simplified self-attention map: F F^T plus softmax.
inline u64 self_attention_map_flops(u64 n, u64 d) {
  return fc::kMac * n * n * d + fc::kSoftmax * n * n;
}

/// Pre-normalized two-layer GELU MLP over `width` features applied to
/// `rows` vectors, plus its residual add.
inline u64 mlp_flops(u64 rows, u64 width, u64 hidden, u64 norm_per_element) {
  return norm_per_element * rows * width + linear_flops(rows, width, hidden) +
         fc::kGelu * rows * hidden + linear_flops(rows, hidden, width) +
         fc::kElementwise * rows * width;
}

struct LayerCost {
  u64 token_params = 0, token_flops = 0;
  u64 channel_params = 0, channel_flops = 0;
};

inline LayerCost layer_cost(const ModelConfig& cfg) {
  const u64 s = cfg.tokens(), c = cfg.embed_dim, ds = cfg.token_hidden,
            dc = cfg.channel_hidden;
  LayerCost l;
  const u64 channel_mlp_params = linear_params(c, dc) + linear_params(dc, c);
  switch (cfg.arch) {
    case Arch::mixer:
      l.token_params = 2 * c + linear_params(s, ds) + linear_params(ds, s);
      l.token_flops = fc::kLayerNorm * s * c + linear_flops(c, s, ds) +
                      fc::kGelu * c * ds + linear_flops(c, ds, s) +
                      fc::kElementwise * s * c;
      l.channel_params = 2 * c + channel_mlp_params;
      l.channel_flops = mlp_flops(s, c, dc, fc::kLayerNorm);
      break;
    case Arch::ff_only:
      l.token_params = 2 * s + linear_params(s, ds) + linear_params(ds, s);
      l.token_flops = mlp_flops(c, s, ds, fc::kLayerNorm);
      l.channel_params = 2 * c + channel_mlp_params;
      l.channel_flops = mlp_flops(s, c, dc, fc::kLayerNorm);
      break;
    case Arch::resmlp:
      l.token_params = 4 * c + linear_params(s, s);
      l.token_flops = 2 * fc::kAffine * s * c + linear_flops(c, s, s) +
                      fc::kElementwise * s * c;
      l.channel_params = 4 * c + channel_mlp_params;
      l.channel_flops = 2 * fc::kAffine * s * c + linear_flops(s, c, dc) +
                        fc::kGelu * s * dc + linear_flops(s, dc, c) +
                        fc::kElementwise * s * c;
      break;
    case Arch::ext_attn: {
      const u64 h = cfg.heads, d = c / h, m = cfg.memory;
      l.token_params = h * memory_params_per_head(m, d) + linear_params(c, c);
      l.token_flops = h * (external_attention_map_flops(s, d, m) +
                           fc::kMac * s * m * d) +
                      linear_flops(s, c, c) + fc::kElementwise * s * c;
      l.channel_params = 2 * c + channel_mlp_params;
      l.channel_flops = mlp_flops(s, c, dc, fc::kLayerNorm);
      break;
    }
  }
  return l;
}

}  // namespace cost

inline CostReport cost_report(const ModelConfig& cfg) {
  cfg.validate();
  using cost::u64;
  const u64 s = cfg.tokens(), c = cfg.embed_dim, k = cfg.classes;
  const cost::LayerCost layer = cost::layer_cost(cfg);
  CostReport r;
  r.arch = cfg.arch;
  r.S = s;
  r.C = c;
  r.P = cfg.patch;
  r.depth = cfg.depth;
  r.D_S = cfg.token_hidden;
  r.D_C = cfg.channel_hidden;
  r.S_mem = cfg.memory;
  r.H = cfg.heads;
  r.breakdown = {
      {"embed", cost::linear_params(cfg.patch_dim(), c),
       cost::linear_flops(s, cfg.patch_dim(), c)},
      {"token_mixing", cfg.depth * layer.token_params,
       cfg.depth * layer.token_flops},
      {"channel_mixing", cfg.depth * layer.channel_params,
       cfg.depth * layer.channel_flops},
      {"pool", 0, flop_cost::kReduceSum * s * c},
      {"head", cost::linear_params(c, k), cost::linear_flops(1, c, k)},
  };
  for (const auto& part : r.breakdown) {
    r.params += part.params;
    r.flops_forward += part.flops;
  }
  return r;
}

inline std::uint64_t count_params(const ModelConfig& cfg) {
  return cost_report(cfg).params;
}

inline std::uint64_t count_flops(const ModelConfig& cfg) {
  return cost_report(cfg).flops_forward;
}

// ---------------------------------------------------------------------------
// Report emission

enum class ReportFormat { csv, json };

inline ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw ConfigError("unknown report format '" + name + "' (expected csv or json)");
}

inline constexpr const char* kCsvHeader =
    "arch,S,C,P,depth,D_S,D_C,S_mem,H,params,flops_forward";

inline std::string reports_csv(const std::vector<CostReport>& reports) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& r : reports) {
    os << arch_name(r.arch) << ',' << r.S << ',' << r.C << ',' << r.P << ','
       << r.depth << ',' << r.D_S << ',' << r.D_C << ',' << r.S_mem << ','
       << r.H << ',' << r.params << ',' << r.flops_forward << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json flop_constants_json() {
  namespace fc = flop_cost;
  nlohmann::ordered_json j;
  j["mac"] = fc::kMac;
  j["elementwise"] = fc::kElementwise;
  j["gelu"] = fc::kGelu;
  j["softmax"] = fc::kSoftmax;
  j["layer_norm"] = fc::kLayerNorm;
  j["double_norm"] = fc::kDoubleNorm;
  j["affine"] = fc::kAffine;
  j["reduce_sum"] = fc::kReduceSum;
  return j;
}

inline std::string reports_json(const std::vector<CostReport>& reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["arch"] = arch_name(r.arch);
    j["S"] = r.S;
    j["C"] = r.C;
    j["P"] = r.P;
    j["depth"] = r.depth;
    j["D_S"] = r.D_S;
    j["D_C"] = r.D_C;
    j["S_mem"] = r.S_mem;
    j["H"] = r.H;
    j["params"] = r.params;
    j["flops_forward"] = r.flops_forward;
    nlohmann::ordered_json parts = nlohmann::ordered_json::array();
    for (const auto& p : r.breakdown) {
      nlohmann::ordered_json pj;
      pj["name"] = p.name;
      pj["params"] = p.params;
      pj["flops"] = p.flops;
      parts.push_back(pj);
    }
    j["breakdown"]["parts"] = parts;
    j["breakdown"]["flop_constants"] = flop_constants_json();
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

inline std::vector<CostReport> reports_from_json(const std::string& text) {
  const auto arr = nlohmann::json::parse(text);
  std::vector<CostReport> out;
  for (const auto& j : arr) {
    CostReport r;
    r.arch = parse_arch(j.at("arch").get<std::string>());
    r.S = j.at("S").get<std::uint64_t>();
    r.C = j.at("C").get<std::uint64_t>();
    r.P = j.at("P").get<std::uint64_t>();
    r.depth = j.at("depth").get<std::uint64_t>();
    r.D_S = j.at("D_S").get<std::uint64_t>();
    r.D_C = j.at("D_C").get<std::uint64_t>();
    r.S_mem = j.at("S_mem").get<std::uint64_t>();
    r.H = j.at("H").get<std::uint64_t>();
    r.params = j.at("params").get<std::uint64_t>();
    r.flops_forward = j.at("flops_forward").get<std::uint64_t>();
    for (const auto& p : j.at("breakdown").at("parts")) {
      r.breakdown.push_back({p.at("name").get<std::string>(),
                             p.at("params").get<std::uint64_t>(),
                             p.at("flops").get<std::uint64_t>()});
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string render_reports(const std::vector<CostReport>& reports,
                                  ReportFormat format) {
  if (reports.empty()) throw ContractError("emit_report: no reports");
  return format == ReportFormat::csv ? reports_csv(reports) : reports_json(reports);
}

inline void emit_report(const std::vector<CostReport>& reports,
                        ReportFormat format, const std::string& path) {
  const std::string text = render_reports(reports, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for report '" + path + "'");
}

}  // namespace linmix
