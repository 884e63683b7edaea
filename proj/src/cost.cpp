// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include "scnas/cost.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "scnas/graph.h"

namespace scnas {

void check_signature(const OpSignature& sig) {
  if (sig.c_in < 1 || sig.c_out < 1 || sig.kernel < 1 || sig.stride < 1 || sig.l_in < 1) {
    throw std::invalid_argument("op signature fields must be positive");
  }
  if (sig.l_in < sig.kernel) {
    throw std::invalid_argument("op signature has l_in " + std::to_string(sig.l_in) +
                                " < kernel " + std::to_string(sig.kernel));
  }
}

std::uint64_t macs(const OpSignature& sig) {
  check_signature(sig);
  const auto l_out = conv_output_length(static_cast<std::size_t>(sig.l_in),
                                        static_cast<std::size_t>(sig.kernel),
                                        static_cast<std::size_t>(sig.stride));
  return static_cast<std::uint64_t>(sig.c_in) * static_cast<std::uint64_t>(sig.c_out) *
         static_cast<std::uint64_t>(sig.kernel) * l_out;
}

FallbackCoefficients fit_fallback(const std::map<OpSignature, OpCost>& rows) {
  FallbackCoefficients f;
  if (rows.empty()) return f;
  const double n = static_cast<double>(rows.size());
  double mx = 0, ml = 0, me = 0;
  for (const auto& [sig, cost] : rows) {
    mx += static_cast<double>(macs(sig));
    ml += cost.latency_ms;
    me += cost.energy_mj;
  }
  mx /= n;
  ml /= n;
  me /= n;
  double sxx = 0, sxl = 0, sxe = 0;
  for (const auto& [sig, cost] : rows) {
    const double dx = static_cast<double>(macs(sig)) - mx;
    sxx += dx * dx;
    sxl += dx * (cost.latency_ms - ml);
    sxe += dx * (cost.energy_mj - me);
  }
  if (sxx > 0) {
    f.a_lat = sxl / sxx;
    f.a_en = sxe / sxx;
  }
  f.b_lat = ml - f.a_lat * mx;
  f.b_en = me - f.a_en * mx;
  return f;
}

CostProfile CostProfile::analytic(FallbackCoefficients coefficients) {
  for (double v : {coefficients.a_lat, coefficients.b_lat, coefficients.a_en, coefficients.b_en}) {
    if (!std::isfinite(v)) throw std::invalid_argument("fallback coefficients must be finite");
  }
  CostProfile p;
  p.fallback_ = coefficients;
  return p;
}

CostProfile CostProfile::from_rows(std::map<OpSignature, OpCost> rows) {
  for (const auto& [sig, cost] : rows) {
    check_signature(sig);
    if (!(cost.latency_ms >= 0) || !(cost.energy_mj >= 0) || !std::isfinite(cost.latency_ms) ||
        !std::isfinite(cost.energy_mj)) {
      throw std::invalid_argument("cost profile rows must hold finite non-negative costs");
    }
  }
  CostProfile p;
  p.fallback_ = fit_fallback(rows);
  p.rows_ = std::move(rows);
  return p;
}

CostProfile CostProfile::parse(const std::string& text) {
  static const std::array<const char*, 7> kColumns = {
      "c_in", "c_out", "kernel", "stride", "l_in", "latency_ms", "energy_mj"};
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  std::array<int, 7> where{};
  where.fill(-1);
  bool have_header = false;
  std::size_t n_cols = 0;
  std::map<OpSignature, OpCost> rows;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        auto it = std::find_if(kColumns.begin(), kColumns.end(),
                               [&](const char* c) { return cells[i] == c; });
        if (it == kColumns.end()) {
          throw std::invalid_argument("cost profile: unknown column '" + cells[i] + "'");
        }
        auto& slot = where[static_cast<std::size_t>(it - kColumns.begin())];
        if (slot >= 0) throw std::invalid_argument("cost profile: duplicate column '" + cells[i] + "'");
        slot = static_cast<int>(i);
      }
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        if (where[c] < 0) {
          throw std::invalid_argument(std::string("cost profile: missing column '") +
                                      kColumns[c] + "'");
        }
      }
      n_cols = cells.size();
      have_header = true;
      continue;
    }
    if (cells.size() != n_cols) {
      throw std::invalid_argument("cost profile: line " + std::to_string(line_no) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(n_cols));
    }
    auto num = [&](std::size_t c) {
      const std::string& s = cells[static_cast<std::size_t>(where[c])];
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(s, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != s.size()) {
        throw std::invalid_argument("cost profile: line " + std::to_string(line_no) +
                                    ": bad number '" + s + "'");
      }
      return v;
    };
    OpSignature sig{static_cast<int>(num(0)), static_cast<int>(num(1)), static_cast<int>(num(2)),
                    static_cast<int>(num(3)), static_cast<int>(num(4))};
    OpCost cost{num(5), num(6)};
    if (!rows.emplace(sig, cost).second) {
      throw std::invalid_argument("cost profile: duplicate signature on line " +
                                  std::to_string(line_no));
    }
  }
  if (!have_header) throw std::invalid_argument("cost profile: header row required");
  return from_rows(std::move(rows));
}

CostProfile CostProfile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open cost profile '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string CostProfile::to_csv() const {
  std::ostringstream os;
  os << "c_in,c_out,kernel,stride,l_in,latency_ms,energy_mj\n";
  os << std::setprecision(9);
  for (const auto& [s, c] : rows_) {
    os << s.c_in << ',' << s.c_out << ',' << s.kernel << ',' << s.stride << ',' << s.l_in << ','
       << c.latency_ms << ',' << c.energy_mj << '\n';
  }
  return os.str();
}

void CostProfile::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write cost profile '" + path + "'");
  out << to_csv();
}

OpCost op_cost(const CostProfile& profile, const OpSignature& sig) {
  check_signature(sig);
  auto it = profile.rows().find(sig);
  if (it != profile.rows().end()) return it->second;
  const double m = static_cast<double>(macs(sig));
  const auto& f = profile.fallback();
  return {std::max(0.0, f.a_lat * m + f.b_lat), std::max(0.0, f.a_en * m + f.b_en)};
}

std::vector<OpSignature> model_ops(const SubnetConfig& config, const SearchSpace& space,
                                   std::size_t input_len) {
  const auto need = min_input_length(config, space);
  if (input_len < need) {
    throw std::invalid_argument("input length " + std::to_string(input_len) +
                                " is below the minimum " + std::to_string(need) +
                                " for config " + to_string(config));
  }
  std::vector<OpSignature> ops;
  std::size_t len = input_len;
  for (const auto& layer : layer_plan(config, space)) {
    ops.push_back({layer.c_in, layer.c_out, layer.kernel, layer.stride, static_cast<int>(len)});
    len = conv_output_length(len, static_cast<std::size_t>(layer.kernel),
                             static_cast<std::size_t>(layer.stride));
  }
  return ops;
}

CostEstimate compose_cost(const CostProfile& profile, const std::vector<OpSignature>& ops,
                          const DutyCycle& duty) {
  CostEstimate e;
  for (const auto& sig : ops) {
    const OpCost c = op_cost(profile, sig);
    e.latency_ms += c.latency_ms;
    e.energy_mj += c.energy_mj;
    e.per_op.push_back(c);
  }
  e.daily_energy_mwh = duty.mwh_per_mj() * e.energy_mj;
  return e;
}

CostEstimate model_cost(const CostProfile& profile, const SubnetConfig& config,
                        const SearchSpace& space, std::size_t input_len, const DutyCycle& duty) {
  return compose_cost(profile, model_ops(config, space, input_len), duty);
}

double bottleneck_fraction(const CostEstimate& estimate) {
  if (estimate.per_op.empty()) throw std::invalid_argument("bottleneck_fraction: model has no ops");
  double worst = 0;
  for (const auto& c : estimate.per_op) worst = std::max(worst, c.latency_ms);
  if (estimate.latency_ms <= 0) return 1.0;
  return worst / estimate.latency_ms;
}

double bottleneck_fraction(const CostProfile& profile, const SubnetConfig& config,
                           const SearchSpace& space, std::size_t input_len) {
  return bottleneck_fraction(model_cost(profile, config, space, input_len));
}

bool validate_config(const SubnetConfig& config, const SearchSpace& space,
                     const CostContext& cost) {
  if (!(cost.theta > 0 && cost.theta <= 1)) {
    throw std::invalid_argument("bottleneck theta must lie in (0, 1]");
  }
  if (cost.profile == nullptr) throw std::invalid_argument("validate_config: no cost profile");
  if (!is_member(config, space)) return false;
  if (cost.theta >= 1.0) return true;
  const auto est = model_cost(*cost.profile, config, space, cost.input_len, cost.duty);
  double worst = 0;
  for (const auto& c : est.per_op) worst = std::max(worst, c.latency_ms);
  return worst <= cost.theta * est.latency_ms;
}

// Effective-throughput device model. Convolutions whose GEMM inner dimension
// (c_in * kernel) or output width is small run at reduced utilization, every
// op pays activation/weight traffic plus a fixed dispatch overhead, and energy
// is busy power times latency plus a per-byte transfer term. The constants put
// the uniformly mid-sized config of the default space near 50 ms and
// 40 mW*h per 12 h for a 5 s, 16 kHz segment.
OpCost reference_device_cost(const OpSignature& sig) {
  constexpr double kPeakMacsPerSecond = 97e9;
  constexpr double kBytesPerSecond = 10e9;
  constexpr double kDispatchMs = 0.05;
  constexpr double kBusyWatts = 0.3;
  constexpr double kJoulesPerByte = 37e-12;
  constexpr double kMinUtilization = 0.02;

  const double m = static_cast<double>(macs(sig));
  const double l_out = static_cast<double>(conv_output_length(
      static_cast<std::size_t>(sig.l_in), static_cast<std::size_t>(sig.kernel),
      static_cast<std::size_t>(sig.stride)));
  const double util = std::max(kMinUtilization, std::min(1.0, sig.c_in * sig.kernel / 256.0) *
                                                    std::min(1.0, sig.c_out / 64.0));
  const double bytes = 4.0 * (static_cast<double>(sig.c_in) * sig.l_in + sig.c_out * l_out +
                              static_cast<double>(sig.c_in) * sig.c_out * sig.kernel);
  const double latency_ms = m / (kPeakMacsPerSecond * util) * 1e3 +
                            bytes / kBytesPerSecond * 1e3 + kDispatchMs;
  const double energy_mj = kBusyWatts * latency_ms + kJoulesPerByte * bytes * 1e3;
  return {latency_ms, energy_mj};
}

CostProfile make_reference_profile(const SearchSpace& space, std::size_t input_len) {
  validate_space(space);
  // Reachable (channels, length) states between stages.
  std::set<std::pair<int, int>> states{{space.input_channels, static_cast<int>(input_len)}};
  std::set<OpSignature> sigs;
  for (const auto& st : space.stages) {
    std::set<std::pair<int, int>> next;
    for (const auto& [c_prev, len0] : states) {
      for (int c : st.channels) {
        for (int k : st.kernels) {
          int len = len0;
          int c_in = c_prev;
          for (int r = 1; r <= st.max_repeats(); ++r) {
            const int stride = r == 1 ? st.stride : 1;
            if (len < k) break;
            sigs.insert({c_in, c, k, stride, len});
            len = static_cast<int>(conv_output_length(static_cast<std::size_t>(len),
                                                      static_cast<std::size_t>(k),
                                                      static_cast<std::size_t>(stride)));
            c_in = c;
            if (std::find(st.repeats.begin(), st.repeats.end(), r) != st.repeats.end()) {
              next.insert({c, len});
            }
          }
        }
      }
    }
    states = std::move(next);
  }
  std::map<OpSignature, OpCost> rows;
  for (const auto& s : sigs) rows.emplace(s, reference_device_cost(s));
  return CostProfile::from_rows(std::move(rows));
}

}  // namespace scnas
