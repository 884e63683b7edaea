// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include "scnas/space.h"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "scnas/random.h"

namespace scnas {

namespace {

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw std::invalid_argument("empty list item in '" + s + "'");
    std::size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad integer '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string join(const std::vector<int>& v, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

int index_of(const std::vector<int>& choices, int value) {
  auto it = std::find(choices.begin(), choices.end(), value);
  return it == choices.end() ? -1 : static_cast<int>(it - choices.begin());
}

}  // namespace

SearchSpace default_search_space() {
  SearchSpace s;
  s.stages = {
      {{16, 24, 32}, {1}, {10}, 5},
      {{32, 48, 64}, {1}, {8}, 4},
      {{64, 96, 128}, {1, 2, 3}, {4}, 2},
      {{128, 192, 256}, {1, 2, 3}, {1}, 1},
      {{128, 192, 256}, {1, 2, 3}, {1, 2, 3}, 1},
      {{128, 192, 256}, {1, 2, 3}, {4, 5, 6}, 1},
      {{128, 192, 256}, {1, 2, 3}, {7, 8, 9}, 1},
      {{128, 192, 256}, {1, 2, 3}, {10, 11, 12}, 1},
  };
  return s;
}

void validate_space(const SearchSpace& space) {
  if (space.stages.empty()) throw std::invalid_argument("search space has no stages");
  if (space.input_channels < 1 || space.num_classes < 2) {
    throw std::invalid_argument("search space needs >= 1 input channel and >= 2 classes");
  }
  auto check = [](const std::vector<int>& v, const std::string& what, std::size_t stage) {
    const std::string where = "stage " + std::to_string(stage + 1) + " " + what;
    if (v.empty()) throw std::invalid_argument(where + " has no choices");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 1) throw std::invalid_argument(where + " has a non-positive choice");
      if (i && v[i] <= v[i - 1]) {
        throw std::invalid_argument(where + " choices must be strictly increasing");
      }
    }
  };
  for (std::size_t i = 0; i < space.stages.size(); ++i) {
    const auto& st = space.stages[i];
    check(st.channels, "channels", i);
    check(st.repeats, "repeats", i);
    check(st.kernels, "kernels", i);
    if (st.repeats.back() > 3) {
      throw std::invalid_argument("stage " + std::to_string(i + 1) +
                                  " repeats must be drawn from {1,2,3}");
    }
    if (st.stride < 1) {
      throw std::invalid_argument("stage " + std::to_string(i + 1) + " stride must be >= 1");
    }
  }
}

std::uint64_t space_cardinality(const SearchSpace& space) {
  std::uint64_t n = 1;
  for (const auto& st : space.stages) {
    n *= st.channels.size() * st.repeats.size() * st.kernels.size();
  }
  return n;
}

SubnetConfig min_config(const SearchSpace& space) {
  SubnetConfig c;
  for (const auto& st : space.stages) {
    c.stages.push_back({st.channels.front(), st.repeats.front(), st.kernels.front()});
  }
  return c;
}

SubnetConfig max_config(const SearchSpace& space) {
  SubnetConfig c;
  for (const auto& st : space.stages) {
    c.stages.push_back({st.channels.back(), st.repeats.back(), st.kernels.back()});
  }
  return c;
}

bool is_member(const SubnetConfig& config, const SearchSpace& space) {
  if (config.stages.size() != space.stages.size()) return false;
  for (std::size_t i = 0; i < space.stages.size(); ++i) {
    const auto& st = space.stages[i];
    const auto& ch = config.stages[i];
    if (index_of(st.channels, ch.channels) < 0 || index_of(st.repeats, ch.repeats) < 0 ||
        index_of(st.kernels, ch.kernel) < 0) {
      return false;
    }
  }
  return true;
}

std::vector<int> encode(const SubnetConfig& config, const SearchSpace& space) {
  if (config.stages.size() != space.stages.size()) {
    throw std::invalid_argument("config has " + std::to_string(config.stages.size()) +
                                " stages, space has " + std::to_string(space.stages.size()));
  }
  std::vector<int> genes;
  genes.reserve(3 * space.stages.size());
  for (std::size_t i = 0; i < space.stages.size(); ++i) {
    const auto& st = space.stages[i];
    const auto& ch = config.stages[i];
    const int a = index_of(st.channels, ch.channels);
    const int b = index_of(st.repeats, ch.repeats);
    const int c = index_of(st.kernels, ch.kernel);
    if (a < 0 || b < 0 || c < 0) {
      throw std::invalid_argument("stage " + std::to_string(i + 1) + " choice " +
                                  std::to_string(ch.channels) + ":" +
                                  std::to_string(ch.repeats) + ":" +
                                  std::to_string(ch.kernel) + " is not in the search space");
    }
    genes.insert(genes.end(), {a, b, c});
  }
  return genes;
}

SubnetConfig decode(const std::vector<int>& genes, const SearchSpace& space) {
  if (genes.size() != 3 * space.stages.size()) {
    throw std::invalid_argument("gene vector has length " + std::to_string(genes.size()) +
                                ", expected " + std::to_string(3 * space.stages.size()));
  }
  SubnetConfig c;
  for (std::size_t i = 0; i < space.stages.size(); ++i) {
    const auto& st = space.stages[i];
    const int a = genes[3 * i], b = genes[3 * i + 1], k = genes[3 * i + 2];
    if (a < 0 || b < 0 || k < 0 || a >= static_cast<int>(st.channels.size()) ||
        b >= static_cast<int>(st.repeats.size()) || k >= static_cast<int>(st.kernels.size())) {
      throw std::out_of_range("gene out of range at stage " + std::to_string(i + 1));
    }
    c.stages.push_back({st.channels[a], st.repeats[b], st.kernels[k]});
  }
  return c;
}

std::string encoding_key(const std::vector<int>& genes) { return join(genes, '.'); }

std::string to_string(const SubnetConfig& config) {
  std::string out;
  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const auto& s = config.stages[i];
    if (i) out += '/';
    out += std::to_string(s.channels) + ":" + std::to_string(s.repeats) + ":" +
           std::to_string(s.kernel);
  }
  return out;
}

SubnetConfig parse_config(const std::string& text) {
  SubnetConfig c;
  std::stringstream ss(text);
  std::string group;
  while (std::getline(ss, group, '/')) {
    int v[3];
    std::stringstream gs(group);
    std::string item;
    int n = 0;
    while (std::getline(gs, item, ':')) {
      if (n >= 3) break;
      std::size_t used = 0;
      v[n] = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument("bad config group '" + group + "'");
      ++n;
    }
    if (n != 3 || std::count(group.begin(), group.end(), ':') != 2) {
      throw std::invalid_argument("config group '" + group + "' is not channels:repeats:kernel");
    }
    c.stages.push_back({v[0], v[1], v[2]});
  }
  if (c.stages.empty()) throw std::invalid_argument("empty config text");
  return c;
}

std::string space_to_text(const SearchSpace& space) {
  std::ostringstream os;
  os << "input_channels " << space.input_channels << '\n';
  os << "num_classes " << space.num_classes << '\n';
  for (const auto& st : space.stages) {
    os << "stage channels=" << join(st.channels) << " repeats=" << join(st.repeats)
       << " kernels=" << join(st.kernels) << " stride=" << st.stride << '\n';
  }
  return os.str();
}

SearchSpace space_from_text(const std::string& text) {
  SearchSpace s;
  s.stages.clear();
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "input_channels") {
      ls >> s.input_channels;
    } else if (head == "num_classes") {
      ls >> s.num_classes;
    } else if (head == "stage") {
      StageSpec st;
      std::string kv;
      int seen = 0;
      while (ls >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("bad stage field '" + kv + "'");
        const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        if (key == "channels") st.channels = parse_int_list(val);
        else if (key == "repeats") st.repeats = parse_int_list(val);
        else if (key == "kernels") st.kernels = parse_int_list(val);
        else if (key == "stride") st.stride = std::stoi(val);
        else throw std::invalid_argument("unknown stage field '" + key + "'");
        ++seen;
      }
      if (seen != 4) throw std::invalid_argument("stage line needs channels, repeats, kernels, stride");
      s.stages.push_back(std::move(st));
    } else {
      throw std::invalid_argument("unknown search space line '" + line + "'");
    }
  }
  validate_space(s);
  return s;
}

std::vector<LayerSpec> layer_plan(const SubnetConfig& config, const SearchSpace& space) {
  if (!is_member(config, space)) {
    throw std::invalid_argument("config " + to_string(config) + " is not in the search space");
  }
  std::vector<LayerSpec> layers;
  int prev = space.input_channels;
  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const auto& ch = config.stages[i];
    for (int r = 0; r < ch.repeats; ++r) {
      layers.push_back({static_cast<int>(i), r, r == 0 ? prev : ch.channels, ch.channels,
                        ch.kernel, r == 0 ? space.stages[i].stride : 1});
    }
    prev = ch.channels;
  }
  return layers;
}

std::size_t min_input_length(const SubnetConfig& config, const SearchSpace& space) {
  const auto layers = layer_plan(config, space);
  std::size_t need = 1;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    need = (need - 1) * static_cast<std::size_t>(it->stride) +
           static_cast<std::size_t>(it->kernel);
  }
  return need;
}

SubnetConfig sample_uniform(const SearchSpace& space, std::mt19937_64& rng,
                            const ConfigFilter& accept) {
  for (int attempt = 0; attempt < kMaxSampleRetries; ++attempt) {
    SubnetConfig c;
    for (const auto& st : space.stages) {
      const int ch = st.channels[uniform_index(rng, st.channels.size())];
      const int rp = st.repeats[uniform_index(rng, st.repeats.size())];
      const int k = st.kernels[uniform_index(rng, st.kernels.size())];
      c.stages.push_back({ch, rp, k});
    }
    if (!accept || accept(c)) return c;
  }
  throw std::runtime_error("constraint infeasible: " + std::to_string(kMaxSampleRetries) +
                           " consecutive samples were rejected");
}

std::vector<SubnetConfig> enumerate_space(const SearchSpace& space, std::uint64_t cap) {
  const std::uint64_t n = space_cardinality(space);
  if (n > cap) {
    throw std::invalid_argument("search space has " + std::to_string(n) +
                                " configs, above the enumeration cap of " +
                                std::to_string(cap) + "; restrict the space");
  }
  std::vector<int> radix;
  for (const auto& st : space.stages) {
    radix.push_back(static_cast<int>(st.channels.size()));
    radix.push_back(static_cast<int>(st.repeats.size()));
    radix.push_back(static_cast<int>(st.kernels.size()));
  }
  std::vector<SubnetConfig> out;
  out.reserve(n);
  std::vector<int> genes(radix.size(), 0);
  for (std::uint64_t i = 0; i < n; ++i) {
    out.push_back(decode(genes, space));
    for (std::size_t d = genes.size(); d-- > 0;) {
      if (++genes[d] < radix[d]) break;
      genes[d] = 0;
    }
  }
  return out;
}

SearchSpace singleton_space(const SubnetConfig& config, const SearchSpace& space) {
  if (!is_member(config, space)) {
    throw std::invalid_argument("config " + to_string(config) + " is not in the search space");
  }
  SearchSpace s = space;
  for (std::size_t i = 0; i < s.stages.size(); ++i) {
    s.stages[i].channels = {config.stages[i].channels};
    s.stages[i].repeats = {config.stages[i].repeats};
    s.stages[i].kernels = {config.stages[i].kernel};
  }
  return s;
}

}  // namespace scnas
