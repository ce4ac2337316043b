#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "m2s/config.hpp"
#include "m2s/error.hpp"

namespace m2s {

// Raw SemanticKITTI class ids mapped to the compact training id space.
// Config file keys: `map.<raw> = <train>`, `name.<raw> = <text>`,
// `train_name.<train> = <text>`.
struct ClassMap {
  std::map<std::uint16_t, int> raw_to_train;
  std::map<std::uint16_t, std::string> raw_names;
  std::vector<std::string> train_names;  // index = train id; 0 is unlabeled

  int num_train_classes() const { return static_cast<int>(train_names.size()); }

  // Unknown raw ids map to 0.
  int to_train(std::uint16_t raw) const {
    auto it = raw_to_train.find(raw);
    return it == raw_to_train.end() ? 0 : it->second;
  }

  std::set<std::uint16_t> raw_ids_for(const std::set<int>& train_ids) const {
    std::set<std::uint16_t> out;
    for (const auto& [raw, train] : raw_to_train)
      if (train_ids.count(train)) out.insert(raw);
    return out;
  }

  static ClassMap semantic_kitti() {
    ClassMap m;
    const std::vector<std::tuple<int, int, const char*>> rows = {
        {0, 0, "unlabeled"},
        {1, 0, "outlier"},
        {10, 1, "car"},
        {11, 2, "bicycle"},
        {13, 5, "bus"},
        {15, 3, "motorcycle"},
        {16, 5, "on-rails"},
        {18, 4, "truck"},
        {20, 5, "other-vehicle"},
        {30, 6, "person"},
        {31, 7, "bicyclist"},
        {32, 8, "motorcyclist"},
        {40, 9, "road"},
        {44, 10, "parking"},
        {48, 11, "sidewalk"},
        {49, 12, "other-ground"},
        {50, 13, "building"},
        {51, 14, "fence"},
        {52, 0, "other-structure"},
        {60, 9, "lane-marking"},
        {70, 15, "vegetation"},
        {71, 16, "trunk"},
        {72, 17, "terrain"},
        {80, 18, "pole"},
        {81, 19, "traffic-sign"},
        {99, 0, "other-object"},
        {252, 1, "moving-car"},
        {253, 7, "moving-bicyclist"},
        {254, 6, "moving-person"},
        {255, 8, "moving-motorcyclist"},
        {256, 5, "moving-on-rails"},
        {257, 5, "moving-bus"},
        {258, 4, "moving-truck"},
        {259, 5, "moving-other-vehicle"},
    };
    for (const auto& [raw, train, name] : rows) {
      m.raw_to_train[static_cast<std::uint16_t>(raw)] = train;
      m.raw_names[static_cast<std::uint16_t>(raw)] = name;
    }
    m.train_names = {"unlabeled", "car",      "bicycle",      "motorcycle", "truck",  "other-vehicle", "person",
                     "bicyclist", "motorcyclist", "road",     "parking",    "sidewalk", "other-ground", "building",
                     "fence",     "vegetation",   "trunk",    "terrain",    "pole",     "traffic-sign"};
    return m;
  }

  static ClassMap from_config(const KeyValueConfig& cfg) {
    ClassMap m;
    int max_train = -1;
    std::map<int, std::string> names;
    for (const auto& [key, value] : cfg.entries()) {
      auto dot = key.find('.');
      if (dot == std::string::npos) throw Error(ErrorKind::MalformedConfig, "class map key without family: " + key);
      const std::string family = key.substr(0, dot);
      int id = 0;
      try {
        id = std::stoi(key.substr(dot + 1));
      } catch (const std::exception&) {
        throw Error(ErrorKind::MalformedConfig, "class map key with bad id: " + key);
      }
      if (id < 0 || id > 0xFFFF) throw Error(ErrorKind::MalformedConfig, "class id out of range: " + key);
      if (family == "map") {
        const int train = static_cast<int>(*cfg.get_int(key));
        if (train < 0) throw Error(ErrorKind::MalformedConfig, "negative train id: " + key);
        m.raw_to_train[static_cast<std::uint16_t>(id)] = train;
        max_train = std::max(max_train, train);
      } else if (family == "name") {
        m.raw_names[static_cast<std::uint16_t>(id)] = value;
      } else if (family == "train_name") {
        names[id] = value;
        max_train = std::max(max_train, id);
      } else {
        throw Error(ErrorKind::MalformedConfig, "unknown class map family: " + family);
      }
    }
    if (max_train < 0) throw Error(ErrorKind::MalformedConfig, "class map defines no classes");
    m.train_names.resize(static_cast<std::size_t>(max_train) + 1);
    for (int t = 0; t <= max_train; ++t) m.train_names[t] = names.count(t) ? names[t] : "class-" + std::to_string(t);
    return m;
  }

  std::string to_config_text() const {
    std::string out;
    for (const auto& [raw, train] : raw_to_train) out += "map." + std::to_string(raw) + " = " + std::to_string(train) + "\n";
    for (const auto& [raw, name] : raw_names) out += "name." + std::to_string(raw) + " = " + name + "\n";
    for (std::size_t t = 0; t < train_names.size(); ++t)
      out += "train_name." + std::to_string(t) + " = " + train_names[t] + "\n";
    return out;
  }
};

// Train ids of bicycle, motorcycle, truck, other-vehicle, person, bicyclist,
// motorcyclist and traffic-sign.
inline std::set<int> default_hard_train_classes() { return {2, 3, 4, 5, 6, 7, 8, 19}; }

inline std::set<std::uint16_t> default_hard_raw_classes() {
  return ClassMap::semantic_kitti().raw_ids_for(default_hard_train_classes());
}

}  // namespace m2s
