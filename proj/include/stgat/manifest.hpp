#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "stgat/errors.hpp"
#include "stgat/hash.hpp"

namespace stgat {

// Record of one CLI run: enough to replay it and verify its artifacts.
// Written atomically (temp file + rename) when the run completes.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config;  // full effective configuration
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, fnv1a64
  double wall_time_s = 0.0;

  void add_output(const std::string& path) {
    outputs.emplace_back(path, file_checksum(path));
  }
};

inline void atomic_write_text(const std::string& path,
                              const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw io_error("cannot write " + tmp);
    out << content;
    if (!out) throw io_error("failed writing " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw io_error("cannot rename " + tmp + " to " + path);
  }
}

inline void write_manifest(const std::string& path, const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["inputs"] = m.inputs;
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& [p, checksum] : m.outputs) {
    outs.push_back({{"path", p}, {"fnv1a64", checksum}});
  }
  j["outputs"] = outs;
  j["wall_time_s"] = m.wall_time_s;
  atomic_write_text(path, j.dump(2) + "\n");
}

}  // namespace stgat
