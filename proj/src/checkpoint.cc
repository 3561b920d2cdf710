#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ocoref/autodiff.h"

namespace ocoref {

using nlohmann::json;

std::string serialize_checkpoint(const ParameterSet& params,
                                 const std::string& meta_json) {
  json blocks = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    blocks.push_back({{"name", p.name},
                      {"rows", p.value.rows()},
                      {"cols", p.value.cols()},
                      {"values", p.value.values()}});
  }
  json root = {{"format", "ocoref-params"},
               {"version", kCheckpointVersion},
               {"meta", json::parse(meta_json)},
               {"params", std::move(blocks)}};
  return root.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  try {
    const json root = json::parse(text);
    if (root.at("format") != "ocoref-params") {
      throw CheckpointError("not an ocoref parameter file");
    }
    if (root.at("version") != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " +
                            root.at("version").dump());
    }
    Checkpoint ckpt;
    ckpt.meta_json = root.value("meta", json::object()).dump();
    for (const json& b : root.at("params")) {
      const auto rows = b.at("rows").get<std::size_t>();
      const auto cols = b.at("cols").get<std::size_t>();
      auto values = b.at("values").get<std::vector<double>>();
      if (values.size() != rows * cols) {
        throw CheckpointError("block '" + b.at("name").get<std::string>() +
                              "' has the wrong number of values");
      }
      ckpt.blocks.emplace_back(b.at("name").get<std::string>(),
                               Matrix(rows, cols, std::move(values)));
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const std::string& meta_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write '" + path + "'");
  out << serialize_checkpoint(params, meta_json);
  if (!out) throw CheckpointError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_checkpoint(text.str());
}

void restore_parameters(ParameterSet& params, const Checkpoint& ckpt) {
  for (const auto& [name, value] : ckpt.blocks) {
    if (!params.contains(name)) {
      throw CheckpointError("checkpoint block '" + name +
                            "' has no matching parameter");
    }
    Parameter& p = params.at(name);
    if (!p.value.same_shape(value)) {
      throw CheckpointError("checkpoint block '" + name + "' is " +
                            value.shape() + ", parameter is " +
                            p.value.shape());
    }
    p.value = value;
  }
}

}  // namespace ocoref
