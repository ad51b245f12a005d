#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "relmh/parser.hpp"

namespace relmh::testutil {

inline std::string models_dir() {
  const char* d = std::getenv("RELMH_MODELS_DIR");
  return d ? d : "models";
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Model load_model(const std::string& name) {
  ParseResult r = parse_model(read_file(models_dir() + "/" + name));
  if (!r.ok()) {
    std::string msg = "model " + name + " failed to parse:";
    for (const ParseError& e : r.errors) msg += "\n  " + e.to_string();
    throw std::runtime_error(msg);
  }
  return std::move(*r.model);
}

}  // namespace relmh::testutil
