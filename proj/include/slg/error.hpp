#pragma once

#include <stdexcept>
#include <string>

namespace slg {

// Every failure raised by the library derives from Error. The kind string is
// stable and is what the CLI and the service put on the wire.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class MapError : public Error {
 public:
  explicit MapError(const std::string& what) : Error("MapError", what) {}
};

class GridError : public Error {
 public:
  explicit GridError(const std::string& what) : Error("GridError", what) {}
};

class ParamError : public Error {
 public:
  explicit ParamError(const std::string& what) : Error("InvalidParams", what) {}
};

class DatasetError : public Error {
 public:
  explicit DatasetError(const std::string& what) : Error("DatasetError", what) {}
};

class ModelError : public Error {
 public:
  ModelError(std::string kind, const std::string& what)
      : Error(std::move(kind), what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("ConfigError", what) {}
};

}  // namespace slg
