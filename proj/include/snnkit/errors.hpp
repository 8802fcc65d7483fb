#pragma once

#include <stdexcept>
#include <string>

namespace snnkit {

// Exit-code mapping for the CLI: 2 config, 3 data, 4 numeric.
class SnnError : public std::runtime_error {
 public:
  SnnError(int exit_code, const std::string& msg)
      : std::runtime_error(msg), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

class ConfigError : public SnnError {
 public:
  explicit ConfigError(const std::string& msg) : SnnError(2, msg) {}
};

class ShapeError : public ConfigError {
 public:
  explicit ShapeError(const std::string& msg) : ConfigError(msg) {}
};

class ParamError : public ConfigError {
 public:
  explicit ParamError(const std::string& msg) : ConfigError(msg) {}
};

class DataError : public SnnError {
 public:
  explicit DataError(const std::string& msg) : SnnError(3, msg) {}
};

class FormatError : public DataError {
 public:
  explicit FormatError(const std::string& msg) : DataError(msg) {}
};

class IoError : public DataError {
 public:
  explicit IoError(const std::string& msg) : DataError(msg) {}
};

class EncodingError : public DataError {
 public:
  explicit EncodingError(const std::string& msg) : DataError(msg) {}
};

class LabelError : public DataError {
 public:
  explicit LabelError(const std::string& msg) : DataError(msg) {}
};

class NumericError : public SnnError {
 public:
  explicit NumericError(const std::string& msg) : SnnError(4, msg) {}
};

class StateError : public SnnError {
 public:
  explicit StateError(const std::string& msg) : SnnError(4, msg) {}
};

}  // namespace snnkit
