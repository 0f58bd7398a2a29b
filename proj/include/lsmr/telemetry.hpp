#pragma once

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

namespace lsmr {

/// One telemetry channel file: a JSON header line, a CSV column line, then numeric rows.
class ChannelWriter {
 public:
  ChannelWriter(const std::string& path, const std::string& channel, double rate_hz,
                std::vector<std::string> columns, const nlohmann::json& provenance);
  ~ChannelWriter();
  ChannelWriter(const ChannelWriter&) = delete;
  ChannelWriter& operator=(const ChannelWriter&) = delete;

  /// Time is written with millisecond resolution, every other value with 9 significant digits.
  void row(double t, std::initializer_list<double> values);
  void close();
  std::size_t rows() const { return rows_; }

 private:
  std::FILE* file_ = nullptr;
  std::string buffer_;
  std::size_t columns_ = 0;
  std::size_t rows_ = 0;
};

struct Channel {
  nlohmann::json header;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<int> line_numbers;  // source line of each row

  /// Index of a named column; throws if absent.
  std::size_t col(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
};

struct TelemetryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Strict reader: malformed rows raise TelemetryError with file and line number.
Channel read_channel(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace lsmr
