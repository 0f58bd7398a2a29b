#include "lsmr/telemetry.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lsmr {

ChannelWriter::ChannelWriter(const std::string& path, const std::string& channel, double rate_hz,
                             std::vector<std::string> columns, const nlohmann::json& provenance)
    : columns_(columns.size()) {
  file_ = std::fopen(path.c_str(), "wb");
  if (!file_) throw std::runtime_error("cannot open telemetry file " + path);
  nlohmann::json header{{"channel", channel}, {"rate_hz", rate_hz}, {"columns", columns}, {"run", provenance}};
  buffer_ = header.dump() + '\n';
  buffer_ += "t";
  for (const std::string& c : columns) buffer_ += "," + c;
  buffer_ += '\n';
}

ChannelWriter::~ChannelWriter() {
  try {
    close();
  } catch (...) {
  }
}

void ChannelWriter::row(double t, std::initializer_list<double> values) {
  if (values.size() != columns_) throw std::logic_error("telemetry row has the wrong number of values");
  fmt::format_to(std::back_inserter(buffer_), "{:.3f}", t);
  for (double v : values) {
    if (v == 0.0) v = 0.0;  // no negative zeros in the logs
    fmt::format_to(std::back_inserter(buffer_), ",{:.9g}", v);
  }
  buffer_ += '\n';
  ++rows_;
  if (buffer_.size() > (1u << 20)) {
    std::fwrite(buffer_.data(), 1, buffer_.size(), file_);
    buffer_.clear();
  }
}

void ChannelWriter::close() {
  if (!file_) return;
  std::fwrite(buffer_.data(), 1, buffer_.size(), file_);
  buffer_.clear();
  const bool bad = std::fclose(file_) != 0;
  file_ = nullptr;
  if (bad) throw std::runtime_error("failed to write telemetry file");
}

std::size_t Channel::col(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw TelemetryError("telemetry: missing column " + name);
}

std::vector<double> Channel::column(const std::string& name) const {
  const std::size_t c = col(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

Channel read_channel(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw TelemetryError("cannot read telemetry file " + path);
  Channel ch;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) { throw TelemetryError(fmt::format("{}:{}: {}", path, line_no, what)); };

  if (!std::getline(is, line)) fail("empty file");
  ++line_no;
  try {
    ch.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    fail("header line is not valid JSON");
  }
  if (!std::getline(is, line)) fail("missing column line");
  ++line_no;
  {
    std::stringstream ss(line);
    std::string name;
    while (std::getline(ss, name, ',')) ch.columns.push_back(name);
  }
  if (ch.columns.empty() || ch.columns.front() != "t") fail("first column must be t");

  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) fail("empty row");
    std::vector<double> row;
    row.reserve(ch.columns.size());
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      double v = 0.0;
      const auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) fail(fmt::format("bad number in column {}", row.size() + 1));
      row.push_back(v);
      if (next == end) break;
      if (*next != ',') fail(fmt::format("unexpected character after column {}", row.size()));
      p = next + 1;
    }
    if (row.size() != ch.columns.size()) {
      fail(fmt::format("expected {} columns, found {}", ch.columns.size(), row.size()));
    }
    ch.rows.push_back(std::move(row));
    ch.line_numbers.push_back(line_no);
  }
  return ch;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path);
}

}  // namespace lsmr
