#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "creagen/types.hpp"

namespace creagen {

// Raised for malformed dataset lines; carries the 1-based line number and,
// when a required field is absent, the field name.
class RecordParseError : public std::runtime_error {
 public:
  RecordParseError(std::size_t line, std::string field, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

// Line-delimited JSON records. Reading is streaming: one line is parsed at a
// time and handed to the callback.
void for_each_record(const std::string& path,
                     const std::function<void(DatasetRecord&&)>& fn);

std::vector<DatasetRecord> read_records(const std::string& path);
void write_records(const std::vector<DatasetRecord>& records,
                   const std::string& path);

// Single-record codecs, shared by dataset files and the datagen pipeline.
std::string record_to_json_line(const DatasetRecord& record);
DatasetRecord record_from_json_line(const std::string& line,
                                    std::size_t line_number = 1);

// Impression logs: the raw input of dataset construction.
std::vector<RawLog> read_raw_logs(const std::string& path);
void write_raw_logs(const std::vector<RawLog>& logs, const std::string& path);

}  // namespace creagen
