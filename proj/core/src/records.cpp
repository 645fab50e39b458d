#include "creagen/records.hpp"

#include <fstream>

#include <json.hpp>

namespace creagen {

using nlohmann::json;

namespace {

const json& require_field(const json& j, const char* field, std::size_t line) {
  auto it = j.find(field);
  if (it == j.end())
    throw RecordParseError(line, field,
                           std::string("missing required field \"") + field +
                               "\"");
  return *it;
}

json item_to_json(const Item& item) {
  json attrs = json::array();
  for (const auto& [k, v] : item.attributes) attrs.push_back({k, v});
  return {{"item_id", item.item_id},
          {"title", item.title},
          {"attributes", attrs}};
}

Item item_from_json(const json& j, std::size_t line) {
  Item item;
  item.item_id = require_field(j, "item_id", line).get<std::string>();
  item.title = require_field(j, "title", line).get<std::string>();
  if (auto it = j.find("attributes"); it != j.end()) {
    for (const auto& pair : *it) {
      if (!pair.is_array() || pair.size() != 2)
        throw RecordParseError(line, "attributes",
                               "attribute entries must be [key, value] pairs");
      item.attributes.emplace_back(pair[0].get<std::string>(),
                                   pair[1].get<std::string>());
    }
  }
  return item;
}

json ad_to_json(const Ad& ad) {
  json j = {{"ad_id", ad.ad_id},
            {"original_title", ad.original_title},
            {"selling_points", ad.selling_points}};
  if (ad.query) j["query"] = *ad.query;
  return j;
}

Ad ad_from_json(const json& j, std::size_t line) {
  Ad ad;
  ad.ad_id = require_field(j, "ad_id", line).get<std::string>();
  ad.original_title =
      require_field(j, "original_title", line).get<std::string>();
  if (auto it = j.find("selling_points"); it != j.end())
    ad.selling_points = it->get<std::vector<std::string>>();
  if (auto it = j.find("query"); it != j.end() && !it->is_null())
    ad.query = it->get<std::string>();
  return ad;
}

}  // namespace

std::string record_to_json_line(const DatasetRecord& record) {
  json history = json::array();
  for (const auto& item : record.history) history.push_back(item_to_json(item));
  json j = {{"user_id", record.user_id},
            {"history", history},
            {"ad", ad_to_json(record.ad)},
            {"interest_text", record.interest_text},
            {"response", record.response}};
  if (!record.click_labels.empty()) {
    json labels = json::array();
    for (const auto& cl : record.click_labels)
      labels.push_back({cl.item_id, cl.label});
    j["click_labels"] = labels;
  }
  return j.dump();
}

DatasetRecord record_from_json_line(const std::string& line,
                                    std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw RecordParseError(line_number, "", e.what());
  }
  if (!j.is_object())
    throw RecordParseError(line_number, "", "record line is not a JSON object");

  DatasetRecord r;
  r.user_id = require_field(j, "user_id", line_number).get<std::string>();
  for (const auto& item : require_field(j, "history", line_number))
    r.history.push_back(item_from_json(item, line_number));
  r.ad = ad_from_json(require_field(j, "ad", line_number), line_number);
  r.interest_text =
      require_field(j, "interest_text", line_number).get<std::string>();
  r.response = require_field(j, "response", line_number).get<std::string>();
  if (auto it = j.find("click_labels"); it != j.end()) {
    for (const auto& entry : *it) {
      if (!entry.is_array() || entry.size() != 2)
        throw RecordParseError(line_number, "click_labels",
                               "click_labels entries must be [item_id, label]");
      r.click_labels.push_back(
          {entry[0].get<std::string>(), entry[1].get<int>()});
    }
  }
  return r;
}

void for_each_record(const std::string& path,
                     const std::function<void(DatasetRecord&&)>& fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open records file: " + path);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(record_from_json_line(line, line_number));
  }
}

std::vector<DatasetRecord> read_records(const std::string& path) {
  std::vector<DatasetRecord> records;
  for_each_record(path,
                  [&](DatasetRecord&& r) { records.push_back(std::move(r)); });
  return records;
}

void write_records(const std::vector<DatasetRecord>& records,
                   const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write records file: " + path);
  for (const auto& r : records) out << record_to_json_line(r) << '\n';
}

std::vector<RawLog> read_raw_logs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open raw log file: " + path);
  std::vector<RawLog> logs;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw RecordParseError(line_number, "", e.what());
    }
    RawLog log;
    log.user_id = require_field(j, "user_id", line_number).get<std::string>();
    for (const auto& item : require_field(j, "history", line_number))
      log.history.push_back(item_from_json(item, line_number));
    log.ad = ad_from_json(require_field(j, "ad", line_number), line_number);
    logs.push_back(std::move(log));
  }
  return logs;
}

void write_raw_logs(const std::vector<RawLog>& logs, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write raw log file: " + path);
  for (const auto& log : logs) {
    json history = json::array();
    for (const auto& item : log.history) history.push_back(item_to_json(item));
    json j = {{"user_id", log.user_id},
              {"history", history},
              {"ad", ad_to_json(log.ad)}};
    out << j.dump() << '\n';
  }
}

}  // namespace creagen
