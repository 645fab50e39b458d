#include "creagen/library.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "creagen/inference.hpp"

namespace creagen {

CreativeLibrary::CreativeLibrary(std::string path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  std::ifstream in(path_);
  if (!in) throw std::runtime_error("cannot open library log: " + path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CreativeCandidate c = candidate_from_json_line(line);
    entries_[dedup_key(c)] = std::move(c);
  }
}

std::string CreativeLibrary::dedup_key(const CreativeCandidate& c) const {
  return c.ad_id + "\x1f" + std::to_string(c.cluster_id) + "\x1f" +
         to_string(c.mode) + "\x1f" + c.title;
}

int CreativeLibrary::put(const std::vector<CreativeCandidate>& candidates) {
  std::vector<const CreativeCandidate*> fresh;
  for (const auto& c : candidates) {
    if (!c.verdict.pass) continue;
    const auto [it, inserted] = entries_.emplace(dedup_key(c), c);
    (void)it;
    if (inserted) fresh.push_back(&c);
  }
  if (!fresh.empty() && !path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to library log: " + path_);
    for (const auto* c : fresh) out << candidate_to_json_line(*c) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("short write on library log: " + path_);
  }
  return static_cast<int>(fresh.size());
}

std::vector<CreativeCandidate> CreativeLibrary::query(
    const std::string& ad_id, GenerationMode mode) const {
  std::vector<CreativeCandidate> out;
  for (const auto& [key, c] : entries_)
    if (c.ad_id == ad_id && c.mode == mode) out.push_back(c);
  std::sort(out.begin(), out.end(),
            [](const CreativeCandidate& a, const CreativeCandidate& b) {
              if (a.match_score != b.match_score)
                return a.match_score > b.match_score;
              if (a.cluster_id != b.cluster_id)
                return a.cluster_id < b.cluster_id;
              return a.title < b.title;
            });
  return out;
}

std::vector<CreativeCandidate> CreativeLibrary::all() const {
  std::vector<CreativeCandidate> out;
  out.reserve(entries_.size());
  for (const auto& [key, c] : entries_) out.push_back(c);
  return out;
}

}  // namespace creagen
