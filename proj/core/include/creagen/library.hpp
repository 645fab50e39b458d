#pragma once

#include <map>
#include <string>
#include <vector>

#include "creagen/types.hpp"

namespace creagen {

// The creative library: pass-verdict candidates only, deduplicated on
// (ad, cluster, mode, title). Persists as an append-only line log replayed
// on open; construction without a path keeps the library in memory.
class CreativeLibrary {
 public:
  CreativeLibrary() = default;
  explicit CreativeLibrary(std::string path);

  // Stores pass-verdict candidates, skipping fails and duplicates.
  // Returns the number of newly stored candidates. Idempotent.
  int put(const std::vector<CreativeCandidate>& candidates);

  // All stored candidates for (ad_id, mode), match score descending with
  // (cluster id, title) as the deterministic tiebreak.
  std::vector<CreativeCandidate> query(const std::string& ad_id,
                                       GenerationMode mode) const;

  std::vector<CreativeCandidate> all() const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::string dedup_key(const CreativeCandidate& c) const;

  std::string path_;  // empty = in-memory only
  std::map<std::string, CreativeCandidate> entries_;
};

}  // namespace creagen
