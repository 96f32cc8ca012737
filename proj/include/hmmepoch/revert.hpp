#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hmm.hpp"

namespace hmmepoch {

struct RevisionRecord {
  std::string revision_id;
  std::string content_hash;
  std::string user_id;
  std::int64_t timestamp = 0;
  std::optional<std::string> user_flag;
};

/// Codes each revision as R when its content hash matches an earlier revision
/// and C otherwise. The reverted-to revision is the most recent earlier match;
/// if every revision strictly between it and the revert belongs to the
/// reverting user, the edit is a self-revert and stays C.
inline AnnotatedSequence code_reverts(const std::vector<RevisionRecord> &revisions) {
  if (revisions.empty())
    throw InvalidInput("no revisions to code");
  const std::size_t n = revisions.size();
  {
    std::unordered_set<std::string> ids;
    for (const auto &r : revisions) {
      if (r.content_hash.empty())
        throw InvalidInput("revision " + r.revision_id + " has an empty content hash");
      if (!ids.insert(r.revision_id).second)
        throw InvalidInput("duplicate revision id " + r.revision_id);
    }
  }

  AnnotatedSequence seq;
  seq.symbols.resize(n);
  seq.timestamps.emplace();
  seq.user_ids.emplace();
  const bool any_flag = std::any_of(revisions.begin(), revisions.end(),
                                    [](const RevisionRecord &r) { return r.user_flag.has_value(); });
  if (any_flag)
    seq.user_flags.emplace();

  std::unordered_map<std::string_view, std::size_t> last_seen;
  std::vector<std::size_t> run_start(n); // first index of the same-user run ending here
  for (std::size_t j = 0; j < n; ++j) {
    const auto &r = revisions[j];
    run_start[j] = (j > 0 && revisions[j - 1].user_id == r.user_id) ? run_start[j - 1] : j;

    Symbol s = kNonRevert;
    if (auto it = last_seen.find(r.content_hash); it != last_seen.end()) {
      const std::size_t i = it->second;
      const bool nothing_between = i + 1 == j;
      const bool self = nothing_between ||
                        (revisions[j - 1].user_id == r.user_id && run_start[j - 1] <= i + 1);
      s = self ? kNonRevert : kRevert;
    }
    last_seen[r.content_hash] = j;

    seq.symbols[j] = s;
    seq.timestamps->push_back(r.timestamp);
    seq.user_ids->push_back(r.user_id);
    if (any_flag)
      seq.user_flags->push_back(r.user_flag.value_or(""));
  }
  seq.validate();
  return seq;
}

} // namespace hmmepoch
