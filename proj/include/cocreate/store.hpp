#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cocreate/blob_store.hpp"
#include "cocreate/session.hpp"

namespace cocreate {

// Durable home of all sessions under one directory:
//   <root>/sessions/<session_id>.jsonl   the event journal
//   <root>/images/<sha256>.png           content-addressed image bytes
// Each event is written and fsynced before the append returns, so an
// acknowledged event survives a crash.
class SessionStore {
 public:
  using Warn = std::function<void(const std::string&)>;

  // Replays every journal. A torn final line is cut off (and reported via
  // `warn`); a bad line followed by more data raises StorageError naming
  // the seq it should have carried.
  explicit SessionStore(std::filesystem::path root, Warn warn = {});
  ~SessionStore();

  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  std::shared_ptr<SessionHandle> create(const std::string& task_prompt);
  std::shared_ptr<SessionHandle> get(const std::string& session_id) const;  // NotFound
  // Resolves an entity id ("<session>.<tag><seq>") to its session.
  std::shared_ptr<SessionHandle> owner_of(const std::string& entity_id) const;
  std::vector<std::string> session_ids() const;

  std::string export_jsonl(const std::string& session_id) const;
  // Writes the log as a new journal; IntegrityError if the id is taken or
  // the log does not replay.
  std::shared_ptr<SessionHandle> import_jsonl(std::string_view jsonl);

  BlobStore& blobs() { return blobs_; }
  const std::filesystem::path& root() const { return root_; }

 private:
  struct Journal;
  std::shared_ptr<SessionHandle> open_journal(const std::string& session_id,
                                              std::vector<Event> log, bool fresh);
  std::filesystem::path journal_path(const std::string& session_id) const;

  std::filesystem::path root_;
  Warn warn_;
  FileBlobStore blobs_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<SessionHandle>> sessions_;
  std::map<std::string, std::shared_ptr<Journal>> journals_;
};

// Lines of one journal file, split into the intact prefix and whatever
// follows it. Exposed for tests.
struct JournalScan {
  std::vector<Event> events;
  std::size_t good_bytes = 0;  // length of the valid prefix
  bool torn_tail = false;
};
JournalScan scan_journal(std::string_view content);

std::string new_session_id();

}  // namespace cocreate
