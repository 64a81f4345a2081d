#include "cocreate/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <random>
#include <sstream>

#include "cocreate/error.hpp"

namespace cocreate {

namespace fs = std::filesystem;

struct SessionStore::Journal {
  int fd = -1;
  off_t size = 0;
  std::mutex mu;

  ~Journal() {
    if (fd >= 0) ::close(fd);
  }

  void write(const std::string& line) {
    std::lock_guard lock(mu);
    std::size_t done = 0;
    while (done < line.size()) {
      const auto n = ::write(fd, line.data() + done, line.size() - done);
      if (n <= 0) {
        // Leave no partial line behind for the next append to build on.
        if (::ftruncate(fd, size) != 0) {}
        throw StorageError("journal write failed");
      }
      done += static_cast<std::size_t>(n);
    }
    if (::fdatasync(fd) != 0) {
      if (::ftruncate(fd, size) != 0) {}
      throw StorageError("journal fsync failed");
    }
    size += static_cast<off_t>(line.size());
  }
};

std::string new_session_id() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id = "s";
  auto bits = rng();
  for (int i = 0; i < 12; ++i, bits >>= 4) id.push_back(kHex[bits & 0xF]);
  return id;
}

JournalScan scan_journal(std::string_view content) {
  JournalScan scan;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    const bool terminated = nl != std::string_view::npos;
    const auto end = terminated ? nl : content.size();
    const auto line = content.substr(pos, end - pos);
    const std::uint64_t expected_seq = scan.events.size() + 1;
    try {
      if (!terminated) throw ParseError("unterminated line", 0);
      auto event = event_from_json(nlohmann::json::parse(line));
      if (event.seq != expected_seq) {
        throw SequenceError(expected_seq, event.seq);
      }
      scan.events.push_back(std::move(event));
      pos = end + 1;
      scan.good_bytes = pos;
    } catch (const std::exception& e) {
      const bool last = !terminated || end + 1 >= content.size();
      if (last) {
        scan.torn_tail = true;
        return scan;
      }
      throw StorageError("journal corrupt at seq " + std::to_string(expected_seq) + ": " + e.what());
    }
  }
  return scan;
}

SessionStore::SessionStore(fs::path root, Warn warn)
    : root_(std::move(root)), warn_(std::move(warn)), blobs_(root_ / "images") {
  fs::create_directories(root_ / "sessions");
  for (const auto& entry : fs::directory_iterator(root_ / "sessions")) {
    if (entry.path().extension() != ".jsonl") continue;
    const auto id = entry.path().stem().string();
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();
    JournalScan scan;
    try {
      scan = scan_journal(content);
    } catch (const StorageError& e) {
      throw StorageError("session " + id + ": " + e.what());
    }
    if (scan.torn_tail) {
      fs::resize_file(entry.path(), scan.good_bytes);
      if (warn_) {
        warn_("session " + id + ": dropped torn trailing line (" +
              std::to_string(content.size() - scan.good_bytes) + " bytes)");
      }
    }
    if (scan.events.empty()) {
      if (warn_) warn_("session " + id + ": empty journal ignored");
      continue;
    }
    try {
      open_journal(id, std::move(scan.events), false);
    } catch (const StorageError&) {
      throw;
    } catch (const Error& e) {
      throw StorageError("session " + id + ": replay failed: " + e.what());
    }
  }
}

SessionStore::~SessionStore() = default;

fs::path SessionStore::journal_path(const std::string& session_id) const {
  return root_ / "sessions" / (session_id + ".jsonl");
}

std::shared_ptr<SessionHandle> SessionStore::open_journal(const std::string& session_id,
                                                          std::vector<Event> log, bool fresh) {
  auto journal = std::make_shared<Journal>();
  const auto path = journal_path(session_id);
  const int flags = O_WRONLY | O_APPEND | O_CLOEXEC | O_CREAT | (fresh ? O_EXCL : 0);
  journal->fd = ::open(path.c_str(), flags, 0644);
  if (journal->fd < 0) throw StorageError("cannot open journal " + path.string());
  journal->size = ::lseek(journal->fd, 0, SEEK_END);
  if (fresh) {
    // Make the new directory entry itself durable.
    const int dir = ::open((root_ / "sessions").c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (dir >= 0) {
      ::fsync(dir);
      ::close(dir);
    }
  }
  SessionHandle::Sink sink = [journal](const Event& e) {
    journal->write(event_to_json(e).dump() + "\n");
  };
  if (fresh) {
    for (const auto& e : log) sink(e);
  }
  auto handle = SessionHandle::from_log(std::move(log), sink);
  std::lock_guard lock(mu_);
  sessions_[session_id] = handle;
  journals_[session_id] = journal;
  return handle;
}

std::shared_ptr<SessionHandle> SessionStore::create(const std::string& task_prompt) {
  std::string id;
  {
    std::lock_guard lock(mu_);
    do {
      id = new_session_id();
    } while (sessions_.contains(id) || fs::exists(journal_path(id)));
  }
  auto journal = std::make_shared<Journal>();
  const auto path = journal_path(id);
  journal->fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC | O_CREAT | O_EXCL, 0644);
  if (journal->fd < 0) throw StorageError("cannot create journal " + path.string());
  const int dir = ::open((root_ / "sessions").c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (dir >= 0) {
    ::fsync(dir);
    ::close(dir);
  }
  SessionHandle::Sink sink = [journal](const Event& e) {
    journal->write(event_to_json(e).dump() + "\n");
  };
  auto handle = SessionHandle::create(id, task_prompt, sink);
  std::lock_guard lock(mu_);
  sessions_[id] = handle;
  journals_[id] = journal;
  return handle;
}

std::shared_ptr<SessionHandle> SessionStore::get(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFound("session", session_id);
  return it->second;
}

std::shared_ptr<SessionHandle> SessionStore::owner_of(const std::string& entity_id) const {
  return get(session_of(entity_id));
}

std::vector<std::string> SessionStore::session_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

std::string SessionStore::export_jsonl(const std::string& session_id) const {
  return to_jsonl(get(session_id)->events());
}

std::shared_ptr<SessionHandle> SessionStore::import_jsonl(std::string_view jsonl) {
  auto log = parse_jsonl(jsonl);
  if (log.empty()) throw IntegrityError("import: empty log");
  const Session state = replay(log);
  const auto& id = state.session_id;
  if (id.empty() || id.find_first_of("./\\") != std::string::npos) {
    throw IntegrityError("import: unusable session id '" + id + "'");
  }
  {
    std::lock_guard lock(mu_);
    if (sessions_.contains(id) || fs::exists(journal_path(id))) {
      throw IntegrityError("import: session " + id + " already exists");
    }
  }
  return open_journal(id, std::move(log), true);
}

}  // namespace cocreate
