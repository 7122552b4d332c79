#pragma once

// Session storage with TTL expiry.
//
// Ephemeral mode keeps everything in memory and never touches the disk.
// Encrypted-file mode additionally writes each session as a secretbox
// (XSalsa20-Poly1305) file so offline CLI workflows survive restarts.
//
// Locking: the map is guarded by a shared mutex; each session has its own
// shared mutex. Mutations run on a copy that is committed only when the
// callback returns normally, so a throwing mutation leaves no trace.

#include <sodium.h>

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "qareply/digest.hpp"
#include "qareply/domain.hpp"
#include "qareply/error.hpp"

namespace qareply {

enum class StoreMode { Ephemeral, EncryptedFile };
QAREPLY_ENUM_STRINGS(StoreMode, {StoreMode::Ephemeral, "ephemeral"}, {StoreMode::EncryptedFile, "encrypted-file"})

using StoreKey = std::array<unsigned char, crypto_secretbox_KEYBYTES>;

struct StoreConfig {
  StoreMode mode = StoreMode::Ephemeral;
  std::chrono::seconds ttl{86400};
  std::chrono::seconds finalized_grace{3600};  // expiry after finalize, capped by ttl
  std::filesystem::path directory;             // encrypted-file mode only
  StoreKey key{};                              // encrypted-file mode only
};

/// Parses a 64-hex-digit key (e.g. from QAREPLY_STORE_KEY).
inline StoreKey parse_store_key(std::string_view hex) {
  StoreKey key{};
  std::size_t len = 0;
  if (hex.size() != key.size() * 2 ||
      sodium_hex2bin(key.data(), key.size(), hex.data(), hex.size(), nullptr, &len, nullptr) != 0 ||
      len != key.size())
    throw Error(ErrorCode::WrongType, "store key must be 64 hex digits");
  return key;
}

class SessionStore {
 public:
  using ClockFn = std::function<Timestamp()>;

  explicit SessionStore(StoreConfig cfg = {}, ClockFn clock = [] { return Clock::now(); })
      : cfg_(std::move(cfg)), clock_(std::move(clock)) {
    ensure_sodium();
    if (cfg_.mode == StoreMode::EncryptedFile) load_directory();
  }

  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  const StoreConfig& config() const { return cfg_; }
  Timestamp now() const { return clock_(); }

  /// Assigns a fresh unguessable id and stores the session.
  std::string insert(Session s) {
    auto entry = std::make_shared<Entry>();
    {
      std::unique_lock lock(mu_);
      do {
        s.id = random_token();
      } while (map_.count(s.id));
      entry->expires_at = clock_() + cfg_.ttl;
      entry->session = std::move(s);
      map_[entry->session.id] = entry;
    }
    persist(*entry);
    return entry->session.id;
  }

  /// Runs `f(const Session&)` under the session's shared lock.
  template <typename F>
  auto read(const std::string& id, F&& f) {
    auto entry = lookup(id);
    std::shared_lock lock(entry->mu);
    return f(static_cast<const Session&>(entry->session));
  }

  /// Runs `f(Session&)` on a copy under the session's exclusive lock and
  /// commits the copy if `f` returns normally.
  template <typename F>
  auto mutate(const std::string& id, F&& f) {
    auto entry = lookup(id);
    std::unique_lock lock(entry->mu);
    Session draft = entry->session;
    if constexpr (std::is_void_v<decltype(f(draft))>) {
      f(draft);
      commit(*entry, std::move(draft));
    } else {
      auto result = f(draft);
      commit(*entry, std::move(draft));
      return result;
    }
  }

  bool contains(const std::string& id) {
    try {
      lookup(id);
      return true;
    } catch (const Error&) {
      return false;
    }
  }

  void erase(const std::string& id) {
    std::unique_lock lock(mu_);
    map_.erase(id);
    remove_file(id);
  }

  std::size_t purge_expired() {
    const Timestamp t = clock_();
    std::unique_lock lock(mu_);
    std::size_t n = 0;
    for (auto it = map_.begin(); it != map_.end();) {
      if (it->second->expires_at <= t) {
        remove_file(it->first);
        it = map_.erase(it);
        ++n;
      } else {
        ++it;
      }
    }
    return n;
  }

  /// Drops every in-memory session. Encrypted files are kept.
  void clear() {
    std::unique_lock lock(mu_);
    map_.clear();
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return map_.size();
  }

  std::optional<Timestamp> expires_at(const std::string& id) {
    auto entry = lookup(id);
    std::shared_lock lock(entry->mu);
    return entry->expires_at;
  }

 private:
  struct Entry {
    std::shared_mutex mu;
    Session session;
    Timestamp expires_at{};
  };

  std::shared_ptr<Entry> lookup(const std::string& id) {
    {
      std::shared_lock lock(mu_);
      auto it = map_.find(id);
      if (it != map_.end() && it->second->expires_at > clock_()) return it->second;
      if (it == map_.end()) throw Error(ErrorCode::UnknownSession, "no such session");
    }
    erase(id);
    throw Error(ErrorCode::UnknownSession, "no such session");
  }

  void commit(Entry& e, Session&& s) {
    if (s.state == SessionState::Finalized && s.finalized_at) {
      const Timestamp purge_at = *s.finalized_at + cfg_.finalized_grace;
      if (purge_at < e.expires_at) e.expires_at = purge_at;
    }
    e.session = std::move(s);
    persist(e);
  }

  std::filesystem::path file_for(const std::string& id) const { return cfg_.directory / (id + ".session"); }

  void remove_file(const std::string& id) {
    if (cfg_.mode != StoreMode::EncryptedFile) return;
    std::error_code ec;
    std::filesystem::remove(file_for(id), ec);
  }

  void persist(const Entry& e) {
    if (cfg_.mode != StoreMode::EncryptedFile) return;
    const std::string plain =
        Json{{"session", e.session}, {"expires_at", format_timestamp(e.expires_at)}}.dump();
    std::string blob(crypto_secretbox_NONCEBYTES + crypto_secretbox_MACBYTES + plain.size(), '\0');
    auto* nonce = reinterpret_cast<unsigned char*>(blob.data());
    randombytes_buf(nonce, crypto_secretbox_NONCEBYTES);
    crypto_secretbox_easy(nonce + crypto_secretbox_NONCEBYTES, reinterpret_cast<const unsigned char*>(plain.data()),
                          plain.size(), nonce, cfg_.key.data());
    const auto path = file_for(e.session.id);
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::Io, "cannot write session file");
      out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    }
    std::filesystem::rename(tmp, path);
  }

  void load_directory() {
    std::filesystem::create_directories(cfg_.directory);
    const Timestamp t = clock_();
    for (const auto& f : std::filesystem::directory_iterator(cfg_.directory)) {
      if (f.path().extension() != ".session") continue;
      std::ifstream in(f.path(), std::ios::binary);
      const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      constexpr std::size_t overhead = crypto_secretbox_NONCEBYTES + crypto_secretbox_MACBYTES;
      if (blob.size() < overhead) continue;
      std::string plain(blob.size() - overhead, '\0');
      const auto* nonce = reinterpret_cast<const unsigned char*>(blob.data());
      if (crypto_secretbox_open_easy(reinterpret_cast<unsigned char*>(plain.data()), nonce + crypto_secretbox_NONCEBYTES,
                                     blob.size() - crypto_secretbox_NONCEBYTES, nonce, cfg_.key.data()) != 0)
        continue;  // wrong key or tampered
      const Json j = Json::parse(plain, nullptr, false);
      if (j.is_discarded()) continue;
      auto entry = std::make_shared<Entry>();
      try {
        entry->session = j.at("session").get<Session>();
        entry->expires_at = parse_timestamp(j.at("expires_at").get<std::string>()).value_or(t);
      } catch (const std::exception&) {
        continue;
      }
      if (entry->expires_at <= t) {
        std::error_code ec;
        std::filesystem::remove(f.path(), ec);
        continue;
      }
      map_[entry->session.id] = entry;
    }
  }

  StoreConfig cfg_;
  ClockFn clock_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<Entry>> map_;
};

}  // namespace qareply
