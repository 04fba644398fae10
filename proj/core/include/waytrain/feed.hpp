#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "waytrain/engine.hpp"

namespace waytrain {

/// One monitoring feed envelope.
struct FeedEvent {
  std::string session_id;
  std::uint64_t seq = 0;
  TrainingEvent event;
  NavSnapshot snapshot;
};

nlohmann::json to_json(const FeedEvent& e);

/// Per-session ordered event channels. Publishing appends under a short lock
/// and never waits on subscribers.
class FeedHub {
  struct Channel {
    mutable std::mutex mutex;
    std::condition_variable cv;
    std::vector<FeedEvent> log;
    bool closed = false;
  };

public:
  class Subscription {
  public:
    /// Next envelope, or empty on timeout or when the channel closed and is drained.
    std::optional<FeedEvent> next(std::chrono::milliseconds timeout);
    /// True once the channel is closed and every envelope was delivered.
    bool finished() const;
    std::uint64_t cursor() const { return cursor_; }

  private:
    friend class FeedHub;
    Subscription(std::shared_ptr<Channel> channel, std::uint64_t from_seq)
        : channel_(std::move(channel)), cursor_(from_seq) {}
    std::shared_ptr<Channel> channel_;
    std::uint64_t cursor_;  // next seq to deliver
  };

  /// Throws Conflict if the channel exists.
  void open(const std::string& session_id);
  /// Throws NotFound for an unknown session and Integrity on a sequence gap.
  void publish(const TrainingEvent& event, const NavSnapshot& snapshot);
  void close(const std::string& session_id);
  bool has(const std::string& session_id) const;

  /// Envelopes with seq >= from_seq. Throws NotFound.
  std::vector<FeedEvent> replay(const std::string& session_id, std::uint64_t from_seq = 1) const;
  /// Starts at from_seq, or at the next envelope when empty. Throws NotFound.
  Subscription subscribe(const std::string& session_id, std::optional<std::uint64_t> from_seq = std::nullopt) const;

  /// Whether the network endpoint serving the feed is up. Remote sessions need it.
  bool endpoint_available() const;
  void set_endpoint_available(bool available);

private:
  std::shared_ptr<Channel> channel(const std::string& session_id) const;

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Channel>> channels_;
  bool endpoint_available_ = false;
};

}  // namespace waytrain
