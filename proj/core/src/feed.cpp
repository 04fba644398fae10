#include "waytrain/feed.hpp"

#include "waytrain/error.hpp"

namespace waytrain {

nlohmann::json to_json(const FeedEvent& e) {
  return {{"session_id", e.session_id}, {"seq", e.seq}, {"event", to_json(e.event)}, {"snapshot", to_json(e.snapshot)}};
}

std::optional<FeedEvent> FeedHub::Subscription::next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(channel_->mutex);
  channel_->cv.wait_for(lock, timeout, [&] { return channel_->log.size() >= cursor_ || channel_->closed; });
  if (channel_->log.size() < cursor_) return std::nullopt;
  return channel_->log[cursor_++ - 1];
}

bool FeedHub::Subscription::finished() const {
  std::lock_guard lock(channel_->mutex);
  return channel_->closed && channel_->log.size() < cursor_;
}

void FeedHub::open(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  require(!channels_.contains(session_id), ErrorCode::Conflict, "feed for " + session_id + " already exists");
  channels_[session_id] = std::make_shared<Channel>();
}

std::shared_ptr<FeedHub::Channel> FeedHub::channel(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  const auto it = channels_.find(session_id);
  require(it != channels_.end(), ErrorCode::NotFound, "no feed for session " + session_id);
  return it->second;
}

void FeedHub::publish(const TrainingEvent& event, const NavSnapshot& snapshot) {
  auto ch = channel(event.session_id);
  {
    std::lock_guard lock(ch->mutex);
    require(!ch->closed, ErrorCode::State, "feed for " + event.session_id + " is closed");
    require(event.seq == ch->log.size() + 1, ErrorCode::Integrity,
            "feed for " + event.session_id + " expected seq " + std::to_string(ch->log.size() + 1));
    ch->log.push_back({event.session_id, event.seq, event, snapshot});
  }
  ch->cv.notify_all();
}

void FeedHub::close(const std::string& session_id) {
  auto ch = channel(session_id);
  {
    std::lock_guard lock(ch->mutex);
    ch->closed = true;
  }
  ch->cv.notify_all();
}

bool FeedHub::has(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  return channels_.contains(session_id);
}

std::vector<FeedEvent> FeedHub::replay(const std::string& session_id, std::uint64_t from_seq) const {
  auto ch = channel(session_id);
  std::lock_guard lock(ch->mutex);
  const std::size_t start = from_seq == 0 ? 0 : static_cast<std::size_t>(from_seq - 1);
  if (start >= ch->log.size()) return {};
  return {ch->log.begin() + static_cast<std::ptrdiff_t>(start), ch->log.end()};
}

FeedHub::Subscription FeedHub::subscribe(const std::string& session_id, std::optional<std::uint64_t> from_seq) const {
  auto ch = channel(session_id);
  std::uint64_t start = 1;
  if (from_seq) {
    start = std::max<std::uint64_t>(1, *from_seq);
  } else {
    std::lock_guard lock(ch->mutex);
    start = ch->log.size() + 1;
  }
  return Subscription(std::move(ch), start);
}

bool FeedHub::endpoint_available() const {
  std::lock_guard lock(mutex_);
  return endpoint_available_;
}

void FeedHub::set_endpoint_available(bool available) {
  std::lock_guard lock(mutex_);
  endpoint_available_ = available;
}

}  // namespace waytrain
