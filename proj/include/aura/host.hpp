#pragma once

// Live hosting of one session: the single enqueue point every producer
// (UDP, HTTP, WebSocket, tick clock) goes through, plus a bounded fan-out of
// the resulting event stream to subscribers.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "aura/config.hpp"
#include "aura/error.hpp"
#include "aura/events.hpp"
#include "aura/session.hpp"

namespace aura {

using Message = std::shared_ptr<const std::string>;

inline Message make_message(const json& j) { return std::make_shared<const std::string>(j.dump()); }

inline json error_message(std::string_view code, std::string_view message, const std::optional<std::string>& corr) {
    json j{{"type", "error"}, {"payload", {{"code", code}, {"message", message}}}};
    if (corr) j["corr"] = *corr;
    return j;
}

/// One reader's view of the broadcast. The queue is bounded; a reader that
/// falls behind gets a terminal error instead of unbounded buffering.
class Subscription {
public:
    explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

    /// Returns false once the subscription is closed.
    bool push(Message m) {
        std::function<void()> notify;
        bool accepted = true;
        {
            std::lock_guard lock(mu_);
            if (closed_) return false;
            if (queue_.size() >= capacity_) {
                queue_.clear();
                queue_.push_back(make_message(error_message(
                    "SlowConsumer", "client fell more than " + std::to_string(capacity_) + " messages behind",
                    std::nullopt)));
                closed_ = true;
                overflowed_ = true;
                accepted = false;
            } else {
                queue_.push_back(std::move(m));
            }
            notify = notify_;
        }
        cv_.notify_all();
        if (notify) notify();
        return accepted;
    }

    /// Replies addressed to this reader only; they bypass the bound.
    void push_direct(Message m) {
        std::function<void()> notify;
        {
            std::lock_guard lock(mu_);
            if (closed_) return;
            queue_.push_back(std::move(m));
            notify = notify_;
        }
        cv_.notify_all();
        if (notify) notify();
    }

    /// Queues `terminal` as the last message and refuses anything after it.
    void close(Message terminal) {
        std::function<void()> notify;
        {
            std::lock_guard lock(mu_);
            if (closed_) return;
            if (terminal) queue_.push_back(std::move(terminal));
            closed_ = true;
            notify = notify_;
        }
        cv_.notify_all();
        if (notify) notify();
    }

    std::optional<Message> try_pop() {
        std::lock_guard lock(mu_);
        if (queue_.empty()) return std::nullopt;
        auto m = std::move(queue_.front());
        queue_.pop_front();
        return m;
    }

    std::optional<Message> pop_wait(std::chrono::milliseconds timeout) {
        std::unique_lock lock(mu_);
        cv_.wait_for(lock, timeout, [this] { return !queue_.empty() || closed_; });
        if (queue_.empty()) return std::nullopt;
        auto m = std::move(queue_.front());
        queue_.pop_front();
        return m;
    }

    /// Closed and nothing left to deliver.
    bool finished() const {
        std::lock_guard lock(mu_);
        return closed_ && queue_.empty();
    }

    bool overflowed() const {
        std::lock_guard lock(mu_);
        return overflowed_;
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return queue_.size();
    }

    void set_notify(std::function<void()> f) {
        std::lock_guard lock(mu_);
        notify_ = std::move(f);
    }

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Message> queue_;
    std::size_t capacity_;
    bool closed_ = false;
    bool overflowed_ = false;
    std::function<void()> notify_;
};

struct HostOptions {
    /// Drive ticks from a wall-clock thread. Tests turn this off and call
    /// `tick()` themselves.
    bool auto_tick = true;
};

class SessionHost {
public:
    using Clock = std::chrono::steady_clock;

    explicit SessionHost(HostOptions opts = {}) : opts_(opts) {
        if (opts_.auto_tick) ticker_ = std::thread([this] { tick_loop(); });
    }

    ~SessionHost() {
        {
            std::lock_guard lock(mu_);
            stopping_ = true;
        }
        tick_cv_.notify_all();
        if (ticker_.joinable()) ticker_.join();
        std::lock_guard lock(mu_);
        close_all_locked("ServerShutdown", "server shutting down");
    }

    SessionHost(const SessionHost&) = delete;
    SessionHost& operator=(const SessionHost&) = delete;

    /// Replaces any running session. Existing streams end, since sequence
    /// numbers restart with the new session.
    void start(const SessionConfig& config) {
        {
            std::lock_guard lock(mu_);
            close_all_locked("SessionReset", "a new session was started");
            runner_.emplace(config);
            started_at_ = Clock::now();
            next_tick_ms_ = 0;
            last_snapshot_ms_.reset();
        }
        tick_cv_.notify_all();
    }

    void reset() {
        std::lock_guard lock(mu_);
        close_all_locked("SessionReset", "the session was reset");
        runner_.reset();
    }

    bool started() const {
        std::lock_guard lock(mu_);
        return runner_.has_value();
    }

    std::string next_corr() {
        std::lock_guard lock(mu_);
        return "c" + std::to_string(++corr_counter_);
    }

    /// The single enqueue point: stamps the next seq and session time, folds,
    /// and fans the results out.
    std::vector<SessionEvent> submit(EventPayload payload, std::optional<std::string> corr = std::nullopt) {
        std::lock_guard lock(mu_);
        if (!runner_) throw Error(ErrorCode::NotStarted, "no session is running");
        return submit_locked(std::move(payload), clock_ms_locked(), std::move(corr));
    }

    /// Submits a batch atomically, so no other producer interleaves.
    std::vector<SessionEvent> submit_all(std::vector<EventPayload> payloads, const std::optional<std::string>& corr) {
        std::lock_guard lock(mu_);
        if (!runner_) throw Error(ErrorCode::NotStarted, "no session is running");
        std::vector<SessionEvent> out;
        const auto at = clock_ms_locked();
        for (auto& p : payloads) {
            auto evs = submit_locked(std::move(p), at, corr);
            out.insert(out.end(), evs.begin(), evs.end());
        }
        return out;
    }

    /// Folds the next Tick. Used by the clock thread and by tests.
    std::vector<SessionEvent> tick() {
        std::lock_guard lock(mu_);
        if (!runner_) throw Error(ErrorCode::NotStarted, "no session is running");
        return tick_locked();
    }

    Snapshot snapshot() const {
        std::lock_guard lock(mu_);
        if (!runner_) throw Error(ErrorCode::NotStarted, "no session is running");
        return aura::snapshot(runner_->session());
    }

    std::string canvas_ppm() const {
        std::lock_guard lock(mu_);
        if (!runner_) throw Error(ErrorCode::NotStarted, "no session is running");
        return export_ppm(runner_->session().canvas);
    }

    SessionConfig config() const {
        std::lock_guard lock(mu_);
        if (!runner_) throw Error(ErrorCode::NotStarted, "no session is running");
        return runner_->session().config;
    }

    std::vector<SessionEvent> log() const {
        std::lock_guard lock(mu_);
        if (!runner_) return {};
        return runner_->log();
    }

    /// Runs `f` against the live session under the host lock.
    template <typename F>
    auto with_session(F&& f) const {
        std::lock_guard lock(mu_);
        if (!runner_) throw Error(ErrorCode::NotStarted, "no session is running");
        return f(runner_->session(), runner_->log());
    }

    /// The first queued message is always a snapshot; events follow in seq
    /// order with nothing skipped.
    std::shared_ptr<Subscription> subscribe(std::size_t capacity) {
        auto sub = std::make_shared<Subscription>(capacity);
        std::lock_guard lock(mu_);
        sub->push(make_message(snapshot_message_locked()));
        subscribers_.push_back(sub);
        return sub;
    }

    std::size_t subscriber_count() {
        std::lock_guard lock(mu_);
        prune_locked();
        return subscribers_.size();
    }

private:
    std::uint64_t clock_ms_locked() const {
        if (!opts_.auto_tick) return runner_->session().now_ms;
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started_at_);
        return static_cast<std::uint64_t>(elapsed.count());
    }

    json snapshot_message_locked() const {
        if (!runner_) return json{{"type", "snapshot"}, {"seq", 0}, {"payload", {{"started", false}}}};
        json payload = to_json(aura::snapshot(runner_->session()));
        payload["started"] = true;
        return json{{"type", "snapshot"}, {"seq", runner_->session().last_seq}, {"payload", payload}};
    }

    std::vector<SessionEvent> submit_locked(EventPayload payload, std::uint64_t at_ms, std::optional<std::string> corr) {
        auto events = runner_->submit(std::move(payload), at_ms, std::move(corr));
        for (const auto& e : events) {
            broadcast_locked(make_message(json{{"type", "event"}, {"seq", e.seq}, {"payload", event_to_json(e)}}));
        }
        return events;
    }

    std::vector<SessionEvent> tick_locked() {
        const std::uint64_t at = std::max(next_tick_ms_, runner_->session().now_ms);
        next_tick_ms_ = at + kTickMs;
        auto events = submit_locked(ev::Tick{}, at, std::nullopt);
        const auto interval = runner_->session().config.server.snapshot_interval_ms;
        if (!last_snapshot_ms_ || at >= *last_snapshot_ms_ + interval) {
            last_snapshot_ms_ = at;
            broadcast_locked(make_message(snapshot_message_locked()));
        }
        return events;
    }

    void broadcast_locked(const Message& m) {
        for (auto& weak : subscribers_) {
            if (auto sub = weak.lock()) sub->push(m);
        }
        if (++broadcasts_ % 256 == 0) prune_locked();
    }

    void prune_locked() {
        std::erase_if(subscribers_, [](const std::weak_ptr<Subscription>& w) {
            auto s = w.lock();
            return !s || s->finished() || s->overflowed();
        });
    }

    void close_all_locked(std::string_view code, std::string_view message) {
        for (auto& weak : subscribers_) {
            if (auto sub = weak.lock()) sub->close(make_message(error_message(code, message, std::nullopt)));
        }
        subscribers_.clear();
    }

    void tick_loop() {
        std::unique_lock lock(mu_);
        while (!stopping_) {
            if (!runner_) {
                tick_cv_.wait(lock, [this] { return stopping_ || runner_.has_value(); });
                continue;
            }
            const auto due = started_at_ + std::chrono::milliseconds(next_tick_ms_);
            if (Clock::now() < due) {
                tick_cv_.wait_until(lock, due);
                continue;
            }
            tick_locked();
        }
    }

    HostOptions opts_;
    mutable std::mutex mu_;
    std::condition_variable tick_cv_;
    std::thread ticker_;
    bool stopping_ = false;

    std::optional<SessionRunner> runner_;
    Clock::time_point started_at_ = Clock::now();
    std::uint64_t next_tick_ms_ = 0;
    std::optional<std::uint64_t> last_snapshot_ms_;
    std::uint64_t corr_counter_ = 0;
    std::uint64_t broadcasts_ = 0;
    std::vector<std::weak_ptr<Subscription>> subscribers_;
};

}  // namespace aura
