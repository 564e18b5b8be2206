#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smg/config.hpp"
#include "smg/features.hpp"
#include "smg/hand.hpp"
#include "smg/learn.hpp"
#include "smg/phantom.hpp"
#include "smg/store.hpp"

namespace smg {

inline constexpr std::uint8_t kSync = 0xA5;
inline constexpr std::uint8_t kFrameTag = 0x46;
inline constexpr std::uint8_t kCommandTag = 0x43;
inline constexpr std::size_t kFrameHeaderSize = 6; // sync, tag, u32 length

struct FramePacket {
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::uint32_t seq = 0;
    std::vector<std::uint8_t> pixels;
    bool operator==(const FramePacket&) const = default;
};

/// A5 46 | length u32 | width u16 | height u16 | seq u32 | pixels. length = 8 + width * height.
std::vector<std::uint8_t> encode_frame_packet(const UltrasoundFrame& f, std::uint32_t seq);
std::vector<std::uint8_t> encode_frame_packet(const FramePacket& p);
/// Decodes exactly one packet. Errors: "bad sync", "length mismatch", "short read".
FramePacket decode_frame_packet(std::span<const std::uint8_t> bytes);
/// Payload length announced by a 6-byte header; validates the sync bytes.
std::uint32_t frame_packet_length(std::span<const std::uint8_t> header);

/// A5 43 | gesture | A5 ^ 43 ^ gesture.
std::array<std::uint8_t, 4> encode_command(Gesture g);
/// Errors: "bad sync", "checksum mismatch", "unknown gesture id", "short read".
Gesture decode_command(std::span<const std::uint8_t> bytes);

/// m-of-k switching filter over the last k labels.
class Debouncer {
public:
    explicit Debouncer(int k = 5, int m = 4);
    /// Returns the new command when some label other than the current one holds at least m
    /// of the last k slots.
    std::optional<Gesture> push(Gesture label);
    std::optional<Gesture> current() const { return current_; }
    int k() const { return k_; }
    int m() const { return m_; }

private:
    int k_, m_;
    std::deque<Gesture> window_;
    std::optional<Gesture> current_;
};

enum class QueuePolicy { Block, DropOldest };

/// Bounded multi-producer queue. Block waits for space; DropOldest evicts the head.
template <class T>
class BoundedQueue {
public:
    BoundedQueue(std::size_t capacity, QueuePolicy policy) : cap_(capacity), policy_(policy) {}

    /// Returns false if the queue is closed.
    bool push(T v) {
        std::unique_lock lock(mu_);
        if (policy_ == QueuePolicy::Block) not_full_.wait(lock, [&] { return closed_ || q_.size() < cap_; });
        if (closed_) return false;
        if (q_.size() >= cap_) {
            q_.pop_front();
            ++dropped_;
        }
        q_.push_back(std::move(v));
        not_empty_.notify_one();
        return true;
    }
    /// Blocks until an item arrives or the queue is closed and drained.
    std::optional<T> pop() {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return closed_ || !q_.empty(); });
        if (q_.empty()) return std::nullopt;
        T v = std::move(q_.front());
        q_.pop_front();
        not_full_.notify_one();
        return v;
    }
    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }
    std::size_t dropped() const {
        std::lock_guard lock(mu_);
        return dropped_;
    }

private:
    std::size_t cap_;
    QueuePolicy policy_;
    mutable std::mutex mu_;
    std::condition_variable not_empty_, not_full_;
    std::deque<T> q_;
    bool closed_ = false;
    std::size_t dropped_ = 0;
};

/// Connected loopback TCP socket pair; `host`/`port` name the listening side (port 0 = any).
class TcpLink {
public:
    TcpLink(const std::string& host, int port);
    ~TcpLink();
    TcpLink(const TcpLink&) = delete;
    TcpLink& operator=(const TcpLink&) = delete;

    void send(std::span<const std::uint8_t> bytes);
    /// Returns false on a clean end of stream before any byte; throws on a partial read.
    bool receive(std::span<std::uint8_t> out);
    /// Half-closes the sending side.
    void finish_sending();
    /// Shuts both ends down so blocked peers return.
    void abort();
    int port() const { return port_; }

private:
    int tx_ = -1;
    int rx_ = -1;
    int port_ = 0;
};

enum class Transport { InProcess, Tcp };
Transport parse_transport(std::string_view s);

struct LatencyStats {
    double p50_ms = 0.0;
    double p95_ms = 0.0;
};

struct CommandEvent {
    std::uint32_t seq = 0;
    Gesture gesture = Gesture::Rest;
};

struct FrameTiming {
    std::uint32_t seq = 0;
    double capture = 0.0, features = 0.0, predict = 0.0, command = 0.0; // seconds since start
};

struct SessionReport {
    std::size_t received = 0;
    std::size_t processed = 0;
    std::size_t dropped = 0;
    std::size_t transitions = 0;
    std::vector<CommandEvent> commands;
    LatencyStats capture_to_features, features_to_predict, predict_to_command;
    double wall_s = 0.0;
    double fps = 0.0;
    std::size_t correct = 0; // predictions matching the frame label
    std::vector<FrameTiming> timings;
    HandState final_state;
    std::optional<Gesture> final_command;
    std::string transport;
};

std::string to_json(const SessionReport& r);

/// Frames rendered on the fly: each gesture held at full deformation for `seconds_per_gesture`.
struct LiveSource {
    const PhantomModel* model = nullptr;
    std::vector<Gesture> gestures;
    double seconds_per_gesture = 10.0;
    std::uint64_t seed = 0;
    bool paced = false; // sleep to hold the phantom frame rate
};

struct PipelineOptions {
    LinkParams link;
    Transport transport = Transport::InProcess;
    double fps = 20.0; // simulated clock for the hand
    bool trace = false;
};

/// Replays every frame of `d` through extract -> predict -> debounce -> hand with blocking queues.
SessionReport run_pipeline(const LabeledDataset& d, const Extractor& ex, const TrainedModel& model, Hand& hand,
                           const PipelineOptions& opt);
/// Live phantom source with drop-oldest queues.
SessionReport run_pipeline(const LiveSource& src, const Extractor& ex, const TrainedModel& model, Hand& hand,
                           const PipelineOptions& opt);

} // namespace smg
