#include "smg/link.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <exception>
#include <functional>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <json.hpp>

#include "smg/binio.hpp"
#include "smg/error.hpp"
#include "smg/rng.hpp"

namespace smg {

// ---- codecs ----

std::vector<std::uint8_t> encode_frame_packet(const FramePacket& p) {
    if (p.pixels.size() != static_cast<std::size_t>(p.width) * p.height)
        throw ValidationError("pixel count does not match frame dimensions");
    ByteWriter w;
    w.u8(kSync);
    w.u8(kFrameTag);
    w.u32(static_cast<std::uint32_t>(8 + p.pixels.size()));
    w.u16(p.width);
    w.u16(p.height);
    w.u32(p.seq);
    w.bytes(p.pixels);
    return w.take();
}

std::vector<std::uint8_t> encode_frame_packet(const UltrasoundFrame& f, std::uint32_t seq) {
    if (f.pixels.size() != static_cast<std::size_t>(f.width) * f.height)
        throw ValidationError("pixel count does not match frame dimensions");
    ByteWriter w;
    w.u8(kSync);
    w.u8(kFrameTag);
    w.u32(static_cast<std::uint32_t>(8 + f.pixels.size()));
    w.u16(f.width);
    w.u16(f.height);
    w.u32(seq);
    w.bytes(f.pixels);
    return w.take();
}

std::uint32_t frame_packet_length(std::span<const std::uint8_t> header) {
    if (header.size() < kFrameHeaderSize) throw FormatError("short read");
    if (header[0] != kSync || header[1] != kFrameTag) throw FormatError("bad sync");
    ByteReader r(header.subspan(2, 4));
    const auto len = r.u32();
    if (len < 8) throw FormatError("length mismatch");
    return len;
}

FramePacket decode_frame_packet(std::span<const std::uint8_t> bytes) {
    const auto len = frame_packet_length(bytes);
    if (bytes.size() < kFrameHeaderSize + len) throw FormatError("short read");
    if (bytes.size() > kFrameHeaderSize + len) throw FormatError("length mismatch");
    ByteReader r(bytes.subspan(kFrameHeaderSize));
    FramePacket p;
    p.width = r.u16();
    p.height = r.u16();
    p.seq = r.u32();
    if (static_cast<std::size_t>(p.width) * p.height != len - 8) throw FormatError("length mismatch");
    const auto px = r.bytes(len - 8);
    p.pixels.assign(px.begin(), px.end());
    return p;
}

std::array<std::uint8_t, 4> encode_command(Gesture g) {
    const auto id = static_cast<std::uint8_t>(gesture_id(g));
    return {kSync, kCommandTag, id, static_cast<std::uint8_t>(kSync ^ kCommandTag ^ id)};
}

Gesture decode_command(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw FormatError("short read");
    if (bytes.size() > 4) throw FormatError("length mismatch");
    if (bytes[0] != kSync || bytes[1] != kCommandTag) throw FormatError("bad sync");
    if ((bytes[0] ^ bytes[1] ^ bytes[2]) != bytes[3]) throw FormatError("checksum mismatch");
    if (bytes[2] >= kNumGestures) throw FormatError("unknown gesture id");
    return static_cast<Gesture>(bytes[2]);
}

// ---- debouncer ----

Debouncer::Debouncer(int k, int m) : k_(k), m_(m) {
    if (k < 1 || m < 1 || m > k) throw ValidationError("out of range: debounce needs 1 <= m <= k");
}

std::optional<Gesture> Debouncer::push(Gesture label) {
    window_.push_back(label);
    if (window_.size() > static_cast<std::size_t>(k_)) window_.pop_front();
    std::array<int, kNumGestures> count{};
    for (auto g : window_) ++count[static_cast<std::size_t>(gesture_id(g))];
    for (int id = 0; id < kNumGestures; ++id) {
        const auto g = static_cast<Gesture>(id);
        if (count[static_cast<std::size_t>(id)] >= m_ && current_ != g) {
            current_ = g;
            return g;
        }
    }
    return std::nullopt;
}

// ---- TCP ----

namespace {

[[noreturn]] void sys_fail(const char* what) { throw IoError(std::string("transport failure: ") + what + ": " + std::strerror(errno)); }

} // namespace

TcpLink::TcpLink(const std::string& host, int port) {
    if (port < 0 || port > 65535) throw ValidationError("out of range: port");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw ValidationError("bad host address '" + host + "'");
    const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listener < 0) sys_fail("socket");
    const int one = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(listener);
        sys_fail("bind");
    }
    if (::listen(listener, 1) != 0) {
        ::close(listener);
        sys_fail("listen");
    }
    socklen_t len = sizeof addr;
    ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    tx_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (tx_ < 0 || ::connect(tx_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(listener);
        sys_fail("connect");
    }
    rx_ = ::accept(listener, nullptr, nullptr);
    ::close(listener);
    if (rx_ < 0) sys_fail("accept");
    ::setsockopt(tx_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpLink::~TcpLink() {
    if (tx_ >= 0) ::close(tx_);
    if (rx_ >= 0) ::close(rx_);
}

void TcpLink::send(std::span<const std::uint8_t> bytes) {
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto n = ::send(tx_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            sys_fail("send");
        }
        off += static_cast<std::size_t>(n);
    }
}

bool TcpLink::receive(std::span<std::uint8_t> out) {
    std::size_t off = 0;
    while (off < out.size()) {
        const auto n = ::recv(rx_, out.data() + off, out.size() - off, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            sys_fail("recv");
        }
        if (n == 0) {
            if (off == 0) return false;
            throw FormatError("short read");
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

void TcpLink::finish_sending() { ::shutdown(tx_, SHUT_WR); }

void TcpLink::abort() {
    ::shutdown(tx_, SHUT_RDWR);
    ::shutdown(rx_, SHUT_RDWR);
}

Transport parse_transport(std::string_view s) {
    if (s == "inproc") return Transport::InProcess;
    if (s == "tcp") return Transport::Tcp;
    throw ValidationError("unknown transport '" + std::string(s) + "'");
}

// ---- pipeline ----

namespace {

using Clock = std::chrono::steady_clock;

struct Item {
    std::uint32_t seq = 0;
    UltrasoundFrame frame;
};

struct Tick {
    std::uint32_t seq = 0;
    std::optional<Gesture> command;
    FrameTiming timing;
};

struct SideInfo {
    double capture = 0.0;
    Gesture label = Gesture::Rest;
};

LatencyStats percentiles(std::vector<double> v) {
    LatencyStats s;
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    auto rank = [&](double q) {
        const auto i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
        return v[std::clamp<std::size_t>(i, 1, v.size()) - 1] * 1000.0;
    };
    s.p50_ms = rank(0.50);
    s.p95_ms = rank(0.95);
    return s;
}

using FrameSource = std::function<std::optional<UltrasoundFrame>(std::uint32_t seq)>;

SessionReport run_core(const FrameSource& source, QueuePolicy policy, const Extractor& ex, const TrainedModel& model,
                       Hand& hand, const PipelineOptions& opt, const std::function<void(std::uint32_t)>& pace) {
    if (model.feature_dim() != ex.dim())
        throw ValidationError("dimension mismatch: model expects " + std::to_string(model.feature_dim()) +
                              " features, extractor yields " + std::to_string(ex.dim()));
    if (!(opt.fps > 0)) throw ValidationError("out of range: fps");
    if (opt.link.queue_depth < 1) throw ValidationError("out of range: queue depth");

    const bool tcp = opt.transport == Transport::Tcp;
    std::unique_ptr<TcpLink> frame_link, command_link;
    if (tcp) {
        frame_link = std::make_unique<TcpLink>(opt.link.host, opt.link.frame_port);
        command_link = std::make_unique<TcpLink>(opt.link.host, opt.link.command_port);
    }

    const auto t0 = Clock::now();
    auto now = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };

    BoundedQueue<Item> frames(static_cast<std::size_t>(opt.link.queue_depth), policy);
    BoundedQueue<Tick> ticks(static_cast<std::size_t>(opt.link.queue_depth), QueuePolicy::Block);
    std::mutex side_mu;
    std::vector<SideInfo> side;
    std::atomic<std::size_t> received{0};
    std::atomic<std::size_t> correct{0};

    std::mutex err_mu;
    std::exception_ptr error;
    auto fail = [&](std::exception_ptr e) {
        {
            std::lock_guard lock(err_mu);
            if (!error) error = e;
        }
        frames.close();
        ticks.close();
        if (frame_link) frame_link->abort();
        if (command_link) command_link->abort();
    };

    auto producer = [&] {
        try {
            for (std::uint32_t seq = 0;; ++seq) {
                if (pace) pace(seq);
                auto f = source(seq);
                if (!f) break;
                {
                    std::lock_guard lock(side_mu);
                    side.push_back({now(), f->label});
                }
                ++received;
                if (tcp) {
                    frame_link->send(encode_frame_packet(*f, seq));
                } else if (!frames.push({seq, std::move(*f)})) {
                    break;
                }
            }
            if (tcp) frame_link->finish_sending();
            else frames.close();
        } catch (...) {
            fail(std::current_exception());
        }
    };

    auto receiver = [&] {
        try {
            std::vector<std::uint8_t> buf(kFrameHeaderSize);
            while (frame_link->receive(std::span(buf.data(), kFrameHeaderSize))) {
                const auto len = frame_packet_length(buf);
                buf.resize(kFrameHeaderSize + len);
                if (!frame_link->receive(std::span(buf.data() + kFrameHeaderSize, len))) throw FormatError("short read");
                auto p = decode_frame_packet(buf);
                buf.resize(kFrameHeaderSize);
                Item it;
                it.seq = p.seq;
                it.frame.width = p.width;
                it.frame.height = p.height;
                it.frame.pixels = std::move(p.pixels);
                if (!frames.push(std::move(it))) break;
            }
            frames.close();
        } catch (...) {
            fail(std::current_exception());
        }
    };

    auto classifier = [&] {
        try {
            Debouncer deb(opt.link.debounce_k, opt.link.debounce_m);
            std::vector<float> feat(ex.dim());
            while (auto it = frames.pop()) {
                Tick t;
                t.seq = it->seq;
                SideInfo info;
                {
                    std::lock_guard lock(side_mu);
                    info = side.at(it->seq);
                }
                t.timing.seq = it->seq;
                t.timing.capture = info.capture;
                ex.extract_into(it->frame, feat);
                t.timing.features = now();
                const auto pred = model.predict(feat);
                t.timing.predict = now();
                if (pred.label < 0 || pred.label >= kNumGestures) throw ValidationError("prediction outside registry");
                const auto g = static_cast<Gesture>(pred.label);
                if (g == info.label) ++correct;
                t.command = deb.push(g);
                if (t.command && tcp) command_link->send(encode_command(*t.command));
                if (!ticks.push(std::move(t))) break;
            }
            if (tcp) command_link->finish_sending();
            ticks.close();
        } catch (...) {
            fail(std::current_exception());
        }
    };

    SessionReport rep;
    rep.transport = tcp ? "tcp" : "inproc";
    std::vector<double> l1, l2, l3;
    {
        std::jthread p(producer);
        std::jthread r;
        if (tcp) r = std::jthread(receiver);
        std::jthread c(classifier);
        try {
            double sim = 0.0;
            while (auto t = ticks.pop()) {
                if (t->command) {
                    Gesture g = *t->command;
                    if (tcp) {
                        std::array<std::uint8_t, 4> b{};
                        if (!command_link->receive(b)) throw FormatError("short read");
                        g = decode_command(b);
                        if (g != *t->command) throw FormatError("command stream out of order");
                    }
                    hand.command(g);
                    rep.commands.push_back({t->seq, g});
                }
                const double target = static_cast<double>(t->seq) / opt.fps;
                if (target > sim) {
                    hand.advance(target - sim);
                    sim = target;
                }
                t->timing.command = now();
                l1.push_back(t->timing.features - t->timing.capture);
                l2.push_back(t->timing.predict - t->timing.features);
                l3.push_back(t->timing.command - t->timing.predict);
                rep.timings.push_back(t->timing);
            }
        } catch (...) {
            fail(std::current_exception());
        }
    }
    if (error) std::rethrow_exception(error);
    rep.wall_s = now();
    hand.advance(opt.link.settle_s);

    rep.received = received;
    rep.processed = rep.timings.size();
    rep.dropped = frames.dropped();
    rep.transitions = rep.commands.size();
    rep.correct = correct;
    rep.capture_to_features = percentiles(std::move(l1));
    rep.features_to_predict = percentiles(std::move(l2));
    rep.predict_to_command = percentiles(std::move(l3));
    rep.fps = rep.wall_s > 0 ? static_cast<double>(rep.processed) / rep.wall_s : 0.0;
    rep.final_state = hand.state();
    rep.final_command = hand.gesture();
    return rep;
}

} // namespace

SessionReport run_pipeline(const LabeledDataset& d, const Extractor& ex, const TrainedModel& model, Hand& hand,
                           const PipelineOptions& opt) {
    if (d.frames.empty()) throw ValidationError("empty dataset");
    FrameSource src = [&](std::uint32_t seq) -> std::optional<UltrasoundFrame> {
        if (seq >= d.frames.size()) return std::nullopt;
        return d.frames[seq];
    };
    return run_core(src, QueuePolicy::Block, ex, model, hand, opt, {});
}

SessionReport run_pipeline(const LiveSource& live, const Extractor& ex, const TrainedModel& model, Hand& hand,
                           const PipelineOptions& opt) {
    if (!live.model) throw ValidationError("live source has no phantom");
    if (live.gestures.empty()) throw ValidationError("empty gesture subset");
    if (!(live.seconds_per_gesture > 0)) throw ValidationError("out of range: duration");
    const auto per = static_cast<std::uint32_t>(std::max(1L, std::lround(live.seconds_per_gesture * live.model->fps)));
    const auto total = per * static_cast<std::uint32_t>(live.gestures.size());
    std::vector<int> shifts;
    for (std::size_t i = 0; i < live.gestures.size(); ++i) {
        Rng rng(mix_seed({live.seed, i, 0x5417ull}));
        shifts.push_back(static_cast<int>(rng.range(-live.model->probe_shift_max, live.model->probe_shift_max)));
    }
    FrameSource src = [&](std::uint32_t seq) -> std::optional<UltrasoundFrame> {
        if (seq >= total) return std::nullopt;
        const std::size_t gi = seq / per;
        auto f = render_frame(*live.model, live.gestures[gi], 1.0, shifts[gi], mix_seed({live.seed, gi, seq}));
        f.label = live.gestures[gi];
        f.timestamp_ms = static_cast<std::uint64_t>(std::llround(seq * 1000.0 / live.model->fps));
        return f;
    };
    std::function<void(std::uint32_t)> pace;
    const auto start = Clock::now();
    if (live.paced)
        pace = [&](std::uint32_t seq) {
            std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(
                                                      std::chrono::duration<double>(seq / live.model->fps)));
        };
    PipelineOptions o = opt;
    o.fps = live.model->fps;
    return run_core(src, QueuePolicy::DropOldest, ex, model, hand, o, pace);
}

std::string to_json(const SessionReport& r) {
    nlohmann::ordered_json j;
    j["transport"] = r.transport;
    j["received"] = r.received;
    j["processed"] = r.processed;
    j["dropped"] = r.dropped;
    j["transitions"] = r.transitions;
    j["accuracy"] = r.processed ? static_cast<double>(r.correct) / static_cast<double>(r.processed) : 0.0;
    auto lat = [](const LatencyStats& s) { return nlohmann::ordered_json{{"p50_ms", s.p50_ms}, {"p95_ms", s.p95_ms}}; };
    j["latency"] = {{"capture_to_features", lat(r.capture_to_features)},
                    {"features_to_predict", lat(r.features_to_predict)},
                    {"predict_to_command", lat(r.predict_to_command)}};
    j["wall_seconds"] = r.wall_s;
    j["fps"] = r.fps;
    nlohmann::ordered_json cmds = nlohmann::ordered_json::array();
    for (const auto& c : r.commands) cmds.push_back({{"seq", c.seq}, {"gesture", gesture_name(c.gesture)}});
    j["commands"] = cmds;
    j["final_command"] = r.final_command ? nlohmann::ordered_json(gesture_name(*r.final_command)) : nlohmann::ordered_json();
    nlohmann::ordered_json fingers = nlohmann::ordered_json::array();
    for (const auto& f : r.final_state.fingers) fingers.push_back({{"mcp", f.mcp}, {"pip", f.pip}});
    j["final_posture"] = {{"fingers", fingers}, {"thumb_abd", r.final_state.thumb_abd}};
    return j.dump(2) + "\n";
}

} // namespace smg
