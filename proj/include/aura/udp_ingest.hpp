#pragma once

// UDP datagrams of sensor lines, fed into the session host.

#include <array>
#include <atomic>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <boost/asio.hpp>

#include "aura/biometric.hpp"
#include "aura/events.hpp"
#include "aura/host.hpp"

namespace aura {

struct UdpStats {
    std::uint64_t datagrams = 0;
    std::uint64_t samples = 0;
    std::uint64_t bad_lines = 0;
    /// Samples that arrived while no session was running.
    std::uint64_t unrouted = 0;
};

class UdpIngest {
public:
    UdpIngest(boost::asio::io_context& io, SessionHost& host, const std::string& bind, unsigned short port)
        : host_(host),
          socket_(io, boost::asio::ip::udp::endpoint(boost::asio::ip::make_address(bind), port)) {
        receive();
    }

    unsigned short port() const { return socket_.local_endpoint().port(); }

    UdpStats stats() const {
        return {datagrams_.load(), samples_.load(), bad_lines_.load(), unrouted_.load()};
    }

    void close() {
        boost::system::error_code ec;
        socket_.close(ec);
    }

private:
    void receive() {
        socket_.async_receive_from(boost::asio::buffer(buf_), sender_,
                                   [this](boost::system::error_code ec, std::size_t n) {
                                       if (ec == boost::asio::error::operation_aborted) return;
                                       if (!ec) on_datagram(std::string_view(buf_.data(), n));
                                       receive();
                                   });
    }

    void on_datagram(std::string_view payload) {
        ++datagrams_;
        const auto parsed = parse_datagram(payload);
        bad_lines_ += parsed.errors.size();
        if (parsed.samples.empty()) return;
        std::vector<EventPayload> inputs;
        inputs.reserve(parsed.samples.size());
        for (const auto& s : parsed.samples) inputs.emplace_back(ev::SampleIn{s});
        try {
            host_.submit_all(std::move(inputs), std::nullopt);
            samples_ += parsed.samples.size();
        } catch (const Error&) {
            unrouted_ += parsed.samples.size();
        }
    }

    SessionHost& host_;
    boost::asio::ip::udp::socket socket_;
    boost::asio::ip::udp::endpoint sender_;
    std::array<char, 65536> buf_{};
    std::atomic<std::uint64_t> datagrams_{0};
    std::atomic<std::uint64_t> samples_{0};
    std::atomic<std::uint64_t> bad_lines_{0};
    std::atomic<std::uint64_t> unrouted_{0};
};

}  // namespace aura
