#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include "aura/api_server.hpp"

using namespace aura;

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

json body_of(const ApiResponse& r) { return json::parse(r.body); }

std::string big_stroke(std::size_t points) {
    json path = json::array();
    for (std::size_t i = 0; i < points; ++i) {
        path.push_back(json::array({10.0 + static_cast<double>(i % 200), 10.0 + static_cast<double>(i % 150)}));
    }
    return json{{"color", {1, 2, 3}}, {"width_mm", 1.0}, {"path", path}}.dump();
}

std::vector<json> drain(Subscription& sub) {
    std::vector<json> out;
    while (auto m = sub.try_pop()) out.push_back(json::parse(**m));
    return out;
}

}  // namespace

class RoutesTest : public ::testing::Test {
protected:
    SessionHost host{HostOptions{false}};
    ApiRoutes routes{host, ApiOptions{}};

    void start() { ASSERT_EQ(routes.handle("POST", "/session/start", "{}").status, 200); }
};

TEST_F(RoutesTest, NotStartedIsConflict) {
    EXPECT_EQ(routes.handle("GET", "/state", "").status, 409);
    EXPECT_EQ(routes.handle("POST", "/command", R"({"text":"stop"})").status, 409);
    EXPECT_EQ(body_of(routes.handle("GET", "/canvas.ppm", "")).at("error"), "NotStarted");
    EXPECT_EQ(routes.handle("GET", "/grammar", "").status, 200);
}

TEST_F(RoutesTest, StartCommandAndState) {
    const auto r = routes.handle("POST", "/session/start", R"({"seed":4})");
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(body_of(r).at("config_hash"), config_hash(host.config()));
    EXPECT_EQ(host.config().seed, 4u);

    const auto c = routes.handle("POST", "/command", R"({"text":"Stop"})");
    EXPECT_EQ(c.status, 202);
    const auto cj = body_of(c);
    EXPECT_EQ(cj.at("seq"), 1);
    EXPECT_EQ(cj.at("events"), 2);
    EXPECT_EQ(cj.at("corr"), "c1");

    const auto s = body_of(routes.handle("GET", "/state", ""));
    EXPECT_EQ(s.at("mode"), "Stopped");
    EXPECT_EQ(s.at("last_seq"), 2);
    EXPECT_TRUE(s.at("started").get<bool>());
}

TEST_F(RoutesTest, SchemaErrors) {
    start();
    EXPECT_EQ(routes.handle("POST", "/command", "{not json").status, 400);
    EXPECT_EQ(routes.handle("POST", "/command", R"({"txt":"stop"})").status, 400);
    EXPECT_EQ(body_of(routes.handle("POST", "/command", R"({"text":"   "})")).at("error"), "EmptyInput");
    EXPECT_EQ(routes.handle("POST", "/command", "[1,2]").status, 400);
    EXPECT_EQ(routes.handle("POST", "/artist/stroke", R"({"path":[[1,1]]})").status, 400);
    EXPECT_EQ(routes.handle("POST", "/artist/stroke", R"({"path":[[1,1],[900,1]],"width_mm":1,"color":[0,0,0]})").status,
              400);
    EXPECT_EQ(routes.handle("POST", "/session/start", R"({"no_such_key":1})").status, 400);
    EXPECT_EQ(routes.handle("POST", "/robot/move", R"({"x_mm":"a","y_mm":1})").status, 400);
    const auto oob = routes.handle("POST", "/robot/move", R"({"x_mm":500,"y_mm":1})");
    EXPECT_EQ(oob.status, 400);
    EXPECT_EQ(body_of(oob).at("error"), "OutOfBounds");
    EXPECT_EQ(host.snapshot().last_seq, 0u);
}

TEST_F(RoutesTest, StrokeLimitsAndForms) {
    start();
    EXPECT_EQ(routes.handle("POST", "/artist/stroke", big_stroke(10001)).status, 413);
    EXPECT_EQ(routes.handle("POST", "/artist/stroke", big_stroke(10000)).status, 202);
    const auto wrapped = json{{"stroke", json::parse(big_stroke(5))}}.dump();
    EXPECT_EQ(routes.handle("POST", "/artist/stroke", wrapped).status, 202);
    const auto ppm = routes.handle("GET", "/canvas.ppm", "");
    EXPECT_EQ(ppm.status, 200);
    EXPECT_EQ(ppm.content_type, "image/x-portable-pixmap");
    EXPECT_EQ(canvas_digest(parse_ppm(ppm.body)), host.snapshot().digest);
}

TEST_F(RoutesTest, RobotMove) {
    start();
    EXPECT_EQ(routes.handle("POST", "/robot/move", R"({"x_mm":100,"y_mm":100})").status, 202);
    EXPECT_EQ(host.snapshot().pos, (Point{100, 100}));
    EXPECT_EQ(routes.handle("POST", "/robot/move", R"({"outside":true})").status, 202);
    EXPECT_EQ(host.snapshot().mode, RobotMode::Stopped);
    EXPECT_EQ(routes.handle("POST", "/robot/move", R"({"outside":false})").status, 400);
}

TEST_F(RoutesTest, SensorIsAllOrNothing) {
    start();
    const auto bad = routes.handle("POST", "/sensor", R"({"lines":["PG,0,0.5","PG,oops","PG,80,0.4"]})");
    EXPECT_EQ(bad.status, 400);
    EXPECT_EQ(host.snapshot().last_seq, 0u);
    const auto ok = routes.handle("POST", "/sensor", R"({"lines":"PG,0,0.5\nPG,40,0.6\nHR,80,71"})");
    ASSERT_EQ(ok.status, 202);
    EXPECT_EQ(body_of(ok).at("samples"), 3);
    const auto corr = body_of(ok).at("corr").get<std::string>();
    const auto log = host.log();
    ASSERT_FALSE(log.empty());
    std::size_t inputs = 0;
    for (const auto& e : log) {
        if (is_input(e.payload)) {
            ++inputs;
            EXPECT_EQ(e.corr, std::optional<std::string>(corr));
        } else {
            EXPECT_FALSE(e.corr.has_value());
        }
    }
    EXPECT_EQ(inputs, 3u);
    EXPECT_EQ(host.snapshot().mode, RobotMode::Calibrating);
}

TEST_F(RoutesTest, MethodAndPathErrors) {
    start();
    EXPECT_EQ(routes.handle("GET", "/command", "").status, 405);
    EXPECT_EQ(routes.handle("POST", "/state", "").status, 405);
    EXPECT_EQ(routes.handle("DELETE", "/state", "").status, 405);
    EXPECT_EQ(routes.handle("GET", "/nope", "").status, 404);
    EXPECT_EQ(routes.handle("POST", "/nope", "{}").status, 404);
    EXPECT_EQ(routes.handle("GET", "/state?x=1", "").status, 200);
}

TEST_F(RoutesTest, GrammarListsPhrasesAndPatterns) {
    const auto g = body_of(routes.handle("GET", "/grammar", ""));
    std::string dump = g.dump();
    for (const auto& [phrase, _] : kDirectGrammar) EXPECT_NE(dump.find(std::string(phrase)), std::string::npos);
    for (auto kw : kPatternKeywords) EXPECT_NE(dump.find(std::string(kw)), std::string::npos);
}

TEST_F(RoutesTest, ResetEndsSession) {
    start();
    EXPECT_EQ(routes.handle("POST", "/session/reset", "").status, 200);
    EXPECT_FALSE(host.started());
    EXPECT_EQ(routes.handle("GET", "/state", "").status, 409);
}

TEST_F(RoutesTest, ClientMessages) {
    start();
    EXPECT_FALSE(routes.handle_client_message(R"({"type":"command","corr":"k9","payload":{"text":"pause"}})"));
    const auto log = host.log();
    ASSERT_FALSE(log.empty());
    EXPECT_EQ(log.front().corr, std::optional<std::string>("k9"));

    const auto e1 = routes.handle_client_message("nope");
    ASSERT_TRUE(e1);
    EXPECT_EQ((*e1)["type"], "error");
    const auto e2 = routes.handle_client_message(R"({"type":"dance","corr":"z"})");
    ASSERT_TRUE(e2);
    EXPECT_EQ((*e2)["corr"], "z");
    const auto e3 = routes.handle_client_message(R"({"type":"robot_move","corr":"m","payload":{"x_mm":-4,"y_mm":0}})");
    ASSERT_TRUE(e3);
    EXPECT_EQ((*e3)["payload"]["code"], "OutOfBounds");
    EXPECT_EQ((*e3)["corr"], "m");
}

TEST(SessionHost, SubscribersSeeSnapshotThenEveryEventInOrder) {
    SessionHost host{HostOptions{false}};
    auto before = host.subscribe(100);
    const auto first = drain(*before);
    ASSERT_EQ(first.size(), 1u);
    EXPECT_EQ(first[0]["type"], "snapshot");
    EXPECT_FALSE(first[0]["payload"]["started"].get<bool>());

    host.start(SessionConfig{});
    // Starting a session ends earlier streams.
    const auto ended = drain(*before);
    ASSERT_EQ(ended.size(), 1u);
    EXPECT_EQ(ended[0]["payload"]["code"], "SessionReset");
    EXPECT_TRUE(before->finished());

    auto a = host.subscribe(10000);
    auto b = host.subscribe(10000);
    for (int i = 0; i < 30; ++i) {
        host.tick();
        if (i % 7 == 0) host.submit(ev::CommandIssued{"change colors", DirectCommand::ChangeColors});
    }
    const auto ma = drain(*a);
    const auto mb = drain(*b);
    EXPECT_EQ(ma, mb);
    ASSERT_FALSE(ma.empty());
    EXPECT_EQ(ma[0]["type"], "snapshot");
    std::uint64_t expect = 1;
    int snapshots = 0;
    for (std::size_t i = 1; i < ma.size(); ++i) {
        if (ma[i]["type"] == "event") {
            EXPECT_EQ(ma[i]["seq"], expect);
            ++expect;
        } else {
            EXPECT_EQ(ma[i]["type"], "snapshot");
            EXPECT_EQ(ma[i]["seq"], expect - 1);
            ++snapshots;
        }
    }
    EXPECT_EQ(expect - 1, host.snapshot().last_seq);
    // One snapshot per 500 ms of session time over 3 s.
    EXPECT_EQ(snapshots, 6);
}

TEST(SessionHost, SlowSubscriberGetsTerminalError) {
    SessionHost host{HostOptions{false}};
    host.start(SessionConfig{});
    auto slow = host.subscribe(20);
    auto fast = host.subscribe(100000);
    for (int i = 0; i < 50; ++i) host.tick();
    EXPECT_TRUE(slow->overflowed());
    const auto got = drain(*slow);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0]["payload"]["code"], "SlowConsumer");
    EXPECT_TRUE(slow->finished());
    EXPECT_FALSE(fast->overflowed());
    EXPECT_GT(drain(*fast).size(), 50u);
    EXPECT_EQ(host.subscriber_count(), 1u);
}

TEST(SessionHost, ManualClockStampsTickTimes) {
    SessionHost host{HostOptions{false}};
    host.start(SessionConfig{});
    for (int i = 0; i < 5; ++i) {
        const auto evs = host.tick();
        ASSERT_FALSE(evs.empty());
        EXPECT_EQ(evs.front().at_ms, static_cast<std::uint64_t>(i) * kTickMs);
    }
    EXPECT_THROW(SessionHost{HostOptions{false}}.tick(), Error);
}

TEST(SessionHost, WallClockTicksAdvance) {
    SessionHost host;
    host.start(SessionConfig{});
    std::this_thread::sleep_for(std::chrono::milliseconds(450));
    const auto snap = host.snapshot();
    EXPECT_GE(snap.last_seq, 3u);
    EXPECT_GE(snap.now_ms, 200u);
}

// --- over real sockets ------------------------------------------------------

namespace {

struct Client {
    asio::io_context ioc;
    tcp::socket sock{ioc};

    explicit Client(unsigned short port, int recv_buffer = 0) {
        sock.open(tcp::v4());
        if (recv_buffer > 0) sock.set_option(asio::socket_base::receive_buffer_size(recv_buffer));
        sock.connect({asio::ip::make_address("127.0.0.1"), port});
    }

    http::response<http::string_body> request(http::verb verb, const std::string& target, const std::string& body = "") {
        http::request<http::string_body> req{verb, target, 11};
        req.set(http::field::host, "localhost");
        req.keep_alive(true);
        req.body() = body;
        req.prepare_payload();
        http::write(sock, req);
        beast::flat_buffer buf;
        http::response<http::string_body> res;
        http::read(sock, buf, res);
        return res;
    }
};

struct WsClient {
    asio::io_context ioc;
    websocket::stream<tcp::socket> ws{ioc};
    beast::flat_buffer buf;

    explicit WsClient(unsigned short port, int recv_buffer = 0) {
        ws.next_layer().open(tcp::v4());
        if (recv_buffer > 0) ws.next_layer().set_option(asio::socket_base::receive_buffer_size(recv_buffer));
        ws.next_layer().connect({asio::ip::make_address("127.0.0.1"), port});
        ws.read_message_max(256 * 1024 * 1024);
        ws.handshake("localhost", "/ws");
    }

    std::optional<json> next() {
        beast::error_code ec;
        ws.read(buf, ec);
        if (ec) return std::nullopt;
        auto j = json::parse(beast::buffers_to_string(buf.data()));
        buf.consume(buf.size());
        return j;
    }

    void send(const json& j) { ws.write(asio::buffer(j.dump())); }
};

}  // namespace

TEST(ApiServer, HttpRoundTrip) {
    SessionHost host{HostOptions{false}};
    ApiOptions opts;
    opts.port = 0;
    ApiServer server(host, opts);
    server.start();
    ASSERT_NE(server.port(), 0);

    Client c(server.port());
    EXPECT_EQ(c.request(http::verb::get, "/state").result_int(), 409);
    EXPECT_EQ(c.request(http::verb::post, "/session/start", "{}").result_int(), 200);
    const auto r = c.request(http::verb::post, "/command", R"({"text":"draw a circle"})");
    EXPECT_EQ(r.result_int(), 202);
    EXPECT_EQ(json::parse(r.body())["corr"], "c1");
    const auto ppm = c.request(http::verb::get, "/canvas.ppm");
    EXPECT_EQ(ppm.result_int(), 200);
    EXPECT_EQ(ppm[http::field::content_type], "image/x-portable-pixmap");
    EXPECT_EQ(c.request(http::verb::get, "/missing").result_int(), 404);
    server.stop();
}

TEST(ApiServer, WebSocketStreamsAndAcceptsMessages) {
    SessionHost host{HostOptions{false}};
    ApiOptions opts;
    opts.port = 0;
    ApiServer server(host, opts);
    server.start();
    host.start(SessionConfig{});

    WsClient a(server.port());
    WsClient b(server.port());
    const auto sa = a.next();
    const auto sb = b.next();
    ASSERT_TRUE(sa && sb);
    EXPECT_EQ((*sa)["type"], "snapshot");
    EXPECT_EQ(*sa, *sb);

    a.send(json{{"type", "command"}, {"corr", "mine"}, {"payload", {{"text", "change colors"}}}});
    a.send(json{{"type", "robot_move"}, {"corr", "bad"}, {"payload", {{"x_mm", 9999}, {"y_mm", 0}}}});
    // Messages on one connection are handled in order, so once the error for
    // the second arrives the first has been folded.
    std::vector<json> ga;
    bool error_seen = false;
    while (!error_seen) {
        auto m = a.next();
        ASSERT_TRUE(m);
        if ((*m)["type"] == "error") {
            error_seen = true;
            EXPECT_EQ((*m)["corr"], "bad");
            EXPECT_EQ((*m)["payload"]["code"], "OutOfBounds");
        } else {
            ga.push_back(*m);
        }
    }
    for (int i = 0; i < 6; ++i) host.tick();

    auto collect = [&](WsClient& c, std::size_t events) {
        std::vector<json> got;
        std::size_t seen = 0;
        while (seen < events) {
            auto m = c.next();
            if (!m) break;
            if ((*m)["type"] == "event") ++seen;
            got.push_back(*m);
        }
        return got;
    };
    // One command plus six ticks.
    const auto before = static_cast<std::size_t>(std::count_if(
        ga.begin(), ga.end(), [](const json& m) { return m["type"] == "event"; }));
    const auto rest = collect(a, 7 - before);
    ga.insert(ga.end(), rest.begin(), rest.end());
    auto gb = collect(b, 7);
    std::vector<json> ea, eb;
    for (const auto& m : ga) {
        if (m["type"] == "event") ea.push_back(m);
        EXPECT_NE(m["type"], "error");
    }
    for (const auto& m : gb) {
        if (m["type"] == "event") eb.push_back(m);
        EXPECT_NE(m["type"], "error");
    }
    ASSERT_EQ(ea.size(), 7u);
    EXPECT_EQ(ea, eb);
    EXPECT_EQ(ea[0]["payload"]["corr"], "mine");
    for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_EQ(ea[i]["seq"], i + 1);
    EXPECT_EQ(host.snapshot().palette_index, 1);
    server.stop();
}

TEST(ApiServer, ResetClosesStreams) {
    SessionHost host{HostOptions{false}};
    ApiOptions opts;
    opts.port = 0;
    ApiServer server(host, opts);
    server.start();
    host.start(SessionConfig{});
    WsClient a(server.port());
    ASSERT_TRUE(a.next());
    host.reset();
    const auto m = a.next();
    ASSERT_TRUE(m);
    EXPECT_EQ((*m)["payload"]["code"], "SessionReset");
    EXPECT_FALSE(a.next());
    server.stop();
}

TEST(ApiServer, SlowConsumerIsCutOffNotBuffered) {
    SessionHost host{HostOptions{false}};
    ApiOptions opts;
    opts.port = 0;
    opts.client_buffer = 32;
    opts.socket_send_buffer = 4096;
    ApiServer server(host, opts);
    server.start();
    host.start(SessionConfig{});

    WsClient slow(server.port(), 4096);
    WsClient fast(server.port());
    ASSERT_TRUE(fast.next());
    std::atomic<std::size_t> fast_count{0};
    std::thread reader([&] {
        while (auto m = fast.next()) {
            ++fast_count;
            if ((*m)["type"] == "error") break;
        }
    });

    // Large artist strokes make every event and snapshot big.
    const auto stroke = stroke_from_json(json::parse(big_stroke(1500)));
    for (int i = 0; i < 80; ++i) {
        host.submit(ev::ArtistStroke{stroke});
        host.tick();
    }

    // Now read the slow client: it gets a bounded prefix, then the terminal error.
    std::size_t received = 0;
    std::optional<json> last;
    while (auto m = slow.next()) {
        ++received;
        last = m;
    }
    ASSERT_TRUE(last);
    EXPECT_EQ((*last)["type"], "error");
    EXPECT_EQ((*last)["payload"]["code"], "SlowConsumer");
    EXPECT_LT(received, 160u);

    // The healthy client keeps up and sees everything.
    const auto total = host.snapshot().last_seq;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(20);
    while (fast_count < total && std::chrono::steady_clock::now() < deadline) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    EXPECT_GE(fast_count.load(), total);
    host.reset();
    reader.join();
    server.stop();
}
