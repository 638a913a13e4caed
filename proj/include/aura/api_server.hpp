#pragma once

// HTTP routes and the /ws event stream over Boost.Beast. Route logic lives in
// ApiRoutes, independent of the transport, so it can be exercised directly.

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "aura/biometric.hpp"
#include "aura/command.hpp"
#include "aura/config.hpp"
#include "aura/error.hpp"
#include "aura/events.hpp"
#include "aura/host.hpp"
#include "aura/planner.hpp"

namespace aura {

struct ApiResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

struct ApiOptions {
    std::string bind = "127.0.0.1";
    unsigned short port = 8080;
    int threads = 2;
    std::size_t client_buffer = 1000;
    std::size_t max_stroke_points = 10000;
    /// SO_SNDBUF for accepted sockets; 0 keeps the system default.
    int socket_send_buffer = 0;
    /// Config overrides every /session/start begins from.
    json base_overrides = json::object();
};

/// A request that cannot be accepted, with the HTTP status it maps to.
struct RequestError {
    int status;
    std::string code;
    std::string message;
};

inline json grammar_json() {
    json direct = json::array();
    for (const auto& [phrase, cmd] : kDirectGrammar) {
        direct.push_back({{"phrase", std::string(phrase)}, {"command", std::string(to_string(cmd))}});
    }
    json patterns = json::array();
    for (std::size_t i = 0; i < kPatternKeywords.size(); ++i) {
        patterns.push_back({{"keyword", std::string(kPatternKeywords[i])}, {"strokes", kPatternStrokeCounts[i]}});
    }
    return json{{"direct", direct}, {"patterns", patterns}};
}

class ApiRoutes {
public:
    ApiRoutes(SessionHost& host, ApiOptions opts) : host_(host), opts_(std::move(opts)) {}

    const ApiOptions& options() const { return opts_; }

    ApiResponse handle(std::string_view method, std::string_view target, std::string_view body) {
        try {
            const auto q = target.find('?');
            const std::string_view path = target.substr(0, q);
            if (method == "GET") {
                if (path == "/state") return json_response(200, state_json());
                if (path == "/canvas.ppm") return ApiResponse{200, "image/x-portable-pixmap", host_.canvas_ppm()};
                if (path == "/grammar") return json_response(200, grammar_json());
                if (is_post_route(path)) return error_response({405, "MethodNotAllowed", "use POST"});
                return error_response({404, "NotFound", std::string(path)});
            }
            if (method == "POST") {
                if (!is_post_route(path)) {
                    if (path == "/state" || path == "/canvas.ppm" || path == "/grammar") {
                        return error_response({405, "MethodNotAllowed", "use GET"});
                    }
                    return error_response({404, "NotFound", std::string(path)});
                }
                const json j = parse_body(body);
                const auto kind = route_kind(path);
                return json_response(kind == "start" || kind == "reset" ? 200 : 202, dispatch(kind, j, std::nullopt));
            }
            return error_response({405, "MethodNotAllowed", std::string(method)});
        } catch (const RequestError& e) {
            return error_response(e);
        } catch (const Error& e) {
            return error_response(to_request_error(e));
        } catch (const json::exception& e) {
            return error_response({400, "BadRequest", e.what()});
        }
    }

    /// A client message from the event stream. Success is acknowledged by the
    /// resulting events carrying `corr`; failures come back as an error.
    std::optional<json> handle_client_message(std::string_view text) {
        std::optional<std::string> corr;
        try {
            json msg;
            try {
                msg = json::parse(text);
            } catch (const json::exception& e) {
                throw RequestError{400, "BadJson", e.what()};
            }
            if (!msg.is_object() || !msg.contains("type") || !msg.at("type").is_string()) {
                throw RequestError{400, "BadMessage", "message needs a string 'type'"};
            }
            if (msg.contains("corr")) {
                if (!msg.at("corr").is_string()) throw RequestError{400, "BadMessage", "corr must be a string"};
                corr = msg.at("corr").get<std::string>();
            }
            const auto type = msg.at("type").get<std::string>();
            if (type != "command" && type != "artist_stroke" && type != "robot_move" && type != "sensor" &&
                type != "start" && type != "reset") {
                throw RequestError{400, "BadMessage", "unknown message type '" + type + "'"};
            }
            dispatch(type, msg.value("payload", json::object()), corr);
            return std::nullopt;
        } catch (const RequestError& e) {
            return error_message(e.code, e.message, corr);
        } catch (const Error& e) {
            const auto re = to_request_error(e);
            return error_message(re.code, re.message, corr);
        } catch (const json::exception& e) {
            return error_message("BadRequest", e.what(), corr);
        }
    }

private:
    static bool is_post_route(std::string_view path) {
        return path == "/command" || path == "/artist/stroke" || path == "/robot/move" || path == "/sensor" ||
               path == "/session/start" || path == "/session/reset";
    }

    static std::string route_kind(std::string_view path) {
        if (path == "/command") return "command";
        if (path == "/artist/stroke") return "artist_stroke";
        if (path == "/robot/move") return "robot_move";
        if (path == "/sensor") return "sensor";
        if (path == "/session/start") return "start";
        return "reset";
    }

    static json parse_body(std::string_view body) {
        if (detail::trim(body).empty()) return json::object();
        try {
            return json::parse(body);
        } catch (const json::exception& e) {
            throw RequestError{400, "BadJson", e.what()};
        }
    }

    static RequestError to_request_error(const Error& e) {
        if (e.code() == ErrorCode::NotStarted) return {409, "NotStarted", e.what()};
        return {400, std::string(to_string(e.code())), e.what()};
    }

    static ApiResponse json_response(int status, const json& j) { return ApiResponse{status, "application/json", j.dump()}; }

    static ApiResponse error_response(const RequestError& e) {
        return json_response(e.status, json{{"error", e.code}, {"message", e.message}});
    }

    json state_json() {
        json j = to_json(host_.snapshot());
        j["started"] = true;
        return j;
    }

    void require_started() {
        if (!host_.started()) throw RequestError{409, "NotStarted", "no session is running"};
    }

    std::string corr_or_new(const std::optional<std::string>& corr) { return corr ? *corr : host_.next_corr(); }

    static json accepted(const std::string& corr, const std::vector<SessionEvent>& events) {
        json j{{"corr", corr}, {"events", events.size()}};
        j["seq"] = events.empty() ? json(nullptr) : json(events.front().seq);
        return j;
    }

    json dispatch(const std::string& kind, const json& body, const std::optional<std::string>& corr_in) {
        if (kind == "start") {
            if (!body.is_object()) throw RequestError{400, "BadConfig", "body must be a JSON object of config overrides"};
            json merged = opts_.base_overrides.is_object() ? opts_.base_overrides : json::object();
            merged.merge_patch(body);
            const auto config = config_from_json(merged);
            host_.start(config);
            return json{{"started", true}, {"config_hash", config_hash(config)}};
        }
        if (kind == "reset") {
            host_.reset();
            return json{{"started", false}};
        }

        if (!body.is_object()) throw RequestError{400, "BadRequest", "body must be a JSON object"};
        require_started();
        const auto corr = corr_or_new(corr_in);

        if (kind == "command") {
            if (!body.contains("text") || !body.at("text").is_string()) {
                throw RequestError{400, "BadRequest", "body needs a string 'text'"};
            }
            const auto text = body.at("text").get<std::string>();
            const auto cmd = parse_command(text);
            return accepted(corr, host_.submit(ev::CommandIssued{text, cmd}, corr));
        }

        if (kind == "artist_stroke") {
            const json& sj = body.contains("stroke") ? body.at("stroke") : body;
            if (!sj.is_object() || !sj.contains("path") || !sj.at("path").is_array()) {
                throw RequestError{400, "BadRequest", "stroke needs a path array"};
            }
            if (sj.at("path").size() > opts_.max_stroke_points) {
                throw RequestError{413, "StrokeTooLarge",
                                   "stroke has more than " + std::to_string(opts_.max_stroke_points) + " points"};
            }
            Stroke stroke = stroke_from_json(sj);
            stroke.author = Author::Artist;
            validate_stroke(stroke, host_.config().canvas);
            return accepted(corr, host_.submit(ev::ArtistStroke{stroke}, corr));
        }

        if (kind == "robot_move") {
            if (body.contains("outside")) {
                if (!body.at("outside").is_boolean() || !body.at("outside").get<bool>()) {
                    throw RequestError{400, "BadRequest", "outside must be true when present"};
                }
                return accepted(corr, host_.submit(ev::RobotMoved{std::nullopt}, corr));
            }
            if (!body.contains("x_mm") || !body.contains("y_mm") || !body.at("x_mm").is_number() ||
                !body.at("y_mm").is_number()) {
                throw RequestError{400, "BadRequest", "body needs numeric x_mm and y_mm, or outside:true"};
            }
            const Point p{body.at("x_mm").get<double>(), body.at("y_mm").get<double>()};
            if (!in_bounds(p, host_.config().canvas)) {
                throw RequestError{400, "OutOfBounds", "position is off the canvas; use outside:true"};
            }
            return accepted(corr, host_.submit(ev::RobotMoved{p}, corr));
        }

        // sensor
        std::string payload;
        if (!body.contains("lines")) throw RequestError{400, "BadRequest", "body needs 'lines'"};
        const auto& lines = body.at("lines");
        if (lines.is_string()) {
            payload = lines.get<std::string>();
        } else if (lines.is_array()) {
            for (const auto& l : lines) {
                if (!l.is_string()) throw RequestError{400, "BadRequest", "lines must be strings"};
                payload += l.get<std::string>();
                payload += '\n';
            }
        } else {
            throw RequestError{400, "BadRequest", "lines must be a string or an array of strings"};
        }
        const auto parsed = parse_datagram(payload);
        if (!parsed.errors.empty()) throw RequestError{400, "MalformedLine", parsed.errors.front()};
        std::vector<EventPayload> inputs;
        for (const auto& s : parsed.samples) inputs.emplace_back(ev::SampleIn{s});
        auto events = host_.submit_all(std::move(inputs), corr);
        json j = accepted(corr, events);
        j["samples"] = parsed.samples.size();
        return j;
    }

    SessionHost& host_;
    ApiOptions opts_;
};

namespace net_detail {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

/// Lets host threads post into the io_context only while it is running.
struct PostGate {
    std::mutex mu;
    bool open = true;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket&& socket, SessionHost& host, ApiRoutes& routes, std::shared_ptr<PostGate> gate)
        : ws_(std::move(socket)), host_(host), routes_(routes), gate_(std::move(gate)) {}

    template <typename Body, typename Allocator>
    void run(http::request<Body, http::basic_fields<Allocator>> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) return;
        sub_ = host_.subscribe(routes_.options().client_buffer);
        std::weak_ptr<WsSession> weak = shared_from_this();
        auto ex = ws_.get_executor();
        sub_->set_notify([weak, ex, gate = gate_] {
            std::lock_guard lock(gate->mu);
            if (!gate->open) return;
            asio::post(ex, [weak] {
                if (auto self = weak.lock()) self->pump();
            });
        });
        pump();
        do_read();
    }

    void pump() {
        if (writing_ || closing_) return;
        auto m = sub_->try_pop();
        if (!m) {
            if (sub_->finished()) {
                closing_ = true;
                ws_.async_close(websocket::close_code::normal,
                                beast::bind_front_handler(&WsSession::on_close, shared_from_this()));
            }
            return;
        }
        writing_ = true;
        current_ = std::move(*m);
        ws_.text(true);
        ws_.async_write(asio::buffer(*current_), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        writing_ = false;
        current_.reset();
        if (ec) {
            sub_->close(nullptr);
            return;
        }
        pump();
    }

    void on_close(beast::error_code) {}

    void do_read() {
        ws_.async_read(rbuf_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            sub_->close(nullptr);
            return;
        }
        const std::string text = beast::buffers_to_string(rbuf_.data());
        rbuf_.consume(rbuf_.size());
        if (auto err = routes_.handle_client_message(text)) sub_->push_direct(make_message(*err));
        do_read();
    }

    websocket::stream<beast::tcp_stream> ws_;
    SessionHost& host_;
    ApiRoutes& routes_;
    std::shared_ptr<PostGate> gate_;
    beast::flat_buffer rbuf_;
    std::shared_ptr<Subscription> sub_;
    Message current_;
    bool writing_ = false;
    bool closing_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket&& socket, SessionHost& host, ApiRoutes& routes, std::shared_ptr<PostGate> gate)
        : stream_(std::move(socket)), host_(host), routes_(routes), gate_(std::move(gate)) {}

    void run() {
        asio::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
    }

private:
    void do_read() {
        parser_.emplace();
        parser_->body_limit(64 * 1024 * 1024);
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, *parser_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec == http::error::end_of_stream) {
            stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
            return;
        }
        if (ec == http::error::body_limit) {
            ApiResponse r{413, "application/json", json{{"error", "BodyTooLarge"}, {"message", ec.message()}}.dump()};
            send(r, 11, false);
            return;
        }
        if (ec) return;

        auto req = parser_->release();
        if (websocket::is_upgrade(req)) {
            if (req.target() == "/ws") {
                stream_.expires_never();
                std::make_shared<WsSession>(stream_.release_socket(), host_, routes_, gate_)->run(std::move(req));
                return;
            }
            ApiResponse r{404, "application/json", json{{"error", "NotFound"}, {"message", "websocket only at /ws"}}.dump()};
            send(r, req.version(), false);
            return;
        }
        const auto r = routes_.handle(std::string_view(req.method_string().data(), req.method_string().size()),
                                      std::string_view(req.target().data(), req.target().size()), req.body());
        send(r, req.version(), req.keep_alive());
    }

    void send(const ApiResponse& r, unsigned version, bool keep_alive) {
        auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(r.status), version);
        res->set(http::field::server, "aura");
        res->set(http::field::content_type, r.content_type);
        res->set(http::field::access_control_allow_origin, "*");
        res->keep_alive(keep_alive);
        res->body() = r.body;
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
            self->on_write(ec, res->need_eof());
        });
    }

    void on_write(beast::error_code ec, bool close) {
        if (ec) return;
        if (close) {
            stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
            return;
        }
        do_read();
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    std::optional<http::request_parser<http::string_body>> parser_;
    SessionHost& host_;
    ApiRoutes& routes_;
    std::shared_ptr<PostGate> gate_;
};

}  // namespace net_detail

/// Owns the io_context and its worker threads. Other listeners (UDP ingest)
/// may be attached to `io()` before `start()`.
class ApiServer {
public:
    ApiServer(SessionHost& host, ApiOptions opts)
        : host_(host), routes_(host, opts), opts_(std::move(opts)), acceptor_(ioc_) {}

    ~ApiServer() { stop(); }

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    boost::asio::io_context& io() { return ioc_; }
    ApiRoutes& routes() { return routes_; }

    /// Binds and starts serving; port 0 picks a free port.
    void start() {
        namespace asio = boost::asio;
        using tcp = asio::ip::tcp;
        const tcp::endpoint ep{asio::ip::make_address(opts_.bind), opts_.port};
        acceptor_.open(ep.protocol());
        acceptor_.set_option(asio::socket_base::reuse_address(true));
        acceptor_.bind(ep);
        acceptor_.listen(asio::socket_base::max_listen_connections);
        port_ = acceptor_.local_endpoint().port();
        do_accept();
        const int n = std::max(1, opts_.threads);
        for (int i = 0; i < n; ++i) threads_.emplace_back([this] { ioc_.run(); });
    }

    void stop() {
        if (stopped_) return;
        stopped_ = true;
        {
            std::lock_guard lock(gate_->mu);
            gate_->open = false;
        }
        boost::system::error_code ec;
        acceptor_.close(ec);
        ioc_.stop();
        for (auto& t : threads_) {
            if (t.joinable()) t.join();
        }
        threads_.clear();
    }

    unsigned short port() const { return port_; }

private:
    void do_accept() {
        acceptor_.async_accept(boost::asio::make_strand(ioc_), [this](boost::system::error_code ec,
                                                                       boost::asio::ip::tcp::socket socket) {
            if (ec) {
                if (ec == boost::asio::error::operation_aborted) return;
            } else {
                if (opts_.socket_send_buffer > 0) {
                    socket.set_option(boost::asio::socket_base::send_buffer_size(opts_.socket_send_buffer), ec);
                }
                std::make_shared<net_detail::HttpSession>(std::move(socket), host_, routes_, gate_)->run();
            }
            do_accept();
        });
    }

    SessionHost& host_;
    ApiRoutes routes_;
    ApiOptions opts_;
    boost::asio::io_context ioc_;
    boost::asio::ip::tcp::acceptor acceptor_;
    std::vector<std::thread> threads_;
    std::shared_ptr<net_detail::PostGate> gate_ = std::make_shared<net_detail::PostGate>();
    unsigned short port_ = 0;
    bool stopped_ = false;
};

}  // namespace aura
