#pragma once

// HTTP backend. One POST per sample call:
//   request   {"input": <text>, "n": <int>, "seed": <int, optional>}\n
//   response  {"hypotheses": [{"text": <text>, "avg_loglik": <real>}, ...]}\n
// A response that is not JSON, lacks the fields above, or carries more than
// n hypotheses is malformed.

#include <chrono>
#include <regex>
#include <string>

#include <httplib.h>

#include "perfpatch/error.hpp"
#include "perfpatch/suggestion_engine.hpp"
#include "perfpatch/util/jsonl.hpp"

namespace perfpatch {

struct RemoteEndpoint {
    std::string url = "http://127.0.0.1:8080/sample";
    std::chrono::milliseconds timeout{30000};
    std::string backend_id = "remote";
};

namespace detail {

struct ParsedUrl {
    std::string host;
    int port = 80;
    std::string path = "/";
};

inline ParsedUrl parse_url(const std::string& url) {
    static const std::regex re(R"(^http://([^/:]+)(?::(\d+))?(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ConfigError("unsupported endpoint url: " + url);
    ParsedUrl out;
    out.host = m[1];
    if (m[2].matched) out.port = std::stoi(m[2]);
    if (m[3].matched) out.path = m[3];
    return out;
}

}  // namespace detail

/// Validates a response body against the protocol.
inline std::vector<Hypothesis> parse_remote_response(const std::string& body, std::size_t n) {
    util::json j;
    try {
        j = util::json::parse(body);
    } catch (const util::json::exception& e) {
        throw MalformedResponse(std::string("response is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("hypotheses") || !j["hypotheses"].is_array())
        throw MalformedResponse("response lacks a 'hypotheses' array");
    const auto& arr = j["hypotheses"];
    if (arr.size() > n)
        throw MalformedResponse("response has " + std::to_string(arr.size()) + " hypotheses for n = " + std::to_string(n));
    std::vector<Hypothesis> out;
    for (const auto& h : arr) {
        if (!h.is_object() || !h.contains("text") || !h["text"].is_string() || !h.contains("avg_loglik") ||
            !h["avg_loglik"].is_number())
            throw MalformedResponse("hypothesis needs string 'text' and numeric 'avg_loglik'");
        out.push_back({h["text"].get<std::string>(), h["avg_loglik"].get<double>()});
    }
    return out;
}

class RemoteBackend : public Backend {
public:
    explicit RemoteBackend(RemoteEndpoint ep) : ep_(std::move(ep)), url_(detail::parse_url(ep_.url)) {}

    std::string id() const override { return ep_.backend_id; }
    bool remote() const override { return true; }

    std::vector<Hypothesis> sample(const std::string& input_text, std::size_t n,
                                   std::optional<std::uint64_t> seed) override {
        util::json req{{"input", input_text}, {"n", n}};
        if (seed) req["seed"] = *seed;
        std::string body = req.dump(-1, ' ', false, util::json::error_handler_t::replace) + "\n";

        httplib::Client cli(url_.host, url_.port);
        auto secs = std::chrono::duration_cast<std::chrono::seconds>(ep_.timeout);
        auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(ep_.timeout - secs);
        cli.set_connection_timeout(secs.count(), usecs.count());
        cli.set_read_timeout(secs.count(), usecs.count());
        cli.set_write_timeout(secs.count(), usecs.count());
        auto start = std::chrono::steady_clock::now();
        auto res = cli.Post(url_.path, body, "application/json");
        if (!res) {
            auto elapsed = std::chrono::steady_clock::now() - start;
            if (res.error() == httplib::Error::Read && elapsed >= ep_.timeout * 9 / 10)
                throw Timeout("no response from " + ep_.url + " within " + std::to_string(ep_.timeout.count()) + " ms");
            if (res.error() == httplib::Error::Connection && elapsed >= ep_.timeout * 9 / 10)
                throw Timeout("connecting to " + ep_.url + " timed out");
            throw BackendFailure("request to " + ep_.url + " failed: " + httplib::to_string(res.error()));
        }
        if (res->status != 200)
            throw BackendFailure("endpoint " + ep_.url + " answered HTTP " + std::to_string(res->status));
        return parse_remote_response(res->body, n);
    }

private:
    RemoteEndpoint ep_;
    detail::ParsedUrl url_;
};

}  // namespace perfpatch
