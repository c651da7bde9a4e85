#include "clifs/remote.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "clifs/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace clifs::remote {

using nlohmann::json;

std::string chat_request_body(const EndpointConfig& config, const std::vector<ChatMessage>& messages) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return json{{"model", config.model}, {"messages", msgs}, {"temperature", config.temperature}}.dump();
}

std::string parse_chat_response(const std::string& body) {
    try {
        const auto j = json::parse(body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("chat response: ") + e.what());
    }
}

HttpChatBackend::HttpChatBackend(EndpointConfig config) : config_(std::move(config)) {
    if (config_.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be at least 1");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (config_.base_url.starts_with("https://"))
        throw ConfigError("this build has no TLS support; use an http:// endpoint");
#endif
}

std::string HttpChatBackend::complete(const std::vector<ChatMessage>& messages) const {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_write_timeout(config_.timeout_seconds, 0);

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const auto body = chat_request_body(config_, messages);

    std::string last_error;
    int backoff = config_.retry.backoff_ms;
    for (int attempt = 0; attempt < config_.retry.max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        auto res = client.Post(config_.path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) throw InferenceError("chat endpoint returned HTTP " + std::to_string(res->status));
        try {
            return parse_chat_response(res->body);
        } catch (const FormatError& e) {
            throw InferenceError(e.what());
        }
    }
    throw InferenceError("chat endpoint failed after " + std::to_string(config_.retry.max_attempts) +
                         " attempts: " + last_error);
}

void ReplayChatBackend::add_keyed(std::string last_message, std::string response) {
    std::lock_guard lock(mutex_);
    keyed_.emplace_back(std::move(last_message), std::move(response));
}

void ReplayChatBackend::add_sequential(std::string response) {
    std::lock_guard lock(mutex_);
    sequence_.push_back(std::move(response));
}

std::unique_ptr<ReplayChatBackend> ReplayChatBackend::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open replay file '" + path + "'");
    auto b = std::make_unique<ReplayChatBackend>();
    try {
        json j;
        in >> j;
        if (j.contains("by_prompt"))
            for (auto it = j["by_prompt"].begin(); it != j["by_prompt"].end(); ++it)
                b->add_keyed(it.key(), it.value().get<std::string>());
        if (j.contains("sequence"))
            for (const auto& s : j["sequence"]) b->add_sequential(s.get<std::string>());
    } catch (const json::exception& e) {
        throw FormatError("replay file '" + path + "': " + e.what());
    }
    return b;
}

std::string ReplayChatBackend::complete(const std::vector<ChatMessage>& messages) const {
    std::lock_guard lock(mutex_);
    ++calls_;
    if (!messages.empty()) {
        for (const auto& [key, response] : keyed_)
            if (key == messages.back().content) return response;
    }
    if (sequence_.empty()) throw InferenceError("replay backend has no response for this prompt");
    return sequence_[cursor_++ % sequence_.size()];
}

std::size_t ReplayChatBackend::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

}  // namespace clifs::remote
