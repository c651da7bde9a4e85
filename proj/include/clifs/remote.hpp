#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace clifs::remote {

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

// A chat-completion endpoint. complete() returns the assistant text or
// throws InferenceError.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages) const = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    int backoff_ms = 500;  // doubled after each failed attempt
};

struct EndpointConfig {
    std::string base_url = "https://api.openai.com";  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o";
    std::string api_key_env = "OPENAI_API_KEY";  // read at request time
    double temperature = 0.0;
    int timeout_seconds = 60;
    RetryPolicy retry;
};

// OpenAI-compatible chat completions over HTTP(S). HTTPS requires a build
// with OpenSSL; plain http:// always works. Safe for concurrent calls.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(EndpointConfig config);
    std::string complete(const std::vector<ChatMessage>& messages) const override;

    const EndpointConfig& config() const { return config_; }

private:
    EndpointConfig config_;
};

// Offline stand-in: serves recorded responses. Lookup by the content of the
// last message first; otherwise the queue of unkeyed responses is served in
// order and cycles. File format: JSON {"by_prompt":{...},"sequence":[...]}.
class ReplayChatBackend : public ChatBackend {
public:
    ReplayChatBackend() = default;
    void add_keyed(std::string last_message, std::string response);
    void add_sequential(std::string response);
    static std::unique_ptr<ReplayChatBackend> from_file(const std::string& path);

    std::string complete(const std::vector<ChatMessage>& messages) const override;
    std::size_t calls() const;

private:
    std::vector<std::pair<std::string, std::string>> keyed_;
    std::vector<std::string> sequence_;
    mutable std::mutex mutex_;
    mutable std::size_t cursor_ = 0;
    mutable std::size_t calls_ = 0;
};

// Request body for the chat endpoint; exposed for wire-format tests.
std::string chat_request_body(const EndpointConfig& config, const std::vector<ChatMessage>& messages);
// Extracts choices[0].message.content; FormatError otherwise.
std::string parse_chat_response(const std::string& body);

}  // namespace clifs::remote
