#ifndef STREETLIGHT_MODEM_HPP
#define STREETLIGHT_MODEM_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "power.hpp"
#include "time.hpp"

namespace streetlight {

inline constexpr char kCtrlZ = '\x1A';

enum class FrameError { BodyTooLong, NonPrintable };

inline std::string_view frame_error_name(FrameError e) {
    return e == FrameError::BodyTooLong ? "BodyTooLong" : "NonPrintable";
}

inline bool is_printable_ascii(std::string_view s) {
    for (char c : s) {
        auto u = static_cast<unsigned char>(c);
        if (u < 0x20 || u > 0x7E) return false;
    }
    return true;
}

/// Text-mode SMS submission as three writes: select text mode, address the
/// recipient, then (after the modem's "> " prompt) the body closed by Ctrl-Z.
inline std::variant<std::vector<std::string>, FrameError> frame_send_sms(std::string_view recipient,
                                                                         std::string_view body) {
    if (body.size() > 160) return FrameError::BodyTooLong;
    if (!is_printable_ascii(body) || !is_printable_ascii(recipient) || recipient.find('"') != std::string_view::npos) {
        return FrameError::NonPrintable;
    }
    return std::vector<std::string>{
        "AT+CMGF=1\r",
        "AT+CMGS=\"" + std::string(recipient) + "\"\r",
        std::string(body) + kCtrlZ,
    };
}

/// "FAULT POWER <measured>W/<expected>W AT <HH:MM>"
inline std::string format_alert_body(const FaultAlert& alert) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "FAULT POWER %lldW/%lldW AT %s", static_cast<long long>(std::llround(alert.measured_watts)),
                  static_cast<long long>(std::llround(alert.expected_watts)), alert.raised_at.time_of_day().str().c_str());
    return buf;
}

namespace modem_event {

struct Ok {};
struct Error {};
struct Prompt {};
struct NewMessageIndex {
    int index = 0;
};
struct SmsReceived {
    std::string sender;
    std::string body;
    int index = 0;
};
struct SendSucceeded {
    std::string recipient;
    std::string body;
    int reference = -1;
};
struct SendFailed {
    std::string recipient;
    std::string body;
    int attempt = 0;
};
struct SendAbandoned {
    std::string recipient;
    std::string body;
};
struct OutboxFull {
    std::string dropped_recipient;
    std::string dropped_body;
};
struct GarbageSkipped {
    std::size_t bytes = 0;
};

}  // namespace modem_event

using ModemEvent = std::variant<modem_event::Ok, modem_event::Error, modem_event::Prompt, modem_event::NewMessageIndex,
                                modem_event::SmsReceived, modem_event::SendSucceeded, modem_event::SendFailed,
                                modem_event::SendAbandoned, modem_event::OutboxFull, modem_event::GarbageSkipped>;

struct ModemOptions {
    int max_retries = 3;
    std::size_t outbox_capacity = 16;
    std::size_t max_line = 256;
};

/// Host side of the GSM shield's serial link. Feed it modem bytes; it emits
/// events and queues the bytes to write back. At most one AT transaction is
/// in flight: a message read or an SMS submission.
class ModemSession {
public:
    enum class State { Idle, AwaitingPrompt, AwaitingSendResult, AwaitingReadResult };

    struct Outgoing {
        std::string recipient;
        std::string body;
        int retry_count = 0;
    };

    explicit ModemSession(ModemOptions options = {}) : options_(options) {}

    State state() const { return state_; }
    const std::deque<Outgoing>& outbox() const { return outbox_; }
    const std::optional<Outgoing>& in_flight() const { return in_flight_; }
    bool busy() const { return state_ != State::Idle || !outbox_.empty() || !pending_reads_.empty(); }

    /// Queues an SMS; a full outbox drops its oldest entry.
    std::vector<ModemEvent> enqueue(std::string recipient, std::string body) {
        std::vector<ModemEvent> events;
        if (outbox_.size() >= options_.outbox_capacity) {
            events.push_back(modem_event::OutboxFull{outbox_.front().recipient, outbox_.front().body});
            outbox_.pop_front();
        }
        outbox_.push_back({std::move(recipient), std::move(body), 0});
        pump();
        return events;
    }

    /// Bytes waiting to go to the modem, in write order; clears the queue.
    std::vector<std::string> take_tx() { return std::exchange(tx_, {}); }

    std::vector<ModemEvent> feed(std::string_view bytes) {
        std::vector<ModemEvent> events;
        for (char c : bytes) {
            auto u = static_cast<unsigned char>(c);
            if (c == '\r' || c == '\n') {
                if (!line_.empty()) process_line(events);
                continue;
            }
            if (u < 0x20 || u > 0x7E) {
                garbage_ += 1 + line_.size();
                line_.clear();
                continue;
            }
            line_.push_back(c);
            if (state_ == State::AwaitingPrompt && line_.size() >= 2 && line_.ends_with("> ")) {
                garbage_ += line_.size() - 2;
                line_.clear();
                flush_garbage(events);
                events.push_back(modem_event::Prompt{});
                on_prompt();
                continue;
            }
            if (line_.size() > options_.max_line) {
                garbage_ += line_.size();
                line_.clear();
            }
        }
        flush_garbage(events);
        return events;
    }

    /// No reply arrived within the caller's deadline: fail the transaction.
    std::vector<ModemEvent> timeout() {
        std::vector<ModemEvent> events;
        if (state_ == State::AwaitingPrompt || state_ == State::AwaitingSendResult) {
            send_failed(events);
        } else if (state_ == State::AwaitingReadResult) {
            read_ = {};
            state_ = State::Idle;
        }
        pump();
        return events;
    }

private:
    struct ReadProgress {
        int index = 0;
        std::optional<std::string> sender;
        std::optional<std::string> body;
    };

    void flush_garbage(std::vector<ModemEvent>& events) {
        if (garbage_ > 0) {
            events.push_back(modem_event::GarbageSkipped{garbage_});
            garbage_ = 0;
        }
    }

    static std::optional<int> parse_int(std::string_view s) {
        while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
        if (s.empty() || s.size() > 9) return std::nullopt;
        int v = 0;
        for (char c : s) {
            if (c < '0' || c > '9') return std::nullopt;
            v = v * 10 + (c - '0');
        }
        return v;
    }

    /// Quoted fields of a result line, in order.
    static std::vector<std::string> quoted_fields(std::string_view s) {
        std::vector<std::string> out;
        std::size_t i = 0;
        while ((i = s.find('"', i)) != std::string_view::npos) {
            std::size_t j = s.find('"', i + 1);
            if (j == std::string_view::npos) break;
            out.emplace_back(s.substr(i + 1, j - i - 1));
            i = j + 1;
        }
        return out;
    }

    void process_line(std::vector<ModemEvent>& events) {
        std::string line = std::exchange(line_, {});

        if (state_ == State::AwaitingReadResult && read_.sender && !read_.body) {
            read_.body = line;
            return;
        }
        if (line.starts_with("AT")) return;  // command echo

        if (line == "OK") {
            flush_garbage(events);
            events.push_back(modem_event::Ok{});
            on_final(true, events);
            return;
        }
        if (line == "ERROR" || line.starts_with("+CMS ERROR:") || line.starts_with("+CME ERROR:")) {
            flush_garbage(events);
            events.push_back(modem_event::Error{});
            on_final(false, events);
            return;
        }
        if (line.starts_with("+CMTI:")) {
            auto comma = line.rfind(',');
            if (comma != std::string::npos) {
                if (auto idx = parse_int(std::string_view(line).substr(comma + 1))) {
                    flush_garbage(events);
                    events.push_back(modem_event::NewMessageIndex{*idx});
                    pending_reads_.push_back(*idx);
                    pump();
                    return;
                }
            }
        } else if (line.starts_with("+CMGR:")) {
            auto fields = quoted_fields(line);
            if (state_ == State::AwaitingReadResult && fields.size() >= 2) {
                read_.sender = fields[1];
                return;
            }
        } else if (line.starts_with("+CMGS:")) {
            if (auto ref = parse_int(std::string_view(line).substr(6))) {
                send_reference_ = *ref;
                return;
            }
        }

        // Resynchronise on a final result code glued to preceding noise.
        if (line.ends_with("OK")) {
            garbage_ += line.size() - 2;
            flush_garbage(events);
            events.push_back(modem_event::Ok{});
            on_final(true, events);
            return;
        }
        if (line.ends_with("ERROR")) {
            garbage_ += line.size() - 5;
            flush_garbage(events);
            events.push_back(modem_event::Error{});
            on_final(false, events);
            return;
        }
        garbage_ += line.size();
    }

    void on_prompt() {
        if (in_flight_) tx_.push_back(in_flight_->body + kCtrlZ);
        send_reference_ = -1;
        state_ = State::AwaitingSendResult;
    }

    void on_final(bool ok, std::vector<ModemEvent>& events) {
        switch (state_) {
            case State::Idle:
                break;
            case State::AwaitingPrompt:
                // The text-mode selection answers OK before the prompt arrives.
                if (!ok) send_failed(events);
                break;
            case State::AwaitingSendResult:
                if (ok) {
                    events.push_back(modem_event::SendSucceeded{in_flight_->recipient, in_flight_->body, send_reference_});
                    in_flight_.reset();
                    state_ = State::Idle;
                } else {
                    send_failed(events);
                }
                break;
            case State::AwaitingReadResult:
                if (ok && read_.sender && read_.body) {
                    events.push_back(modem_event::SmsReceived{*read_.sender, *read_.body, read_.index});
                }
                read_ = {};
                state_ = State::Idle;
                break;
        }
        pump();
    }

    void send_failed(std::vector<ModemEvent>& events) {
        Outgoing msg = std::move(*in_flight_);
        in_flight_.reset();
        state_ = State::Idle;
        ++msg.retry_count;
        if (msg.retry_count >= options_.max_retries) {
            events.push_back(modem_event::SendAbandoned{msg.recipient, msg.body});
        } else {
            events.push_back(modem_event::SendFailed{msg.recipient, msg.body, msg.retry_count});
            outbox_.push_front(std::move(msg));
        }
    }

    void pump() {
        if (state_ != State::Idle) return;
        if (!pending_reads_.empty()) {
            read_ = ReadProgress{pending_reads_.front(), std::nullopt, std::nullopt};
            pending_reads_.pop_front();
            tx_.push_back("AT+CMGR=" + std::to_string(read_.index) + "\r");
            state_ = State::AwaitingReadResult;
            return;
        }
        while (!outbox_.empty()) {
            Outgoing next = std::move(outbox_.front());
            outbox_.pop_front();
            auto framed = frame_send_sms(next.recipient, next.body);
            auto* chunks = std::get_if<std::vector<std::string>>(&framed);
            if (!chunks) continue;  // unframeable messages never reach the wire
            tx_.push_back((*chunks)[0]);
            tx_.push_back((*chunks)[1]);
            in_flight_ = std::move(next);
            state_ = State::AwaitingPrompt;
            return;
        }
    }

    ModemOptions options_;
    State state_ = State::Idle;
    std::string line_;
    std::size_t garbage_ = 0;
    std::deque<Outgoing> outbox_;
    std::optional<Outgoing> in_flight_;
    std::deque<int> pending_reads_;
    ReadProgress read_;
    int send_reference_ = -1;
    std::vector<std::string> tx_;
};

/// Functional form of ModemSession::feed.
inline std::pair<ModemSession, std::vector<ModemEvent>> modem_feed(ModemSession session, std::string_view inbound) {
    auto events = session.feed(inbound);
    return {std::move(session), std::move(events)};
}

struct DispatchResult {
    ModemSession session;
    std::vector<std::string> chunks;
    std::vector<ModemEvent> events;
};

/// Queues the fault SMS to the authority and returns whatever is ready to write.
inline DispatchResult dispatch_alert(ModemSession session, const FaultAlert& alert, const std::string& authority) {
    auto events = session.enqueue(authority, format_alert_body(alert));
    auto chunks = session.take_tx();
    return {std::move(session), std::move(chunks), std::move(events)};
}

}  // namespace streetlight

#endif
