#ifndef STREETLIGHT_FAKE_MODEM_HPP
#define STREETLIGHT_FAKE_MODEM_HPP

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "modem.hpp"
#include "time.hpp"

namespace streetlight {

/// Emulates the SIM900 side of the serial link in text mode: answers AT
/// commands, stores submitted SMS, and raises +CMTI for injected messages.
class FakeModem {
public:
    struct StoredSms {
        std::string recipient;
        std::string body;
    };

    /// Bytes written by the host.
    void receive(std::string_view bytes) {
        for (char c : bytes) {
            if (in_body_) {
                if (c == kCtrlZ) {
                    finish_body();
                } else if (c == '\x1B') {
                    in_body_ = false;
                    body_.clear();
                    out_ += "\r\nOK\r\n";
                } else {
                    body_.push_back(c);
                }
                continue;
            }
            if (c == '\r') {
                handle_command(std::exchange(command_, {}));
            } else if (c != '\n') {
                command_.push_back(c);
            }
        }
    }

    /// Bytes the modem has produced for the host; clears them.
    std::string take_output() { return std::exchange(out_, {}); }

    /// A message arrives over the air into SIM storage.
    int inject_incoming(const std::string& sender, const std::string& body, Timestamp at = {}) {
        int index = next_index_++;
        inbox_[index] = Incoming{sender, body, at};
        out_ += "\r\n+CMTI: \"SM\"," + std::to_string(index) + "\r\n";
        return index;
    }

    /// Makes the next `n` submissions end in "+CMS ERROR".
    void fail_next_sends(int n) { fail_sends_ = n; }

    /// Emits arbitrary bytes toward the host (line noise, URCs).
    void inject_raw(std::string_view bytes) { out_ += bytes; }

    const std::vector<StoredSms>& sent() const { return sent_; }
    bool text_mode() const { return text_mode_; }
    std::size_t inbox_size() const { return inbox_.size(); }

private:
    struct Incoming {
        std::string sender;
        std::string body;
        Timestamp at;
    };

    void handle_command(const std::string& raw) {
        std::string cmd = raw;
        while (!cmd.empty() && cmd.back() == ' ') cmd.pop_back();
        if (cmd.empty()) return;
        if (cmd == "AT" || cmd == "ATE0" || cmd == "ATE1") {
            ok();
        } else if (cmd == "AT+CMGF=1") {
            text_mode_ = true;
            ok();
        } else if (cmd == "AT+CMGF=0") {
            text_mode_ = false;
            ok();
        } else if (cmd.starts_with("AT+CMGS=\"") && cmd.ends_with("\"") && cmd.size() > 10) {
            if (!text_mode_) {
                error();
                return;
            }
            recipient_ = cmd.substr(9, cmd.size() - 10);
            in_body_ = true;
            body_.clear();
            out_ += "\r\n> ";
        } else if (cmd.starts_with("AT+CMGR=")) {
            auto it = inbox_.find(std::atoi(cmd.c_str() + 8));
            if (it != inbox_.end()) {
                out_ += "\r\n+CMGR: \"REC UNREAD\",\"" + it->second.sender + "\",\"\",\"" + stamp(it->second.at) + "\"\r\n";
                out_ += it->second.body + "\r\n";
            }
            ok();
        } else if (cmd.starts_with("AT+CMGD=")) {
            inbox_.erase(std::atoi(cmd.c_str() + 8));
            ok();
        } else {
            error();
        }
    }

    void finish_body() {
        in_body_ = false;
        if (fail_sends_ > 0) {
            --fail_sends_;
            out_ += "\r\n+CMS ERROR: 500\r\n";
        } else {
            sent_.push_back({recipient_, body_});
            out_ += "\r\n+CMGS: " + std::to_string(++reference_) + "\r\n\r\nOK\r\n";
        }
        body_.clear();
    }

    static std::string stamp(Timestamp t) {
        // "yy/MM/dd,hh:mm:ss+zz" as SIM900 reports it
        std::string iso = t.iso();
        return iso.substr(2, 2) + "/" + iso.substr(5, 2) + "/" + iso.substr(8, 2) + "," + iso.substr(11, 8) + "+00";
    }

    void ok() { out_ += "\r\nOK\r\n"; }
    void error() { out_ += "\r\nERROR\r\n"; }

    std::string out_;
    std::string command_;
    bool in_body_ = false;
    bool text_mode_ = false;
    std::string recipient_;
    std::string body_;
    std::vector<StoredSms> sent_;
    std::map<int, Incoming> inbox_;
    int next_index_ = 1;
    int reference_ = 0;
    int fail_sends_ = 0;
};

/// Runs host/modem exchanges until neither side has anything to say.
/// Returns all session events in arrival order.
template <class Peer>
std::vector<ModemEvent> pump_link(ModemSession& session, Peer& modem, int max_rounds = 64) {
    std::vector<ModemEvent> events;
    for (int round = 0; round < max_rounds; ++round) {
        bool moved = false;
        for (const auto& chunk : session.take_tx()) {
            modem.receive(chunk);
            moved = true;
        }
        std::string reply = modem.take_output();
        if (!reply.empty()) {
            auto ev = session.feed(reply);
            events.insert(events.end(), ev.begin(), ev.end());
            moved = true;
        }
        if (!moved) break;
    }
    return events;
}

/// Test peer driven by a control script of `expect <regex>` / `reply <literal>`
/// lines. Each host write unit (a command up to CR, or a body up to Ctrl-Z)
/// must match the next expect; replies up to the following expect are then
/// sent. Literals understand \r \n \t \\ \" and \xHH escapes.
class ScriptedModem {
public:
    struct Step {
        enum class Kind { Expect, Reply } kind;
        std::string text;
    };

    static ScriptedModem from_script(std::istream& in) {
        ScriptedModem m;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            if (line.starts_with("expect ")) {
                m.steps_.push_back({Step::Kind::Expect, line.substr(7)});
            } else if (line.starts_with("reply ")) {
                m.steps_.push_back({Step::Kind::Reply, unescape(line.substr(6))});
            } else {
                throw std::invalid_argument("modem script line " + std::to_string(lineno) + ": unknown step");
            }
        }
        m.emit_replies();
        return m;
    }

    static ScriptedModem from_string(const std::string& script) {
        std::istringstream in(script);
        return from_script(in);
    }

    void receive(std::string_view bytes) {
        for (char c : bytes) {
            if (c == '\r' || c == kCtrlZ) {
                check_unit(std::exchange(unit_, {}));
            } else if (c != '\n') {
                unit_.push_back(c);
            }
        }
    }

    std::string take_output() { return std::exchange(out_, {}); }

    bool finished() const { return next_ == steps_.size(); }
    const std::vector<std::string>& failures() const { return failures_; }

    static std::string unescape(std::string_view s) {
        std::string out;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] != '\\' || i + 1 == s.size()) {
                out.push_back(s[i]);
                continue;
            }
            char e = s[++i];
            switch (e) {
                case 'r': out.push_back('\r'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'x':
                    if (i + 2 < s.size()) {
                        out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
                        i += 2;
                    }
                    break;
                default: out.push_back(e); break;
            }
        }
        return out;
    }

private:
    void check_unit(const std::string& unit) {
        if (next_ >= steps_.size() || steps_[next_].kind != Step::Kind::Expect) {
            failures_.push_back("unexpected write: " + unit);
            return;
        }
        if (!std::regex_match(unit, std::regex(steps_[next_].text))) {
            failures_.push_back("expected /" + steps_[next_].text + "/ got: " + unit);
        }
        ++next_;
        emit_replies();
    }

    void emit_replies() {
        while (next_ < steps_.size() && steps_[next_].kind == Step::Kind::Reply) out_ += steps_[next_++].text;
    }

    std::vector<Step> steps_;
    std::size_t next_ = 0;
    std::string unit_;
    std::string out_;
    std::vector<std::string> failures_;
};

}  // namespace streetlight

#endif
