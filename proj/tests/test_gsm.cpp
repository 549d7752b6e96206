#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "streetlight/command.hpp"
#include "streetlight/fake_modem.hpp"
#include "streetlight/modem.hpp"

using namespace streetlight;

namespace {

const std::set<std::string> kWhitelist{"+8801711111111"};

SmsMessage sms(std::string body, std::string sender = "+8801711111111") {
    return SmsMessage{std::move(sender), std::move(body), Timestamp{}};
}

Command parsed(std::string_view text) {
    auto r = parse_command_text(text);
    if (auto* rej = std::get_if<ParseRejection>(&r)) {
        ADD_FAILURE() << "rejected '" << text << "' at " << rej->position;
        return cmd::Status{};
    }
    return std::get<Command>(r);
}

std::size_t bad_at(std::string_view text) {
    auto r = parse_command_text(text);
    if (!std::holds_alternative<ParseRejection>(r)) {
        ADD_FAILURE() << "accepted '" << text << "'";
        return SIZE_MAX;
    }
    EXPECT_EQ(std::get<ParseRejection>(r).kind, ParseRejection::Kind::BadSyntax);
    return std::get<ParseRejection>(r).position;
}

template <class E>
std::vector<E> events_of(const std::vector<ModemEvent>& events) {
    std::vector<E> out;
    for (const auto& e : events) {
        if (auto* p = std::get_if<E>(&e)) out.push_back(*p);
    }
    return out;
}

Command random_command(std::mt19937_64& rng) {
    auto tod = [&] { return TimeOfDay(static_cast<int>(rng() % 1440)); };
    switch (rng() % 6) {
        case 0: return cmd::SetLane{static_cast<int>(1 + rng() % 999), rng() % 2 ? Relay::On : Relay::Off};
        case 1: return cmd::SetMode{static_cast<Mode>(rng() % 3)};
        case 2: {
            cmd::SetTimes t{tod(), tod(), std::nullopt};
            if (rng() % 2) t.sleep = SleepWindow{tod(), tod()};
            return t;
        }
        case 3: return cmd::Status{};
        case 4: return cmd::DeviceOn{};
        default: return cmd::DeviceOff{};
    }
}

}  // namespace

TEST(Grammar, SpecExamples) {
    EXPECT_EQ(std::get<Command>(parse_sms(sms("LANE 2 ON"), kWhitelist)), Command(cmd::SetLane{2, Relay::On}));
    auto unauth = parse_sms(sms("LANE 2 ON", "+8809999999999"), kWhitelist);
    EXPECT_EQ(std::get<ParseRejection>(unauth).kind, ParseRejection::Kind::Unauthorized);
    EXPECT_EQ(std::get<Command>(parse_sms(sms("SETTIME 18:30 05:45 SLEEP 01:00 04:00"), kWhitelist)),
              Command(cmd::SetTimes{TimeOfDay::hm(18, 30), TimeOfDay::hm(5, 45),
                                    SleepWindow{TimeOfDay::hm(1, 0), TimeOfDay::hm(4, 0)}}));
}

TEST(Grammar, UnauthorizedBeforeSyntax) {
    auto r = parse_sms(sms("garbage ###", "+1"), kWhitelist);
    EXPECT_EQ(std::get<ParseRejection>(r).kind, ParseRejection::Kind::Unauthorized);
}

TEST(Grammar, CaseInsensitiveAndTrimmed) {
    EXPECT_EQ(parsed("lane 3 off"), Command(cmd::SetLane{3, Relay::Off}));
    EXPECT_EQ(parsed("  Mode Semi\r\n"), Command(cmd::SetMode{Mode::SemiAuto}));
    EXPECT_EQ(parsed("mode auto"), Command(cmd::SetMode{Mode::FullAuto}));
    EXPECT_EQ(parsed("MODE MANUAL"), Command(cmd::SetMode{Mode::Manual}));
    EXPECT_EQ(parsed("status"), Command(cmd::Status{}));
    EXPECT_EQ(parsed("DEVICE off"), Command(cmd::DeviceOff{}));
    EXPECT_EQ(parsed("device on"), Command(cmd::DeviceOn{}));
    EXPECT_EQ(parsed("settime 18:00 06:00"), Command(cmd::SetTimes{TimeOfDay::hm(18, 0), TimeOfDay::hm(6, 0), std::nullopt}));
}

TEST(Grammar, RejectionPositions) {
    EXPECT_EQ(bad_at(""), 0u);
    EXPECT_EQ(bad_at("LAMP 1 ON"), 0u);
    EXPECT_EQ(bad_at("LANE  1 ON"), 5u);  // doubled space
    EXPECT_EQ(bad_at("LANE X ON"), 5u);
    EXPECT_EQ(bad_at("LANE 0 ON"), 5u);
    EXPECT_EQ(bad_at("LANE 1000 ON"), 5u);
    EXPECT_EQ(bad_at("LANE 1 MAYBE"), 7u);
    EXPECT_EQ(bad_at("LANE 1"), 6u);
    EXPECT_EQ(bad_at("LANE 1 ON NOW"), 10u);
    EXPECT_EQ(bad_at("MODE TURBO"), 5u);
    EXPECT_EQ(bad_at("SETTIME 25:00 06:00"), 8u);
    EXPECT_EQ(bad_at("SETTIME 18:00 06:00 NAP 01:00 02:00"), 20u);
    EXPECT_EQ(bad_at("SETTIME 18:00 06:00 SLEEP 01:00"), 31u);
    EXPECT_EQ(bad_at("STATUS NOW"), 7u);
    EXPECT_EQ(bad_at(std::string(161, 'A')), 160u);
}

TEST(Grammar, RenderParseRoundTrip) {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 5000; ++k) {
        Command c = random_command(rng);
        const std::string text = render_command(c);
        auto back = parse_command_text(text);
        ASSERT_TRUE(std::holds_alternative<Command>(back)) << text;
        EXPECT_EQ(std::get<Command>(back), c) << text;
    }
}

TEST(Framing, ExactChunks) {
    auto r = frame_send_sms("+880171", "FAULT: POWER LOW");
    ASSERT_TRUE((std::holds_alternative<std::vector<std::string>>(r)));
    const std::vector<std::string> want{"AT+CMGF=1\r", "AT+CMGS=\"+880171\"\r", std::string("FAULT: POWER LOW") + '\x1A'};
    EXPECT_EQ(std::get<std::vector<std::string>>(r), want);
}

TEST(Framing, Limits) {
    EXPECT_EQ(std::get<FrameError>(frame_send_sms("+1", std::string(161, 'x'))), FrameError::BodyTooLong);
    EXPECT_TRUE((std::holds_alternative<std::vector<std::string>>(frame_send_sms("+1", std::string(160, 'x')))));
    EXPECT_EQ(std::get<FrameError>(frame_send_sms("+1", std::string("a\0b", 3))), FrameError::NonPrintable);
    EXPECT_EQ(std::get<FrameError>(frame_send_sms("+1", "line\nbreak")), FrameError::NonPrintable);
}

TEST(Framing, FakeModemIsTheOracle) {
    // Every framed message arrives once, byte-identical, at the fake modem.
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> len(0, 160), ch(0x20, 0x7E);
    for (int k = 0; k < 300; ++k) {
        std::string body(static_cast<std::size_t>(len(rng)), ' ');
        for (char& c : body) c = static_cast<char>(ch(rng));
        FakeModem modem;
        auto framed = std::get<std::vector<std::string>>(frame_send_sms("+8801711111111", body));
        modem.receive(framed[0]);
        modem.receive(framed[1]);
        EXPECT_TRUE(modem.take_output().ends_with("> "));
        modem.receive(framed[2]);
        ASSERT_EQ(modem.sent().size(), 1u);
        EXPECT_EQ(modem.sent()[0].body, body);
        EXPECT_EQ(modem.sent()[0].recipient, "+8801711111111");
    }
}

TEST(ModemFeed, NewMessageNotice) {
    auto [session, events] = modem_feed(ModemSession{}, "+CMTI: \"SM\",3\r\n");
    ASSERT_EQ(events.size(), 1u);
    EXPECT_EQ(std::get<modem_event::NewMessageIndex>(events[0]).index, 3);
    EXPECT_EQ(session.take_tx(), std::vector<std::string>{"AT+CMGR=3\r"});
    EXPECT_EQ(session.state(), ModemSession::State::AwaitingReadResult);
}

TEST(ModemFeed, SplitAcrossCalls) {
    ModemSession s;
    EXPECT_TRUE(s.feed("O").empty());
    auto ev = s.feed("K\r\n");
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_TRUE(std::holds_alternative<modem_event::Ok>(ev[0]));
}

TEST(ModemFeed, GarbageThenOk) {
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        std::mt19937_64 rng(seed);
        std::string noise(16, '\0');
        for (char& c : noise) c = static_cast<char>(rng() & 0xFF);
        ModemSession s;
        auto ev = s.feed(noise + "OK\r\n");
        ASSERT_FALSE(ev.empty());
        EXPECT_TRUE(std::holds_alternative<modem_event::Ok>(ev.back())) << "seed " << seed;
        std::size_t skipped = 0;
        for (const auto& g : events_of<modem_event::GarbageSkipped>(ev)) skipped += g.bytes;
        const auto line_breaks = static_cast<std::size_t>(std::count(noise.begin(), noise.end(), '\r') +
                                                          std::count(noise.begin(), noise.end(), '\n'));
        EXPECT_EQ(skipped, 16 - line_breaks) << "seed " << seed;
    }
}

TEST(ModemFeed, OverlongLineDropped) {
    ModemSession s;
    auto ev = s.feed(std::string(1000, 'Z') + "\r\nOK\r\n");
    ASSERT_EQ(ev.size(), 2u);
    EXPECT_EQ(std::get<modem_event::GarbageSkipped>(ev[0]).bytes, 1000u);
    EXPECT_TRUE(std::holds_alternative<modem_event::Ok>(ev[1]));
}

TEST(ModemFeed, FuzzThenOk) {
    std::mt19937_64 rng(99);
    ModemSession s;
    for (int chunk = 0; chunk < 100; ++chunk) {
        std::string bytes(1000, '\0');
        for (char& c : bytes) c = static_cast<char>(rng() & 0xFF);
        s.feed(bytes);
    }
    auto ev = s.feed("\r\nOK\r\n");
    ASSERT_FALSE(ev.empty());
    EXPECT_TRUE(std::holds_alternative<modem_event::Ok>(ev.back()));
}

TEST(ModemSession, SendThroughFakeModem) {
    ModemSession s;
    FakeModem modem;
    s.enqueue("+8801711111111", "OK LANE 1 OFF");
    EXPECT_EQ(s.state(), ModemSession::State::AwaitingPrompt);
    auto ev = pump_link(s, modem);
    auto done = events_of<modem_event::SendSucceeded>(ev);
    ASSERT_EQ(done.size(), 1u);
    EXPECT_EQ(done[0].reference, 1);
    ASSERT_EQ(modem.sent().size(), 1u);
    EXPECT_EQ(modem.sent()[0].body, "OK LANE 1 OFF");
    EXPECT_TRUE(modem.text_mode());
    EXPECT_FALSE(s.busy());
}

TEST(ModemSession, ReceiveThroughFakeModem) {
    ModemSession s;
    FakeModem modem;
    modem.inject_incoming("+8801711111111", "LANE 1 OFF");
    auto got = events_of<modem_event::SmsReceived>(pump_link(s, modem));
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].sender, "+8801711111111");
    EXPECT_EQ(got[0].body, "LANE 1 OFF");
}

TEST(ModemSession, RetriesThenAbandons) {
    ModemSession s;
    FakeModem modem;
    modem.fail_next_sends(3);
    s.enqueue("+1", "hello");
    auto ev = pump_link(s, modem);
    EXPECT_EQ(events_of<modem_event::SendFailed>(ev).size(), 2u);
    auto gone = events_of<modem_event::SendAbandoned>(ev);
    ASSERT_EQ(gone.size(), 1u);
    EXPECT_EQ(gone[0].body, "hello");
    EXPECT_TRUE(modem.sent().empty());
    EXPECT_FALSE(s.busy());
}

TEST(ModemSession, RetrySucceedsWithinBound) {
    ModemSession s;
    FakeModem modem;
    modem.fail_next_sends(2);
    s.enqueue("+1", "hello");
    auto ev = pump_link(s, modem);
    EXPECT_EQ(events_of<modem_event::SendFailed>(ev).size(), 2u);
    EXPECT_EQ(events_of<modem_event::SendSucceeded>(ev).size(), 1u);
    EXPECT_EQ(modem.sent().size(), 1u);
}

TEST(ModemSession, TimeoutCountsAsFailure) {
    ModemSession s;
    s.enqueue("+1", "hello");
    s.take_tx();
    auto ev = s.timeout();
    ASSERT_EQ(events_of<modem_event::SendFailed>(ev).size(), 1u);
    // the retry goes straight back on the wire
    EXPECT_EQ(s.take_tx().size(), 2u);
}

TEST(ModemSession, OutboxBoundDropsOldest) {
    ModemSession s;
    s.enqueue("+1", "m0");  // goes in flight; the modem never answers
    for (int k = 1; k <= 16; ++k) EXPECT_TRUE(s.enqueue("+1", "m" + std::to_string(k)).empty());
    EXPECT_EQ(s.outbox().size(), 16u);
    auto ev = s.enqueue("+1", "m17");
    auto full = events_of<modem_event::OutboxFull>(ev);
    ASSERT_EQ(full.size(), 1u);
    EXPECT_EQ(full[0].dropped_body, "m1");
    EXPECT_EQ(s.outbox().size(), 16u);
    EXPECT_EQ(s.outbox().back().body, "m17");
    EXPECT_EQ(s.in_flight()->body, "m0");
}

TEST(ModemSession, AtMostOneInFlight) {
    ModemSession s;
    for (int k = 0; k < 5; ++k) s.enqueue("+1", "x" + std::to_string(k));
    EXPECT_EQ(s.take_tx().size(), 2u);  // CMGF + CMGS for the first message only
    EXPECT_TRUE(s.take_tx().empty());
    EXPECT_EQ(s.outbox().size(), 4u);
}

TEST(DispatchAlert, TemplateAndChunks) {
    FaultAlert a{FaultKind::PowerBelowThreshold, 5000.0, 7500.0, Timestamp::at(make_date(2019, 7, 22), TimeOfDay::hm(2, 10))};
    EXPECT_EQ(format_alert_body(a), "FAULT POWER 5000W/7500W AT 02:10");
    auto r = dispatch_alert(ModemSession{}, a, "+8801711111111");
    EXPECT_EQ(r.chunks, (std::vector<std::string>{"AT+CMGF=1\r", "AT+CMGS=\"+8801711111111\"\r"}));
    EXPECT_EQ(r.session.in_flight()->body, "FAULT POWER 5000W/7500W AT 02:10");
}

TEST(ScriptedModem, AlertFixture) {
    std::ifstream in(STREETLIGHT_FIXTURES "/send_alert.script");
    ASSERT_TRUE(in);
    auto peer = ScriptedModem::from_script(in);
    FaultAlert a{FaultKind::PowerBelowThreshold, 5000.0, 7500.0, Timestamp::at(make_date(2019, 7, 22), TimeOfDay::hm(2, 10))};
    auto r = dispatch_alert(ModemSession{}, a, "+8801711111111");
    auto session = std::move(r.session);
    for (const auto& c : r.chunks) peer.receive(c);
    auto ev = pump_link(session, peer);
    EXPECT_TRUE(peer.failures().empty()) << peer.failures().front();
    EXPECT_TRUE(peer.finished());
    auto done = events_of<modem_event::SendSucceeded>(ev);
    ASSERT_EQ(done.size(), 1u);
    EXPECT_EQ(done[0].reference, 17);
}

TEST(ScriptedModem, ReadFixture) {
    std::ifstream in(STREETLIGHT_FIXTURES "/read_command.script");
    ASSERT_TRUE(in);
    auto peer = ScriptedModem::from_script(in);
    ModemSession session;
    auto got = events_of<modem_event::SmsReceived>(pump_link(session, peer));
    EXPECT_TRUE(peer.failures().empty());
    EXPECT_TRUE(peer.finished());
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].index, 3);
    EXPECT_EQ(got[0].body, "LANE 1 OFF");
    EXPECT_EQ(std::get<Command>(parse_sms(sms(got[0].body, got[0].sender), kWhitelist)), Command(cmd::SetLane{1, Relay::Off}));
}

TEST(ScriptedModem, MismatchRecorded) {
    auto peer = ScriptedModem::from_string("expect AT\\+CMGF=0\nreply \\r\\nOK\\r\\n\n");
    peer.receive("AT+CMGF=1\r");
    ASSERT_EQ(peer.failures().size(), 1u);
    peer.receive("AT\r");
    EXPECT_EQ(peer.failures().size(), 2u);
    EXPECT_THROW(ScriptedModem::from_string("send nothing\n"), std::invalid_argument);
}
