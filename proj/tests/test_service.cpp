#include <gtest/gtest.h>

#include <algorithm>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "slg/io.hpp"
#include "slg/service.hpp"

using namespace slg;

namespace {

std::vector<WorldMap> bundled() { return load_map_dir(std::string(SLG_DATA_DIR) + "/maps"); }

nlohmann::json demo_session(std::uint64_t seed, const std::string& mode = "human-robot") {
  return {{"map", "demo"}, {"mode", mode}, {"seed", seed}};
}

std::vector<nlohmann::json> of_type(const nlohmann::json& events, const std::string& type) {
  std::vector<nlohmann::json> out;
  for (const auto& e : events)
    if (e["type"] == type) out.push_back(e);
  return out;
}

bool same_belief(const BeliefGrid& a, const BeliefGrid& b) {
  const auto x = a.log_weights().values(), y = b.log_weights().values();
  return std::equal(x.begin(), x.end(), y.begin(), y.end());
}

struct Reply {
  int status = 0;
  nlohmann::json body;
};

Reply request(unsigned short port, http::verb verb, const std::string& target, const nlohmann::json& body = nullptr) {
  net::io_context ioc;
  tcp::socket sock(ioc);
  sock.connect({net::ip::make_address("127.0.0.1"), port});
  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "localhost");
  if (!body.is_null()) req.body() = body.dump();
  req.prepare_payload();
  http::write(sock, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(sock, buf, res);
  beast::error_code ec;
  sock.shutdown(tcp::socket::shutdown_both, ec);
  return {static_cast<int>(res.result_int()), nlohmann::json::parse(res.body())};
}

}  // namespace

TEST(Bind, ParsesHostAndPort) {
  EXPECT_EQ(parse_bind(nullptr).port, 8080);
  EXPECT_EQ(parse_bind("0.0.0.0:9000").host, "0.0.0.0");
  EXPECT_EQ(parse_bind("0.0.0.0:9000").port, 9000);
  EXPECT_EQ(parse_bind("9100").port, 9100);
  EXPECT_EQ(parse_bind(":0").port, 0);
  EXPECT_THROW(parse_bind("host:port"), ConfigError);
  EXPECT_THROW(parse_bind("host:70000"), ConfigError);
}

TEST(Session, DemoSequenceLowersEntropyEachTime) {
  SessionManager mgr(bundled());
  auto s = mgr.create(demo_session(1));
  double h = entropy(s->belief());
  for (const char* text : {"you can find the bag around building 4", "the bag's close to building 6",
                           "the bag's not in front of building 5"}) {
    const auto r = s->sentence(text);
    ASSERT_TRUE(r["ok"].get<bool>()) << r.dump();
    EXPECT_LT(r["entropy"].get<double>(), h);
    h = r["entropy"].get<double>();
  }
  const auto first = of_type(s->state()["events"], "sentence").at(0);
  EXPECT_EQ(first["observations"][0]["relation"], "around");
  EXPECT_EQ(first["observations"][0]["landmark"], "b4");
}

TEST(Session, UnknownRelationIsStructuredAndLeavesBeliefAlone) {
  SessionManager mgr(bundled());
  auto s = mgr.create(demo_session(2));
  const auto before = s->belief();
  const auto r = s->sentence("xyzzy building 1");
  EXPECT_FALSE(r["ok"].get<bool>());
  EXPECT_EQ(r["error"]["kind"], "UnknownRelation");
  EXPECT_EQ(r["error"]["phrase"], "xyzzy");
  EXPECT_TRUE(same_belief(before, s->belief()));
  const auto ev = of_type(s->events(), "sentence");
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0]["error"]["kind"], "UnknownRelation");
}

TEST(Session, SessionsAreIsolated) {
  SessionManager mgr(bundled());
  auto a = mgr.create(demo_session(3));
  auto b = mgr.create(demo_session(4));
  const auto b_before = b->state();
  a->step(5);
  a->sentence("the bag is near building 6");
  EXPECT_EQ(b->state(), b_before);
  EXPECT_NE(a->state()["step"], b_before["step"]);
  EXPECT_THROW(mgr.get("nope"), SessionError);
}

TEST(Session, EventLogReplaysBeliefExactly) {
  SessionManager mgr(bundled());
  auto s = mgr.create({{"map", "grid_city"}, {"mode", "human-robot"}, {"seed", 5}, {"scripted_speaker", true},
                       {"human_cadence", 7}});
  for (int i = 0; i < 40; ++i) {
    s->step();
    if (i == 10) s->sentence("the bag is not near building 1");
    if (i == 20) s->sentence("there's a bag behind building 3 and near building 7");
  }
  EXPECT_TRUE(same_belief(s->replay(), s->belief()));
}

TEST(Session, ConcurrentSubmissionsAreSerialized) {
  SessionManager mgr(bundled());
  auto s = mgr.create(demo_session(6, "robot-only"));
  std::thread stepper([&] { s->step(30); });
  std::thread talker([&] {
    for (int i = 0; i < 10; ++i) s->sentence(i % 2 ? "the bag is near building 5" : "the bag is not by building 6");
  });
  stepper.join();
  talker.join();
  const auto ev = s->events();
  int moves = 0, sentences = 0;
  for (const auto& e : ev) {
    moves += e["type"] == "move";
    sentences += e["type"] == "sentence";
  }
  EXPECT_EQ(sentences, 10);
  EXPECT_EQ(moves, s->state()["step"].get<int>());
  EXPECT_TRUE(same_belief(s->replay(), s->belief()));
}

TEST(Session, RunAndPause) {
  SessionManager mgr(bundled());
  auto s = mgr.create(demo_session(7));
  s->run(std::chrono::milliseconds(1), 5);
  for (int i = 0; i < 500 && s->running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  EXPECT_FALSE(s->running());
  EXPECT_EQ(s->state()["step"], 5);
  s->run(std::chrono::milliseconds(1000));
  s->pause();
  EXPECT_FALSE(s->running());
}

TEST(Session, CreateValidatesInput) {
  SessionManager mgr(bundled());
  EXPECT_THROW(mgr.create({{"map", "atlantis"}}), ConfigError);
  EXPECT_THROW(mgr.create({{"map", "demo"}, {"mode", "telepathy"}}), ConfigError);
  const auto st = mgr.create(demo_session(8))->state();
  EXPECT_EQ(st["config"]["scripted_speaker"], false);
  EXPECT_EQ(st["cameras"].size(), 1u);
  EXPECT_EQ(st["belief"]["rows"], 64);
}

TEST(Http, EndpointsAndStream) {
  SessionManager mgr(bundled());
  Server server(mgr, parse_bind("127.0.0.1:0"));
  server.start();
  const auto port = server.port();

  const auto created = request(port, http::verb::post, "/sessions", demo_session(9));
  ASSERT_EQ(created.status, 201) << created.body.dump();
  const std::string id = created.body["session"];

  EXPECT_EQ(request(port, http::verb::get, "/sessions/zzz/state").status, 404);
  EXPECT_EQ(request(port, http::verb::get, "/sessions/zzz/state").body["error"]["kind"], "UnknownSession");
  EXPECT_EQ(request(port, http::verb::get, "/maps").body["maps"].size(), 4u);

  const auto bad = request(port, http::verb::post, "/sessions/" + id + "/sentence", {{"text", "xyzzy building 1"}});
  EXPECT_EQ(bad.status, 200);
  EXPECT_EQ(bad.body["error"]["kind"], "UnknownRelation");

  // Subscribe, then act; the stream replays history and follows live.
  net::io_context ioc;
  websocket::stream<tcp::socket> ws(ioc);
  ws.next_layer().connect({net::ip::make_address("127.0.0.1"), port});
  ws.handshake("localhost", "/sessions/" + id + "/events");
  beast::flat_buffer buf;
  ws.read(buf);
  const auto hello = nlohmann::json::parse(beast::buffers_to_string(buf.data()));
  buf.clear();
  EXPECT_EQ(hello["type"], "hello");
  EXPECT_EQ(of_type(hello["events"], "sentence").size(), 1u);

  const auto ok = request(port, http::verb::post, "/sessions/" + id + "/sentence",
                          {{"text", "you can find the bag around building 4"}});
  EXPECT_TRUE(ok.body["ok"].get<bool>());
  const auto stepped = request(port, http::verb::post, "/sessions/" + id + "/step", {{"count", 2}});
  EXPECT_EQ(stepped.body["step"], 2);

  std::vector<nlohmann::json> msgs;
  while (msgs.size() < 3 || msgs.back()["type"] != "delta" || msgs.back()["step"] != 2) {
    ws.read(buf);
    msgs.push_back(nlohmann::json::parse(beast::buffers_to_string(buf.data())));
    buf.clear();
  }
  EXPECT_EQ(msgs[0]["type"], "event");
  EXPECT_EQ(msgs[0]["event"]["type"], "sentence");
  int deltas = 0;
  for (const auto& m : msgs) deltas += m["type"] == "delta";
  EXPECT_EQ(deltas, 2);

  const auto st = request(port, http::verb::get, "/sessions/" + id + "/state");
  EXPECT_EQ(st.body["step"], 2);
  EXPECT_EQ(st.body["map"]["id"], "demo");
  beast::error_code ec;
  ws.next_layer().close(ec);
  server.stop();
}
