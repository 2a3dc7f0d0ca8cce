#include <gtest/gtest.h>

#include <httplib.h>

#include <fstream>
#include <set>
#include <nlohmann/json.hpp>
#include <thread>

#include "covilearn/errors.hpp"
#include "covilearn/service.hpp"
#include "support/fixtures.hpp"

using namespace covilearn;
using nlohmann::json;

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override {
        weights_ = fixture::write_initial_weights(dir_ / "micro.cvw", "micro", 11);
        config_.port = 0;
        config_.variant = "micro";
        config_.weights_path = weights_;
        config_.log_path = dir_ / "screenings.jsonl";
    }

    std::unique_ptr<ScreeningService> launch() {
        auto svc = std::make_unique<ScreeningService>(config_);
        port_ = svc->start();
        return svc;
    }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(30, 0);
        return c;
    }

    fixture::TempDir dir_{"service"};
    std::filesystem::path weights_;
    ServiceConfig config_;
    int port_ = 0;
};

}  // namespace

TEST(Sha256, KnownDigest) {
    const std::string abc = "abc";
    EXPECT_EQ(sha256_hex({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()}),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(ServiceConfigTest, AddressForms) {
    ServiceConfig c;
    c.set_address("0.0.0.0:9000");
    EXPECT_EQ(c.host, "0.0.0.0");
    EXPECT_EQ(c.port, 9000);
    c.set_address(":81");
    EXPECT_EQ(c.port, 81);
    c.set_address("82");
    EXPECT_EQ(c.port, 82);
    EXPECT_THROW(c.set_address("host:notaport"), ArgumentError);
}

TEST_F(ServiceTest, HealthAndModel) {
    auto svc = launch();
    auto c = client();
    auto health = c.Get("/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);
    const auto h = json::parse(health->body);
    EXPECT_EQ(h["status"], "ok");
    const auto model = json::parse(c.Get("/model")->body);
    EXPECT_EQ(model["model_id"], h["model_id"]);
    EXPECT_EQ(model["variant"], "micro-gapdense");
    const auto bytes = read_file_bytes(weights_);
    EXPECT_EQ(model["digest"], sha256_hex(bytes));
    EXPECT_EQ(c.Get("/nope")->status, 404);
}

TEST_F(ServiceTest, ScreensAllZeroImage) {
    auto svc = launch();
    auto res = client().Post("/screen", fixture::gray_png(224, 0), "image/png");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
    const auto j = json::parse(res->body);
    const double pc = j["probabilities"][0], pn = j["probabilities"][1];
    EXPECT_NEAR(pc + pn, 1.0, 1e-6);
    EXPECT_EQ(j["label"], pc >= pn ? "covid" : "normal");
    EXPECT_EQ(j["confidence"], std::max(pc, pn));
    EXPECT_EQ(j["classes"], json::array({"covid", "normal"}));
    EXPECT_TRUE(j.contains("request_id"));
    EXPECT_TRUE(j.contains("timestamp"));
    EXPECT_GE(j["processing_ms"].get<double>(), 0.0);
}

TEST_F(ServiceTest, MultipartUpload) {
    auto svc = launch();
    const auto png = fixture::noise_png(40, 3);
    httplib::MultipartFormDataItems items{{"image", png, "x.png", "image/png"}};
    auto multi = client().Post("/screen", items);
    auto raw = client().Post("/screen", png, "image/png");
    ASSERT_EQ(multi->status, 200) << multi->body;
    EXPECT_EQ(json::parse(multi->body)["probabilities"], json::parse(raw->body)["probabilities"]);
}

TEST_F(ServiceTest, RejectsUnsupportedAndMalformedBodies) {
    auto svc = launch();
    auto c = client();
    auto text = c.Post("/screen", "hello, this is not an image", "text/plain");
    EXPECT_EQ(text->status, 415);
    EXPECT_EQ(json::parse(text->body)["reason"], "unrecognized image format");
    auto empty = c.Post("/screen", "", "image/png");
    EXPECT_EQ(empty->status, 400);
    auto png = fixture::gray_png(16, 10);
    png.resize(png.size() / 2);
    auto broken = c.Post("/screen", png, "image/png");
    EXPECT_EQ(broken->status, 400) << broken->body;
    EXPECT_EQ(json::parse(broken->body)["error"], "malformed_image");
    svc->audit().flush();
    EXPECT_TRUE(read_lines(config_.log_path).empty());
}

TEST_F(ServiceTest, PayloadLimit) {
    config_.max_body_bytes = 1024;
    auto svc = launch();
    auto res = client().Post("/screen", std::string(4096, 'x'), "image/png");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 413);
    EXPECT_EQ(json::parse(res->body)["error"], "payload_too_large");
}

TEST_F(ServiceTest, ConcurrentIdenticalRequestsAgree) {
    auto svc = launch();
    const auto png = fixture::noise_png(48, 9);
    std::vector<std::string> bodies(32);
    std::vector<int> statuses(32, 0);
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < 32; ++i)
        threads.emplace_back([&, i] {
            auto res = client().Post("/screen", png, "image/png");
            if (res) statuses[i] = res->status, bodies[i] = res->body;
        });
    for (auto& t : threads) t.join();
    std::set<std::string> ids;
    for (std::size_t i = 0; i < 32; ++i) {
        ASSERT_EQ(statuses[i], 200);
        const auto j = json::parse(bodies[i]);
        EXPECT_EQ(j["probabilities"], json::parse(bodies[0])["probabilities"]);
        ids.insert(j["request_id"].get<std::string>());
    }
    EXPECT_EQ(ids.size(), 32u);
}

TEST(Audit, ConcurrentAppendsStayIntact) {
    fixture::TempDir dir("audit");
    const auto path = dir / "log.jsonl";
    {
        AuditLog log(path);
        std::vector<std::thread> threads;
        for (int t = 0; t < 10; ++t)
            threads.emplace_back([&log, t] {
                for (int i = 0; i < 10; ++i) {
                    ScreeningResult r;
                    r.request_id = "t" + std::to_string(t) + "-" + std::to_string(i);
                    r.probabilities = {0.25, 0.75};
                    r.model_id = "m";
                    log.record(r);
                }
            });
        for (auto& t : threads) t.join();
        log.flush();
    }
    const auto lines = read_lines(path);
    ASSERT_EQ(lines.size(), 100u);
    std::set<std::string> ids;
    std::string prev;
    for (const auto& line : lines) {
        const auto j = json::parse(line);
        ids.insert(j["request_id"].get<std::string>());
        const std::string ts = j["timestamp"];
        EXPECT_GE(ts, prev);
        prev = ts;
    }
    EXPECT_EQ(ids.size(), 100u);
}

TEST_F(ServiceTest, SequentialScreeningsAreOrderedAndSurviveRestart) {
    {
        auto svc = launch();
        auto c = client();
        ASSERT_EQ(c.Post("/screen", fixture::gray_png(32, 0), "image/png")->status, 200);
        ASSERT_EQ(c.Post("/screen", fixture::gray_png(32, 200), "image/png")->status, 200);
        svc->stop();
    }
    auto first = read_lines(config_.log_path);
    ASSERT_EQ(first.size(), 2u);
    const auto a = json::parse(first[0]), b = json::parse(first[1]);
    EXPECT_LT(a["timestamp"].get<std::string>(), b["timestamp"].get<std::string>());
    {
        auto svc = launch();
        ASSERT_EQ(client().Post("/screen", fixture::gray_png(32, 90), "image/png")->status, 200);
        svc->stop();
    }
    const auto all = read_lines(config_.log_path);
    ASSERT_EQ(all.size(), 3u);
    EXPECT_EQ(all[0], first[0]);
    EXPECT_EQ(all[1], first[1]);
}

TEST_F(ServiceTest, UnwritableLogDegradesButKeepsServing) {
    std::ofstream(dir_ / "blocker") << "file";
    config_.log_path = dir_ / "blocker" / "log.jsonl";
    auto svc = launch();
    auto c = client();
    auto res = c.Post("/screen", fixture::gray_png(32, 0), "image/png");
    ASSERT_EQ(res->status, 200);
    svc->audit().flush();
    EXPECT_TRUE(svc->audit().degraded());
    EXPECT_EQ(json::parse(c.Get("/health")->body)["status"], "degraded");
    EXPECT_EQ(c.Post("/screen", fixture::gray_png(32, 0), "image/png")->status, 200);
}

TEST_F(ServiceTest, ReloadSwapsModel) {
    auto svc = launch();
    auto c = client();
    const auto before = json::parse(c.Get("/model")->body)["model_id"];
    const auto other = fixture::write_initial_weights(dir_ / "other.cvw", "micro", 12);
    auto res = c.Post("/model/reload", json{{"weights", other.string()}}.dump(), "application/json");
    ASSERT_EQ(res->status, 200) << res->body;
    const auto after = json::parse(c.Get("/model")->body)["model_id"];
    EXPECT_NE(before, after);

    std::ofstream(dir_ / "bad.cvw") << "garbage";
    auto bad = c.Post("/model/reload", json{{"weights", (dir_ / "bad.cvw").string()}}.dump(), "application/json");
    EXPECT_EQ(bad->status, 422);
    EXPECT_EQ(json::parse(c.Get("/model")->body)["model_id"], after);
    EXPECT_EQ(c.Post("/model/reload", "{not json", "application/json")->status, 400);
}

TEST_F(ServiceTest, BadWeightsFailAtStartup) {
    std::ofstream(dir_ / "bad.cvw") << "garbage";
    config_.weights_path = dir_ / "bad.cvw";
    try {
        ScreeningService svc(config_);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.cvw"), std::string::npos);
    }
    config_.weights_path = dir_ / "missing.cvw";
    EXPECT_THROW(ScreeningService{config_}, IoError);
    config_.weights_path = fixture::write_initial_weights(dir_ / "alg1.cvw", "micro-alg1conv", 1);
    EXPECT_THROW(ScreeningService{config_}, FormatError);
}
