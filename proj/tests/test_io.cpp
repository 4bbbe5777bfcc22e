// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <regex>

#include "zslforge/io/config.hpp"
#include "zslforge/io/feature_io.hpp"
#include "zslforge/io/report.hpp"
#include "zslforge/io/svg.hpp"

using namespace zslforge;
using namespace zslforge::io;
using Catch::Approx;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::io_error;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("zslforge-test-io-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

FeatureSet random_features(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    FeatureSet fs;
    fs.features = Matrix(rows, cols);
    for (Eigen::Index i = 0; i < fs.features.size(); ++i) fs.features.data()[i] = standard_normal(rng);
    for (Eigen::Index i = 0; i < rows; ++i) fs.labels.push_back("class" + std::to_string(i % 3));
    return fs;
}

std::size_t count_matches(const std::string& text, const std::string& pattern) {
    const std::regex re(pattern);
    return static_cast<std::size_t>(std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

} // namespace

// ---------------------------------------------------------------------------
// Feature files
// ---------------------------------------------------------------------------

TEST_CASE("Binary feature files round-trip", "[features]") {
    const auto dir = temp_dir("features");
    const FeatureSet fs = random_features(7, 5, 1);

    save_features(dir / "a.zslf", fs, DType::f64);
    const FeatureSet back64 = load_features(dir / "a.zslf");
    CHECK(back64.features == fs.features);
    CHECK(back64.labels == fs.labels);

    save_features(dir / "b.zslf", fs, DType::f32);
    const FeatureSet back32 = load_features(dir / "b.zslf");
    CHECK(back32.labels == fs.labels);
    CHECK((back32.features - fs.features).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(back32.features == fs.features.cast<float>().cast<double>());

    CHECK(std::filesystem::file_size(dir / "a.zslf") == feature_header_bytes + 7 * 5 * 8);
    CHECK(std::filesystem::file_size(dir / "b.zslf") == feature_header_bytes + 7 * 5 * 4);
}

TEST_CASE("Wide feature rows round-trip", "[features]") {
    const auto dir = temp_dir("wide");
    const FeatureSet fs = random_features(3, 8192, 2);
    save_features(dir / "wide.zslf", fs, DType::f64);
    const FeatureSet back = load_features(dir / "wide.zslf");
    CHECK(back.dim() == 8192);
    CHECK(back.features == fs.features);
}

TEST_CASE("Corrupt feature files are rejected", "[features]") {
    const auto dir = temp_dir("corrupt");
    const FeatureSet fs = random_features(4, 3, 3);
    const std::string bytes = encode_matrix(fs.features, DType::f64);

    CHECK(code_of([&] { decode_matrix(bytes.data(), 10); }) == ErrorCode::format_error);
    CHECK(code_of([&] { decode_matrix(bytes.data(), bytes.size() - 1); }) == ErrorCode::format_error);
    const std::string longer = bytes + "x";
    CHECK(code_of([&] { decode_matrix(longer.data(), longer.size()); }) == ErrorCode::format_error);
    std::string magic = bytes;
    magic[0] = 'X';
    CHECK(code_of([&] { decode_matrix(magic.data(), magic.size()); }) == ErrorCode::format_error);
    std::string version = bytes;
    version[4] = 9;
    CHECK(code_of([&] { decode_matrix(version.data(), version.size()); }) == ErrorCode::format_error);

    write_atomic(dir / "trunc.zslf", bytes.substr(0, bytes.size() - 8));
    write_atomic(dir / "trunc.zslf.labels", "a\nb\nc\nd\n");
    CHECK(code_of([&] { load_features(dir / "trunc.zslf"); }) == ErrorCode::format_error);

    save_features(dir / "ok.zslf", fs);
    write_atomic(dir / "ok.zslf.labels", "a\nb\n");
    CHECK(code_of([&] { load_features(dir / "ok.zslf"); }) == ErrorCode::format_error);

    CHECK(code_of([&] { load_features(dir / "missing.zslf"); }) == ErrorCode::io_error);

    FeatureSet bad = fs;
    bad.features(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK(code_of([&] { save_features(dir / "nan.zslf", bad); }) == ErrorCode::format_error);
}

TEST_CASE("CSV fallback", "[features]") {
    const auto dir = temp_dir("csv");
    const FeatureSet fs = random_features(5, 4, 4);
    save_features_any(dir / "x.csv", fs);
    const FeatureSet back = load_features_any(dir / "x.csv");
    CHECK(back.features == fs.features); // 17 significant digits round-trip
    CHECK(back.labels == fs.labels);

    CHECK(code_of([] { features_from_csv("a,1,2\nb,3\n"); }) == ErrorCode::format_error);
    CHECK(code_of([] { features_from_csv("a,1,x\n"); }) == ErrorCode::format_error);
    CHECK(code_of([] { features_from_csv(",1,2\n"); }) == ErrorCode::format_error);
    CHECK(features_from_csv("a,1,2\r\n\nb,3,4\n").size() == 2);
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

TEST_CASE("Config defaults and round trip", "[config]") {
    const ExperimentConfig defaults = parse_config_text("{}");
    CHECK(defaults.runs == 10);
    CHECK(defaults.train.m_noise == 3);
    CHECK(defaults.train.m_rank == 5);
    CHECK(defaults.train.n_critic == 5);
    CHECK(defaults.train.delta == 0.2);
    CHECK(defaults.train.weight_decay == 5e-4);
    CHECK(defaults.protocol.ood.percentile == 0.95);

    ExperimentConfig cfg;
    cfg.seed = 99;
    cfg.runs = 3;
    cfg.train.lambda_rank = 0.25;
    cfg.train.noise_source = NoiseSource::gaussian;
    cfg.world.structure = synthbench::Structure::uniform_random;
    const ExperimentConfig back = parse_config_text(serialize_config(cfg));
    CHECK(config_to_json(back) == config_to_json(cfg));
    CHECK(back.train.noise_source == NoiseSource::gaussian);
}

TEST_CASE("Config parsing is strict", "[config]") {
    const auto message_of = [](const std::string& text) {
        try {
            parse_config_text(text);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::config_error);
            return std::string(e.what());
        }
        FAIL("expected a config error");
        return std::string();
    };
    const std::string unknown = message_of("{\n  \"seed\": 1,\n  \"trian\": {}\n}");
    CHECK(unknown.find("trian") != std::string::npos);
    CHECK(unknown.find("line 3") != std::string::npos);

    const std::string nested = message_of("{\"train\": {\"epochz\": 3}}");
    CHECK(nested.find("train.epochz") != std::string::npos);

    CHECK(message_of("{\"runs\": \"ten\"}").find("runs") != std::string::npos);
    CHECK(message_of("{\"runs\": -1}").find("runs") != std::string::npos);
    CHECK(message_of("{\"runs\": 0}").find("runs") != std::string::npos);
    CHECK(message_of("{\"train\": {\"noise_source\": \"pink\"}}").find("noise_source") != std::string::npos);
    CHECK(message_of("{\"seed\": 1,,}").find("line 1") != std::string::npos);
    CHECK(code_of([] { parse_config("/nonexistent/zslforge.json"); }) == ErrorCode::io_error);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

TEST_CASE("Reports carry a stable fingerprint and a separable timestamp", "[report]") {
    ExperimentConfig cfg;
    cfg.seed = 5;
    const nlohmann::json a = make_report("eval-zsl", cfg, {{"x", 1}});
    const nlohmann::json b = make_report("eval-zsl", cfg, {{"x", 1}});
    CHECK(a.contains(timestamp_key));
    CHECK(without_timestamp(a) == without_timestamp(b));
    CHECK_FALSE(without_timestamp(a).contains(timestamp_key));
    CHECK(a["fingerprint"].get<std::string>().size() == 16);
    CHECK(a["master_seed"] == 5);
    cfg.seed = 6;
    CHECK(make_report("eval-zsl", cfg, {})["fingerprint"] != a["fingerprint"]);
    CHECK(make_report("eval-gzsl", ExperimentConfig{}, {})["fingerprint"] != make_report("eval-zsl", ExperimentConfig{}, {})["fingerprint"]);
}

TEST_CASE("Trace CSV round-trips through the table parser", "[report]") {
    std::vector<TraceRow> trace;
    for (std::size_t e = 1; e <= 4; ++e) trace.push_back({e, -0.5 * e, 1.0 / 3.0, 2.0, 0.1, 0.0, 0.25, 1e-3});
    const Table t = parse_csv_table(trace_csv(trace));
    CHECK(t.columns.size() == 8);
    CHECK(t.columns.front() == "epoch");
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[2][0] == 3.0);
    CHECK(t.rows[2][1] == -1.5);
    CHECK(t.rows[0][2] == 1.0 / 3.0);
    CHECK(code_of([] { parse_csv_table("a,b\n1\n"); }) == ErrorCode::format_error);
    CHECK(code_of([] { parse_csv_table(""); }) == ErrorCode::format_error);
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

TEST_CASE("Line plots have one polyline per series and one point per value", "[svg]") {
    const std::vector<Series> series{{"a", {1.0, 2.0, 3.0, 2.5}}, {"b", {0.0, -1.0, 4.0, 1.0}}};
    const std::string svg = line_plot_svg("losses", series);
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(count_matches(svg, "<svg ") == 1);
    CHECK(count_matches(svg, "<polyline") == 2);
    const std::regex points("data-series=\"a\"[^>]*points=\"([^\"]*)\"");
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, points));
    CHECK(count_matches(m[1].str(), ",") == 4);

    CHECK(code_of([] { line_plot_svg("x", {}); }) == ErrorCode::empty_input);
    CHECK(code_of([] { line_plot_svg("x", {{"a", {1.0, std::nan("")}}}); }) == ErrorCode::format_error);
}

TEST_CASE("Bar charts and PCA scatter plots", "[svg]") {
    const std::string bars = bar_chart_svg("cells", {"x", "y", "z"}, {0.1, 0.5, 0.3});
    CHECK(count_matches(bars, "<rect[^>]*data-label=") == 3);

    Rng rng = make_rng(1);
    Matrix x(30, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
    x.col(0) *= 10.0;
    const Matrix p = pca_2d(x);
    REQUIRE(p.rows() == 30);
    REQUIRE(p.cols() == 2);
    // First component carries the dominant variance and is centred.
    CHECK(std::abs(p.col(0).mean()) < 1e-9);
    CHECK(p.col(0).squaredNorm() > p.col(1).squaredNorm());
    std::vector<std::string> labels(30, "a");
    const std::string scatter = pca_scatter_svg("features", x, labels);
    CHECK(count_matches(scatter, "<circle") == 30);
}
