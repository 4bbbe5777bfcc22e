// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "zslforge/generative/sdr.hpp"
#include "zslforge/io/atomic_file.hpp"
#include "zslforge/io/config.hpp"
#include "zslforge/random.hpp"
#include "zslforge/zsl/metrics.hpp"

namespace zslforge::io {

/// The only report field allowed to differ between identical re-runs.
inline constexpr const char* timestamp_key = "generated_at";

inline nlohmann::json summary_json(const Summary& s) {
    nlohmann::json j;
    j["mean"] = s.mean;
    j["std"] = s.stddev ? nlohmann::json(*s.stddev) : nlohmann::json(nullptr);
    j["median"] = s.median;
    j["n"] = s.values.size();
    j["values"] = s.values;
    return j;
}

inline nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline nlohmann::json run_json(const RunResult& r) {
    nlohmann::json j;
    j["zsl_acc"] = optional_json(r.zsl_acc);
    j["unseen_acc"] = optional_json(r.unseen_acc);
    j["seen_acc"] = optional_json(r.seen_acc);
    j["harmonic_mean"] = optional_json(r.harmonic);
    j["routing_acc"] = optional_json(r.routing_acc);
    j["per_class_acc"] = r.per_class_acc;
    return j;
}

inline nlohmann::json eval_report_json(const EvalReport& r) {
    nlohmann::json j;
    j["runs"] = nlohmann::json::array();
    for (const auto& run : r.runs) j["runs"].push_back(run_json(run));
    j["aggregate"] = nlohmann::json::object();
    for (const auto& [name, s] : r.aggregate) j["aggregate"][name] = summary_json(s);
    return j;
}

/// 16 hex digits identifying a resolved configuration and command.
inline std::string fingerprint(const std::string& command, const nlohmann::json& config) {
    const std::uint64_t h = fnv1a(command + "\n" + config.dump());
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << h;
    return out.str();
}

inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Report envelope: command, master seed, fingerprint, resolved config
/// echo, results, and the timestamp in its dedicated field.
inline nlohmann::json make_report(const std::string& command, const ExperimentConfig& cfg, nlohmann::json results) {
    nlohmann::json j;
    const nlohmann::json config = config_to_json(cfg);
    j["tool"] = "zslforge";
    j["command"] = command;
    j["master_seed"] = cfg.seed;
    j["fingerprint"] = fingerprint(command, config);
    j["config"] = config;
    j["results"] = std::move(results);
    j[timestamp_key] = utc_timestamp();
    return j;
}

/// Copy without the timestamp, for reproducibility comparisons.
inline nlohmann::json without_timestamp(nlohmann::json j) {
    if (j.is_object()) j.erase(timestamp_key);
    return j;
}

inline std::string report_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline void write_report(const std::filesystem::path& path, const nlohmann::json& j) { write_atomic(path, report_text(j)); }

inline std::string format_number(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

inline constexpr const char* trace_header = "epoch,L_D,L_G,L_P,L_CLS,L_MI,L_rank,lr";

inline std::string trace_csv(const std::vector<TraceRow>& trace) {
    std::string out = std::string(trace_header) + "\n";
    for (const auto& r : trace) {
        out += std::to_string(r.epoch);
        for (double v : {r.loss_d, r.loss_g, r.loss_p, r.loss_cls, r.loss_mi, r.loss_rank, r.lr}) out += "," + format_number(v);
        out += "\n";
    }
    return out;
}

/// Parsed trace: column names and one row of numbers per line.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

inline Table parse_csv_table(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        if (t.columns.empty()) {
            while (std::getline(ls, cell, ',')) t.columns.push_back(cell);
            continue;
        }
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                fail(ErrorCode::format_error, "csv line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (row.size() != t.columns.size()) fail(ErrorCode::format_error, "csv line " + std::to_string(lineno) + ": wrong column count");
        t.rows.push_back(std::move(row));
    }
    if (t.columns.empty()) fail(ErrorCode::format_error, "csv: missing header");
    return t;
}

} // namespace zslforge::io
