// Command-line front end.  Talks to the library strictly through the C
// interface; everything else here is argument handling and output
// formatting.
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "mixagg.h"

using nlohmann::json;

namespace {

constexpr const char* CSV_MAGIC = "# mixagg csv 1";

constexpr int EXIT_OK = 0;
constexpr int EXIT_CONFIG = 1;
constexpr int EXIT_INTERNAL = 2;
constexpr int EXIT_DETECTED = 3;

struct ScenarioFlags {
    std::string scenario_file;
    unsigned users = 0, providers = 0, data_bytes = 0, key_bits = 0;
    double collision_threshold = -1;
    unsigned long long quantizer = 0;
    unsigned long long seed = 0;
    bool seed_set = false;
    unsigned reps = 0;
    bool baseline = false;
    std::string hook;
    bool force_collision = false;
    bool reuse_tags = false;
    std::vector<std::string> oversize;  // user:extra
    unsigned long long bandwidth = 0;
    double latency_ms = -1;
    std::string attack;  // id or id:variant
    std::string attack_users, attack_providers;
    bool attack_collector = false;

    void attach(CLI::App* app) {
        app->add_option("--scenario", scenario_file, "scenario JSON file to start from");
        app->add_option("--users", users, "number of users");
        app->add_option("--providers", providers, "number of service providers");
        app->add_option("--data-bytes", data_bytes, "reading width in bytes");
        app->add_option("--key-bits", key_bits, "modulus size for the onion cipher");
        app->add_option("--collision-threshold", collision_threshold,
                        "acceptable probability of an index collision");
        app->add_option("--quantizer-width", quantizer, "collector-side value quantizer");
        app->add_option("--seed", seed, "scenario seed")->each([this](const std::string&) {
            seed_set = true;
        });
        app->add_option("--reps", reps, "sessions to run");
        app->add_flag("--baseline", baseline, "run the comparison scheme instead");
        app->add_option("--validation-hook", hook, "reading check: none or truth");
        app->add_flag("--force-pn-collision", force_collision,
                      "make two users draw colliding indexes on the first attempt");
        app->add_flag("--reuse-dsm-tags", reuse_tags,
                      "misconfiguration: fixed submission randomizers");
        app->add_option("--oversize", oversize,
                        "user:extra_bytes submission padding misconfiguration");
        app->add_option("--bandwidth-bps", bandwidth, "link serialization rate");
        app->add_option("--latency-ms", latency_ms, "per-hop latency in milliseconds");
        app->add_option("--attack", attack, "attack id, optionally id:variant");
        app->add_option("--attack-users", attack_users, "compromised users, comma separated");
        app->add_option("--attack-providers", attack_providers,
                        "compromised providers, comma separated");
        app->add_flag("--attack-collector", attack_collector, "the collector is compromised");
    }

    json to_json() const {
        json j = json::object();
        if (!scenario_file.empty()) {
            std::ifstream in(scenario_file);
            if (!in) throw CLI::ValidationError("--scenario", "cannot read " + scenario_file);
            std::stringstream ss;
            ss << in.rdbuf();
            j = json::parse(ss.str());  // malformed text is reported by the library later
        }
        if (users) j["users"] = users;
        if (providers) j["providers"] = providers;
        if (data_bytes) j["data_bytes"] = data_bytes;
        if (key_bits) j["key_bits"] = key_bits;
        if (collision_threshold >= 0) j["collision_threshold"] = collision_threshold;
        if (quantizer) j["quantizer_width"] = quantizer;
        if (seed_set) j["seed"] = seed;
        if (reps) j["reps"] = reps;
        if (baseline) j["baseline"] = true;
        if (!hook.empty()) j["validation_hook"] = hook;
        if (force_collision) j["force_pn_collision"] = true;
        if (reuse_tags) j["reuse_dsm_tags"] = true;
        for (const auto& spec : oversize) {
            auto colon = spec.find(':');
            if (colon == std::string::npos)
                throw CLI::ValidationError("--oversize", "expected user:extra_bytes");
            j["oversize_submission"][spec.substr(0, colon)] =
                std::stoul(spec.substr(colon + 1));
        }
        if (bandwidth) j["net"]["bandwidth_bps"] = bandwidth;
        if (latency_ms >= 0) j["net"]["latency_ns"] = (unsigned long long)(latency_ms * 1e6);
        if (!attack.empty()) {
            auto colon = attack.find(':');
            j["attack"]["id"] = std::stoi(attack.substr(0, colon));
            if (colon != std::string::npos)
                j["attack"]["variant"] = std::stoul(attack.substr(colon + 1));
        }
        auto parse_list = [](const std::string& s) {
            std::vector<unsigned> out;
            std::stringstream ss(s);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty()) out.push_back(unsigned(std::stoul(item)));
            return out;
        };
        if (!attack_users.empty()) j["attack"]["users"] = parse_list(attack_users);
        if (!attack_providers.empty()) j["attack"]["providers"] = parse_list(attack_providers);
        if (attack_collector) j["attack"]["collector"] = true;
        return j;
    }
};

// RAII over the C handles
struct Scenario {
    mixagg_scenario* h = nullptr;
    ~Scenario() { mixagg_scenario_free(h); }
};
struct Result {
    mixagg_result* h = nullptr;
    ~Result() { mixagg_result_free(h); }
};
struct CStr {
    char* s = nullptr;
    ~CStr() { mixagg_string_free(s); }
};

int fail(int code, const std::string& what) {
    std::cerr << "mixagg: " << what << ": " << mixagg_last_error() << "\n";
    return code == MIXAGG_ERR_CONFIG ? EXIT_CONFIG : EXIT_INTERNAL;
}

void emit(const std::string& text, const std::string& out_file) {
    if (out_file.empty()) {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(out_file);
    out << text << "\n";
}

std::string csv_escape(std::string s) {
    for (char& c : s)
        if (c == ',') c = ';';
    return s;
}

std::string session_csv(const json& report) {
    std::ostringstream csv;
    csv << CSV_MAGIC << "\n"
        << "rep,status,restarts,abort_reason,attack_id,culprits,users,providers,key_bits,"
           "system_bytes,predicted_bytes,system_msgs,total_rounds,predicted_rounds,user_rounds,"
           "elapsed_ms\n";
    for (const auto& s : report.at("sessions")) {
        std::string reason, culprits;
        int attack_id = 0;
        if (s.contains("abort")) {
            reason = s["abort"]["reason"].get<std::string>();
            if (s["abort"].contains("investigation")) {
                attack_id = s["abort"]["investigation"]["attack_id"].get<int>();
                std::string sep;
                for (const auto& c : s["abort"]["investigation"]["culprits"]) {
                    culprits += sep + c.get<std::string>();
                    sep = "|";
                }
            }
        }
        const json& m = s.at("metrics");
        const json& p = s.at("params");
        const json& pred = s.at("predicted");
        bool base = report.at("scenario").value("baseline", false);
        const json& side = base ? pred.at("baseline") : pred.at("protocol");
        csv << s.at("rep").get<unsigned>() << ',' << s.at("status").get<std::string>() << ','
            << s.at("restarts").get<unsigned>() << ',' << reason << ',' << attack_id << ','
            << csv_escape(culprits) << ',' << p.at("users").get<unsigned>() << ','
            << p.at("providers").get<unsigned>() << ',' << p.at("key_bits").get<unsigned>() << ','
            << m.at("system_bytes").get<unsigned long long>() << ','
            << (base ? side.at("comm_total").get<unsigned long long>()
                     : side.at("comm_on_wire").get<unsigned long long>())
            << ',' << m.at("system_msgs").get<unsigned long long>() << ','
            << m.at("total_rounds").get<unsigned>() << ','
            << (base ? side.at("rounds").get<unsigned>() : side.at("rounds_total").get<unsigned>())
            << ',' << m.at("user_rounds").get<unsigned>() << ','
            << std::fixed << std::setprecision(3)
            << double(m.at("elapsed_ns").get<unsigned long long>()) / 1e6 << "\n";
    }
    return csv.str();
}

int cmd_run(const ScenarioFlags& flags, const std::string& out_file, bool dump_json, bool csv,
            const std::string& transcripts_dir) {
    Scenario sc;
    std::string body = flags.to_json().dump();
    if (int rc = mixagg_scenario_parse(body.c_str(), &sc.h); rc != MIXAGG_OK)
        return fail(rc, "scenario");

    Result res;
    if (int rc = mixagg_run(sc.h, &res.h); rc != MIXAGG_OK) return fail(rc, "run");

    CStr report_text;
    if (int rc = mixagg_result_json(res.h, &report_text.s); rc != MIXAGG_OK)
        return fail(rc, "report");
    json report = json::parse(report_text.s);

    if (!transcripts_dir.empty()) {
        for (size_t i = 0; i < mixagg_result_sessions(res.h); i++) {
            CStr ev;
            if (int rc = mixagg_result_evidence_json(res.h, i, &ev.s); rc != MIXAGG_OK)
                return fail(rc, "evidence");
            std::ofstream out(transcripts_dir + "/session-" + std::to_string(i) +
                              ".evidence.json");
            if (!out) {
                std::cerr << "mixagg: cannot write into " << transcripts_dir << "\n";
                return EXIT_CONFIG;
            }
            out << ev.s << "\n";
        }
    }

    bool detected = false;
    for (size_t i = 0; i < mixagg_result_sessions(res.h); i++)
        if (std::string(mixagg_result_status(res.h, i)) == "aborted") detected = true;

    if (csv) {
        emit(session_csv(report), out_file);
    } else if (dump_json) {
        emit(report.dump(2), out_file);
    } else {
        std::ostringstream sum;
        for (const auto& s : report.at("sessions")) {
            sum << "session " << s.at("rep").get<unsigned>() << ": "
                << s.at("status").get<std::string>();
            if (s.at("restarts").get<unsigned>())
                sum << " (restarts " << s.at("restarts").get<unsigned>() << ")";
            if (s.contains("abort")) {
                sum << ", " << s["abort"]["reason"].get<std::string>() << " reported by "
                    << s["abort"]["reporter"].get<std::string>();
                if (s["abort"].contains("investigation")) {
                    const json& inv = s["abort"]["investigation"];
                    sum << "; blamed:";
                    for (const auto& c : inv["culprits"]) sum << " " << c.get<std::string>();
                    if (inv["genuine_collision"].get<bool>()) sum << " (honest collision)";
                }
            } else {
                sum << ", " << s["metrics"]["system_bytes"].get<unsigned long long>()
                    << " bytes over " << s["metrics"]["total_rounds"].get<unsigned>()
                    << " rounds";
            }
            sum << "\n";
        }
        emit(sum.str(), out_file);
    }
    return detected ? EXIT_DETECTED : EXIT_OK;
}

int cmd_predict(const ScenarioFlags& flags, const std::string& out_file) {
    Scenario sc;
    std::string body = flags.to_json().dump();
    if (int rc = mixagg_scenario_parse(body.c_str(), &sc.h); rc != MIXAGG_OK)
        return fail(rc, "scenario");
    CStr text;
    if (int rc = mixagg_predict(sc.h, &text.s); rc != MIXAGG_OK) return fail(rc, "predict");
    emit(text.s, out_file);
    return EXIT_OK;
}

int cmd_sweep(ScenarioFlags flags, const std::string& users_list, const std::string& out_file) {
    std::ostringstream csv;
    csv << CSV_MAGIC << "\n"
        << "users,providers,measured_bytes,predicted_bytes,baseline_bytes,measured_rounds,"
           "predicted_rounds,baseline_rounds,elapsed_ms\n";
    std::stringstream ss(users_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        flags.users = unsigned(std::stoul(item));
        flags.reps = 1;
        Scenario sc;
        std::string body = flags.to_json().dump();
        if (int rc = mixagg_scenario_parse(body.c_str(), &sc.h); rc != MIXAGG_OK)
            return fail(rc, "scenario");
        Result res;
        if (int rc = mixagg_run(sc.h, &res.h); rc != MIXAGG_OK) return fail(rc, "run");
        CStr text;
        if (int rc = mixagg_result_json(res.h, &text.s); rc != MIXAGG_OK)
            return fail(rc, "report");
        json report = json::parse(text.s);
        const json& s = report.at("sessions").at(0);
        const json& pred = s.at("predicted");
        csv << s["params"]["users"].get<unsigned>() << ','
            << s["params"]["providers"].get<unsigned>() << ','
            << s["metrics"]["system_bytes"].get<unsigned long long>() << ','
            << pred["protocol"]["comm_on_wire"].get<unsigned long long>() << ','
            << pred["baseline"]["comm_total"].get<unsigned long long>() << ','
            << s["metrics"]["total_rounds"].get<unsigned>() << ','
            << pred["protocol"]["rounds_total"].get<unsigned>() << ','
            << pred["baseline"]["rounds"].get<unsigned>() << ',' << std::fixed
            << std::setprecision(3)
            << double(s["metrics"]["elapsed_ns"].get<unsigned long long>()) / 1e6 << "\n";
    }
    emit(csv.str(), out_file);
    return EXIT_OK;
}

int cmd_investigate(const std::string& evidence_file, const std::string& out_file) {
    std::ifstream in(evidence_file);
    if (!in) {
        std::cerr << "mixagg: cannot read " << evidence_file << "\n";
        return EXIT_CONFIG;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    CStr report;
    if (int rc = mixagg_investigate(ss.str().c_str(), &report.s); rc != MIXAGG_OK)
        return fail(rc, "investigate");
    emit(report.s, out_file);
    json rpt = json::parse(report.s);
    return rpt.at("culprits").empty() ? EXIT_OK : EXIT_DETECTED;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"anonymous data-aggregation protocol simulator"};
    app.set_version_flag("--version", std::string(mixagg_version()));
    app.require_subcommand(1);

    std::string out_file, transcripts_dir, users_list, evidence_file;
    bool dump_json = false, csv = false;

    auto* run = app.add_subcommand("run", "run sessions and report what happened");
    ScenarioFlags run_flags;
    run_flags.attach(run);
    run->add_option("--out", out_file, "write output here instead of stdout");
    run->add_flag("--dump-json", dump_json, "emit the full JSON report");
    run->add_flag("--csv", csv, "emit one CSV row per session");
    run->add_option("--dump-transcripts", transcripts_dir,
                    "directory for per-session evidence packages");

    auto* predict = app.add_subcommand("predict", "print cost predictions without running");
    ScenarioFlags predict_flags;
    predict_flags.attach(predict);
    predict->add_option("--out", out_file, "write output here instead of stdout");

    auto* sweep = app.add_subcommand("sweep", "run one session per group size, emit CSV");
    ScenarioFlags sweep_flags;
    sweep_flags.attach(sweep);
    sweep->add_option("--users-list", users_list, "comma-separated group sizes")->required();
    sweep->add_option("--out", out_file, "write output here instead of stdout");

    auto* investigate = app.add_subcommand("investigate", "assign blame from an evidence package");
    investigate->add_option("evidence", evidence_file, "evidence JSON file")->required();
    investigate->add_option("--out", out_file, "write output here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_flags, out_file, dump_json, csv, transcripts_dir);
        if (predict->parsed()) return cmd_predict(predict_flags, out_file);
        if (sweep->parsed()) return cmd_sweep(sweep_flags, users_list, out_file);
        if (investigate->parsed()) return cmd_investigate(evidence_file, out_file);
    } catch (const json::exception& e) {
        std::cerr << "mixagg: " << e.what() << "\n";
        return EXIT_CONFIG;
    } catch (const CLI::Error& e) {
        std::cerr << "mixagg: " << e.what() << "\n";
        return EXIT_CONFIG;
    } catch (const std::invalid_argument& e) {
        std::cerr << "mixagg: bad argument: " << e.what() << "\n";
        return EXIT_CONFIG;
    } catch (const std::exception& e) {
        std::cerr << "mixagg: " << e.what() << "\n";
        return EXIT_INTERNAL;
    }
    return EXIT_CONFIG;
}
