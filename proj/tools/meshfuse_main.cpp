// meshfuse command line: evaluate blocks, run mesh simulations, generate
// training datasets, benchmark the heuristic path, query lineage, and run
// neural inference.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "meshfuse/blend.hpp"
#include "meshfuse/dataset.hpp"
#include "meshfuse/encoder.hpp"
#include "meshfuse/errors.hpp"
#include "meshfuse/neural.hpp"
#include "meshfuse/serialize.hpp"
#include "meshfuse/sim.hpp"
#include "meshfuse/svaf.hpp"

namespace {

using namespace meshfuse;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t seed_or_env(std::uint64_t seed, bool seed_set) {
    if (seed_set) return seed;
    if (const char* env = std::getenv("MESHFUSE_SEED")) {
        return std::strtoull(env, nullptr, 10);
    }
    return seed;
}

EncoderConfig make_encoder_config(std::size_t dim, const std::string& table) {
    EncoderConfig cfg;
    cfg.dim = dim;
    if (!table.empty()) {
        cfg.mode = EncoderMode::table;
        cfg.table_path = table;
    }
    return cfg;
}

AgentProfile find_profile(const std::map<std::string, AgentProfile>& profiles,
                          const std::string& id) {
    auto it = profiles.find(id);
    if (it == profiles.end()) throw ConfigError("unknown profile id: " + id);
    return it->second;
}

int cmd_evaluate(const std::string& cmb_path, const std::string& store_path,
                 const std::string& profiles_path, const std::string& agent,
                 Timestamp t_now, bool t_set, std::size_t dim,
                 const std::string& table, const Thresholds& thresholds) {
    const Encoder encoder(make_encoder_config(dim, table));
    const MemoryStore store = store_from_json(read_file(store_path));
    const AgentProfile profile = find_profile(load_profiles(profiles_path), agent);
    const Cmb incoming = cmb_from_json(read_file(cmb_path));
    const Timestamp t = t_set ? t_now : incoming.timestamp;
    const FusionOutcome outcome =
        evaluate_cmb(store, profile, incoming, t, thresholds, encoder);
    std::cout << audit_json(outcome) << "\n";
    return 0;
}

int cmd_lineage(const std::string& store_path, const std::string& key) {
    const MemoryStore store = store_from_json(read_file(store_path));
    const LineageInfo info = store.lineage_query(key);
    nlohmann::ordered_json j;
    j["key"] = key;
    j["parents"] = info.parents;
    j["ancestors"] = info.ancestors;
    j["descendants"] = info.descendants;
    j["remix_count"] = info.remix_count;
    j["lineage_depth"] = info.lineage_depth;
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_simulate(const std::string& scenario_path, const std::string& profiles_path,
                 std::uint64_t seed, Timestamp duration, Timestamp sync_interval,
                 const std::string& out_path, std::size_t dim,
                 const std::string& table) {
    const Narrative scenario = narrative_from_json(read_file(scenario_path));
    const auto profiles = load_profiles(profiles_path);
    SimConfig config = make_sim_config(scenario, profiles, seed, duration, sync_interval);
    config.encoder = make_encoder_config(dim, table);
    const SimResult result = run_simulation(config);
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw ConfigError("cannot write trace: " + out_path);
        out << trace_to_json_lines(result.trace);
    }
    std::cout << summary_to_json(summarize(result.trace)) << "\n";
    return 0;
}

int cmd_dataset(const std::string& narratives_dir, const std::string& profiles_path,
                const std::string& rules_path, const std::string& prototypes_path,
                std::uint64_t seed, const std::string& out_dir, std::size_t dim,
                const std::string& table) {
    const Encoder encoder(make_encoder_config(dim, table));
    const auto narratives = load_narratives(narratives_dir);
    const auto profiles = load_profiles(profiles_path);
    const LabelRules rules =
        rules_path.empty() ? LabelRules{} : load_label_rules(rules_path);
    const PrototypePhrases prototypes =
        prototypes_path.empty() ? PrototypePhrases{} : load_prototype_phrases(prototypes_path);
    const Dataset dataset =
        generate_samples(narratives, rules, profiles, prototypes, seed, encoder);
    write_dataset(dataset, out_dir);
    std::cout << "{\"samples\":" << dataset.stats.sample_count
              << ",\"aligned\":" << dataset.stats.class_counts[0]
              << ",\"guarded\":" << dataset.stats.class_counts[1]
              << ",\"rejected\":" << dataset.stats.class_counts[2]
              << ",\"train\":" << dataset.stats.train_count
              << ",\"val\":" << dataset.stats.val_count << "}\n";
    return 0;
}

// Synthetic store + profile for latency measurement: k anchors of related
// phrasing so every field carries nonzero anchor weights.
int cmd_bench(int anchors, std::size_t dim, int iterations, double budget_ms) {
    EncoderConfig cfg;
    cfg.dim = dim;
    const Encoder encoder(cfg);

    AgentProfile profile;
    profile.agent_id = "bench";
    profile.alpha = {1.5, 1.5, 1.0, 1.5, 1.0, 1.0, 2.0};
    profile.tau_freshness = 10800;
    profile.anchor_k = anchors;

    MemoryStore store("bench");
    const std::vector<std::string> stems = {
        "coding session with assistant", "sedentary stretch detected",
        "music shifted to ambient",      "review of open blockers",
        "recovery walk recommended",     "focus returning after break",
        "late night error spiral",       "morning planning session"};
    for (int i = 0; i < anchors; ++i) {
        std::map<FieldId, std::string> texts;
        const std::string stem = stems[i % stems.size()];
        texts[FieldId::focus] = stem + " " + std::to_string(i);
        texts[FieldId::issue] = "fatigue accumulating " + std::to_string(i);
        texts[FieldId::intent] = "needs a break soon";
        texts[FieldId::mood] = "tired, low energy";
        store.create_cmb("bench", 1000 + i, 0.9, texts, Affect{-0.4, -0.4}, {},
                         "observation", encoder);
    }

    std::map<FieldId, std::string> in_texts;
    in_texts[FieldId::focus] = "coding session with assistant stretch";
    in_texts[FieldId::issue] = "fatigue accumulating fast";
    in_texts[FieldId::intent] = "needs a recovery break";
    in_texts[FieldId::mood] = "tired, low energy";
    MemoryStore scratch("incoming");
    const Cmb incoming = scratch.create_cmb("peer", 1100, 0.8, in_texts,
                                            Affect{-0.4, -0.4}, {}, "observation",
                                            encoder);

    const Thresholds thresholds;
    std::vector<double> samples_ms(iterations);
    volatile double sink = 0.0;
    for (int i = 0; i < iterations; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const FusionOutcome outcome =
            evaluate_cmb(store, profile, incoming, 1200, thresholds, encoder);
        const auto stop = std::chrono::steady_clock::now();
        sink = sink + outcome.total_drift;
        samples_ms[i] =
            std::chrono::duration<double, std::milli>(stop - start).count();
    }
    std::sort(samples_ms.begin(), samples_ms.end());
    const double median = samples_ms[samples_ms.size() / 2];
    const double p95 = samples_ms[static_cast<std::size_t>(samples_ms.size() * 0.95)];
    const bool pass = median < budget_ms;
    std::cout << "{\"anchors\":" << anchors << ",\"dim\":" << dim
              << ",\"iterations\":" << iterations
              << ",\"median_ms\":" << format_g9(median)
              << ",\"p95_ms\":" << format_g9(p95)
              << ",\"budget_ms\":" << format_g9(budget_ms)
              << ",\"pass\":" << (pass ? "true" : "false") << "}\n";
    return pass ? 0 : 1;
}

int cmd_neural(const std::string& weights_path, std::uint64_t init_seed,
               bool init_set, bool tiny, const std::string& save_path,
               const std::string& batch_path, const std::string& out_path) {
    ModelWeights weights;
    if (!weights_path.empty()) {
        weights = load_weights(weights_path);
    } else {
        const NeuralConfig config = tiny ? NeuralConfig::tiny() : NeuralConfig{};
        weights = init_weights(config, init_set ? init_seed : 42);
    }

    if (!save_path.empty()) {
        const auto slash = save_path.find_last_of('/');
        const std::string base =
            slash == std::string::npos ? save_path : save_path.substr(slash + 1);
        std::string blob = base;
        const auto dot = blob.find_last_of('.');
        if (dot != std::string::npos) blob.resize(dot);
        save_weights(weights, save_path, blob + ".bin");
        std::cout << "{\"saved\":\"" << json_escape(save_path)
                  << "\",\"parameters\":" << weights.parameter_count() << "}\n";
    }

    if (batch_path.empty()) {
        if (save_path.empty()) {
            std::cout << "{\"parameters\":" << weights.parameter_count() << "}\n";
        }
        return 0;
    }

    std::ifstream in(batch_path);
    if (!in) throw ConfigError("cannot open batch file: " + batch_path);
    std::ostream* out = &std::cout;
    std::ofstream out_file;
    if (!out_path.empty()) {
        out_file.open(out_path);
        if (!out_file) throw ConfigError("cannot write output: " + out_path);
        out = &out_file;
    }

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw SchemaError("batch line " + std::to_string(line_no) + ": invalid JSON");
        }
        const auto incoming = j.at("incoming").get<std::vector<Vec>>();
        std::vector<FieldMap<Vec>> anchors;
        for (const auto& ja : j.at("anchors")) {
            const auto vecs = ja.get<std::vector<Vec>>();
            if (vecs.size() != kFieldCount) {
                throw SchemaError("batch line " + std::to_string(line_no) +
                                  ": anchor needs 7 field vectors");
            }
            FieldMap<Vec> anchor;
            for (std::size_t i = 0; i < kFieldCount; ++i) anchor[i] = vecs[i];
            anchors.push_back(std::move(anchor));
        }
        const NeuralOutput result =
            forward(weights, incoming, anchors, j.at("tau_fresh").get<double>(),
                    j.at("confidence").get<double>());

        std::string rec = "{\"gates\":[";
        for (std::size_t i = 0; i < kFieldCount; ++i) {
            if (i) rec += ',';
            rec += format_g9(result.gates[i]);
        }
        rec += "],\"field_drift\":[";
        for (std::size_t i = 0; i < kFieldCount; ++i) {
            if (i) rec += ',';
            rec += format_g9(result.field_drift[i]);
        }
        rec += "],\"total_drift\":" + format_g9(result.total_drift);
        rec += ",\"probs\":[" + format_g9(result.probs[0]) + "," +
               format_g9(result.probs[1]) + "," + format_g9(result.probs[2]);
        rec += "],\"fused\":[";
        for (std::size_t i = 0; i < kFieldCount; ++i) {
            if (i) rec += ',';
            rec += '[';
            for (std::size_t k = 0; k < result.fused[i].size(); ++k) {
                if (k) rec += ',';
                rec += format_g9(result.fused[i][k]);
            }
            rec += ']';
        }
        rec += "]}";
        *out << rec << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"meshfuse: per-field memory fusion for multi-agent meshes"};
    app.require_subcommand(0, 1);

    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t dim = 64;
    std::string table;
    Thresholds thresholds;
    app.add_option("--seed", seed, "global RNG seed (env MESHFUSE_SEED fallback)")
        ->each([&seed_set](const std::string&) { seed_set = true; });
    app.add_option("--dim", dim, "embedding dimension")->capture_default_str();
    app.add_option("--table", table, "embedding table (JSON lines) for table mode");
    app.add_option("--t-redundant", thresholds.redundant, "redundancy threshold")
        ->capture_default_str();
    app.add_option("--t-aligned", thresholds.aligned, "aligned threshold")
        ->capture_default_str();
    app.add_option("--t-guarded", thresholds.guarded, "guarded threshold")
        ->capture_default_str();

    auto* evaluate = app.add_subcommand("evaluate", "evaluate a block against a store");
    std::string cmb_path, store_path, profiles_path, agent;
    Timestamp t_now = 0;
    bool t_set = false;
    evaluate->add_option("--cmb", cmb_path, "incoming block JSON")->required();
    evaluate->add_option("--store", store_path, "store snapshot JSON")->required();
    evaluate->add_option("--profiles", profiles_path, "profile fixture JSON")->required();
    evaluate->add_option("--agent", agent, "receiver profile id")->required();
    evaluate->add_option("--t", t_now, "evaluation time (default: block ts)")
        ->each([&t_set](const std::string&) { t_set = true; });

    auto* simulate = app.add_subcommand("simulate", "run a deterministic mesh simulation");
    std::string scenario_path, sim_profiles, trace_out;
    Timestamp duration = 0, sync_interval = 300;
    simulate->add_option("--scenario", scenario_path, "scenario/narrative JSON")->required();
    simulate->add_option("--profiles", sim_profiles, "profile fixture JSON")->required();
    simulate->add_option("--duration", duration, "simulated seconds (default: derived)");
    simulate->add_option("--sync-interval", sync_interval, "state-sync period, seconds")
        ->capture_default_str();
    simulate->add_option("--out", trace_out, "trace output path (JSON lines)");

    auto* dataset = app.add_subcommand("dataset", "generate labeled training samples");
    std::string narratives_dir, ds_profiles, rules_path, prototypes_path, out_dir;
    dataset->add_option("--narratives", narratives_dir, "narrative directory")->required();
    dataset->add_option("--profiles", ds_profiles, "profile fixture JSON")->required();
    dataset->add_option("--rules", rules_path, "label rules JSON");
    dataset->add_option("--prototypes", prototypes_path, "domain prototype phrases JSON");
    dataset->add_option("--out", out_dir, "output directory")->required();

    auto* bench = app.add_subcommand("bench", "heuristic evaluation latency");
    int anchors = 5, iterations = 1000;
    double budget_ms = 1.0;
    bench->add_option("--anchors", anchors, "anchor count")->capture_default_str();
    bench->add_option("--iterations", iterations, "timed iterations")->capture_default_str();
    bench->add_option("--budget-ms", budget_ms, "median latency budget")
        ->capture_default_str();

    auto* lineage = app.add_subcommand("lineage", "query lineage for a stored block");
    std::string lineage_store, lineage_key;
    lineage->add_option("--store", lineage_store, "store snapshot JSON")->required();
    lineage->add_option("--key", lineage_key, "block key")->required();

    auto* neural = app.add_subcommand("neural", "neural fusion inference");
    std::string weights_path, save_path, batch_path, neural_out;
    std::uint64_t init_seed = 42;
    bool init_set = false, tiny = false;
    neural->add_option("--weights", weights_path, "weight container manifest");
    neural->add_option("--init-seed", init_seed, "random init seed")
        ->each([&init_set](const std::string&) { init_set = true; });
    neural->add_flag("--tiny", tiny, "use the tiny config for random init");
    neural->add_option("--save", save_path, "write initialized container manifest");
    neural->add_option("--batch", batch_path, "input batch (JSON lines)");
    neural->add_option("--out", neural_out, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help() << "\n";
        return 2;
    }

    if (app.get_subcommands().empty()) {
        std::cerr << app.help() << "\n";
        return 2;
    }

    try {
        seed = seed_or_env(seed, seed_set);
        if (evaluate->parsed()) {
            return cmd_evaluate(cmb_path, store_path, profiles_path, agent, t_now,
                                t_set, dim, table, thresholds);
        }
        if (simulate->parsed()) {
            return cmd_simulate(scenario_path, sim_profiles, seed, duration,
                                sync_interval, trace_out, dim, table);
        }
        if (dataset->parsed()) {
            return cmd_dataset(narratives_dir, ds_profiles, rules_path,
                               prototypes_path, seed, out_dir, dim, table);
        }
        if (bench->parsed()) {
            return cmd_bench(anchors, dim, iterations, budget_ms);
        }
        if (lineage->parsed()) {
            return cmd_lineage(lineage_store, lineage_key);
        }
        if (neural->parsed()) {
            return cmd_neural(weights_path, init_seed, init_set, tiny, save_path,
                              batch_path, neural_out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
