#include "pufkit/cli.hpp"

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pufkit/authn.hpp"
#include "pufkit/errors.hpp"
#include "pufkit/keygen.hpp"
#include "pufkit/metrics.hpp"
#include "pufkit/oscillator_model.hpp"
#include "pufkit/proto.hpp"
#include "pufkit/puf_core.hpp"

namespace pufkit {

namespace {

using nlohmann::json;

volatile std::sig_atomic_t g_stop_requested = 0;

void handle_stop_signal(int) {
    g_stop_requested = 1;
}

Strategy parse_strategy_flag(const std::string& name) {
    if (name == "all-pairs") return Strategy::explicit_pairs;
    return strategy_from_string(name);
}

std::vector<Environment> build_envs(const PopulationConfig& config,
                                    const std::vector<double>& temps,
                                    const std::vector<double>& volts) {
    const std::vector<double> ts =
        temps.empty() ? std::vector<double>{config.t_nominal} : temps;
    const std::vector<double> vs =
        volts.empty() ? std::vector<double>{config.v_nominal} : volts;
    std::vector<Environment> envs;
    envs.reserve(ts.size() * vs.size());
    for (double t : ts) {
        for (double v : vs) {
            envs.push_back({t, v});
        }
    }
    return envs;
}

struct ChallengePlan {
    Strategy strategy = Strategy::disjoint;
    std::uint64_t seed = 0;
    std::uint32_t k = 0;
    std::uint32_t provisioning_repeats = 5;
};

Challenge make_challenge(const PopulationConfig& config, const PufInstance& instance,
                         const ChallengePlan& plan) {
    switch (plan.strategy) {
        case Strategy::explicit_pairs:
            return gen_challenge_all_pairs(config.n_oscillators);
        case Strategy::disjoint:
            return gen_challenge_disjoint(config.n_oscillators, plan.seed);
        case Strategy::neighbor:
            return gen_challenge_neighbor(config.n_oscillators);
        case Strategy::kgroup:
            if (plan.k == 0) {
                throw ConfigError("k: required for the kgroup strategy");
            }
            return provision_kgroup(config, instance, plan.k,
                                    config.nominal_environment(),
                                    plan.provisioning_repeats);
    }
    throw ConfigError("strategy: unknown value");
}

json load_json_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) {
        throw IoError(std::string("cannot open ") + what + ": " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError(std::string(what) + " " + path.string() + ": " + e.what());
    }
    return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write file: " + path.string());
    }
    out << text;
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

double mean_fractional(const DistanceSamples& samples) {
    if (samples.values.empty() || samples.m == 0) {
        return 0.0;
    }
    const double total =
        std::accumulate(samples.values.begin(), samples.values.end(), 0.0);
    return total / (static_cast<double>(samples.values.size()) *
                    static_cast<double>(samples.m));
}

// ---- simulate ----------------------------------------------------------

struct SimulateOpts {
    std::uint32_t instances = 0;
    std::uint32_t oscillators = 0;
    std::uint64_t seed = 0;
    std::string out;
    double f_nom = 100e6;
    double sigma_process = 0.01;
    double sigma_noise = 0.0005;
    double alpha_T = -2e-4;
    double alpha_V = 0.05;
    double t_nominal = 25.0;
    double v_nominal = 1.2;
    double counter_window = 0.0;
    bool counter_window_set = false;
};

int cmd_simulate(const SimulateOpts& opts) {
    PopulationConfig config;
    config.n_oscillators = opts.oscillators;
    config.f_nom = opts.f_nom;
    config.sigma_process = opts.sigma_process;
    config.sigma_noise = opts.sigma_noise;
    config.alpha_T = opts.alpha_T;
    config.alpha_V = opts.alpha_V;
    config.t_nominal = opts.t_nominal;
    config.v_nominal = opts.v_nominal;
    if (opts.counter_window_set) {
        config.counter_window = opts.counter_window;
    }
    config.seed = opts.seed;

    const OscillatorPopulation pop = create_population(config, opts.instances);
    save_population(opts.out, pop);
    std::cout << "population: " << pop.size() << " instances x " << config.n_oscillators
              << " oscillators (seed " << config.seed << ") -> " << opts.out << '\n';
    return 0;
}

// ---- analyze -----------------------------------------------------------

struct AnalyzeOpts {
    std::string pop;
    std::string strategy = "disjoint";
    std::uint32_t k = 0;
    std::uint32_t provisioning_repeats = 5;
    std::uint32_t repeats = 10;
    std::uint64_t seed = 0;
    std::vector<double> temps;
    std::vector<double> volts;
    std::string report = "report.json";
    std::string hist = "histogram.csv";
    std::string curve = "curve.csv";
};

int cmd_analyze(const AnalyzeOpts& opts) {
    const OscillatorPopulation pop = load_population(opts.pop);
    if (pop.size() < 2) {
        throw ConfigError("population: at least 2 instances required");
    }
    ChallengePlan plan;
    plan.strategy = parse_strategy_flag(opts.strategy);
    plan.seed = opts.seed;
    plan.k = opts.k;
    plan.provisioning_repeats = opts.provisioning_repeats;

    const Challenge shared = make_challenge(pop.config(), pop.instance(0), plan);
    const auto per_instance = [&](const PufInstance& inst) {
        if (plan.strategy == Strategy::kgroup) {
            return make_challenge(pop.config(), inst, plan);
        }
        return shared;
    };
    const std::vector<Environment> envs = build_envs(pop.config(), opts.temps, opts.volts);
    const EvaluationReport report =
        build_report(pop, per_instance, shared, opts.repeats, envs);

    write_text_file(opts.report, json(report).dump(2) + "\n");
    std::ostringstream hist_csv;
    write_histogram_csv(hist_csv, report.intra, report.inter);
    write_text_file(opts.hist, hist_csv.str());
    std::ostringstream curve_csv;
    write_curve_csv(curve_csv, report.curve);
    write_text_file(opts.curve, curve_csv.str());

    std::printf("m=%u intra_mean=%.4f inter_mean=%.4f eer=%.6f tau=%u overlap=%.6f\n",
                report.intra.m, mean_fractional(report.intra),
                mean_fractional(report.inter), report.eer, report.eer_threshold,
                report.overlap);
    return 0;
}

// ---- keygen ------------------------------------------------------------

struct KeygenInitOpts {
    std::string pop;
    std::uint32_t instance = 0;
    std::string strategy = "neighbor";
    std::uint32_t k = 0;
    std::uint32_t provisioning_repeats = 5;
    std::uint32_t t = 3;
    std::string hash_id = "sha-256";
    std::uint32_t key_bits = 256;
    std::uint64_t seed = 0;
    std::string out;
    std::string check_out;
    bool reveal_key = false;
};

json key_check_json(const Key& key, const std::string& hash_id) {
    const std::vector<std::uint8_t> digest = sha256(key.bytes);
    Key digest_key{digest};
    return json{{"hash_id", hash_id}, {"key_digest", digest_key.hex()}};
}

int cmd_keygen_init(const KeygenInitOpts& opts) {
    const OscillatorPopulation pop = load_population(opts.pop);
    const PufInstance& instance = pop.instance(opts.instance);

    ChallengePlan plan;
    plan.strategy = parse_strategy_flag(opts.strategy);
    plan.seed = opts.seed;
    plan.k = opts.k;
    plan.provisioning_repeats = opts.provisioning_repeats;
    const Challenge challenge = make_challenge(pop.config(), instance, plan);

    if (opts.t == 0 || challenge.length() % opts.t != 0) {
        throw DimensionError("response length m=" + std::to_string(challenge.length()) +
                             " is not divisible by t=" + std::to_string(opts.t));
    }
    CodeParams code;
    code.t = opts.t;
    code.data_bits = static_cast<std::uint32_t>(challenge.length()) / opts.t;

    const KeygenResult result = keygen_init(pop.config(), instance, challenge, code,
                                            opts.hash_id, opts.key_bits, opts.seed);
    save_helper(opts.out, result.helper);
    const std::string check_path =
        opts.check_out.empty() ? opts.out + ".check.json" : opts.check_out;
    write_text_file(check_path, key_check_json(result.key, opts.hash_id).dump(2) + "\n");

    std::cout << "helper: m=" << challenge.length() << " data_bits=" << code.data_bits
              << " t=" << code.t << " key_bits=" << opts.key_bits << " -> " << opts.out
              << " (check: " << check_path << ")\n";
    if (opts.reveal_key) {
        std::cout << "key: " << result.key.hex() << '\n';
    }
    return 0;
}

struct KeygenReproduceOpts {
    std::string pop;
    std::uint32_t instance = 0;
    std::string helper;
    std::string check;
    double temp = 0.0;
    double volt = 0.0;
    bool temp_set = false;
    bool volt_set = false;
    std::uint64_t measurement_index = 1;
};

int cmd_keygen_reproduce(const KeygenReproduceOpts& opts) {
    const OscillatorPopulation pop = load_population(opts.pop);
    const PufInstance& instance = pop.instance(opts.instance);
    const HelperData helper = load_helper(opts.helper);
    const json check = load_json_file(opts.check, "key check file");

    Environment env = pop.config().nominal_environment();
    if (opts.temp_set) env.temperature = opts.temp;
    if (opts.volt_set) env.voltage = opts.volt;

    const Key key =
        keygen_reproduce(pop.config(), instance, helper, env, opts.measurement_index);
    const std::string expected = check.at("key_digest").get<std::string>();
    const std::string actual = Key{sha256(key.bytes)}.hex();
    if (actual == expected) {
        std::cout << "MATCH\n";
        return 0;
    }
    std::cout << "MISMATCH\n";
    return 1;
}

// ---- enroll ------------------------------------------------------------

struct EnrollOpts {
    std::string db;
    std::string id;
    std::string pop;
    std::uint32_t instance = 0;
    std::string strategy = "disjoint";
    std::uint32_t k = 0;
    std::uint32_t provisioning_repeats = 5;
    std::uint32_t num_crps = 10;
    std::uint64_t seed = 0;
    std::uint32_t threshold = 0;
    bool threshold_set = false;
    std::string report;
    bool re_enroll = false;
};

int cmd_enroll(const EnrollOpts& opts) {
    const OscillatorPopulation pop = load_population(opts.pop);
    const PufInstance& instance = pop.instance(opts.instance);

    EnrollOptions enroll_options;
    enroll_options.strategy = parse_strategy_flag(opts.strategy);
    enroll_options.num_crps = opts.num_crps;
    enroll_options.seed = opts.seed;
    enroll_options.k = opts.k;
    enroll_options.provisioning_repeats = opts.provisioning_repeats;
    enroll_options.re_enroll = opts.re_enroll;
    if (enroll_options.strategy == Strategy::kgroup && opts.k == 0) {
        throw ConfigError("k: required for the kgroup strategy");
    }

    const Challenge probe = enrollment_challenge(pop.config(), instance, enroll_options, 0);
    const auto m = static_cast<std::uint32_t>(probe.length());

    std::optional<std::uint32_t> threshold;
    if (opts.threshold_set) {
        threshold = opts.threshold;
    } else if (!opts.report.empty()) {
        const json rj = load_json_file(opts.report, "report file");
        threshold = rj.at("eer_threshold").get<std::uint32_t>();
    }

    std::optional<CrpDatabase> db;
    if (std::filesystem::exists(opts.db)) {
        db = CrpDatabase::load(opts.db);
        if (db->response_length() != m) {
            throw DimensionError("database m=" + std::to_string(db->response_length()) +
                                 " != challenge length " + std::to_string(m));
        }
        if (threshold) {
            db->set_threshold(*threshold);
        }
    } else {
        if (!threshold) {
            throw ConfigError(
                "threshold: provide --threshold or --report when creating a new database");
        }
        db.emplace(*threshold, m);
    }

    db->enroll(opts.id, pop.config(), instance, enroll_options);
    db->save(opts.db);
    std::cout << "enrolled " << opts.id << ": " << opts.num_crps << " records (m=" << m
              << ", threshold=" << db->threshold() << ") -> " << opts.db << '\n';
    return 0;
}

// ---- serve / prove -----------------------------------------------------

struct ServeOpts {
    std::string db;
    std::string listen;
    std::uint32_t timeout_ms = 5000;
    std::uint32_t threshold = 0;
    bool threshold_set = false;
};

int cmd_serve(const ServeOpts& opts) {
    const auto [host, port] = parse_endpoint(opts.listen);
    ServerOptions options;
    options.host = host;
    options.port = port;
    options.idle_timeout = std::chrono::milliseconds(opts.timeout_ms);
    if (opts.threshold_set) {
        options.threshold_override = opts.threshold;
    }
    VerifierServer server(opts.db, options);
    server.start();
    std::cout << "listening on " << host << ':' << server.port() << std::endl;

    std::signal(SIGINT, handle_stop_signal);
    std::signal(SIGTERM, handle_stop_signal);
    while (!g_stop_requested) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    server.stop();
    std::cout << "stopped\n";
    return 0;
}

struct ProveOpts {
    std::string server;
    std::string id;
    std::string pop;
    std::uint32_t instance = 0;
    double temp = 0.0;
    double volt = 0.0;
    bool temp_set = false;
    bool volt_set = false;
    std::uint64_t measurement_index = 1;
    std::uint32_t timeout_ms = 5000;
};

int cmd_prove(const ProveOpts& opts) {
    const OscillatorPopulation pop = load_population(opts.pop);
    const PufInstance& instance = pop.instance(opts.instance);
    const auto [host, port] = parse_endpoint(opts.server);

    Environment env = pop.config().nominal_environment();
    if (opts.temp_set) env.temperature = opts.temp;
    if (opts.volt_set) env.voltage = opts.volt;

    const AuthOutcome outcome =
        run_prover(host, port, opts.id, pop.config(), instance, env,
                   opts.measurement_index, std::chrono::milliseconds(opts.timeout_ms));
    std::cout << (outcome.accept ? "accept" : "reject") << " distance=" << outcome.distance
              << " threshold=" << outcome.threshold
              << " record_index=" << outcome.record_index << '\n';
    return outcome.accept ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"ring-oscillator PUF population simulator and authentication toolkit"};
    app.require_subcommand(1);

    const std::vector<std::string> strategy_names{"all-pairs", "disjoint", "neighbor",
                                                  "kgroup"};

    SimulateOpts sim;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "create a simulated PUF population");
    sim_cmd->add_option("--instances", sim.instances, "number of PUF instances")->required();
    sim_cmd->add_option("--oscillators", sim.oscillators, "oscillators per instance")
        ->required();
    sim_cmd->add_option("--seed", sim.seed, "master seed")->envname("PUFKIT_SEED");
    sim_cmd->add_option("--out", sim.out, "output population JSON")->required();
    sim_cmd->add_option("--f-nom", sim.f_nom, "nominal frequency, Hz");
    sim_cmd->add_option("--sigma-process", sim.sigma_process,
                        "relative std-dev of process deviation");
    sim_cmd->add_option("--sigma-noise", sim.sigma_noise,
                        "relative std-dev of measurement noise");
    sim_cmd->add_option("--alpha-t", sim.alpha_T, "temperature coefficient, 1/degC");
    sim_cmd->add_option("--alpha-v", sim.alpha_V, "voltage coefficient, 1/V");
    sim_cmd->add_option("--t-nominal", sim.t_nominal, "nominal temperature, degC");
    sim_cmd->add_option("--v-nominal", sim.v_nominal, "nominal voltage, V");
    CLI::Option* cw_opt = sim_cmd->add_option("--counter-window", sim.counter_window,
                                              "counter window, seconds (enables counter mode)");

    AnalyzeOpts ana;
    CLI::App* ana_cmd =
        app.add_subcommand("analyze", "intra/inter distances, FAR/FRR curve, EER, overlap");
    ana_cmd->add_option("--pop", ana.pop, "population JSON")->required();
    ana_cmd->add_option("--strategy", ana.strategy, "pair-selection strategy")
        ->check(CLI::IsMember(strategy_names));
    ana_cmd->add_option("--k", ana.k, "group size for kgroup");
    ana_cmd->add_option("--provisioning-repeats", ana.provisioning_repeats,
                        "kgroup provisioning measurements per oscillator");
    ana_cmd->add_option("--repeats", ana.repeats, "measurements per instance (>= 2)");
    ana_cmd->add_option("--seed", ana.seed, "challenge seed")->envname("PUFKIT_SEED");
    ana_cmd->add_option("--temps", ana.temps, "temperature sweep, degC")->delimiter(',');
    ana_cmd->add_option("--volts", ana.volts, "voltage sweep, V")->delimiter(',');
    ana_cmd->add_option("--report", ana.report, "report JSON path");
    ana_cmd->add_option("--hist", ana.hist, "histogram CSV path");
    ana_cmd->add_option("--curve", ana.curve, "FAR/FRR curve CSV path");

    KeygenInitOpts kgi;
    CLI::App* kgi_cmd =
        app.add_subcommand("keygen-init", "fuzzy-extractor initialization (helper data)");
    kgi_cmd->add_option("--pop", kgi.pop, "population JSON")->required();
    kgi_cmd->add_option("--instance", kgi.instance, "instance index");
    kgi_cmd->add_option("--strategy", kgi.strategy, "pair-selection strategy")
        ->check(CLI::IsMember(strategy_names));
    kgi_cmd->add_option("--k", kgi.k, "group size for kgroup");
    kgi_cmd->add_option("--provisioning-repeats", kgi.provisioning_repeats,
                        "kgroup provisioning measurements per oscillator");
    kgi_cmd->add_option("--t", kgi.t, "repetition factor (odd, >= 3)");
    kgi_cmd->add_option("--hash", kgi.hash_id, "hash algorithm id");
    kgi_cmd->add_option("--key-bits", kgi.key_bits, "key length in bits (128 or 256)");
    kgi_cmd->add_option("--seed", kgi.seed, "seed for challenge and info bits")
        ->envname("PUFKIT_SEED");
    kgi_cmd->add_option("--out", kgi.out, "helper data JSON path")->required();
    kgi_cmd->add_option("--check-out", kgi.check_out,
                        "key digest JSON path (default: <out>.check.json)");
    kgi_cmd->add_flag("--reveal-key", kgi.reveal_key, "print the key as lowercase hex");

    KeygenReproduceOpts kgr;
    CLI::App* kgr_cmd =
        app.add_subcommand("keygen-reproduce", "reproduce the key and check the digest");
    kgr_cmd->add_option("--pop", kgr.pop, "population JSON")->required();
    kgr_cmd->add_option("--instance", kgr.instance, "instance index");
    kgr_cmd->add_option("--helper", kgr.helper, "helper data JSON")->required();
    kgr_cmd->add_option("--check", kgr.check, "key digest JSON from keygen-init")->required();
    CLI::Option* kgr_temp = kgr_cmd->add_option("--temp", kgr.temp, "temperature, degC");
    CLI::Option* kgr_volt = kgr_cmd->add_option("--volt", kgr.volt, "voltage, V");
    kgr_cmd->add_option("--measurement-index", kgr.measurement_index, "measurement index");

    EnrollOpts enr;
    CLI::App* enr_cmd = app.add_subcommand("enroll", "collect CRPs into the verifier database");
    enr_cmd->add_option("--db", enr.db, "CRP database JSON path")->required();
    enr_cmd->add_option("--id", enr.id, "entity id")->required();
    enr_cmd->add_option("--pop", enr.pop, "population JSON")->required();
    enr_cmd->add_option("--instance", enr.instance, "instance index");
    enr_cmd->add_option("--strategy", enr.strategy, "pair-selection strategy")
        ->check(CLI::IsMember(strategy_names));
    enr_cmd->add_option("--k", enr.k, "group size for kgroup");
    enr_cmd->add_option("--provisioning-repeats", enr.provisioning_repeats,
                        "kgroup provisioning measurements per oscillator");
    enr_cmd->add_option("--num-crps", enr.num_crps, "records to enroll");
    enr_cmd->add_option("--seed", enr.seed, "challenge series seed")->envname("PUFKIT_SEED");
    CLI::Option* enr_thr =
        enr_cmd->add_option("--threshold", enr.threshold, "acceptance threshold (bits)");
    enr_cmd->add_option("--report", enr.report,
                        "take the threshold from this analyze report's eer_threshold");
    enr_cmd->add_flag("--re-enroll", enr.re_enroll, "replace an existing enrollment");

    ServeOpts srv;
    CLI::App* srv_cmd = app.add_subcommand("serve", "run the verifier server");
    srv_cmd->add_option("--db", srv.db, "CRP database JSON path")->required();
    srv_cmd->add_option("--listen", srv.listen, "listen endpoint host:port")->required();
    srv_cmd->add_option("--timeout-ms", srv.timeout_ms, "per-session inactivity timeout");
    CLI::Option* srv_thr =
        srv_cmd->add_option("--threshold", srv.threshold, "override the stored threshold");

    ProveOpts prv;
    CLI::App* prv_cmd = app.add_subcommand("prove", "authenticate against a verifier server");
    prv_cmd->add_option("--server", prv.server, "server endpoint host:port")->required();
    prv_cmd->add_option("--id", prv.id, "entity id")->required();
    prv_cmd->add_option("--pop", prv.pop, "population JSON")->required();
    prv_cmd->add_option("--instance", prv.instance, "instance index");
    CLI::Option* prv_temp = prv_cmd->add_option("--temp", prv.temp, "temperature, degC");
    CLI::Option* prv_volt = prv_cmd->add_option("--volt", prv.volt, "voltage, V");
    prv_cmd->add_option("--measurement-index", prv.measurement_index, "measurement index");
    prv_cmd->add_option("--timeout-ms", prv.timeout_ms, "connect/read timeout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    sim.counter_window_set = cw_opt->count() > 0;
    kgr.temp_set = kgr_temp->count() > 0;
    kgr.volt_set = kgr_volt->count() > 0;
    enr.threshold_set = enr_thr->count() > 0;
    srv.threshold_set = srv_thr->count() > 0;
    prv.temp_set = prv_temp->count() > 0;
    prv.volt_set = prv_volt->count() > 0;

    try {
        if (sim_cmd->parsed()) return cmd_simulate(sim);
        if (ana_cmd->parsed()) return cmd_analyze(ana);
        if (kgi_cmd->parsed()) return cmd_keygen_init(kgi);
        if (kgr_cmd->parsed()) return cmd_keygen_reproduce(kgr);
        if (enr_cmd->parsed()) return cmd_enroll(enr);
        if (srv_cmd->parsed()) return cmd_serve(srv);
        if (prv_cmd->parsed()) return cmd_prove(prv);
    } catch (const RemoteError& e) {
        std::cerr << "server error: " << e.what() << '\n';
        return 2;
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}

}  // namespace pufkit
