// crm — command-line front end for the compositional relational machine
// library: generate synthetic tasks, mine simple feature-clauses, build and
// train gated composition networks, evaluate fidelity, and emit explanations.

#include <CLI11.hpp>
#include <json.hpp>

#include "crm/datagen.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using nlohmann::ordered_json;

// ---- small helpers ---------------------------------------------------------

void write_text(const std::string& path, const std::string& text) {
    std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
    std::ofstream f(path);
    if (!f) throw crm::DataError("cannot write file: " + path);
    f << text;
    if (!f.good()) throw crm::DataError("cannot write file: " + path);
}

std::string fmt3(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return buf;
}

std::string fmt_loss(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Aligned text table: every column padded to its widest cell.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void print(std::ostream& os) const {
        std::vector<std::size_t> w(header.size());
        for (std::size_t c = 0; c < header.size(); ++c) w[c] = header[c].size();
        for (const auto& r : rows)
            for (std::size_t c = 0; c < r.size() && c < w.size(); ++c)
                w[c] = std::max(w[c], r[c].size());
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t c = 0; c < cells.size(); ++c) {
                if (c) os << "  ";
                os << cells[c];
                if (c + 1 < cells.size())
                    os << std::string(w[c] - cells[c].size(), ' ');
            }
            os << "\n";
        };
        line(header);
        std::size_t total = 0;
        for (std::size_t c = 0; c < w.size(); ++c) total += w[c] + (c ? 2 : 0);
        os << std::string(total, '-') << "\n";
        for (const auto& r : rows) line(r);
    }
};

// FNV-1a of the modes text; provenance tag stored in model files.
std::string modes_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Ensemble member i of an artifact path: base, base.2, base.3, ...
std::string member_path(const std::string& base, std::size_t i) {
    return i == 0 ? base : base + "." + std::to_string(i + 1);
}

std::size_t default_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

// ---- shared evaluation -----------------------------------------------------

struct EvalCounts {
    std::size_t cp = 0, ip = 0, ce = 0, ie = 0;
    bool any_untrained = false;
};

// Fidelity counts under the any-member protocol: an instance counts as
// correctly predicted (consistently explained) when any one of the models
// predicts (explains) it. Instances are sharded across threads; every thread
// works on private copies of the models, so shared state stays read-only.
EvalCounts eval_models(const std::vector<crm::Crm>& models, const crm::Dataset& data,
                       const crm::FactStore& store, const crm::AcceptableTheory* theory,
                       std::size_t threads) {
    EvalCounts total;
    for (const crm::Crm& m : models) total.any_untrained |= m.labels.empty();
    if (data.empty()) return total;

    std::size_t t = std::max<std::size_t>(1, std::min(threads, data.size()));
    std::vector<EvalCounts> part(t);
    auto run = [&](std::size_t shard, std::size_t lo, std::size_t hi) {
        std::vector<crm::Crm> mine = models; // private copies: caches mutate
        EvalCounts& out = part[shard];
        for (std::size_t i = lo; i < hi; ++i) {
            const crm::Instance& inst = data[i];
            bool correct = false, consistent = false;
            for (crm::Crm& m : mine) {
                if (m.labels.empty()) continue;
                crm::Prediction p = crm::predict(m, inst, store);
                correct = correct || m.labels[p.cls] == inst.target;
                if (theory)
                    consistent =
                        consistent || crm::consistently_explained(m, inst, store, *theory);
            }
            (correct ? out.cp : out.ip)++;
            (consistent ? out.ce : out.ie)++;
        }
    };
    if (t == 1) {
        run(0, 0, data.size());
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (data.size() + t - 1) / t;
        for (std::size_t s = 0; s < t; ++s) {
            std::size_t lo = s * chunk, hi = std::min(data.size(), lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(run, s, lo, hi);
        }
        for (std::thread& th : pool) th.join();
    }
    for (const EvalCounts& p : part) {
        total.cp += p.cp;
        total.ip += p.ip;
        total.ce += p.ce;
        total.ie += p.ie;
    }
    return total;
}

std::string majority_target(const crm::Dataset& data) {
    std::map<std::string, std::size_t> count;
    for (const crm::Instance& inst : data) ++count[inst.target];
    std::string best;
    std::size_t n = 0;
    for (const auto& [label, c] : count)
        if (c > n) best = label, n = c; // ties go to the lexicographically least
    return best;
}

// ---- run configuration ------------------------------------------------------

struct RunConfig {
    std::string task = "custom";
    std::string modes, facts, data, model, clauses, out, instance, config;
    std::uint64_t seed = 7;
    std::size_t sample_size = 0; // 0 = task default
    std::size_t depth_rho2 = 3, depth_rho1 = 0;
    std::size_t min_support = 10;
    double min_precision = 0.5;
    std::size_t max_body = 2;
    double lr = 0.001;
    std::size_t epochs = 5;
    std::size_t ensemble = 1;
    std::size_t threads = default_threads();
};

std::string strip_spaces(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

void assign_key(RunConfig& cfg, const std::string& key, const std::string& val) {
    if (key == "task") cfg.task = val;
    else if (key == "modes") cfg.modes = val;
    else if (key == "facts") cfg.facts = val;
    else if (key == "data") cfg.data = val;
    else if (key == "model") cfg.model = val;
    else if (key == "clauses") cfg.clauses = val;
    else if (key == "out") cfg.out = val;
    else if (key == "instance") cfg.instance = val;
    else if (key == "seed") cfg.seed = std::stoull(val);
    else if (key == "sample-size") cfg.sample_size = std::stoull(val);
    else if (key == "depth-rho2") cfg.depth_rho2 = std::stoull(val);
    else if (key == "depth-rho1") cfg.depth_rho1 = std::stoull(val);
    else if (key == "min-support") cfg.min_support = std::stoull(val);
    else if (key == "min-precision") cfg.min_precision = std::stod(val);
    else if (key == "max-body") cfg.max_body = std::stoull(val);
    else if (key == "lr") cfg.lr = std::stod(val);
    else if (key == "epochs") cfg.epochs = std::stoull(val);
    else if (key == "ensemble") cfg.ensemble = std::stoull(val);
    else if (key == "threads") cfg.threads = std::stoull(val);
    else throw crm::ConfigError("config files cannot set '" + key + "'");
}

// key=value config file; '#'/'%' comments. A key only applies when its flag
// was not given on the command line, so explicit flags always win.
void apply_config(CLI::App* sub, RunConfig& cfg) {
    std::ifstream f(cfg.config);
    if (!f) throw crm::ConfigError("cannot open config file: " + cfg.config);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        std::string s = strip_spaces(line);
        if (s.empty() || s[0] == '#' || s[0] == '%') continue;
        std::size_t eq = s.find('=');
        std::string where = "config file " + cfg.config + " line " + std::to_string(lineno);
        if (eq == std::string::npos)
            throw crm::ConfigError(where + ": expected key=value, got '" + s + "'");
        std::string key = strip_spaces(s.substr(0, eq));
        std::string val = strip_spaces(s.substr(eq + 1));
        const CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (!opt || key == "config")
            throw crm::ConfigError(where + ": unknown key '" + key + "' for subcommand " +
                                   sub->get_name());
        if (opt->count() > 0) continue;
        try {
            assign_key(cfg, key, val);
        } catch (const std::invalid_argument&) {
            throw crm::ConfigError(where + ": bad value for '" + key + "': " + val);
        } catch (const std::out_of_range&) {
            throw crm::ConfigError(where + ": bad value for '" + key + "': " + val);
        }
    }
}

void check_common(const RunConfig& cfg) {
    if (cfg.threads == 0) throw crm::ConfigError("--threads must be at least 1");
    if (cfg.ensemble == 0) throw crm::ConfigError("--ensemble must be at least 1");
    if (!(cfg.min_precision >= 0.0 && cfg.min_precision <= 1.0))
        throw crm::ConfigError("--min-precision must lie in [0, 1]");
}

crm::GeneratedTask generate(const RunConfig& cfg) {
    std::size_t n = cfg.sample_size;
    if (cfg.task == "trains") return crm::gen_trains(n ? n : 1000, cfg.seed);
    if (cfg.task == "krk" || cfg.task == "chess") return crm::gen_krk(n ? n : 20000, cfg.seed);
    throw crm::ConfigError("--task must be trains or krk to generate data, got '" +
                           cfg.task + "'");
}

double train_fraction(const std::string& task) { return task == "trains" ? 0.7 : 0.5; }

// ---- subcommands -------------------------------------------------------------

int cmd_gen(const RunConfig& cfg) {
    check_common(cfg);
    crm::GeneratedTask task = generate(cfg);
    std::string dir = cfg.out.empty() ? "." : cfg.out;
    std::string name = cfg.task == "chess" ? "krk" : cfg.task;
    std::string modes_path = cfg.modes.empty() ? dir + "/" + name + ".modes" : cfg.modes;
    std::string facts_path = cfg.facts.empty() ? dir + "/" + name + ".facts" : cfg.facts;
    std::string data_path = cfg.data.empty() ? dir + "/" + name + ".data" : cfg.data;

    std::size_t n_train =
        static_cast<std::size_t>(double(task.data.size()) * train_fraction(name) + 0.5);
    crm::Dataset train_d(task.data.begin(), task.data.begin() + n_train);
    crm::Dataset test_d(task.data.begin() + n_train, task.data.end());

    write_text(modes_path, task.modes_text);
    write_text(facts_path, task.store.str(task.data));
    write_text(data_path, crm::dataset_str(task.data));
    write_text(data_path + ".train", crm::dataset_str(train_d));
    write_text(data_path + ".test", crm::dataset_str(test_d));

    std::size_t pos = 0;
    for (const crm::Instance& inst : task.data) pos += inst.label == "+";

    Table t;
    t.header = {"artifact", "value"};
    t.rows = {{"task", name},
              {"instances", std::to_string(task.data.size())},
              {"positives", std::to_string(pos)},
              {"train split", std::to_string(train_d.size())},
              {"test split", std::to_string(test_d.size())},
              {"modes file", modes_path},
              {"facts file", facts_path},
              {"dataset file", data_path},
              {"train file", data_path + ".train"},
              {"test file", data_path + ".test"}};
    t.print(std::cout);
    return 0;
}

int cmd_mine(const RunConfig& cfg) {
    check_common(cfg);
    if (cfg.modes.empty()) throw crm::ConfigError("--modes is required for mine");
    if (cfg.facts.empty()) throw crm::ConfigError("--facts is required for mine");
    if (cfg.data.empty()) throw crm::ConfigError("--data is required for mine");

    auto [modes, types] = crm::parse_modes_file(cfg.modes);
    crm::FactStore store = crm::FactStore::from_file(cfg.facts);
    crm::Dataset data = crm::dataset_from_file(cfg.data);

    std::vector<crm::OrderedClause> language =
        crm::enumerate_simple_clauses(modes, types, cfg.max_body);
    std::vector<crm::MinedClause> kept =
        crm::filter_by_stats(language, data, store, cfg.min_support, cfg.min_precision);

    std::string out = cfg.out.empty() ? "mined.clauses" : cfg.out;
    crm::mined_to_file(out, kept);

    Table t;
    t.header = {"metric", "value"};
    t.rows = {{"simple clauses enumerated", std::to_string(language.size())},
              {"clauses kept", std::to_string(kept.size())},
              {"min support", std::to_string(cfg.min_support)},
              {"min precision", fmt3(cfg.min_precision)},
              {"max body literals", std::to_string(cfg.max_body)},
              {"clauses file", out}};
    t.print(std::cout);
    return 0;
}

int cmd_build(const RunConfig& cfg) {
    check_common(cfg);
    if (cfg.modes.empty()) throw crm::ConfigError("--modes is required for build");
    if (cfg.facts.empty()) throw crm::ConfigError("--facts is required for build");
    if (cfg.data.empty()) throw crm::ConfigError("--data is required for build");
    if (cfg.sample_size == 0)
        throw crm::ConfigError("--sample-size (clauses drawn per layer) is required for build");

    auto [modes, types] = crm::parse_modes_file(cfg.modes);
    crm::FactStore store = crm::FactStore::from_file(cfg.facts);
    crm::Dataset data = crm::dataset_from_file(cfg.data);
    std::string clauses_path = cfg.clauses.empty() ? "mined.clauses" : cfg.clauses;
    std::vector<crm::MinedClause> mined = crm::mined_from_file(clauses_path);
    if (mined.empty()) throw crm::DataError("no clauses in file: " + clauses_path);
    std::vector<crm::OrderedClause> phi;
    for (const crm::MinedClause& mc : mined) phi.push_back(mc.clause);

    crm::CrmFilter filter;
    filter.data = &data;
    filter.facts = &store;
    filter.min_support = cfg.min_support;
    filter.min_precision = cfg.min_precision;

    std::string out = cfg.out.empty() ? "model.json" : cfg.out;
    std::string hash = modes_hash(modes.str());
    Table t;
    t.header = {"member", "seed", "vertices", "inputs", "outputs", "model file"};
    for (std::size_t i = 0; i < cfg.ensemble; ++i) {
        crm::Crm crm = crm::random_crm(phi, modes, types, "relu", cfg.sample_size,
                                       cfg.depth_rho1, cfg.depth_rho2, cfg.seed + i, &filter);
        crm.modes_hash_hex = hash;
        std::string path = member_path(out, i);
        crm::save_model(crm, path);
        t.rows.push_back({std::to_string(i + 1), std::to_string(cfg.seed + i),
                          std::to_string(crm.size()), std::to_string(crm.inputs.size()),
                          std::to_string(crm.outputs.size()), path});
    }
    t.print(std::cout);
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    check_common(cfg);
    if (cfg.model.empty()) throw crm::ConfigError("--model is required for train");
    if (cfg.facts.empty()) throw crm::ConfigError("--facts is required for train");
    if (cfg.data.empty()) throw crm::ConfigError("--data is required for train");

    crm::FactStore store = crm::FactStore::from_file(cfg.facts);
    crm::Dataset data = crm::dataset_from_file(cfg.data);

    crm::TrainConfig tc;
    tc.learning_rate = cfg.lr;
    tc.epochs = cfg.epochs;
    tc.seed = cfg.seed;

    std::string out = cfg.out.empty() ? "trained.json" : cfg.out;
    Table t;
    t.header = {"member", "epochs", "final loss", "model file", "loss log"};
    for (std::size_t i = 0; i < cfg.ensemble; ++i) {
        crm::Crm crm = crm::load_model(member_path(cfg.model, i));
        std::vector<double> losses = crm::train(crm, data, store, tc);
        std::string path = member_path(out, i);
        crm::save_model(crm, path);
        std::ostringstream log;
        for (std::size_t e = 0; e < losses.size(); ++e)
            log << "epoch " << e + 1 << " loss " << fmt_loss(losses[e]) << "\n";
        write_text(path + ".loss", log.str());
        t.rows.push_back({std::to_string(i + 1), std::to_string(losses.size()),
                          losses.empty() ? "-" : fmt_loss(losses.back()), path,
                          path + ".loss"});
    }
    t.print(std::cout);
    return 0;
}

int cmd_eval(const RunConfig& cfg) {
    check_common(cfg);
    if (cfg.model.empty()) throw crm::ConfigError("--model is required for eval");
    if (cfg.facts.empty()) throw crm::ConfigError("--facts is required for eval");
    if (cfg.data.empty()) throw crm::ConfigError("--data is required for eval");

    crm::FactStore store = crm::FactStore::from_file(cfg.facts);
    crm::Dataset data = crm::dataset_from_file(cfg.data);
    std::vector<crm::Crm> models;
    std::vector<std::string> model_paths;
    for (std::size_t i = 0; i < cfg.ensemble; ++i) {
        model_paths.push_back(member_path(cfg.model, i));
        models.push_back(crm::load_model(model_paths.back()));
    }

    std::map<std::string, crm::AcceptableTheory> theories = crm::acceptable_theories();
    std::string task = cfg.task == "chess" ? "krk" : cfg.task;
    const crm::AcceptableTheory* theory =
        theories.count(task) ? &theories.at(task) : nullptr;

    EvalCounts c = eval_models(models, data, store, theory, cfg.threads);
    double n = double(data.size());
    double predictive = data.empty() ? 0.0 : double(c.cp) / n;
    double explanatory = data.empty() ? 0.0 : double(c.ce) / n;

    Table t;
    t.header = {"metric", "value"};
    t.rows = {{"instances", std::to_string(data.size())},
              {"ensemble members", std::to_string(models.size())},
              {"correct predictions", std::to_string(c.cp)},
              {"predictive fidelity", fmt3(predictive)},
              {"consistently explained", theory ? std::to_string(c.ce) : "n/a"},
              {"explanatory fidelity", theory ? fmt3(explanatory) : "n/a"}};
    if (c.any_untrained) t.rows.push_back({"note", "model has no class labels (untrained)"});
    t.print(std::cout);

    ordered_json j;
    j["command"] = "eval";
    j["task"] = task;
    j["models"] = model_paths;
    j["data"] = cfg.data;
    j["instances"] = data.size();
    j["ensemble"] = models.size();
    j["correct_predictions"] = c.cp;
    j["incorrect_predictions"] = c.ip;
    j["predictive_fidelity"] = predictive;
    if (theory) {
        j["consistently_explained"] = c.ce;
        j["inconsistently_explained"] = c.ie;
        j["explanatory_fidelity"] = explanatory;
    }
    if (c.any_untrained) j["untrained"] = true;
    std::string out = cfg.out.empty() ? "eval.json" : cfg.out;
    write_text(out, j.dump(1) + "\n");
    std::cout << "report written to " << out << "\n";
    return 0;
}

int cmd_explain(const RunConfig& cfg) {
    check_common(cfg);
    if (cfg.model.empty()) throw crm::ConfigError("--model is required for explain");
    if (cfg.facts.empty()) throw crm::ConfigError("--facts is required for explain");
    if (cfg.data.empty()) throw crm::ConfigError("--data is required for explain");
    if (cfg.instance.empty()) throw crm::ConfigError("--instance is required for explain");

    crm::Crm crm = crm::load_model(cfg.model);
    crm::FactStore store = crm::FactStore::from_file(cfg.facts);
    crm::Dataset data = crm::dataset_from_file(cfg.data);

    const crm::Instance* found = nullptr;
    for (const crm::Instance& inst : data)
        if (inst.id.str() == cfg.instance) found = &inst;
    if (!found)
        throw crm::DataError("instance not found in " + cfg.data + ": " + cfg.instance);

    crm::MuxResult mux = crm::mux_explain(crm, *found, found->target, store);

    std::string out = cfg.out.empty() ? "explanation" : cfg.out;
    write_text(out + ".dot", crm::explanation_dot(crm, mux.explanation));
    ordered_json j;
    j["command"] = "explain";
    j["instance"] = cfg.instance;
    j["target"] = found->target;
    j["prediction"] = mux.prediction;
    j["explanation"] = crm::explanation_json(crm, mux.explanation);
    write_text(out + ".json", j.dump(1) + "\n");

    Table t;
    t.header = {"field", "value"};
    t.rows = {{"instance", cfg.instance},
              {"target", found->target},
              {"prediction", mux.prediction},
              {"explanation vertices", std::to_string(mux.explanation.vertices.size())},
              {"dot file", out + ".dot"},
              {"json file", out + ".json"}};
    if (mux.explanation.empty())
        t.rows.push_back({"note", mux.prediction == found->target
                                      ? "selected output is gated off"
                                      : "prediction disagrees with the target"});
    t.print(std::cout);

    for (std::size_t v : mux.explanation.vertices)
        std::cout << "v" << v << " [" << crm::detail::kind_name(crm.vertices[v].kind)
                  << "] " << mux.explanation.clause_of.at(v).str() << "\n";
    return 0;
}

// One Fig-style reproduction row: generate, split, mine, build, train, then
// score the CRM and both baselines on the held-out test set.
struct ReproRow {
    std::string dataset;
    double crm_pred = 0, crm_expl = 0, base_pred = 0, base_expl = 0;
    ordered_json detail;
};

ReproRow repro_row(const std::string& task, const RunConfig& cfg) {
    bool trains = task == "trains";
    RunConfig gen_cfg = cfg;
    gen_cfg.task = task;
    gen_cfg.sample_size = trains ? 1000 : 20000;
    crm::GeneratedTask gt = generate(gen_cfg);

    std::size_t n_train = trains ? 700 : 10000;
    crm::Dataset train_d(gt.data.begin(), gt.data.begin() + n_train);
    crm::Dataset test_d(gt.data.begin() + n_train, gt.data.end());

    std::vector<crm::OrderedClause> language =
        crm::enumerate_simple_clauses(gt.modes, gt.types, 2);
    std::vector<crm::MinedClause> mined =
        crm::filter_by_stats(language, train_d, gt.store, 10, 0.5);
    std::vector<crm::OrderedClause> phi;
    for (const crm::MinedClause& mc : mined) phi.push_back(mc.clause);
    if (phi.empty()) throw crm::DataError("repro: mining kept no clauses for " + task);

    crm::CrmFilter filter;
    filter.data = &train_d;
    filter.facts = &gt.store;

    std::size_t s = trains ? 150 : 200;
    std::size_t d_rho2 = trains ? 2 : 3;
    std::size_t d_rho1 = trains ? 1 : 0;

    crm::TrainConfig tc;
    tc.learning_rate = 0.001;
    tc.epochs = trains ? 5 : 10;
    tc.seed = cfg.seed;

    std::vector<crm::Crm> models;
    for (std::size_t i = 0; i < cfg.ensemble; ++i) {
        crm::Crm crm = crm::random_crm(phi, gt.modes, gt.types, "relu", s, d_rho1, d_rho2,
                                       cfg.seed + i, &filter);
        crm::train(crm, train_d, gt.store, tc);
        models.push_back(std::move(crm));
    }

    crm::AcceptableTheory theory = crm::acceptable_theories().at(task);
    EvalCounts c = eval_models(models, test_d, gt.store, &theory, cfg.threads);

    std::string maj = majority_target(train_d);
    std::size_t base_cp = 0;
    for (const crm::Instance& inst : test_d) base_cp += inst.target == maj;
    crm::FidelityReport base =
        crm::baseline_explainer(test_d, gt.store, phi, theory, cfg.seed);

    ReproRow row;
    row.dataset = trains ? "Trains" : "Chess";
    double n = double(test_d.size());
    row.crm_pred = double(c.cp) / n;
    row.crm_expl = double(c.ce) / n;
    row.base_pred = double(base_cp) / n;
    row.base_expl = base.explanatory.value_or(0.0);

    row.detail["dataset"] = row.dataset;
    row.detail["instances"] = gt.data.size();
    row.detail["train_size"] = train_d.size();
    row.detail["test_size"] = test_d.size();
    row.detail["clauses_mined"] = phi.size();
    row.detail["sample_per_layer"] = s;
    row.detail["depth_rho2"] = d_rho2;
    row.detail["depth_rho1"] = d_rho1;
    row.detail["epochs"] = tc.epochs;
    row.detail["learning_rate"] = tc.learning_rate;
    row.detail["ensemble"] = cfg.ensemble;
    row.detail["crm"] = {{"correct_predictions", c.cp},
                         {"consistently_explained", c.ce},
                         {"predictive_fidelity", row.crm_pred},
                         {"explanatory_fidelity", row.crm_expl}};
    row.detail["baseline"] = {{"majority_class", maj},
                              {"correct_predictions", base_cp},
                              {"consistently_explained", base.ce},
                              {"predictive_fidelity", row.base_pred},
                              {"explanatory_fidelity", row.base_expl}};
    return row;
}

int cmd_repro(const RunConfig& cfg) {
    check_common(cfg);
    std::vector<std::string> tasks;
    std::string task = cfg.task == "chess" ? "krk" : cfg.task;
    if (task == "trains")
        tasks = {"trains"};
    else if (task == "krk")
        tasks = {"krk"};
    else if (task == "both" || task == "custom")
        tasks = {"trains", "krk"};
    else
        throw crm::ConfigError("--task must be trains, krk, or both, got '" + cfg.task +
                               "'");

    Table t;
    t.header = {"Dataset", "CRM Pred.", "CRM Expl.", "Base Pred.", "Base Expl."};
    ordered_json j;
    j["command"] = "repro";
    j["seed"] = cfg.seed;
    j["rows"] = ordered_json::array();
    for (const std::string& name : tasks) {
        ReproRow row = repro_row(name, cfg);
        t.rows.push_back({row.dataset, fmt3(row.crm_pred), fmt3(row.crm_expl),
                          fmt3(row.base_pred), fmt3(row.base_expl)});
        j["rows"].push_back(row.detail);
    }
    t.print(std::cout);

    std::string out = cfg.out.empty() ? "repro.json" : cfg.out;
    write_text(out, j.dump(1) + "\n");
    std::cout << "report written to " << out << "\n";
    return 0;
}

// ---- wiring ------------------------------------------------------------------

void add_common(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--config", cfg.config, "key=value options file (flags override it)");
    sub->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    sub->add_option("--threads", cfg.threads, "worker threads for evaluation")
        ->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"compositional relational machines"};
    app.require_subcommand(1);

    RunConfig cfg;
    int rc = 0;
    auto bind = [&](CLI::App* sub, int (*fn)(const RunConfig&)) {
        sub->callback([&cfg, &rc, fn, sub] {
            if (!cfg.config.empty()) apply_config(sub, cfg);
            rc = fn(cfg);
        });
    };

    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic task");
    add_common(gen, cfg);
    gen->add_option("--task", cfg.task, "trains or krk");
    gen->add_option("--sample-size", cfg.sample_size,
                    "instances to generate (0 = task default)");
    gen->add_option("--out", cfg.out, "output directory")->capture_default_str();
    gen->add_option("--modes", cfg.modes, "modes file to write");
    gen->add_option("--facts", cfg.facts, "facts file to write");
    gen->add_option("--data", cfg.data, "dataset file to write");
    bind(gen, cmd_gen);

    CLI::App* mine = app.add_subcommand("mine", "mine simple feature-clauses");
    add_common(mine, cfg);
    mine->add_option("--modes", cfg.modes, "modes file");
    mine->add_option("--facts", cfg.facts, "facts file");
    mine->add_option("--data", cfg.data, "training dataset file");
    mine->add_option("--max-body", cfg.max_body, "max body literals")->capture_default_str();
    mine->add_option("--min-support", cfg.min_support, "min firing instances")
        ->capture_default_str();
    mine->add_option("--min-precision", cfg.min_precision, "min majority purity")
        ->capture_default_str();
    mine->add_option("--out", cfg.out, "clauses file to write (default mined.clauses)");
    bind(mine, cmd_mine);

    CLI::App* build = app.add_subcommand("build", "build an untrained model");
    add_common(build, cfg);
    build->add_option("--modes", cfg.modes, "modes file");
    build->add_option("--facts", cfg.facts, "facts file");
    build->add_option("--data", cfg.data, "training dataset file");
    build->add_option("--clauses", cfg.clauses, "mined clauses file (default mined.clauses)");
    build->add_option("--sample-size", cfg.sample_size, "clauses drawn per layer");
    build->add_option("--depth-rho2", cfg.depth_rho2, "body-conjunction layers")
        ->capture_default_str();
    build->add_option("--depth-rho1", cfg.depth_rho1, "equality layers")
        ->capture_default_str();
    build->add_option("--min-support", cfg.min_support, "composition filter support")
        ->capture_default_str();
    build->add_option("--min-precision", cfg.min_precision, "composition filter precision")
        ->capture_default_str();
    build->add_option("--ensemble", cfg.ensemble, "number of models to build")
        ->capture_default_str();
    build->add_option("--out", cfg.out, "model file to write (default model.json)");
    bind(build, cmd_build);

    CLI::App* train = app.add_subcommand("train", "train a model");
    add_common(train, cfg);
    train->add_option("--model", cfg.model, "untrained model file");
    train->add_option("--facts", cfg.facts, "facts file");
    train->add_option("--data", cfg.data, "training dataset file");
    train->add_option("--lr", cfg.lr, "learning rate")->capture_default_str();
    train->add_option("--epochs", cfg.epochs, "training epochs")->capture_default_str();
    train->add_option("--ensemble", cfg.ensemble, "number of models to train")
        ->capture_default_str();
    train->add_option("--out", cfg.out, "trained model file (default trained.json)");
    bind(train, cmd_train);

    CLI::App* eval = app.add_subcommand("eval", "evaluate fidelity");
    add_common(eval, cfg);
    eval->add_option("--model", cfg.model, "model file");
    eval->add_option("--facts", cfg.facts, "facts file");
    eval->add_option("--data", cfg.data, "evaluation dataset file");
    eval->add_option("--task", cfg.task, "trains or krk selects the acceptable theory")
        ->capture_default_str();
    eval->add_option("--ensemble", cfg.ensemble, "evaluate this many member files")
        ->capture_default_str();
    eval->add_option("--out", cfg.out, "JSON report file (default eval.json)");
    bind(eval, cmd_eval);

    CLI::App* explain = app.add_subcommand("explain", "explain one instance");
    add_common(explain, cfg);
    explain->add_option("--model", cfg.model, "model file");
    explain->add_option("--facts", cfg.facts, "facts file");
    explain->add_option("--data", cfg.data, "dataset file holding the instance");
    explain->add_option("--instance", cfg.instance, "instance identifier, e.g. t17");
    explain->add_option("--out", cfg.out,
                        "output path base; writes <out>.dot and <out>.json");
    bind(explain, cmd_explain);

    CLI::App* repro = app.add_subcommand("repro", "reproduce the fidelity table");
    add_common(repro, cfg);
    repro->add_option("--task", cfg.task, "trains, krk, or both")->capture_default_str();
    repro->add_option("--ensemble", cfg.ensemble, "models per dataset")
        ->capture_default_str();
    repro->add_option("--out", cfg.out, "JSON report file (default repro.json)");
    bind(repro, cmd_repro);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const crm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const crm::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const crm::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const crm::TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 3;
    }
    return rc;
}
